#include "training/train.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "common/error.hpp"
#include "losses/losses.hpp"

namespace clinbench::training {

using nlohmann::json;
using numerics::CounterRng;
using numerics::Tensor;

namespace {
constexpr std::size_t kFullBatchLimit = 2048;
constexpr std::size_t kLargeCohortBatch = 256;
constexpr int kReshuffleAttempts = 20;
}  // namespace

TrainConfig TrainConfig::defaults_for(model::Architecture architecture) {
  TrainConfig c;
  if (architecture == model::Architecture::LlmLinear || architecture == model::Architecture::LlmTransformer)
    c.base_lr = 1.25e-5;
  return c;
}

std::size_t TrainConfig::resolved_batch(std::size_t n) const {
  if (batch_size > 0) return std::min(batch_size, n);
  return n <= kFullBatchLimit ? n : kLargeCohortBatch;
}

void TrainConfig::validate() const {
  require(base_lr > 0 && warmup_lr > 0 && std::isfinite(base_lr) && std::isfinite(warmup_lr), ErrorKind::Validation,
          "learning rates must be positive");
  require(weight_decay >= 0 && std::isfinite(weight_decay), ErrorKind::Validation, "weight decay must be nonnegative");
  require(warmup_epochs >= 0 && warmup_epochs < total_epochs && total_epochs >= 1, ErrorKind::Validation,
          "warmup epochs must be below total epochs");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0, ErrorKind::Validation,
          "invalid AdamW moment parameters");
  require(alpha.size() == 3, ErrorKind::Validation, "alpha needs three weights (bor, os, pfs)");
  bool positive = false;
  for (double a : alpha) {
    require(std::isfinite(a) && a >= 0, ErrorKind::Validation, "alpha weights must be finite and nonnegative");
    positive = positive || a > 0;
  }
  require(positive, ErrorKind::Validation, "at least one alpha weight must be positive");
}

json TrainConfig::to_json() const {
  return {{"base_lr", base_lr},       {"warmup_lr", warmup_lr},   {"weight_decay", weight_decay},
          {"warmup_epochs", warmup_epochs}, {"total_epochs", total_epochs}, {"batch_size", batch_size},
          {"alpha", alpha},           {"seed", seed},             {"beta1", beta1},
          {"beta2", beta2},           {"eps", eps}};
}

TrainConfig TrainConfig::from_json(const json& doc, TrainConfig c) {
  require(doc.is_object(), ErrorKind::Validation, "training config must be a JSON object");
  try {
    c.base_lr = doc.value("base_lr", c.base_lr);
    c.warmup_lr = doc.value("warmup_lr", c.warmup_lr);
    c.weight_decay = doc.value("weight_decay", c.weight_decay);
    c.warmup_epochs = doc.value("warmup_epochs", c.warmup_epochs);
    c.total_epochs = doc.value("total_epochs", c.total_epochs);
    c.batch_size = doc.value("batch_size", c.batch_size);
    c.alpha = doc.value("alpha", c.alpha);
    c.seed = doc.value("seed", c.seed);
    c.beta1 = doc.value("beta1", c.beta1);
    c.beta2 = doc.value("beta2", c.beta2);
    c.eps = doc.value("eps", c.eps);
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::from_json(const json& doc) { return from_json(doc, TrainConfig{}); }

double lr_at(double epoch, const TrainConfig& c) {
  require(epoch >= 0 && epoch <= c.total_epochs, ErrorKind::Contract,
          "lr_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(c.total_epochs) + "]");
  if (epoch < c.warmup_epochs) return c.warmup_lr + (c.base_lr - c.warmup_lr) * (epoch / c.warmup_epochs);
  const double progress = (epoch - c.warmup_epochs) / (c.total_epochs - c.warmup_epochs);
  return std::max(0.0, 0.5 * c.base_lr * (1.0 + std::cos(std::numbers::pi * progress)));
}

void adamw_step(std::vector<model::NamedTensor>& params, const std::vector<Tensor>& grads, AdamState& state, double lr,
                const TrainConfig& c) {
  require(grads.size() == params.size(), ErrorKind::Contract, "adamw_step: gradient count differs from parameters");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Tensor::zeros(p.value.shape()));
      state.v.push_back(Tensor::zeros(p.value.shape()));
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    require(grads[k].shape() == params[k].value.shape(), ErrorKind::Dimension,
            "adamw_step: gradient shape mismatch for " + params[k].name);
    for (double g : grads[k].data())
      require(std::isfinite(g), ErrorKind::Numeric, "non-finite gradient in " + params[k].name);
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].value.data();
    auto m = state.m[k].data();
    auto v = state.v[k].data();
    const auto g = grads[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * (mhat / (std::sqrt(vhat) + c.eps) + c.weight_decay * p[i]);
    }
  }
}

Targets Targets::rows(std::span<const std::size_t> idx) const {
  Targets t;
  for (std::size_t i : idx) {
    t.bor.push_back(bor.at(i));
    t.os_time.push_back(os_time.at(i));
    t.os_event.push_back(os_event.at(i));
    t.pfs_time.push_back(pfs_time.at(i));
    t.pfs_event.push_back(pfs_event.at(i));
  }
  return t;
}

Targets make_targets(const data::Cohort& cohort) {
  Targets t;
  for (const auto& r : cohort.records()) {
    t.bor.push_back(r.bor);
    t.os_time.push_back(r.os_time);
    t.os_event.push_back(r.os_event);
    t.pfs_time.push_back(r.pfs_time);
    t.pfs_event.push_back(r.pfs_event);
  }
  return t;
}

json History::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json rows = json::array();
  for (const auto& e : epochs)
    rows.push_back({{"epoch", e.epoch},
                    {"lr", e.lr},
                    {"loss_bor", num(e.loss_bor)},
                    {"loss_os", num(e.loss_os)},
                    {"loss_pfs", num(e.loss_pfs)},
                    {"loss_total", num(e.loss_total)}});
  return {{"alpha", alpha}, {"warnings", warnings}, {"epochs", rows}};
}

namespace {

bool has_event(const std::vector<int>& events, std::span<const std::size_t> idx) {
  for (std::size_t i : idx)
    if (events[i] == 1) return true;
  return false;
}

/// Minibatch index lists for one epoch. Reshuffles until every batch has an
/// event for each active survival task, giving up after a fixed number of tries.
std::vector<std::vector<std::size_t>> plan_batches(const Targets& t, std::size_t batch, const std::vector<double>& alpha,
                                                   CounterRng rng) {
  const std::size_t n = t.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (batch >= n) return {order};
  std::vector<std::vector<std::size_t>> batches;
  for (int attempt = 0; attempt < kReshuffleAttempts; ++attempt) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    batches.clear();
    bool ok = true;
    for (std::size_t s = 0; s < n; s += batch) {
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                           order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + batch)));
      const auto& b = batches.back();
      if ((alpha[1] > 0 && !has_event(t.os_event, b)) || (alpha[2] > 0 && !has_event(t.pfs_event, b))) ok = false;
    }
    if (ok) break;
  }
  return batches;
}

}  // namespace

History train(model::Model& model, const model::Batch& inputs, const Targets& targets, const TrainConfig& config,
              const EpochCallback& on_epoch) {
  config.validate();
  const std::size_t n = targets.size();
  require(n > 0 && inputs.size == n, ErrorKind::Contract, "train: inputs and targets differ in size");
  History h;
  h.alpha = config.alpha;
  const std::vector<std::size_t> all_idx = [&] {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
  }();
  if (h.alpha[1] > 0 && !has_event(targets.os_event, all_idx)) {
    h.alpha[1] = 0;
    h.warnings.push_back("no OS events in the training cohort; OS loss weight set to 0");
  }
  if (h.alpha[2] > 0 && !has_event(targets.pfs_event, all_idx)) {
    h.alpha[2] = 0;
    h.warnings.push_back("no PFS events in the training cohort; PFS loss weight set to 0");
  }
  require(h.alpha[0] > 0 || h.alpha[1] > 0 || h.alpha[2] > 0, ErrorKind::Fit, "no trainable task remains");

  const std::size_t batch = config.resolved_batch(n);
  const CounterRng root(config.seed);
  AdamState state;
  for (std::size_t epoch = 0; epoch < config.epochs(); ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_at(static_cast<double>(epoch), config);
    const std::vector<model::NamedTensor> snapshot = model.parameters();
    const auto batches = plan_batches(targets, batch, h.alpha, root.fork(1).fork(epoch));
    double sums[4] = {0, 0, 0, 0};
    std::size_t counts[4] = {0, 0, 0, 0};
    const auto diverged = [&](const std::string& why) {
      model.parameters() = snapshot;
      fail(ErrorKind::Divergence, "training diverged at epoch " + std::to_string(epoch) + " (" + why +
                                      "); parameters restored to " +
                                      (epoch ? "the end of epoch " + std::to_string(epoch - 1) : std::string("initialisation")));
    };
    for (std::size_t s = 0; s < batches.size(); ++s) try {
      const bool full = batches[s].size() == n;
      const model::Batch sub = full ? inputs : inputs.rows(batches[s]);
      const Targets tg = full ? targets : targets.rows(batches[s]);
      model::Tape tape;
      const auto bound = model.bind(tape);
      CounterRng rng = root.fork(2).fork(epoch).fork(s);
      const model::HeadOutputs out = model.forward(tape, bound, sub, model::Mode::Train, rng);

      std::vector<model::Var> parts;
      std::vector<double> weights;
      std::vector<int> task;
      if (h.alpha[0] > 0) {
        parts.push_back(losses::cross_entropy(out.bor_logits(), tg.bor));
        weights.push_back(h.alpha[0]);
        task.push_back(0);
      }
      const std::vector<std::size_t> local = [&] {
        std::vector<std::size_t> v(tg.size());
        std::iota(v.begin(), v.end(), 0);
        return v;
      }();
      if (h.alpha[1] > 0 && has_event(tg.os_event, local)) {
        parts.push_back(losses::coxph_loss(out.risk_os(), tg.os_time, tg.os_event));
        weights.push_back(h.alpha[1]);
        task.push_back(1);
      }
      if (h.alpha[2] > 0 && has_event(tg.pfs_event, local)) {
        parts.push_back(losses::coxph_loss(out.risk_pfs(), tg.pfs_time, tg.pfs_event));
        weights.push_back(h.alpha[2]);
        task.push_back(2);
      }
      if (parts.empty()) continue;
      const model::Var loss = losses::omnivorous(parts, weights);
      if (!std::isfinite(loss.value().item())) diverged("non-finite loss");
      for (std::size_t k = 0; k < parts.size(); ++k) {
        sums[task[k]] += parts[k].value().item();
        ++counts[task[k]];
      }
      sums[3] += loss.value().item();
      ++counts[3];
      tape.backward(loss);
      std::vector<Tensor> grads;
      grads.reserve(bound.size());
      for (const auto& b : bound) grads.push_back(tape.grad(b));
      adamw_step(model.parameters(), grads, state, rec.lr, config);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numeric) throw;
      diverged(e.what());
    }
    auto mean = [&](int k) { return counts[k] ? sums[k] / static_cast<double>(counts[k]) : std::numeric_limits<double>::quiet_NaN(); };
    rec.loss_bor = mean(0);
    rec.loss_os = mean(1);
    rec.loss_pfs = mean(2);
    rec.loss_total = mean(3);
    h.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return h;
}

}  // namespace clinbench::training
