#include "losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "common/error.hpp"

namespace clinbench::losses {

using numerics::Tensor;

void LossWeights::validate() const {
  require(!alpha.empty(), ErrorKind::Validation, "loss weights are empty");
  bool positive = false;
  for (double a : alpha) {
    require(std::isfinite(a) && a >= 0.0, ErrorKind::Validation, "loss weights must be finite and nonnegative");
    positive = positive || a > 0.0;
  }
  require(positive, ErrorKind::Validation, "at least one loss weight must be positive");
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  require(z.rank() == 2, ErrorKind::Dimension, "cross_entropy: logits must be [N,C], got " + numerics::to_string(z.shape()));
  const std::size_t n = z.dim(0), c = z.dim(1);
  require(labels.size() == n, ErrorKind::Contract,
          "cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
  for (int y : labels)
    require(y >= 0 && static_cast<std::size_t>(y) < c, ErrorKind::Label,
            "cross_entropy: label " + std::to_string(y) + " outside [0," + std::to_string(c) + ")");

  // Row-wise softmax kept for the backward pass.
  std::vector<double> prob(n * c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = z.data().data() + i * c;
    const double mx = *std::max_element(row, row + c);
    require(std::isfinite(mx), ErrorKind::Numeric, "cross_entropy: non-finite logits");
    double s = 0.0;
    for (std::size_t k = 0; k < c; ++k) s += std::exp(row[k] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t k = 0; k < c; ++k) prob[i * c + k] = std::exp(row[k] - lse);
    total += lse - row[labels[i]];
  }
  std::vector<int> y(labels.begin(), labels.end());
  return logits.tape().record(
      Tensor::scalar(total / static_cast<double>(n)), {logits},
      [prob = std::move(prob), y = std::move(y), n, c](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
        Tensor& dz = *gi[0];
        const double w = g.item() / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < c; ++k)
            dz[i * c + k] += w * (prob[i * c + k] - (static_cast<int>(k) == y[i] ? 1.0 : 0.0));
      });
}

Var coxph_loss(const Var& risks, std::span<const double> times, std::span<const int> events) {
  const Tensor& h = risks.value();
  require(h.rank() == 1 || (h.rank() == 2 && h.dim(1) == 1), ErrorKind::Dimension,
          "coxph_loss: risks must be [N] or [N,1], got " + numerics::to_string(h.shape()));
  const std::size_t n = h.size();
  require(times.size() == n && events.size() == n, ErrorKind::Contract,
          "coxph_loss: risks, times and events differ in length");
  std::size_t n_events = 0;
  for (std::size_t i = 0; i < n; ++i) {
    require(events[i] == 0 || events[i] == 1, ErrorKind::Label, "coxph_loss: events must be 0 or 1");
    require(std::isfinite(times[i]), ErrorKind::Numeric, "coxph_loss: non-finite time");
    require(std::isfinite(h[i]), ErrorKind::Numeric, "coxph_loss: non-finite risk");
    n_events += events[i];
  }
  require(n_events > 0, ErrorKind::NoEvents, "coxph_loss: batch has no events");

  // Latest time first, so each tie block's risk set is everything seen so far
  // plus the block itself. Sums are scaled by exp(-max h).
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });
  const double mx = *std::max_element(h.data().begin(), h.data().end());
  std::vector<double> e(n), risk_sum(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(h[i] - mx);

  double cum = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && times[order[j]] == times[order[i]]) cum += e[order[j++]];
    for (std::size_t g = i; g < j; ++g) {
      const std::size_t a = order[g];
      risk_sum[a] = cum;
      if (events[a] == 1) total += h[a] - (mx + std::log(cum));
    }
    i = j;
  }
  const double inv_events = 1.0 / static_cast<double>(n_events);
  std::vector<int> ev(events.begin(), events.end());
  return risks.tape().record(
      Tensor::scalar(-total * inv_events), {risks},
      [order = std::move(order), e = std::move(e), risk_sum = std::move(risk_sum), ev = std::move(ev),
       t = std::vector<double>(times.begin(), times.end()), inv_events,
       n](const Tensor& g, const Tensor&, std::span<Tensor* const> gi) {
        // dL/dh_k = -(1/Ne) [E_k - e_k * sum_{i event, T_i <= T_k} 1/S_i]
        Tensor& dh = *gi[0];
        const double w = g.item() * inv_events;
        double acc = 0.0;
        for (std::size_t i = n; i > 0;) {
          std::size_t j = i;
          while (j > 0 && t[order[j - 1]] == t[order[i - 1]]) {
            const std::size_t a = order[--j];
            if (ev[a] == 1) acc += 1.0 / risk_sum[a];
          }
          for (std::size_t k = j; k < i; ++k) {
            const std::size_t a = order[k];
            dh[a] += -w * (static_cast<double>(ev[a]) - e[a] * acc);
          }
          i = j;
        }
      });
}

Var omnivorous(const std::vector<Var>& losses, std::span<const double> alpha) {
  require(losses.size() == alpha.size(), ErrorKind::Contract,
          "omnivorous: " + std::to_string(losses.size()) + " losses for " + std::to_string(alpha.size()) + " weights");
  require(!losses.empty(), ErrorKind::Contract, "omnivorous: no losses");
  Var out;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    require(losses[i].value().size() == 1, ErrorKind::Dimension, "omnivorous: losses must be scalars");
    if (alpha[i] == 0.0) continue;
    const Var term = alpha[i] == 1.0 ? losses[i] : numerics::scale(losses[i], alpha[i]);
    out = out.valid() ? numerics::add(out, term) : term;
  }
  if (!out.valid()) out = losses.front().tape().constant(Tensor::scalar(0.0));
  return out;
}

}  // namespace clinbench::losses
