#pragma once

// Gradient checks shared by the unit tests and the acceptance run: every
// differentiable op, and the full multi-task loss through each architecture.

#include <cmath>
#include <string>
#include <vector>

#include "data/synthetic.hpp"
#include "losses/losses.hpp"
#include "model/model.hpp"
#include "support/gradcheck.hpp"

namespace clinbench::testing {

struct OpCase {
  std::string name;
  ScalarFn fn;
  std::vector<Tensor> inputs;
  double tolerance = 1e-4;
};

/// Weighted sum, so no op sees an all-ones upstream gradient.
inline Var weighted_sum(const Var& y) {
  Tensor weights(y.shape());
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = std::sin(1.0 + 0.37 * static_cast<double>(i));
  return numerics::sum(numerics::mul(y, y.tape().constant(weights)));
}

inline std::vector<OpCase> op_cases(std::uint64_t seed) {
  namespace nm = numerics;
  nm::CounterRng rng(seed);
  const Tensor a = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({4, 5}, rng);
  const Tensor w = random_tensor({5}, rng);
  const Tensor a2 = random_tensor({3, 4}, rng);
  using V = const std::vector<Var>&;
  std::vector<OpCase> cases;
  auto add = [&](std::string name, ScalarFn fn, std::vector<Tensor> in, double tol = 1e-4) {
    cases.push_back({std::move(name), std::move(fn), std::move(in), tol});
  };
  add("matmul", [](Tape&, V v) { return weighted_sum(nm::matmul(v[0], v[1])); }, {a, b}, 1e-6);
  add("affine", [](Tape&, V v) { return weighted_sum(nm::affine(v[0], v[1], v[2])); }, {a, b, w});
  add("add", [](Tape&, V v) { return weighted_sum(nm::add(v[0], v[1])); }, {a, a2});
  add("sub", [](Tape&, V v) { return weighted_sum(nm::sub(v[0], v[1])); }, {a, a2});
  add("mul", [](Tape&, V v) { return weighted_sum(nm::mul(v[0], v[1])); }, {a, a2});
  add("scale", [](Tape&, V v) { return weighted_sum(nm::scale(v[0], -1.7)); }, {a});
  add("add_bias", [](Tape&, V v) { return weighted_sum(nm::add_bias(v[0], v[1])); }, {random_tensor({2, 3, 5}, rng), w});
  add("gelu", [](Tape&, V v) { return weighted_sum(nm::gelu(v[0])); }, {a});
  add("exp", [](Tape&, V v) { return weighted_sum(nm::exp(v[0])); }, {a});
  add("log", [](Tape&, V v) { return weighted_sum(nm::log(nm::exp(v[0]))); }, {a});
  add("sigmoid", [](Tape&, V v) { return weighted_sum(nm::sigmoid(v[0])); }, {a});
  add("reshape", [](Tape&, V v) { return weighted_sum(nm::reshape(v[0], {2, 6})); }, {a});
  add("permute", [](Tape&, V v) { return weighted_sum(nm::permute(v[0], {2, 0, 1})); }, {random_tensor({2, 3, 4}, rng)});
  add("concat", [](Tape&, V v) { return weighted_sum(nm::concat({v[0], v[1]}, 1)); }, {a, random_tensor({3, 2}, rng)});
  add("slice", [](Tape&, V v) { return weighted_sum(nm::slice(v[0], 1, 1, 3)); }, {a});
  add("tile_leading", [](Tape&, V v) { return weighted_sum(nm::tile_leading(v[0], 3)); }, {random_tensor({1, 2, 3}, rng)});
  add("mean_axis", [](Tape&, V v) { return weighted_sum(nm::mean_axis(v[0], 1)); }, {random_tensor({2, 3, 4}, rng)});
  add("mean", [](Tape&, V v) { return nm::mean(nm::mul(v[0], v[0])); }, {a});
  add("softmax", [](Tape&, V v) { return weighted_sum(nm::softmax(v[0], 1)); }, {random_tensor({2, 5, 3}, rng)});
  add("layer_norm", [](Tape&, V v) { return weighted_sum(nm::layer_norm(v[0], v[1], v[2], 1e-5)); },
      {random_tensor({6, 5}, rng), random_tensor({5}, rng), random_tensor({5}, rng)}, 1e-5);
  add("bmm", [](Tape&, V v) { return weighted_sum(nm::bmm(v[0], v[1], false, false)); },
      {random_tensor({2, 3, 4}, rng), random_tensor({2, 4, 5}, rng)});
  add("bmm_bt", [](Tape&, V v) { return weighted_sum(nm::bmm(v[0], v[1], false, true)); },
      {random_tensor({2, 3, 4}, rng), random_tensor({2, 5, 4}, rng)});
  add("bmm_at", [](Tape&, V v) { return weighted_sum(nm::bmm(v[0], v[1], true, false)); },
      {random_tensor({2, 4, 3}, rng), random_tensor({2, 4, 5}, rng)});
  add("bmm_at_bt", [](Tape&, V v) { return weighted_sum(nm::bmm(v[0], v[1], true, true)); },
      {random_tensor({2, 4, 3}, rng), random_tensor({2, 5, 4}, rng)});
  add("embedding_lookup",
      [](Tape&, V v) { return weighted_sum(nm::embedding_lookup(v[0], std::vector<std::int64_t>{2, 0, 2, 1})); },
      {random_tensor({3, 4}, rng)}, 1e-6);
  // Dropout with a fixed stream: the mask is a constant of the function.
  add("dropout",
      [seed](Tape&, V v) {
        nm::CounterRng r(seed);
        return weighted_sum(nm::dropout(v[0], 0.3, nm::Mode::Train, r));
      },
      {a});
  // Losses, with ties and censoring in the survival data.
  const std::vector<int> labels{1, 0, 1};
  add("cross_entropy", [labels](Tape&, V v) { return losses::cross_entropy(v[0], labels); },
      {random_tensor({3, 2}, rng)});
  const std::vector<double> times{3, 1, 3, 5, 2, 2};
  const std::vector<int> events{1, 0, 1, 1, 0, 1};
  add("coxph", [times, events](Tape&, V v) { return losses::coxph_loss(v[0], times, events); },
      {random_tensor({6}, rng)});
  add("omnivorous",
      [labels, times, events](Tape&, V v) {
        return losses::omnivorous({losses::cross_entropy(v[0], labels), losses::coxph_loss(v[1], times, events)},
                                  std::vector<double>{0.7, 1.3});
      },
      {random_tensor({3, 2}, rng), random_tensor({6}, rng)});
  return cases;
}

/// Finite-difference check of the summed BOR + OS + PFS loss with respect to
/// every parameter tensor (up to `max_coords` coordinates each), with dropout
/// active under a fixed stream.
inline GradCheckResult model_gradcheck(model::Architecture arch, std::optional<model::Pooling> pooling,
                                       std::uint64_t seed, std::size_t max_coords = 12) {
  using namespace model;
  data::SyntheticConfig sc;
  sc.n = 8;
  sc.cat_cardinalities = {3, 2};
  sc.n_continuous = 2;
  sc.seed = 17 + seed;
  sc.subgroup_feature = std::nullopt;
  const auto syn = data::gen_synthetic(sc);
  const auto schema = data::fit_schema(syn.table, syn.schema);
  const auto cohort = data::load_cohort(syn.table, schema);

  ModelConfig c;
  c.architecture = arch;
  c.dim = 8;
  c.layers = 2;
  c.heads = 2;
  c.ff_dim = 16;
  c.pooling = pooling;
  c.attention_dropout = 0.2;
  c.ff_dropout = 0.1;
  c.init_seed = 11 + seed;
  if (c.is_llm()) c.embedding_dim = 12;
  Model m = Model::build(c, schema);
  // Larger weights than the default init so every block carries gradient.
  numerics::CounterRng perturb(1000 + seed);
  for (auto& p : m.parameters())
    for (double& v : p.value.data()) v += 0.3 * perturb.normal();

  Batch b = make_batch(cohort, schema);
  if (c.is_llm()) {
    b.embedding_tokens = arch == Architecture::LlmLinear ? 1 : schema.feature_count();
    b.embedding_dim = c.embedding_dim;
    numerics::CounterRng er(5 + seed);
    b.embeddings.resize(b.size * b.embedding_tokens * b.embedding_dim);
    for (double& v : b.embeddings) v = er.normal();
  }
  std::vector<int> bor, oe, pe;
  std::vector<double> ot, pt;
  for (const auto& r : cohort.records()) {
    bor.push_back(r.bor);
    ot.push_back(r.os_time);
    oe.push_back(r.os_event);
    pt.push_back(r.pfs_time);
    pe.push_back(r.pfs_event);
  }
  oe[0] = pe[0] = 1;
  if (std::count(bor.begin(), bor.end(), 1) == 0) bor[0] = 1;

  std::vector<Tensor> inputs;
  for (const auto& p : m.parameters()) inputs.push_back(p.value);
  const auto fn = [&](Tape&, const std::vector<Var>& bound) {
    numerics::CounterRng rng(123 + seed);
    const HeadOutputs h = m.forward(bound.front().tape(), bound, b, Mode::Train, rng);
    return losses::omnivorous({losses::cross_entropy(h.bor_logits(), bor), losses::coxph_loss(h.risk_os(), ot, oe),
                               losses::coxph_loss(h.risk_pfs(), pt, pe)},
                              std::vector<double>{1.0, 1.0, 1.0});
  };
  return gradcheck(fn, inputs, 1e-5, max_coords);
}

}  // namespace clinbench::testing
