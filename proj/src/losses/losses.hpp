#pragma once

#include <span>
#include <vector>

#include "numerics/autograd.hpp"

namespace clinbench::losses {

using numerics::Var;

/// Per-task weights for the combined objective, in (BOR, OS, PFS) order by default.
struct LossWeights {
  std::vector<double> alpha{1.0, 1.0, 1.0};

  /// Nonnegative, finite, at least one positive.
  void validate() const;
};

/// Mean over records of -log softmax(logits)[label]. logits is [N,C].
Var cross_entropy(const Var& logits, std::span<const int> labels);

/// Breslow negative partial log-likelihood averaged over events. Risk sets
/// are closed ({j : T_j >= T_i}), so tied event times share one risk set.
/// risks is [N] or [N,1].
Var coxph_loss(const Var& risks, std::span<const double> times, std::span<const int> events);

/// sum_i alpha_i * l_i. Terms with alpha_i == 0 are left out entirely, so a
/// single-task weighting reduces to that task's loss exactly.
Var omnivorous(const std::vector<Var>& losses, std::span<const double> alpha);

}  // namespace clinbench::losses
