#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace clinbench::metrics {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  /// Starts at (0,0), ends at (1,1), nondecreasing in both coordinates.
  std::vector<RocPoint> points;
  double auc = 0.5;
};

/// ROC by a threshold sweep over the distinct scores. The AUC equals the
/// Mann-Whitney statistic P(s+ > s-) + P(s+ == s-)/2, computed from integer
/// pair counts. Throws UndefinedMetric when either class is absent.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Harrell's concordance index. Comparable pairs are (i, j) with E_i = 1 and
/// T_i < T_j; a pair is concordant when risk_i > risk_j and counts 1/2 on a
/// risk tie. O(n log n) via a Fenwick tree over risk ranks. Throws
/// UndefinedMetric when no pair is comparable.
double c_index(std::span<const double> risks, std::span<const double> times, std::span<const int> events);

/// Product-limit survival estimate. `times` holds the distinct event times;
/// survival[k] = S(times[k]) as a right-continuous step function with S(0) = 1.
struct KmCurve {
  std::vector<double> times;
  std::vector<double> survival;
  std::vector<std::size_t> at_risk;
  std::vector<std::size_t> events;
  std::size_t n = 0;

  double value_at(double t) const;
};

KmCurve km_curve(std::span<const double> times, std::span<const int> events);

}  // namespace clinbench::metrics
