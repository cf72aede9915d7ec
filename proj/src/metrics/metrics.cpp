#include "metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "common/error.hpp"

namespace clinbench::metrics {

namespace {

void check_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) require(std::isfinite(x), ErrorKind::Numeric, std::string("non-finite ") + what);
}

/// Counts of inserted items per rank, with prefix queries.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t rank) {
    for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }
  /// Items with rank < `rank`.
  std::int64_t below(std::size_t rank) const {
    std::int64_t s = 0;
    for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<std::int64_t> tree_;
};

}  // namespace

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorKind::Contract, "roc_auc: scores and labels differ in length");
  check_finite(scores, "score");
  std::int64_t n_pos = 0, n_neg = 0;
  for (int y : labels) {
    require(y == 0 || y == 1, ErrorKind::Label, "roc_auc: labels must be 0 or 1");
    (y == 1 ? n_pos : n_neg)++;
  }
  require(n_pos > 0 && n_neg > 0, ErrorKind::UndefinedMetric, "AUC needs both classes present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0});
  std::int64_t tp = 0, fp = 0, area2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::int64_t gp = 0, gn = 0;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? gp : gn)++;
    // Trapezoid over a tie block, doubled to stay integral.
    area2 += gn * (2 * tp + gp);
    tp += gp;
    fp += gn;
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                          static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  roc.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return roc;
}

double c_index(std::span<const double> risks, std::span<const double> times, std::span<const int> events) {
  require(risks.size() == times.size() && times.size() == events.size(), ErrorKind::Contract,
          "c_index: input lengths differ");
  check_finite(risks, "risk");
  check_finite(times, "time");
  const std::size_t n = risks.size();

  std::vector<double> sorted_risks(risks.begin(), risks.end());
  std::sort(sorted_risks.begin(), sorted_risks.end());
  sorted_risks.erase(std::unique(sorted_risks.begin(), sorted_risks.end()), sorted_risks.end());
  auto rank_of = [&](double r) {
    return static_cast<std::size_t>(std::lower_bound(sorted_risks.begin(), sorted_risks.end(), r) - sorted_risks.begin());
  };

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });

  Fenwick later(sorted_risks.size());
  std::int64_t inserted = 0, comparable = 0, concordant2 = 0;
  for (std::size_t i = 0; i < n;) {
    const double t = times[order[i]];
    std::size_t j = i;
    while (j < n && times[order[j]] == t) ++j;
    // Everything already inserted has a strictly later time.
    for (std::size_t g = i; g < j; ++g) {
      const std::size_t a = order[g];
      if (events[a] != 1) continue;
      const std::size_t rank = rank_of(risks[a]);
      const std::int64_t lower = later.below(rank);
      const std::int64_t tied = later.below(rank + 1) - lower;
      comparable += inserted;
      concordant2 += 2 * lower + tied;
    }
    for (std::size_t g = i; g < j; ++g) {
      later.add(rank_of(risks[order[g]]));
      ++inserted;
    }
    i = j;
  }
  require(comparable > 0, ErrorKind::UndefinedMetric, "C-index has no comparable pairs");
  return static_cast<double>(concordant2) / (2.0 * static_cast<double>(comparable));
}

double KmCurve::value_at(double t) const {
  double s = 1.0;
  for (std::size_t k = 0; k < times.size() && times[k] <= t; ++k) s = survival[k];
  return s;
}

KmCurve km_curve(std::span<const double> times, std::span<const int> events) {
  require(times.size() == events.size(), ErrorKind::Contract, "km_curve: input lengths differ");
  check_finite(times, "time");
  KmCurve km;
  km.n = times.size();
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  double s = 1.0;
  std::size_t at_risk = times.size();
  for (std::size_t i = 0; i < order.size();) {
    const double t = times[order[i]];
    std::size_t d = 0, total = 0;
    for (; i < order.size() && times[order[i]] == t; ++i, ++total) d += events[order[i]] == 1 ? 1 : 0;
    if (d > 0) {
      s *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      km.times.push_back(t);
      km.survival.push_back(s);
      km.at_risk.push_back(at_risk);
      km.events.push_back(d);
    }
    at_risk -= total;
  }
  return km;
}

}  // namespace clinbench::metrics
