#pragma once

#include <optional>
#include <string>
#include <vector>

#include "data/cohort.hpp"
#include "json.hpp"
#include "metrics/metrics.hpp"

namespace clinbench::metrics {

/// Per-record model outputs in cohort order.
struct Predictions {
  std::vector<double> responder_prob;
  std::vector<double> risk_os;
  std::vector<double> risk_pfs;

  std::size_t size() const noexcept { return responder_prob.size(); }
  Predictions subset(const std::vector<std::size_t>& indices) const;
};

/// A metric that may be undefined on a group (reported as null with a reason).
struct MetricValue {
  std::optional<double> value;
  std::string error;
};

/// KM curves for predicted responder / non-responder groups, with the
/// observed-label groups as ground truth. Empty groups have no curve.
struct KmSet {
  std::optional<KmCurve> predicted_responders;
  std::optional<KmCurve> predicted_nonresponders;
  std::optional<KmCurve> observed_responders;
  std::optional<KmCurve> observed_nonresponders;
};

struct GroupReport {
  std::string name;
  std::size_t n = 0;
  MetricValue auc;
  std::optional<RocCurve> roc;
  MetricValue c_os;
  MetricValue c_pfs;
  KmSet km_os;
  KmSet km_pfs;
};

struct ReportOptions {
  double responder_threshold = 0.5;
  bool per_subgroup = true;
};

struct MetricsReport {
  double responder_threshold = 0.5;
  GroupReport overall;
  std::vector<GroupReport> subgroups;
};

/// AUC from responder probability, C-index from the two risk heads, KM
/// curves split at the responder threshold; overall and per subgroup. An
/// undefined metric on a group becomes a null entry, never an abort.
MetricsReport evaluate_report(const Predictions& predictions, const data::Cohort& cohort,
                              const ReportOptions& options = {});

nlohmann::json to_json(const RocCurve& roc);
nlohmann::json to_json(const KmCurve& km);
nlohmann::json to_json(const MetricValue& m);
nlohmann::json to_json(const GroupReport& g);
nlohmann::json to_json(const MetricsReport& r);

}  // namespace clinbench::metrics
