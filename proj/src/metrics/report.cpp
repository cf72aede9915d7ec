#include "metrics/report.hpp"

#include "common/error.hpp"

namespace clinbench::metrics {

using nlohmann::json;

Predictions Predictions::subset(const std::vector<std::size_t>& indices) const {
  Predictions p;
  for (std::size_t i : indices) {
    p.responder_prob.push_back(responder_prob.at(i));
    p.risk_os.push_back(risk_os.at(i));
    p.risk_pfs.push_back(risk_pfs.at(i));
  }
  return p;
}

namespace {

template <class F>
MetricValue guarded(F&& f) {
  MetricValue m;
  try {
    m.value = f();
  } catch (const Error& e) {
    m.error = e.what();
  }
  return m;
}

KmSet km_groups(const data::Cohort& cohort, const std::vector<double>& prob, double threshold, bool os) {
  std::vector<double> t[4];
  std::vector<int> e[4];
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& r = cohort[i];
    const double time = os ? r.os_time : r.pfs_time;
    const int event = os ? r.os_event : r.pfs_event;
    const int pred = prob[i] >= threshold ? 0 : 1;
    const int obs = r.bor == 1 ? 2 : 3;
    for (int g : {pred, obs}) {
      t[g].push_back(time);
      e[g].push_back(event);
    }
  }
  KmSet set;
  std::optional<KmCurve>* slots[4] = {&set.predicted_responders, &set.predicted_nonresponders,
                                      &set.observed_responders, &set.observed_nonresponders};
  for (int g = 0; g < 4; ++g)
    if (!t[g].empty()) *slots[g] = km_curve(t[g], e[g]);
  return set;
}

GroupReport evaluate_group(const std::string& name, const Predictions& p, const data::Cohort& cohort, double threshold) {
  GroupReport g;
  g.name = name;
  g.n = cohort.size();
  std::vector<int> bor;
  std::vector<double> os_t, pfs_t;
  std::vector<int> os_e, pfs_e;
  for (const auto& r : cohort.records()) {
    bor.push_back(r.bor);
    os_t.push_back(r.os_time);
    os_e.push_back(r.os_event);
    pfs_t.push_back(r.pfs_time);
    pfs_e.push_back(r.pfs_event);
  }
  if (cohort.empty()) {
    g.auc.error = g.c_os.error = g.c_pfs.error = "empty group";
    return g;
  }
  try {
    g.roc = roc_auc(p.responder_prob, bor);
    g.auc.value = g.roc->auc;
  } catch (const Error& e) {
    g.auc.error = e.what();
  }
  g.c_os = guarded([&] { return c_index(p.risk_os, os_t, os_e); });
  g.c_pfs = guarded([&] { return c_index(p.risk_pfs, pfs_t, pfs_e); });
  g.km_os = km_groups(cohort, p.responder_prob, threshold, true);
  g.km_pfs = km_groups(cohort, p.responder_prob, threshold, false);
  return g;
}

json km_set_json(const KmSet& s) {
  auto opt = [](const std::optional<KmCurve>& c) { return c ? to_json(*c) : json(nullptr); };
  return {{"predicted_responders", opt(s.predicted_responders)},
          {"predicted_nonresponders", opt(s.predicted_nonresponders)},
          {"observed_responders", opt(s.observed_responders)},
          {"observed_nonresponders", opt(s.observed_nonresponders)}};
}

}  // namespace

MetricsReport evaluate_report(const Predictions& predictions, const data::Cohort& cohort, const ReportOptions& options) {
  require(predictions.size() == cohort.size() && predictions.risk_os.size() == cohort.size() &&
              predictions.risk_pfs.size() == cohort.size(),
          ErrorKind::Contract, "predictions do not match the cohort size");
  MetricsReport report;
  report.responder_threshold = options.responder_threshold;
  report.overall = evaluate_group("overall", predictions, cohort, options.responder_threshold);
  if (options.per_subgroup) {
    for (const std::string& sg : cohort.subgroups()) {
      const auto idx = cohort.indices_of_subgroup(sg);
      report.subgroups.push_back(
          evaluate_group(sg, predictions.subset(idx), cohort.subset(idx), options.responder_threshold));
    }
  }
  return report;
}

json to_json(const RocCurve& roc) {
  json fpr = json::array(), tpr = json::array();
  for (const auto& p : roc.points) {
    fpr.push_back(p.fpr);
    tpr.push_back(p.tpr);
  }
  return {{"auc", roc.auc}, {"fpr", fpr}, {"tpr", tpr}};
}

json to_json(const KmCurve& km) {
  return {{"n", km.n}, {"times", km.times}, {"survival", km.survival}, {"at_risk", km.at_risk}, {"events", km.events}};
}

json to_json(const MetricValue& m) {
  if (m.value) return *m.value;
  return nullptr;
}

json to_json(const GroupReport& g) {
  json errors = json::object();
  if (!g.auc.value) errors["auc"] = g.auc.error;
  if (!g.c_os.value) errors["c_os"] = g.c_os.error;
  if (!g.c_pfs.value) errors["c_pfs"] = g.c_pfs.error;
  return {{"name", g.name},
          {"n", g.n},
          {"auc", to_json(g.auc)},
          {"c_os", to_json(g.c_os)},
          {"c_pfs", to_json(g.c_pfs)},
          {"errors", errors},
          {"roc", g.roc ? to_json(*g.roc) : json(nullptr)},
          {"km_os", km_set_json(g.km_os)},
          {"km_pfs", km_set_json(g.km_pfs)}};
}

json to_json(const MetricsReport& r) {
  json subs = json::array();
  for (const auto& g : r.subgroups) subs.push_back(to_json(g));
  return {{"responder_threshold", r.responder_threshold}, {"overall", to_json(r.overall)}, {"subgroups", subs}};
}

}  // namespace clinbench::metrics
