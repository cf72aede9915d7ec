#include "bench/bench.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <numeric>
#include <thread>

#include "baselines/logres.hpp"
#include "common/error.hpp"
#include "data/csv.hpp"

namespace clinbench::bench {

using nlohmann::json;

json BenchModel::to_json() const {
  json j = {{"name", name}, {"kind", kind == ModelKind::Neural ? "neural" : "logres"}};
  if (kind == ModelKind::Neural) {
    j["model"] = model.to_json();
    j["training"] = train.to_json();
  } else {
    j["l2_grid"] = baselines::kDefaultL2Grid;
  }
  return j;
}

metrics::Predictions to_predictions(const model::Prediction& p) {
  return {p.responder_prob, p.risk_os, p.risk_pfs};
}

const CellOutcome& BenchResult::cell(std::size_t m, std::size_t k, std::size_t s) const {
  return cells.at((m * ks.size() + k) * seeds.size() + s);
}

bool BenchResult::partial() const {
  for (const auto& c : cells) {
    if (!c.report) return true;
    const auto& o = c.report->overall;
    if (!o.auc.value || !o.c_os.value || !o.c_pfs.value) return true;
  }
  return false;
}

namespace {

std::vector<std::size_t> training_indices(const data::Cohort& train, const std::optional<std::size_t>& k,
                                          std::uint64_t seed, const data::FewShotSpec& spec) {
  std::vector<std::size_t> pool(train.size());
  std::iota(pool.begin(), pool.end(), 0);
  if (spec.subgroup_pool) {
    pool = train.indices_of_subgroup(*spec.subgroup_pool);
    require(!pool.empty(), ErrorKind::Sampling, "no training records in subgroup '" + *spec.subgroup_pool + "'");
  }
  if (!k) return pool;
  const data::Cohort source = spec.subgroup_pool ? train.subset(pool) : train;
  std::vector<std::size_t> picked = data::sample_fewshot(source, *k, seed, spec.stratify);
  for (std::size_t& i : picked) i = pool[i];
  return picked;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

CellOutcome run_cell(const BenchModel& m, const data::Cohort& train, const data::Cohort& test,
                     const data::CohortSchema& schema, const std::optional<std::size_t>& k, std::uint64_t seed,
                     const data::FewShotSpec& spec) {
  CellOutcome out;
  out.model = m.name;
  out.k = data::k_label(k);
  out.seed = seed;
  try {
    const std::vector<std::size_t> idx = training_indices(train, k, seed, spec);
    const data::Cohort sub = train.subset(idx);
    metrics::Predictions pred;
    if (m.kind == ModelKind::LogRes) {
      const auto fit = baselines::lr_fit_grid(sub, schema, seed);
      pred = baselines::lr_predictions(fit.model, test, schema);
      out.fit = {{"l2", fit.model.l2}, {"validation_nll", fit.validation_nll}};
    } else {
      model::ModelConfig mc = m.model;
      mc.init_seed = seed;
      training::TrainConfig tc = m.train;
      tc.seed = seed;
      model::Model net = model::Model::build(mc, schema);
      const model::Batch inputs = m.train_inputs ? m.train_inputs->rows(idx) : model::make_batch(sub, schema);
      const training::History h = training::train(net, inputs, training::make_targets(sub), tc);
      out.warnings = h.warnings;
      pred = to_predictions(net.predict(m.test_inputs ? *m.test_inputs : model::make_batch(test, schema)));
    }
    out.report = metrics::evaluate_report(pred, test);
  } catch (const Error& e) {
    out.error = e.what();
  }
  return out;
}

BenchResult run_fewshot(const std::vector<BenchModel>& models, const data::Cohort& train, const data::Cohort& test,
                        const data::CohortSchema& schema, const data::FewShotSpec& spec, const BenchOptions& options) {
  spec.validate();
  require(!models.empty(), ErrorKind::Validation, "no models to benchmark");
  require(!test.empty(), ErrorKind::Validation, "empty test cohort");
  for (const auto& m : models)
    require(!m.model.is_llm() || m.kind != ModelKind::Neural || (m.train_inputs && m.test_inputs), ErrorKind::Contract,
            "model '" + m.name + "' needs precomputed embedding inputs");

  BenchResult r;
  for (const auto& m : models) r.models.push_back(m.name);
  for (const auto& k : spec.ks) r.ks.push_back(data::k_label(k));
  r.seeds = spec.seeds;
  const std::string started = options.timestamps ? utc_now() : "";

  const std::size_t total = models.size() * spec.ks.size() * spec.seeds.size();
  r.cells.resize(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const std::size_t s = i % spec.seeds.size();
      const std::size_t k = (i / spec.seeds.size()) % spec.ks.size();
      const std::size_t m = i / (spec.seeds.size() * spec.ks.size());
      r.cells[i] = run_cell(models[m], train, test, schema, spec.ks[k], spec.seeds[s], spec);
      if (options.on_cell) options.on_cell(r.cells[i]);
    }
  };
  const std::size_t width = std::max<std::size_t>(1, std::min(options.jobs, total));
  if (width == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
  }

  json models_meta = json::array();
  for (const auto& m : models) models_meta.push_back(m.to_json());
  r.meta = {{"generator", "clinbench"},
            {"format_version", 1},
            {"models", models_meta},
            {"ks", r.ks},
            {"seeds", r.seeds},
            {"stratify", spec.stratify},
            {"subgroup_pool", spec.subgroup_pool ? json(*spec.subgroup_pool) : json(nullptr)},
            {"schema_hash", schema.hash()},
            {"n_train", train.size()},
            {"n_test", test.size()},
            {"responder_threshold", metrics::ReportOptions{}.responder_threshold}};
  if (options.timestamps) r.meta["timestamps"] = {{"started", started}, {"finished", utc_now()}};
  return r;
}

namespace {

const metrics::MetricValue& pick(const metrics::GroupReport& g, const std::string& metric) {
  if (metric == "auc") return g.auc;
  if (metric == "c_os") return g.c_os;
  return g.c_pfs;
}

json mean_of(const json& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values)
    if (v.is_number()) {
      sum += v.get<double>();
      ++n;
    }
  return n ? json(sum / static_cast<double>(n)) : json(nullptr);
}

json table_json(const BenchResult& r, const std::string& metric) {
  json rows = json::array();
  for (std::size_t m = 0; m < r.models.size(); ++m) {
    json cells = json::array();
    for (std::size_t k = 0; k < r.ks.size(); ++k) {
      json values = json::array(), errors = json::object(), subgroups = json::object();
      for (std::size_t s = 0; s < r.seeds.size(); ++s) {
        const CellOutcome& c = r.cell(m, k, s);
        const std::string seed_key = std::to_string(r.seeds[s]);
        if (!c.report) {
          values.push_back(nullptr);
          errors[seed_key] = c.error;
          continue;
        }
        const auto& v = pick(c.report->overall, metric);
        values.push_back(v.value ? json(*v.value) : json(nullptr));
        if (!v.value) errors[seed_key] = v.error;
        for (const auto& g : c.report->subgroups) {
          json& entry = subgroups[g.name];
          if (entry.is_null()) entry = {{"values", json::array()}};
          // Pad seeds where this subgroup was absent from the test cohort.
          while (entry["values"].size() < s) entry["values"].push_back(nullptr);
          const auto& gv = pick(g, metric);
          entry["values"].push_back(gv.value ? json(*gv.value) : json(nullptr));
        }
      }
      for (auto& [name, entry] : subgroups.items()) {
        while (entry["values"].size() < r.seeds.size()) entry["values"].push_back(nullptr);
        entry["mean"] = mean_of(entry["values"]);
      }
      cells.push_back({{"k", r.ks[k]},
                       {"seeds", r.seeds},
                       {"values", values},
                       {"mean", mean_of(values)},
                       {"errors", errors},
                       {"subgroups", subgroups}});
    }
    rows.push_back({{"model", r.models[m]}, {"cells", cells}});
  }
  return {{"metric", metric}, {"columns", r.ks}, {"rows", rows}};
}

}  // namespace

json report_json(const BenchResult& r) {
  json roc = json::array(), km = json::array();
  if (!r.ks.empty() && !r.seeds.empty()) {
    for (std::size_t m = 0; m < r.models.size(); ++m) {
      const CellOutcome& c = r.cell(m, r.ks.size() - 1, 0);
      if (!c.report) continue;
      std::vector<const metrics::GroupReport*> groups{&c.report->overall};
      for (const auto& g : c.report->subgroups) groups.push_back(&g);
      for (const auto* g : groups) {
        const json base = {{"model", c.model}, {"k", c.k}, {"seed", c.seed}, {"group", g->name}, {"n", g->n}};
        json entry = base;
        entry["roc"] = g->roc ? metrics::to_json(*g->roc) : json(nullptr);
        roc.push_back(entry);
        const json gj = metrics::to_json(*g);
        for (const char* endpoint : {"os", "pfs"}) {
          json k_entry = base;
          k_entry["endpoint"] = endpoint;
          k_entry["series"] = gj[std::string("km_") + endpoint];
          km.push_back(k_entry);
        }
      }
    }
  }
  json cells = json::array();
  for (const auto& c : r.cells) {
    json w = c.warnings;
    cells.push_back({{"model", c.model}, {"k", c.k}, {"seed", c.seed}, {"ok", c.report.has_value()},
                     {"error", c.report ? json(nullptr) : json(c.error)}, {"warnings", w}});
    if (!c.fit.is_null()) cells.back()["fit"] = c.fit;
  }
  json meta = r.meta;
  meta["cells"] = cells;
  meta["partial"] = r.partial();
  return {{"meta", meta},
          {"tables", {{"auc", table_json(r, "auc")}, {"c_os", table_json(r, "c_os")}, {"c_pfs", table_json(r, "c_pfs")}}},
          {"curves", {{"roc", roc}, {"km", km}}}};
}

void emit_report(const BenchResult& result, const std::string& path) {
  data::write_text_file_atomic(path, report_json(result).dump(2) + "\n");
}

}  // namespace clinbench::bench
