#include "bench/pipeline.hpp"

#include <map>
#include <memory>
#include <numeric>

#include "baselines/external.hpp"
#include "baselines/logres.hpp"
#include "common/error.hpp"

namespace clinbench::bench {

using nlohmann::json;

EmbeddingOptions EmbeddingOptions::from_json(const json& doc) {
  require(doc.is_object(), ErrorKind::Validation, "embeddings options must be a JSON object");
  EmbeddingOptions o;
  try {
    o.model_id = doc.value("model_id", std::string());
    if (doc.contains("cache") && !doc["cache"].is_null()) o.cache = doc["cache"].get<std::string>();
    if (doc.contains("endpoint") && !doc["endpoint"].is_null()) o.endpoint = doc["endpoint"].get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("embeddings options: ") + e.what());
  }
  return o;
}

json EmbeddingOptions::to_json() const {
  return {{"model_id", model_id},
          {"cache", cache ? json(*cache) : json(nullptr)},
          {"endpoint", endpoint ? json(*endpoint) : json(nullptr)}};
}

embeddings::ProviderConfig EmbeddingOptions::provider_config() const {
  embeddings::ProviderConfig c;
  c.model_id = model_id;
  c.cache_path = cache;
  c.endpoint = endpoint;
  return c;
}

std::optional<std::size_t> parse_k(const json& value) {
  if (value.is_string() && value.get<std::string>() == "all") return std::nullopt;
  if (value.is_string()) {
    const auto n = data::parse_number(value.get<std::string>());
    require(n && *n >= 1 && *n == std::floor(*n), ErrorKind::Validation,
            "k must be a positive integer or \"all\", got '" + value.get<std::string>() + "'");
    return static_cast<std::size_t>(*n);
  }
  require(value.is_number_unsigned() && value.get<std::size_t>() >= 1, ErrorKind::Validation,
          "k must be a positive integer or \"all\", got " + value.dump());
  return value.get<std::size_t>();
}

json k_json(const std::optional<std::size_t>& k) { return k ? json(*k) : json("all"); }

model::Batch model_inputs(const model::ModelConfig& config, const data::Cohort& cohort, const data::CohortSchema& schema,
                          embeddings::EmbeddingProvider* provider) {
  model::Batch b = model::make_batch(cohort, schema);
  if (config.is_llm()) {
    require(provider != nullptr, ErrorKind::Validation,
            to_string(config.architecture) + " needs embeddings: give a cache file or an endpoint");
    embeddings::attach_embeddings(b, cohort, schema, *provider, embeddings::mode_for(config.architecture));
  }
  return b;
}

namespace {

ModelKind kind_from(const json& doc) {
  const std::string k = doc.value("kind", std::string("neural"));
  if (k == "neural") return ModelKind::Neural;
  if (k == "logres") return ModelKind::LogRes;
  fail(ErrorKind::Validation, "unknown model kind '" + k + "' (expected neural or logres)");
}

bool is_llm_doc(const json& run) {
  if (kind_from(run) != ModelKind::Neural) return false;
  const json model = run.value("model", json::object());
  if (!model.contains("architecture")) return false;
  const auto a = model::architecture_from_string(model["architecture"].get<std::string>());
  return a == model::Architecture::LlmLinear || a == model::Architecture::LlmTransformer;
}

std::unique_ptr<embeddings::EmbeddingProvider> provider_for(const json& run, const json& fallback = nullptr) {
  if (!is_llm_doc(run)) return nullptr;
  const json& doc = run.contains("embeddings") ? run["embeddings"] : fallback;
  require(doc.is_object(), ErrorKind::Validation,
          "model '" + run.value("name", std::string("?")) + "' needs an \"embeddings\" section (model_id, cache, endpoint)");
  return std::make_unique<embeddings::EmbeddingProvider>(EmbeddingOptions::from_json(doc).provider_config());
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

BenchModel bench_model_from_json(const json& doc, std::size_t embedding_dim) {
  require(doc.is_object(), ErrorKind::Validation, "model entry must be a JSON object");
  BenchModel m;
  m.kind = kind_from(doc);
  json model_doc = doc.value("model", json::object());
  if (m.kind == ModelKind::Neural) {
    if (embedding_dim && !model_doc.contains("embedding_dim")) model_doc["embedding_dim"] = embedding_dim;
    m.model = model::ModelConfig::from_json(model_doc);
    m.train = training::TrainConfig::from_json(doc.value("training", json::object()),
                                               training::TrainConfig::defaults_for(m.model.architecture));
  }
  m.name = doc.value("name", m.kind == ModelKind::LogRes ? std::string("logres") : to_string(m.model.architecture));
  return m;
}

TrainedModel train_run(const json& run, const data::CohortSchema& schema, const data::Cohort& cohort, json* history) {
  require(run.is_object(), ErrorKind::Validation, "run description must be a JSON object");
  const auto provider = provider_for(run);
  BenchModel m = bench_model_from_json(run, provider ? provider->dim() : 0);
  const std::optional<std::size_t> k = parse_k(run.value("k", json("all")));
  const std::uint64_t seed = run.value("seed", std::uint64_t{0});
  const bool stratify = run.value("stratify", true);
  const std::vector<std::size_t> idx = k ? data::sample_fewshot(cohort, *k, seed, stratify) : all_indices(cohort.size());
  const data::Cohort sub = cohort.subset(idx);

  TrainedModel out;
  out.schema = schema;
  out.info.extra = {{"name", m.name}, {"k", data::k_label(k)}, {"seed", seed}, {"n_train", sub.size()}};
  if (m.kind == ModelKind::LogRes) {
    const auto fit = baselines::lr_fit_grid(sub, schema, seed);
    out.kind = "logres";
    out.logres = fit.model;
    out.info.metrics = {{"validation_nll", fit.validation_nll}, {"l2_grid", fit.grid}};
    if (history) *history = out.info.metrics;
    return out;
  }
  m.model.init_seed = seed;
  m.train.seed = seed;
  model::Model net = model::Model::build(m.model, schema);
  const model::Batch inputs = model_inputs(m.model, sub, schema, provider.get());
  const training::History h = training::train(net, inputs, training::make_targets(sub), m.train);
  out.kind = "neural";
  out.train = m.train;
  out.model = std::move(net);
  out.info.epoch = h.epochs.size();
  if (!h.epochs.empty()) {
    const auto& last = h.epochs.back();
    const auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    out.info.metrics = {{"loss_total", num(last.loss_total)}, {"loss_bor", num(last.loss_bor)},
                        {"loss_os", num(last.loss_os)}, {"loss_pfs", num(last.loss_pfs)}};
  }
  if (provider) {
    EmbeddingOptions used = EmbeddingOptions::from_json(run["embeddings"]);
    used.model_id = provider->model_id();
    out.info.extra["embeddings"] = used.to_json();
  }
  if (history) *history = h.to_json();
  return out;
}

void save_trained(const TrainedModel& trained, const std::string& dir) {
  if (trained.kind == "logres")
    training::save_checkpoint(dir, *trained.logres, trained.schema, trained.info);
  else
    training::save_checkpoint(dir, *trained.model, trained.schema, trained.train, trained.info);
}

metrics::Predictions predict_trained(const TrainedModel& trained, const data::Cohort& cohort,
                                     const std::optional<EmbeddingOptions>& embeddings) {
  if (trained.kind == "logres") return baselines::lr_predictions(*trained.logres, cohort, trained.schema);
  require(trained.model.has_value(), ErrorKind::Contract, "trained model has no network");
  const model::ModelConfig& cfg = trained.model->config();
  std::unique_ptr<embeddings::EmbeddingProvider> provider;
  if (cfg.is_llm()) {
    EmbeddingOptions opts;
    if (trained.info.extra.contains("embeddings")) opts = EmbeddingOptions::from_json(trained.info.extra["embeddings"]);
    if (embeddings) {
      if (!embeddings->model_id.empty()) opts.model_id = embeddings->model_id;
      if (embeddings->cache) opts.cache = embeddings->cache;
      if (embeddings->endpoint) opts.endpoint = embeddings->endpoint;
    }
    provider = std::make_unique<embeddings::EmbeddingProvider>(opts.provider_config());
    require(provider->model_id() == opts.model_id || opts.model_id.empty(), ErrorKind::Integrity,
            "checkpoint was trained on '" + opts.model_id + "' embeddings");
  }
  return to_predictions(trained.model->predict(model_inputs(cfg, cohort, trained.schema, provider.get())));
}

BenchResult single_result(const std::string& name, const std::string& k, std::uint64_t seed,
                          const metrics::MetricsReport& report, json meta) {
  BenchResult r;
  r.models = {name};
  r.ks = {k};
  r.seeds = {seed};
  CellOutcome c;
  c.model = name;
  c.k = k;
  c.seed = seed;
  c.report = report;
  r.cells = {c};
  meta["generator"] = "clinbench";
  meta["format_version"] = 1;
  meta["ks"] = r.ks;
  meta["seeds"] = r.seeds;
  meta["responder_threshold"] = report.responder_threshold;
  r.meta = std::move(meta);
  return r;
}

BenchResult evaluate_trained(const TrainedModel& trained, const data::Cohort& cohort,
                             const std::optional<EmbeddingOptions>& embeddings) {
  const auto report = metrics::evaluate_report(predict_trained(trained, cohort, embeddings), cohort);
  const json& extra = trained.info.extra;
  json model_meta = {{"name", extra.value("name", trained.kind)}, {"kind", trained.kind}};
  if (trained.model) {
    model_meta["model"] = trained.model->config().to_json();
    model_meta["training"] = trained.train.to_json();
  }
  json meta = {{"models", json::array({model_meta})},
               {"schema_hash", trained.schema.hash()},
               {"n_train", extra.value("n_train", std::size_t{0})},
               {"n_test", cohort.size()},
               {"stratify", nullptr},
               {"subgroup_pool", nullptr}};
  return single_result(extra.value("name", trained.kind), extra.value("k", std::string("all")),
                       extra.value("seed", std::uint64_t{0}), report, std::move(meta));
}

BenchResult evaluate_external(const std::string& name, const std::string& scores_path, const data::Cohort& cohort,
                              const data::CohortSchema& schema) {
  const auto report = metrics::evaluate_report(baselines::load_external_scores(scores_path, cohort), cohort);
  json meta = {{"models", json::array({{{"name", name}, {"kind", "external"}}})},
               {"schema_hash", schema.hash()},
               {"n_train", nullptr},
               {"n_test", cohort.size()},
               {"stratify", nullptr},
               {"subgroup_pool", nullptr}};
  return single_result(name, "external", 0, report, std::move(meta));
}

BenchResult fewshot_run(const json& spec, const data::CohortSchema& schema, const data::Cohort& train,
                        const data::Cohort& test, const std::function<void(const CellOutcome&)>& on_cell) {
  require(spec.is_object(), ErrorKind::Validation, "few-shot spec must be a JSON object");
  data::FewShotSpec fs;
  BenchOptions options;
  std::vector<BenchModel> models;
  try {
    for (const auto& k : spec.at("ks")) fs.ks.push_back(parse_k(k));
    fs.seeds = spec.at("seeds").get<std::vector<std::uint64_t>>();
    fs.stratify = spec.value("stratify", true);
    if (spec.contains("subgroup_pool") && !spec["subgroup_pool"].is_null())
      fs.subgroup_pool = spec["subgroup_pool"].get<std::string>();
    options.jobs = spec.value("jobs", std::size_t{1});
    options.timestamps = spec.value("timestamps", false);
    const json fallback = spec.value("embeddings", json(nullptr));
    for (const auto& entry : spec.at("models")) {
      const auto provider = provider_for(entry, fallback);
      BenchModel m = bench_model_from_json(entry, provider ? provider->dim() : 0);
      if (provider) {
        m.train_inputs = model_inputs(m.model, train, schema, provider.get());
        m.test_inputs = model_inputs(m.model, test, schema, provider.get());
      }
      models.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("few-shot spec: ") + e.what());
  }
  options.on_cell = on_cell;
  return run_fewshot(models, train, test, schema, fs, options);
}

}  // namespace clinbench::bench
