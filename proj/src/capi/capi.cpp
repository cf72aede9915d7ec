#include "clinbench/clinbench.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "bench/pipeline.hpp"
#include "bench/plots.hpp"
#include "common/error.hpp"
#include "data/csv.hpp"
#include "data/synthetic.hpp"
#include "embeddings/serialize.hpp"

struct cb_schema {
  clinbench::data::CohortSchema schema;
};

struct cb_cohort {
  clinbench::data::Cohort cohort;
};

struct cb_model {
  clinbench::bench::TrainedModel trained;
};

namespace {

using namespace clinbench;
using nlohmann::json;

thread_local std::string g_last_error;

struct NullArgument {
  const char* name;
};

void need(const void* p, const char* name) {
  if (!p) throw NullArgument{name};
}

cb_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::Dimension: return CB_ERR_DIMENSION;
    case ErrorKind::Contract: return CB_ERR_CONTRACT;
    case ErrorKind::Numeric: return CB_ERR_NUMERIC;
    case ErrorKind::Index: return CB_ERR_INDEX;
    case ErrorKind::InvalidProbability: return CB_ERR_INVALID_PROBABILITY;
    case ErrorKind::Schema: return CB_ERR_SCHEMA;
    case ErrorKind::Parse: return CB_ERR_PARSE;
    case ErrorKind::Validation: return CB_ERR_VALIDATION;
    case ErrorKind::Sampling: return CB_ERR_SAMPLING;
    case ErrorKind::Label: return CB_ERR_LABEL;
    case ErrorKind::NoEvents: return CB_ERR_NO_EVENTS;
    case ErrorKind::UndefinedMetric: return CB_ERR_UNDEFINED_METRIC;
    case ErrorKind::Unavailable: return CB_ERR_UNAVAILABLE;
    case ErrorKind::Integrity: return CB_ERR_INTEGRITY;
    case ErrorKind::Io: return CB_ERR_IO;
    case ErrorKind::Build: return CB_ERR_BUILD;
    case ErrorKind::Fit: return CB_ERR_FIT;
    case ErrorKind::Divergence: return CB_ERR_DIVERGENCE;
  }
  return CB_ERR_INTERNAL;
}

template <class F>
cb_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return CB_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const NullArgument& e) {
    g_last_error = std::string("argument '") + e.name + "' is NULL";
    return CB_ERR_NULL_ARGUMENT;
  } catch (const json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return CB_ERR_VALIDATION;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CB_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CB_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_json(const char* text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string(what) + " is not valid JSON: " + e.what());
  }
}

std::optional<bench::EmbeddingOptions> embedding_override(const char* text) {
  if (!text || !*text) return std::nullopt;
  return bench::EmbeddingOptions::from_json(parse_json(text, "embeddings options"));
}

}  // namespace

extern "C" {

const char* cb_version(void) { return "0.1.0"; }

const char* cb_last_error(void) { return g_last_error.c_str(); }

const char* cb_status_name(cb_status status) {
  static const char* const names[] = {"ok",       "dimension",         "contract",         "numeric",
                                      "index",    "invalid_probability", "schema",         "parse",
                                      "validation", "sampling",        "label",            "no_events",
                                      "undefined_metric", "unavailable", "integrity",      "io",
                                      "build",    "fit",               "divergence",       "null_argument",
                                      "internal"};
  const int i = static_cast<int>(status);
  return i >= 0 && i <= CB_ERR_INTERNAL ? names[i] : "unknown";
}

int cb_status_is_input_error(cb_status status) {
  if (status == CB_ERR_NULL_ARGUMENT) return 1;
  if (status > CB_OK && status < CB_ERR_NULL_ARGUMENT)
    return is_validation_kind(static_cast<ErrorKind>(static_cast<int>(status) - 1)) ? 1 : 0;
  return 0;
}

void cb_string_free(char* s) { std::free(s); }

cb_status cb_synth(const char* config_json, const char* out_dir) {
  return guarded([&] {
    need(config_json, "config_json");
    need(out_dir, "out_dir");
    json doc = parse_json(config_json, "synthetic config");
    const std::size_t n_test = doc.value("n_test", std::size_t{0});
    doc.erase("n_test");
    const data::SyntheticConfig cfg = data::SyntheticConfig::from_json(doc);
    require(n_test < cfg.n, ErrorKind::Validation, "n_test must be smaller than n");
    const data::SyntheticCohort syn = data::gen_synthetic(cfg);
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    require(!ec, ErrorKind::Io, std::string("cannot create ") + out_dir + ": " + ec.message());
    const fs::path dir(out_dir);
    data::write_text_file_atomic((dir / "cohort.csv").string(), data::format_csv(syn.table));
    data::write_text_file_atomic((dir / "schema.json").string(), data::to_json(syn.schema).dump(2) + "\n");
    if (n_test > 0) {
      data::RawTable train{syn.table.header, {}}, test{syn.table.header, {}};
      for (std::size_t i = 0; i < syn.table.rows.size(); ++i)
        (i < cfg.n - n_test ? train : test).rows.push_back(syn.table.rows[i]);
      data::write_text_file_atomic((dir / "train.csv").string(), data::format_csv(train));
      data::write_text_file_atomic((dir / "test.csv").string(), data::format_csv(test));
    }
    json truth = {{"config", cfg.to_json()}, {"n_test", n_test}, {"weights", syn.weights},
                  {"cat_effects", syn.cat_effects}, {"latent", syn.latent}};
    data::write_text_file_atomic((dir / "truth.json").string(), truth.dump() + "\n");
  });
}

cb_status cb_schema_fit(const char* schema_config_path, const char* data_csv, cb_schema** out) {
  return guarded([&] {
    need(schema_config_path, "schema_config_path");
    need(data_csv, "data_csv");
    need(out, "out");
    *out = nullptr;
    const auto cfg = data::load_schema_config(schema_config_path);
    *out = new cb_schema{data::fit_schema(data::read_csv(data_csv), cfg)};
  });
}

cb_status cb_schema_load(const char* fitted_schema_path, cb_schema** out) {
  return guarded([&] {
    need(fitted_schema_path, "fitted_schema_path");
    need(out, "out");
    *out = nullptr;
    const json doc = parse_json(data::read_text_file(fitted_schema_path).c_str(), fitted_schema_path);
    *out = new cb_schema{data::CohortSchema::from_json(doc)};
  });
}

cb_status cb_schema_json(const cb_schema* schema, char** out_json) {
  return guarded([&] {
    need(schema, "schema");
    need(out_json, "out_json");
    *out_json = dup_string(schema->schema.to_json().dump(2));
  });
}

void cb_schema_free(cb_schema* schema) { delete schema; }

cb_status cb_cohort_load(const cb_schema* schema, const char* data_csv, cb_cohort** out) {
  return guarded([&] {
    need(schema, "schema");
    need(data_csv, "data_csv");
    need(out, "out");
    *out = nullptr;
    *out = new cb_cohort{data::load_cohort_file(data_csv, schema->schema)};
  });
}

size_t cb_cohort_size(const cb_cohort* cohort) { return cohort ? cohort->cohort.size() : 0; }

void cb_cohort_free(cb_cohort* cohort) { delete cohort; }

cb_status cb_train(const cb_schema* schema, const cb_cohort* cohort, const char* run_json, cb_model** out,
                   char** history_json) {
  return guarded([&] {
    need(schema, "schema");
    need(cohort, "cohort");
    need(run_json, "run_json");
    need(out, "out");
    *out = nullptr;
    json history;
    auto trained = bench::train_run(parse_json(run_json, "run description"), schema->schema, cohort->cohort, &history);
    char* h = history_json ? dup_string(history.dump()) : nullptr;
    *out = new cb_model{std::move(trained)};
    if (history_json) *history_json = h;
  });
}

cb_status cb_model_save(const cb_model* model, const char* dir) {
  return guarded([&] {
    need(model, "model");
    need(dir, "dir");
    bench::save_trained(model->trained, dir);
  });
}

cb_status cb_model_load(const char* dir, cb_model** out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    *out = nullptr;
    *out = new cb_model{training::load_checkpoint(dir)};
  });
}

cb_status cb_model_schema(const cb_model* model, cb_schema** out) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    *out = new cb_schema{model->trained.schema};
  });
}

void cb_model_free(cb_model* model) { delete model; }

cb_status cb_predict(const cb_model* model, const cb_cohort* cohort, const char* embeddings_json, char** out_json) {
  return guarded([&] {
    need(model, "model");
    need(cohort, "cohort");
    need(out_json, "out_json");
    const auto p = bench::predict_trained(model->trained, cohort->cohort, embedding_override(embeddings_json));
    json ids = json::array();
    for (const auto& r : cohort->cohort.records()) ids.push_back(r.id);
    *out_json = dup_string(
        json{{"record_id", ids}, {"responder_prob", p.responder_prob}, {"risk_os", p.risk_os}, {"risk_pfs", p.risk_pfs}}
            .dump());
  });
}

cb_status cb_evaluate(const cb_model* model, const cb_cohort* cohort, const char* embeddings_json, char** report_json) {
  return guarded([&] {
    need(model, "model");
    need(cohort, "cohort");
    need(report_json, "report_json");
    const auto r = bench::evaluate_trained(model->trained, cohort->cohort, embedding_override(embeddings_json));
    *report_json = dup_string(bench::report_json(r).dump(2) + "\n");
  });
}

cb_status cb_evaluate_external(const cb_schema* schema, const cb_cohort* cohort, const char* scores_csv,
                               const char* name, char** report_json) {
  return guarded([&] {
    need(schema, "schema");
    need(cohort, "cohort");
    need(scores_csv, "scores_csv");
    need(report_json, "report_json");
    const auto r = bench::evaluate_external(name && *name ? name : "external", scores_csv, cohort->cohort, schema->schema);
    *report_json = dup_string(bench::report_json(r).dump(2) + "\n");
  });
}

cb_status cb_fewshot(const cb_schema* schema, const cb_cohort* train, const cb_cohort* test, const char* spec_json,
                     char** report_json, int* partial) {
  return guarded([&] {
    need(schema, "schema");
    need(train, "train");
    need(test, "test");
    need(spec_json, "spec_json");
    need(report_json, "report_json");
    const auto r = bench::fewshot_run(parse_json(spec_json, "few-shot spec"), schema->schema, train->cohort, test->cohort);
    *report_json = dup_string(bench::report_json(r).dump(2) + "\n");
    if (partial) *partial = r.partial() ? 1 : 0;
  });
}

cb_status cb_write_file(const char* path, const char* text) {
  return guarded([&] {
    need(path, "path");
    need(text, "text");
    data::write_text_file_atomic(path, text);
  });
}

cb_status cb_plot(const char* report_path, const char* out_dir, char** out_json) {
  return guarded([&] {
    need(report_path, "report_path");
    need(out_dir, "out_dir");
    const json report = parse_json(data::read_text_file(report_path).c_str(), report_path);
    const auto files = bench::emit_plots(report, out_dir);
    if (out_json) *out_json = dup_string(json(files).dump());
  });
}

cb_status cb_embed(const cb_schema* schema, const cb_cohort* cohort, const char* options_json, char** out_json) {
  return guarded([&] {
    need(schema, "schema");
    need(cohort, "cohort");
    need(options_json, "options_json");
    const json doc = parse_json(options_json, "embedding options");
    const auto opts = bench::EmbeddingOptions::from_json(doc);
    require(opts.cache.has_value(), ErrorKind::Validation, "embedding needs a cache file to fill");
    const std::string mode = doc.value("mode", std::string("both"));
    require(mode == "pooled" || mode == "per_sentence" || mode == "both", ErrorKind::Validation,
            "mode must be pooled, per_sentence or both");
    embeddings::EmbeddingProvider provider(opts.provider_config());
    const std::size_t before = provider.cached();
    std::vector<std::string> texts;
    for (const auto& r : cohort->cohort.records()) {
      const auto s = embeddings::serialize(r, schema->schema);
      if (mode != "per_sentence") texts.push_back(s.joined);
      if (mode != "pooled") texts.insert(texts.end(), s.sentences.begin(), s.sentences.end());
    }
    provider.get(texts);
    const json summary = {{"model_id", provider.model_id()},   {"dim", provider.dim()},
                          {"texts", texts.size()},             {"cached_before", before},
                          {"cached_after", provider.cached()}, {"service_calls", provider.service_calls()}};
    if (out_json) *out_json = dup_string(summary.dump());
  });
}

cb_status cb_embed_health(const char* endpoint, char** out_json) {
  return guarded([&] {
    need(out_json, "out_json");
    const auto resolved = embeddings::resolve_endpoint(endpoint ? std::optional<std::string>(endpoint) : std::nullopt);
    require(resolved.has_value(), ErrorKind::Validation,
            std::string("no endpoint given and ") + embeddings::kEndpointEnv + " is unset");
    const auto h = embeddings::EmbedClient(*resolved).health();
    *out_json = dup_string(json{{"status", h.status}, {"model", h.model}, {"dim", h.dim}}.dump());
  });
}

}  // extern "C"
