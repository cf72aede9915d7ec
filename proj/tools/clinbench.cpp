// Command-line front end over the C API.
#include <clinbench/clinbench.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitPartial = 3;

/// Carries a failed C API status out of a subcommand.
struct Failure {
  cb_status status;
  std::string message;
};

/// Bad flag combinations and unreadable option files.
struct UsageError {
  std::string message;
};

void check(cb_status s) {
  if (s != CB_OK) throw Failure{s, cb_last_error()};
}

struct StringDeleter {
  void operator()(char* p) const { cb_string_free(p); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

struct SchemaDeleter {
  void operator()(cb_schema* p) const { cb_schema_free(p); }
};
struct CohortDeleter {
  void operator()(cb_cohort* p) const { cb_cohort_free(p); }
};
struct ModelDeleter {
  void operator()(cb_model* p) const { cb_model_free(p); }
};
using Schema = std::unique_ptr<cb_schema, SchemaDeleter>;
using Cohort = std::unique_ptr<cb_cohort, CohortDeleter>;
using Model = std::unique_ptr<cb_model, ModelDeleter>;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError{"cannot read " + path};
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    throw UsageError{path + " is not valid JSON: " + e.what()};
  }
}

Schema fit_schema(const std::string& config, const std::string& data) {
  cb_schema* s = nullptr;
  check(cb_schema_fit(config.c_str(), data.c_str(), &s));
  return Schema(s);
}

Cohort load_cohort(const cb_schema* schema, const std::string& path) {
  cb_cohort* c = nullptr;
  check(cb_cohort_load(schema, path.c_str(), &c));
  return Cohort(c);
}

void write_file(const std::string& path, const std::string& text) { check(cb_write_file(path.c_str(), text.c_str())); }

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

json parse_alpha(const std::string& text) {
  json alpha = json::array();
  for (const auto& a : split_list(text)) {
    try {
      std::size_t used = 0;
      alpha.push_back(std::stod(a, &used));
      if (used != a.size()) throw std::invalid_argument(a);
    } catch (const std::exception&) {
      throw UsageError{"--alpha expects three comma-separated numbers, got '" + text + "'"};
    }
  }
  if (alpha.size() != 3) throw UsageError{"--alpha expects three weights (bor,os,pfs)"};
  return alpha;
}

json parse_k(const std::string& k) {
  if (k == "all") return "all";
  try {
    std::size_t used = 0;
    const long v = std::stol(k, &used);
    if (used == k.size() && v > 0) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw UsageError{"k must be a positive integer or 'all', got '" + k + "'"};
}

/// Shared model/embedding flags.
struct ModelFlags {
  std::vector<std::string> models{"clintat"};
  std::string config;
  std::string alpha;
  std::string cache;
  std::string endpoint;
  std::string embedding_model;
};

/// A run description from a model name or a JSON file, with the shared
/// flags applied on top.
json run_from(const std::string& model, const ModelFlags& f) {
  json run;
  if (model.size() > 5 && model.substr(model.size() - 5) == ".json") {
    run = read_json_file(model);
  } else if (model == "logres") {
    run = {{"kind", "logres"}, {"name", "logres"}};
  } else {
    run = {{"kind", "neural"}, {"name", model}, {"model", {{"architecture", model}}}};
  }
  if (!f.config.empty()) {
    json& training = run["training"];
    if (!training.is_object()) training = json::object();
    training.update(read_json_file(f.config));
  }
  if (!f.alpha.empty()) run["training"]["alpha"] = parse_alpha(f.alpha);
  const bool llm = run.value("kind", std::string("neural")) == "neural" && run.contains("model") &&
                   run["model"].value("architecture", std::string()).rfind("llm_", 0) == 0;
  if (llm) {
    json& e = run["embeddings"];
    if (!e.is_object()) e = json::object();
    if (!f.cache.empty()) e["cache"] = f.cache;
    if (!f.endpoint.empty()) e["endpoint"] = f.endpoint;
    if (!f.embedding_model.empty()) e["model_id"] = f.embedding_model;
  }
  return run;
}

void add_model_flags(CLI::App* cmd, ModelFlags& f, bool many) {
  if (many)
    cmd->add_option("--model", f.models,
                    "Models: clintat, tabtransformer, llm_linear, llm_transformer, logres, or a run JSON file")
        ->delimiter(',');
  cmd->add_option("--config", f.config, "JSON file with training settings (lr, epochs, batch size, ...)");
  cmd->add_option("--alpha", f.alpha, "Loss weights bor,os,pfs");
  cmd->add_option("--cache", f.cache, "Embedding cache file (LLM variants)");
  cmd->add_option("--endpoint", f.endpoint, "Embedding service URL (LLM variants)");
  cmd->add_option("--embedding-model", f.embedding_model, "Embedding model id (defaults to the cache's)");
}

bool report_partial(const std::string& report) {
  try {
    return json::parse(report).at("meta").value("partial", false);
  } catch (const json::exception&) {
    return false;
  }
}

void print_table(const std::string& report_text) {
  const json report = json::parse(report_text);
  for (const char* metric : {"auc", "c_os", "c_pfs"}) {
    const json& t = report["tables"][metric];
    std::printf("%s\n%-18s", metric, "model");
    for (const auto& k : t["columns"]) std::printf(" %10s", k.get<std::string>().c_str());
    std::printf("\n");
    for (const auto& row : t["rows"]) {
      std::printf("%-18s", row["model"].get<std::string>().c_str());
      for (const auto& cell : row["cells"]) {
        if (cell["mean"].is_null())
          std::printf(" %10s", "null");
        else
          std::printf(" %10.4f", cell["mean"].get<double>());
      }
      std::printf("\n");
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark engine for immunotherapy response and survival prediction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(cb_version()));

  // synth
  std::string synth_config, synth_out;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_n, synth_n_test;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort with known signal");
  synth->add_option("--config", synth_config, "Synthetic generator config JSON");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--n", synth_n, "Number of records");
  synth->add_option("--n-test", synth_n_test, "Records split off into test.csv");

  // train
  ModelFlags train_flags;
  std::string train_schema, train_data, train_out, train_k = "all", train_history;
  std::vector<std::uint64_t> train_seeds{0};
  auto* train = app.add_subcommand("train", "Train one model and write a checkpoint");
  train->add_option("--schema", train_schema, "Schema config JSON (features and endpoint columns)")->required();
  train->add_option("--data", train_data, "Training cohort CSV")->required();
  train->add_option("--model", train_flags.models.front(),
                    "clintat, tabtransformer, llm_linear, llm_transformer, logres, or a run JSON file");
  train->add_option("--k", train_k, "Train on a k-shot sample (or 'all')");
  train->add_option("--seeds", train_seeds, "Seed (the first value is used)")->delimiter(',');
  train->add_option("--out", train_out, "Checkpoint directory")->required();
  train->add_option("--history", train_history, "Write per-epoch losses to this JSON file");
  add_model_flags(train, train_flags, false);

  // eval
  std::string eval_model, eval_test, eval_report, eval_schema, eval_data, eval_scores, eval_cache, eval_endpoint,
      eval_name = "external", eval_predictions;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint or external scores on a test cohort");
  eval->add_option("--model", eval_model, "Checkpoint directory");
  eval->add_option("--test", eval_test, "Test cohort CSV")->required();
  eval->add_option("--report", eval_report, "Report JSON path")->required();
  eval->add_option("--schema", eval_schema, "Schema config JSON (with --external-scores)");
  eval->add_option("--data", eval_data, "Training CSV the schema is fitted on (with --external-scores)");
  eval->add_option("--external-scores", eval_scores, "CSV with record_id,score[,risk_os,risk_pfs]");
  eval->add_option("--name", eval_name, "Row label for external scores");
  eval->add_option("--cache", eval_cache, "Embedding cache override");
  eval->add_option("--endpoint", eval_endpoint, "Embedding service override");
  eval->add_option("--predictions", eval_predictions, "Also write per-record predictions JSON");

  // fewshot
  ModelFlags fs_flags;
  fs_flags.models = {"clintat", "logres"};
  std::string fs_schema, fs_data, fs_test, fs_report, fs_out, fs_spec;
  std::vector<std::string> fs_k{"6", "12", "24", "48", "all"};
  std::vector<std::uint64_t> fs_seeds{0, 1, 2};
  std::size_t fs_jobs = 1;
  bool fs_timestamps = false, fs_no_stratify = false;
  std::string fs_pool;
  auto* fewshot = app.add_subcommand("fewshot", "Run the k-shot grid and write a report");
  fewshot->add_option("--schema", fs_schema, "Schema config JSON")->required();
  fewshot->add_option("--data", fs_data, "Training pool CSV")->required();
  fewshot->add_option("--test", fs_test, "Test cohort CSV")->required();
  fewshot->add_option("--k", fs_k, "k values, e.g. 6,12,all")->delimiter(',');
  fewshot->add_option("--seeds", fs_seeds, "Seeds")->delimiter(',');
  fewshot->add_option("--report", fs_report, "Report JSON path")->required();
  fewshot->add_option("--out", fs_out, "Also write plots and curve CSVs here");
  fewshot->add_option("--spec", fs_spec, "Few-shot spec JSON (models, ks, seeds, ...); flags override");
  fewshot->add_option("--jobs", fs_jobs, "Worker threads");
  fewshot->add_option("--subgroup-pool", fs_pool, "Draw k-shot samples from this subgroup only");
  fewshot->add_flag("--no-stratify", fs_no_stratify, "Sample without balancing response classes");
  fewshot->add_flag("--timestamps", fs_timestamps, "Record wall-clock times in the report");
  add_model_flags(fewshot, fs_flags, true);

  // embed
  std::string emb_schema, emb_cache, emb_endpoint, emb_model, emb_mode = "both";
  std::vector<std::string> emb_files;
  bool emb_health = false;
  auto* embed = app.add_subcommand("embed", "Fill an embedding cache from the service, or check its health");
  embed->add_option("--schema", emb_schema, "Schema config JSON");
  embed->add_option("--cache", emb_cache, "Cache file to create or extend");
  embed->add_option("--endpoint", emb_endpoint, "Embedding service URL");
  embed->add_option("--embedding-model", emb_model, "Embedding model id");
  embed->add_option("--mode", emb_mode, "pooled, per_sentence or both");
  embed->add_flag("--health", emb_health, "Only query GET /health");
  embed->add_option("--data", emb_files, "Cohort CSV(s) to embed; the schema is fitted on the first")->delimiter(',');

  // plot
  std::string plot_report, plot_out;
  auto* plot = app.add_subcommand("plot", "Render SVG plots and curve CSVs from a report");
  plot->add_option("--report", plot_report, "Report JSON")->required();
  plot->add_option("--out", plot_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (synth->parsed()) {
      json cfg = synth_config.empty() ? json::object() : read_json_file(synth_config);
      if (synth_seed) cfg["seed"] = *synth_seed;
      if (synth_n) cfg["n"] = *synth_n;
      if (synth_n_test) cfg["n_test"] = *synth_n_test;
      check(cb_synth(cfg.dump().c_str(), synth_out.c_str()));
      std::printf("wrote synthetic cohort to %s\n", synth_out.c_str());
      return kExitOk;
    }

    if (train->parsed()) {
      json run = run_from(train_flags.models.front(), train_flags);
      run["k"] = parse_k(train_k);
      run["seed"] = train_seeds.empty() ? 0 : train_seeds.front();
      Schema schema = fit_schema(train_schema, train_data);
      Cohort cohort = load_cohort(schema.get(), train_data);
      cb_model* raw = nullptr;
      char* history = nullptr;
      check(cb_train(schema.get(), cohort.get(), run.dump().c_str(), &raw, &history));
      Model model(raw);
      OwnedString h(history);
      check(cb_model_save(model.get(), train_out.c_str()));
      if (!train_history.empty()) write_file(train_history, std::string(h.get()) + "\n");
      std::printf("trained %s on %zu records; checkpoint in %s\n", run.value("name", std::string("model")).c_str(),
                  cb_cohort_size(cohort.get()), train_out.c_str());
      return kExitOk;
    }

    if (eval->parsed()) {
      char* report = nullptr;
      if (!eval_scores.empty()) {
        Schema schema;
        if (!eval_model.empty()) {
          cb_model* raw = nullptr;
          check(cb_model_load(eval_model.c_str(), &raw));
          Model m(raw);
          cb_schema* s = nullptr;
          check(cb_model_schema(m.get(), &s));
          schema.reset(s);
        } else {
          if (eval_schema.empty() || eval_data.empty())
            throw UsageError{"--external-scores needs --model, or --schema with --data to fit the schema"};
          schema = fit_schema(eval_schema, eval_data);
        }
        Cohort test = load_cohort(schema.get(), eval_test);
        check(cb_evaluate_external(schema.get(), test.get(), eval_scores.c_str(), eval_name.c_str(), &report));
      } else {
        if (eval_model.empty()) throw UsageError{"eval needs --model or --external-scores"};
        cb_model* raw = nullptr;
        check(cb_model_load(eval_model.c_str(), &raw));
        Model model(raw);
        cb_schema* s = nullptr;
        check(cb_model_schema(model.get(), &s));
        Schema schema(s);
        Cohort test = load_cohort(schema.get(), eval_test);
        json overrides = json::object();
        if (!eval_cache.empty()) overrides["cache"] = eval_cache;
        if (!eval_endpoint.empty()) overrides["endpoint"] = eval_endpoint;
        const std::string ov = overrides.empty() ? "" : overrides.dump();
        check(cb_evaluate(model.get(), test.get(), ov.empty() ? nullptr : ov.c_str(), &report));
        if (!eval_predictions.empty()) {
          char* preds = nullptr;
          check(cb_predict(model.get(), test.get(), ov.empty() ? nullptr : ov.c_str(), &preds));
          OwnedString p(preds);
          write_file(eval_predictions, std::string(p.get()) + "\n");
        }
      }
      OwnedString r(report);
      write_file(eval_report, r.get());
      print_table(r.get());
      return report_partial(r.get()) ? kExitPartial : kExitOk;
    }

    if (fewshot->parsed()) {
      json spec = fs_spec.empty() ? json::object() : read_json_file(fs_spec);
      const bool models_from_flag = fewshot->get_option("--model")->count() > 0;
      if (!spec.contains("models") || models_from_flag) {
        spec["models"] = json::array();
        for (const auto& m : fs_flags.models) spec["models"].push_back(run_from(m, fs_flags));
      }
      if (!spec.contains("ks") || fewshot->get_option("--k")->count() > 0) {
        spec["ks"] = json::array();
        for (const auto& k : fs_k) spec["ks"].push_back(parse_k(k));
      }
      if (!spec.contains("seeds") || fewshot->get_option("--seeds")->count() > 0) spec["seeds"] = fs_seeds;
      if (fs_no_stratify) spec["stratify"] = false;
      if (!fs_pool.empty()) spec["subgroup_pool"] = fs_pool;
      if (fewshot->get_option("--jobs")->count() > 0 || !spec.contains("jobs")) spec["jobs"] = fs_jobs;
      if (fs_timestamps) spec["timestamps"] = true;
      Schema schema = fit_schema(fs_schema, fs_data);
      Cohort train_c = load_cohort(schema.get(), fs_data);
      Cohort test_c = load_cohort(schema.get(), fs_test);
      char* report = nullptr;
      int partial = 0;
      check(cb_fewshot(schema.get(), train_c.get(), test_c.get(), spec.dump().c_str(), &report, &partial));
      OwnedString r(report);
      write_file(fs_report, r.get());
      if (!fs_out.empty()) {
        char* files = nullptr;
        check(cb_plot(fs_report.c_str(), fs_out.c_str(), &files));
        cb_string_free(files);
      }
      print_table(r.get());
      return partial ? kExitPartial : kExitOk;
    }

    if (embed->parsed()) {
      if (emb_health) {
        char* out = nullptr;
        check(cb_embed_health(emb_endpoint.empty() ? nullptr : emb_endpoint.c_str(), &out));
        OwnedString o(out);
        std::printf("%s\n", o.get());
        return kExitOk;
      }
      if (emb_schema.empty() || emb_files.empty() || emb_cache.empty())
        throw UsageError{"embed needs --schema, --data and --cache (or --health)"};
      json opts = {{"cache", emb_cache}, {"mode", emb_mode}};
      if (!emb_endpoint.empty()) opts["endpoint"] = emb_endpoint;
      if (!emb_model.empty()) opts["model_id"] = emb_model;
      Schema schema = fit_schema(emb_schema, emb_files.front());
      for (const auto& file : emb_files) {
        Cohort c = load_cohort(schema.get(), file);
        char* out = nullptr;
        check(cb_embed(schema.get(), c.get(), opts.dump().c_str(), &out));
        OwnedString o(out);
        std::printf("%s: %s\n", file.c_str(), o.get());
      }
      return kExitOk;
    }

    if (plot->parsed()) {
      char* files = nullptr;
      check(cb_plot(plot_report.c_str(), plot_out.c_str(), &files));
      OwnedString f(files);
      for (const auto& p : json::parse(f.get())) std::printf("%s\n", p.get<std::string>().c_str());
      return kExitOk;
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "clinbench: %s\n", f.message.c_str());
    return cb_status_is_input_error(f.status) ? kExitInput : kExitRuntime;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "clinbench: %s\n", e.message.c_str());
    return kExitInput;
  }
  return kExitOk;
}
