#include <gtest/gtest.h>

#include <filesystem>
#include <regex>

#include "bench/bench.hpp"
#include "bench/plots.hpp"
#include "common/error.hpp"
#include "data/csv.hpp"
#include "data/synthetic.hpp"

using namespace clinbench::bench;
using namespace clinbench::data;
using clinbench::Error;
using clinbench::ErrorKind;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Split {
  CohortSchema schema;
  Cohort train, test;
};

Split split(std::size_t n_train, std::size_t n_test, std::uint64_t seed = 1) {
  SyntheticConfig cfg;
  cfg.n = n_train + n_test;
  cfg.seed = seed;
  cfg.signal_scale = 1.5;
  const auto syn = gen_synthetic(cfg);
  Split s;
  s.schema = fit_schema(syn.table, syn.schema);
  const Cohort all = load_cohort(syn.table, s.schema);
  std::vector<std::size_t> tr, te;
  for (std::size_t i = 0; i < cfg.n; ++i) (i < n_train ? tr : te).push_back(i);
  s.train = all.subset(tr);
  s.test = all.subset(te);
  return s;
}

BenchModel tiny_clintat() {
  BenchModel m;
  m.name = "clintat";
  m.model.dim = 8;
  m.model.layers = 1;
  m.model.heads = 2;
  m.model.ff_dim = 16;
  m.train.total_epochs = 4;
  m.train.warmup_epochs = 1;
  m.train.base_lr = 1e-2;
  return m;
}

BenchModel logres() {
  BenchModel m;
  m.name = "logres";
  m.kind = ModelKind::LogRes;
  return m;
}

FewShotSpec spec(std::vector<std::optional<std::size_t>> ks, std::vector<std::uint64_t> seeds) {
  FewShotSpec s;
  s.ks = std::move(ks);
  s.seeds = std::move(seeds);
  return s;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("clinbench_bench_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Bench, DegenerateGridEqualsSingleRun) {
  const Split s = split(120, 60);
  const auto r = run_fewshot({tiny_clintat()}, s.train, s.test, s.schema, spec({std::nullopt}, {7}));
  ASSERT_EQ(r.cells.size(), 1u);
  const CellOutcome direct = run_cell(tiny_clintat(), s.train, s.test, s.schema, std::nullopt, 7, spec({std::nullopt}, {7}));
  ASSERT_TRUE(direct.report);
  const json table = report_json(r)["tables"]["auc"]["rows"][0]["cells"][0];
  EXPECT_EQ(table["k"], "all");
  EXPECT_EQ(table["mean"].get<double>(), *direct.report->overall.auc.value);
  EXPECT_EQ(table["values"][0].get<double>(), *direct.report->overall.auc.value);
}

TEST(Bench, ReportIsByteIdenticalAcrossRunsAndPoolWidths) {
  const Split s = split(100, 50);
  const auto sp = spec({6, std::nullopt}, {0, 1});
  BenchOptions one, four;
  four.jobs = 4;
  const std::string a = report_json(run_fewshot({tiny_clintat(), logres()}, s.train, s.test, s.schema, sp, one)).dump();
  const std::string b = report_json(run_fewshot({tiny_clintat(), logres()}, s.train, s.test, s.schema, sp, four)).dump();
  const std::string c = report_json(run_fewshot({tiny_clintat(), logres()}, s.train, s.test, s.schema, sp, one)).dump();
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_EQ(a.find("timestamps"), std::string::npos);
}

TEST(Bench, MeansRecomputableFromSeedValues) {
  const Split s = split(100, 60);
  const json rep = report_json(run_fewshot({logres()}, s.train, s.test, s.schema, spec({8, 20}, {0, 1, 2})));
  for (const char* metric : {"auc", "c_os", "c_pfs"})
    for (const auto& row : rep["tables"][metric]["rows"])
      for (const auto& cell : row["cells"]) {
        ASSERT_EQ(cell["seeds"].size(), 3u);
        ASSERT_EQ(cell["values"].size(), 3u);
        double sum = 0;
        int n = 0;
        for (const auto& v : cell["values"])
          if (v.is_number()) sum += v.get<double>(), ++n;
        if (n) EXPECT_NEAR(cell["mean"].get<double>(), sum / n, 1e-12);
        for (const auto& [name, g] : cell["subgroups"].items()) EXPECT_EQ(g["values"].size(), 3u) << name;
      }
}

TEST(Bench, FailingCellIsNullWithReason) {
  const Split s = split(30, 40);
  const auto r = run_fewshot({logres()}, s.train, s.test, s.schema, spec({500}, {0}));
  EXPECT_TRUE(r.partial());
  const json cell = report_json(r)["tables"]["auc"]["rows"][0]["cells"][0];
  EXPECT_TRUE(cell["mean"].is_null());
  EXPECT_TRUE(cell["values"][0].is_null());
  EXPECT_NE(cell["errors"]["0"].get<std::string>().find("sampling"), std::string::npos);
}

TEST(Bench, SubgroupPoolDrawsOnlyFromThatGroup) {
  const Split s = split(150, 50);
  FewShotSpec sp = spec({std::nullopt}, {0});
  sp.subgroup_pool = s.train.subgroups().front();
  const auto r = run_fewshot({logres()}, s.train, s.test, s.schema, sp);
  EXPECT_TRUE(r.cells[0].report.has_value()) << r.cells[0].error;
  sp.subgroup_pool = "no such group";
  EXPECT_FALSE(run_fewshot({logres()}, s.train, s.test, s.schema, sp).cells[0].report.has_value());
}

TEST(Bench, ReportRoundTripsThroughText) {
  const Split s = split(80, 40);
  const json rep = report_json(run_fewshot({logres()}, s.train, s.test, s.schema, spec({std::nullopt}, {0})));
  EXPECT_EQ(json::parse(rep.dump(2)), rep);
  for (const char* key : {"meta", "tables", "curves"}) EXPECT_TRUE(rep.contains(key));
  EXPECT_FALSE(rep["curves"]["roc"].empty());
  EXPECT_FALSE(rep["curves"]["km"].empty());
}

TEST(Bench, LlmModelsNeedPrecomputedInputs) {
  const Split s = split(40, 20);
  BenchModel m = tiny_clintat();
  m.model.architecture = clinbench::model::Architecture::LlmLinear;
  m.model.embedding_dim = 4;
  try {
    run_fewshot({m}, s.train, s.test, s.schema, spec({std::nullopt}, {0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Contract);
  }
}

TEST(Plots, RocEndpointsInPlotCoordinates) {
  const std::string svg = roc_svg("t", {{"overall", std::vector<std::pair<double, double>>{{0, 0}, {0.5, 0.8}, {1, 1}}}});
  const PlotFrame f;
  const std::regex poly("<polyline fill=\"none\" stroke=\"#1f77b4\"[^>]*points=\"([^\"]*)\"");
  std::smatch m;
  ASSERT_TRUE(std::regex_search(svg, m, poly));
  const std::string pts = m[1];
  const auto first = pts.substr(0, pts.find(' '));
  const auto last = pts.substr(pts.rfind(' ') + 1);
  char expect_first[64], expect_last[64];
  std::snprintf(expect_first, sizeof expect_first, "%.2f,%.2f", f.left, f.top + f.height);
  std::snprintf(expect_last, sizeof expect_last, "%.2f,%.2f", f.left + f.width, f.top);
  EXPECT_EQ(first, expect_first);
  EXPECT_EQ(last, expect_last);
}

TEST(Plots, EmptySeriesGetsNaLegend) {
  const std::string svg = km_svg("km <&>", {{"predicted responders", std::nullopt}, {"observed", std::vector<std::pair<double, double>>{{0, 1}, {2, 1}, {2, 0.5}}, true}});
  EXPECT_NE(svg.find("predicted responders (n/a)"), std::string::npos);
  EXPECT_NE(svg.find("km &lt;&amp;&gt;"), std::string::npos);
  EXPECT_EQ(svg.rfind("</svg>\n"), svg.size() - 7);
}

TEST(Plots, KmStepsFromCurveJson) {
  const json curve = {{"n", 3}, {"times", {1.0, 3.0}}, {"survival", {0.5, 0.25}}, {"at_risk", {3, 1}}, {"events", {1, 1}}};
  const auto pts = km_steps(curve);
  const std::vector<std::pair<double, double>> want{{0, 1}, {1, 1}, {1, 0.5}, {3, 0.5}, {3, 0.25}};
  EXPECT_EQ(pts, want);
}

TEST(Plots, EmitWritesSvgAndCsvPerCurve) {
  const Split s = split(80, 40);
  const json rep = report_json(run_fewshot({logres()}, s.train, s.test, s.schema, spec({std::nullopt}, {0})));
  const fs::path dir = scratch("plots");
  const auto files = emit_plots(rep, dir.string());
  EXPECT_TRUE(fs::exists(dir / "roc_logres.svg"));
  EXPECT_TRUE(fs::exists(dir / "km_logres_overall_os.svg"));
  const RawTable csv = read_csv((dir / "km_logres_overall_pfs.csv").string());
  EXPECT_EQ(csv.header, (std::vector<std::string>{"group", "series", "x", "y", "at_risk"}));
  EXPECT_FALSE(csv.rows.empty());
  for (const auto& f : files) EXPECT_FALSE(fs::exists(f + ".tmp"));
  fs::remove_all(dir);
}

TEST(Plots, UnwritablePathIsIoErrorWithoutPartialFiles) {
  const fs::path file = scratch("blocker");
  write_text_file_atomic(file.string(), "x");
  const Split s = split(60, 30);
  const auto r = run_fewshot({logres()}, s.train, s.test, s.schema, spec({std::nullopt}, {0}));
  try {
    emit_report(r, (file / "report.json").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
  try {
    emit_plots(report_json(r), (file / "plots").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
  EXPECT_TRUE(fs::is_regular_file(file));
  fs::remove(file);
}
