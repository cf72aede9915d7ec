#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "common/error.hpp"
#include "data/cohort.hpp"
#include "data/csv.hpp"
#include "data/fewshot.hpp"
#include "data/schema.hpp"
#include "data/synthetic.hpp"
#include "support/oracles.hpp"

using namespace clinbench::data;
using clinbench::Error;
using clinbench::ErrorKind;

namespace {

SchemaConfig toy_config() {
  SchemaConfig c;
  c.features = {{"Cancer_Type", FeatureKind::Categorical}, {"age", FeatureKind::Continuous}};
  c.endpoints = {"bor", "os_t", "os_e", "pfs_t", "pfs_e"};
  c.subgroup = "Cancer_Type";
  return c;
}

RawTable toy_table() {
  return parse_csv(
      "Cancer_Type,age,bor,os_t,os_e,pfs_t,pfs_e\n"
      "A,1,1,10,1,5,1\n"
      "B,2,0,20,0,7,1\n"
      "A,3,NR,30,1,9,0\n");
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::Contract;
}

}  // namespace

TEST(Csv, QuotedFieldsAndCrlf) {
  const RawTable t = parse_csv("\xEF\xBB\xBFname,note\r\n\"a,b\",\"say \"\"hi\"\"\"\r\nc,\r\n");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.header[0], "name");
  EXPECT_EQ(t.rows[0][0], "a,b");
  EXPECT_EQ(t.rows[0][1], "say \"hi\"");
  EXPECT_EQ(t.rows[1][1], "");
  EXPECT_EQ(parse_csv(format_csv(t)).rows, t.rows);
}

TEST(Csv, RaggedRowIsParseError) { EXPECT_EQ(kind_of([] { parse_csv("a,b\n1\n"); }), ErrorKind::Parse); }

TEST(Csv, NumberFormattingRoundTrips) {
  for (double v : {0.1, 1e-7, 123456.789, -2.5, 0.0}) EXPECT_EQ(*parse_number(format_number(v)), v);
  EXPECT_FALSE(parse_number("12abc").has_value());
  EXPECT_FALSE(parse_number("").has_value());
}

TEST(FitSchema, VocabularyConstructionRule) {
  const CohortSchema s = fit_schema(toy_table(), toy_config());
  const Vocab& v = s.vocabs()[0];
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.lookup(""), 0);
  EXPECT_EQ(v.lookup("XYZ"), 1);
  EXPECT_EQ(v.lookup("A"), 2);
  EXPECT_EQ(v.lookup("B"), 3);
}

TEST(FitSchema, ContinuousStatsUsePopulationFormula) {
  const CohortSchema s = fit_schema(toy_table(), toy_config());
  const ContinuousStats& st = s.stats()[0];
  EXPECT_DOUBLE_EQ(st.median, 2.0);
  EXPECT_DOUBLE_EQ(st.mean, 2.0);
  EXPECT_NEAR(st.std, std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_NEAR(st.std, 0.8165, 1e-4);
  EXPECT_FALSE(st.constant);
}

TEST(FitSchema, EvenCountMedianAveragesMiddlePair) {
  EXPECT_DOUBLE_EQ(compute_stats({4, 1, 3, 2}).median, 2.5);
  EXPECT_TRUE(compute_stats({5, 5, 5}).constant);
  EXPECT_TRUE(compute_stats({}).constant);
}

TEST(FitSchema, MissingColumnIsNamed) {
  SchemaConfig c = toy_config();
  c.features.push_back({"ecog", FeatureKind::Categorical});
  try {
    fit_schema(toy_table(), c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Schema);
    EXPECT_NE(std::string(e.what()).find("'ecog'"), std::string::npos);
  }
}

TEST(FitSchema, NonNumericContinuousReportsRow) {
  const RawTable t = parse_csv("Cancer_Type,age,bor,os_t,os_e,pfs_t,pfs_e\nA,1,1,1,1,1,1\nA,old,1,1,1,1,1\n");
  try {
    fit_schema(t, toy_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(SchemaConfig, JsonDocumentParsesAndRejectsDuplicates) {
  const auto doc = nlohmann::json::parse(R"({
    "features": [{"name": "age", "kind": "continuous"}, {"name": "sex", "kind": "categorical"}],
    "endpoints": {"response": "bor", "os_time": "ot", "os_event": "oe", "pfs_time": "pt", "pfs_event": "pe"},
    "subgroup": null})");
  const SchemaConfig c = schema_config_from_json(doc);
  EXPECT_EQ(c.features.size(), 2u);
  EXPECT_EQ(c.features[0].kind, FeatureKind::Continuous);
  EXPECT_FALSE(c.subgroup.has_value());
  EXPECT_EQ(to_json(c)["features"], doc["features"]);

  auto dup = doc;
  dup["features"][1]["name"] = "age";
  EXPECT_EQ(kind_of([&] { schema_config_from_json(dup); }), ErrorKind::Schema);
  auto bad_kind = doc;
  bad_kind["features"][0]["kind"] = "ordinal";
  EXPECT_EQ(kind_of([&] { schema_config_from_json(bad_kind); }), ErrorKind::Schema);
}

TEST(FitSchema, JsonRoundTripKeepsIdsAndHash) {
  const CohortSchema s = fit_schema(toy_table(), toy_config());
  const CohortSchema back = CohortSchema::from_json(nlohmann::json::parse(s.to_json().dump()));
  EXPECT_EQ(back.vocabs()[0].tokens(), s.vocabs()[0].tokens());
  EXPECT_EQ(back.vocabs()[0].lookup("B"), 3);
  EXPECT_EQ(back.hash(), s.hash());
}

TEST(LoadCohort, NormalizationAndUnknownCategories) {
  const CohortSchema s = fit_schema(toy_table(), toy_config());
  const RawTable test = parse_csv(
      "Cancer_Type,age,bor,os_t,os_e,pfs_t,pfs_e\n"
      "XYZ,2,1,1,1,1,1\n"
      ",,0,1,0,1,0\n");
  const Cohort c = load_cohort(test, s);
  EXPECT_EQ(c[0].continuous[0], 0.0);
  EXPECT_EQ(c[0].categorical[0], Vocab::kUnknown);
  EXPECT_EQ(c[1].categorical[0], Vocab::kMissing);
  // Missing continuous: training median (2), which is also the mean here.
  EXPECT_EQ(c[1].continuous[0], 0.0);
  EXPECT_TRUE(std::isnan(c[1].continuous_raw[0]));
  EXPECT_EQ(c[0].subgroup, "XYZ");
}

TEST(LoadCohort, ResponseLabelsAndEndpoints) {
  const CohortSchema s = fit_schema(toy_table(), toy_config());
  const Cohort c = load_cohort(toy_table(), s);
  EXPECT_EQ(c[0].bor, 1);
  EXPECT_EQ(c[2].bor, 0);
  EXPECT_EQ(c[1].os_event, 0);
  EXPECT_EQ(c.responders(), 1u);
  EXPECT_EQ(c.os_events(), 2u);
  EXPECT_EQ(c.subgroups(), (std::vector<std::string>{"A", "B"}));
}

TEST(LoadCohort, ValidationErrors) {
  const CohortSchema s = fit_schema(toy_table(), toy_config());
  EXPECT_EQ(kind_of([&] { load_cohort(parse_csv("Cancer_Type,age,bor,os_t,os_e,pfs_t,pfs_e\nA,1,1,-1,1,1,1\n"), s); }),
            ErrorKind::Validation);
  EXPECT_EQ(kind_of([&] { load_cohort(parse_csv("Cancer_Type,age,bor,os_t,os_e,pfs_t,pfs_e\nA,1,1,1,2,1,1\n"), s); }),
            ErrorKind::Validation);
  EXPECT_EQ(kind_of([&] { load_cohort(parse_csv("Cancer_Type,age,bor,os_t,os_e,pfs_t,pfs_e\nA,1,maybe,1,1,1,1\n"), s); }),
            ErrorKind::Validation);
}

TEST(LoadCohort, RoundTripThroughCsvIsValueIdentical) {
  SyntheticConfig cfg;
  cfg.n = 200;
  cfg.missing_rate = 0.1;
  cfg.seed = 4;
  const SyntheticCohort syn = gen_synthetic(cfg);
  const CohortSchema s = fit_schema(syn.table, syn.schema);
  const Cohort a = load_cohort(syn.table, s);
  const Cohort b = load_cohort(parse_csv(format_csv(to_table(a, s))), s);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].categorical, b[i].categorical);
    EXPECT_EQ(a[i].continuous, b[i].continuous);
    EXPECT_EQ(a[i].bor, b[i].bor);
    EXPECT_EQ(a[i].os_time, b[i].os_time);
    EXPECT_EQ(a[i].pfs_event, b[i].pfs_event);
    EXPECT_EQ(a[i].subgroup, b[i].subgroup);
  }
}

TEST(Normalization, DenormalizeInvertsNormalize) {
  const ContinuousStats st = compute_stats({1.5, -3.25, 7.0, 0.125, 2.0});
  for (double x : {1.5, -3.25, 7.0, 1e3, -1e-3}) EXPECT_NEAR(st.denormalize(st.normalize(x)), x, 1e-12);
}

namespace {
Cohort labelled_cohort(std::size_t n_pos, std::size_t n_neg) {
  std::vector<PatientRecord> recs;
  for (std::size_t i = 0; i < n_pos + n_neg; ++i) {
    PatientRecord r;
    r.id = std::to_string(i);
    r.bor = i < n_pos ? 1 : 0;
    recs.push_back(r);
  }
  return Cohort(std::move(recs));
}
}  // namespace

TEST(SampleFewshot, FullCohortAtK) {
  const Cohort c = labelled_cohort(4, 6);
  const auto idx = sample_fewshot(c, 10, 3, true);
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
}

TEST(SampleFewshot, DeterministicAndWithoutReplacement) {
  const Cohort c = labelled_cohort(30, 70);
  for (bool strat : {true, false}) {
    const auto a = sample_fewshot(c, 12, 7, strat);
    EXPECT_EQ(a, sample_fewshot(c, 12, 7, strat));
    EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 12u);
  }
}

TEST(SampleFewshot, StratifiedAllocation) {
  const Cohort c = labelled_cohort(10, 10);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto idx = sample_fewshot(c, 6, seed, true);
    std::size_t pos = 0;
    for (std::size_t i : idx) pos += c[i].bor;
    EXPECT_EQ(pos, 3u);
  }
  // Odd k: the larger share moves between classes with the seed.
  std::set<std::size_t> shares;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::size_t pos = 0;
    for (std::size_t i : sample_fewshot(c, 7, seed, true)) pos += c[i].bor;
    EXPECT_TRUE(pos == 3 || pos == 4);
    shares.insert(pos);
  }
  EXPECT_EQ(shares.size(), 2u);
}

TEST(SampleFewshot, MissingClassIsSamplingError) {
  const Cohort c = labelled_cohort(0, 10);
  EXPECT_EQ(kind_of([&] { sample_fewshot(c, 4, 0, true); }), ErrorKind::Sampling);
  EXPECT_EQ(sample_fewshot(c, 4, 0, false).size(), 4u);
}

TEST(SampleFewshot, DistinctSeedsGiveDifferentSubsets) {
  const Cohort c = labelled_cohort(50, 50);
  std::set<std::vector<std::size_t>> subsets;
  for (std::uint64_t seed = 0; seed < 10; ++seed) subsets.insert(sample_fewshot(c, 6, seed, true));
  EXPECT_GT(subsets.size(), 1u);
}

TEST(FewShotSpec, Validation) {
  FewShotSpec spec;
  spec.ks = {6, std::nullopt};
  spec.seeds = {0, 1, 2};
  EXPECT_NO_THROW(spec.validate());
  spec.ks = {1};
  EXPECT_EQ(kind_of([&] { spec.validate(); }), ErrorKind::Validation);
  spec.ks = {6};
  spec.seeds.clear();
  EXPECT_EQ(kind_of([&] { spec.validate(); }), ErrorKind::Validation);
}

TEST(Synthetic, ByteIdenticalForSameSeed) {
  SyntheticConfig cfg;
  cfg.n = 300;
  cfg.missing_rate = 0.05;
  cfg.seed = 42;
  EXPECT_EQ(format_csv(gen_synthetic(cfg).table), format_csv(gen_synthetic(cfg).table));
  SyntheticConfig other = cfg;
  other.seed = 43;
  EXPECT_NE(format_csv(gen_synthetic(cfg).table), format_csv(gen_synthetic(other).table));
}

TEST(Synthetic, NoCensoringMeansAllEvents) {
  SyntheticConfig cfg;
  cfg.n = 500;
  cfg.censor_rate = 0.0;
  const SyntheticCohort syn = gen_synthetic(cfg);
  const Cohort c = load_cohort(syn.table, fit_schema(syn.table, syn.schema));
  EXPECT_EQ(c.os_events(), c.size());
  EXPECT_EQ(c.pfs_events(), c.size());
  for (const auto& r : c.records()) EXPECT_LE(r.pfs_time, r.os_time);
}

TEST(Synthetic, NoHazardSignalGivesRandomConcordance) {
  SyntheticConfig cfg;
  cfg.n = 2000;
  cfg.hazard_coef = 0.0;
  cfg.seed = 7;
  const SyntheticCohort syn = gen_synthetic(cfg);
  const Cohort c = load_cohort(syn.table, fit_schema(syn.table, syn.schema));
  std::vector<double> t;
  std::vector<int> e;
  for (const auto& r : c.records()) {
    t.push_back(r.os_time);
    e.push_back(r.os_event);
  }
  EXPECT_NEAR(clinbench::testing::cindex_brute(syn.latent, t, e), 0.5, 0.02);
}

TEST(Synthetic, LargeCoefficientsSeparateResponders) {
  SyntheticConfig cfg;
  cfg.n = 2000;
  cfg.signal_scale = 1000.0;
  cfg.seed = 11;
  const SyntheticCohort syn = gen_synthetic(cfg);
  const Cohort c = load_cohort(syn.table, fit_schema(syn.table, syn.schema));
  std::vector<int> y;
  for (const auto& r : c.records()) y.push_back(r.bor);
  EXPECT_GE(clinbench::testing::auc_brute(syn.latent, y), 0.99);
}

TEST(Synthetic, SchemaDeclaresSubgroupAndId) {
  SyntheticConfig cfg;
  cfg.n = 50;
  const SyntheticCohort syn = gen_synthetic(cfg);
  EXPECT_EQ(syn.schema.subgroup, std::optional<std::string>("cancer_type"));
  EXPECT_EQ(syn.schema.features.size(), cfg.cat_cardinalities.size() + cfg.n_continuous);
  const Cohort c = load_cohort(syn.table, fit_schema(syn.table, syn.schema));
  EXPECT_EQ(c[0].id, "P000001");
  EXPECT_FALSE(c.subgroups().empty());
}

TEST(Synthetic, ConfigValidation) {
  SyntheticConfig cfg;
  cfg.baseline_hazard = 0.0;
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::Validation);
  cfg = {};
  cfg.censor_rate = -1.0;
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::Validation);
  cfg = {};
  EXPECT_EQ(SyntheticConfig::from_json(cfg.to_json()).to_json(), cfg.to_json());
}
