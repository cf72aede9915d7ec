#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "common/error.hpp"
#include "data/synthetic.hpp"
#include "losses/losses.hpp"
#include "model/model.hpp"
#include "support/gradcheck.hpp"
#include "support/gradient_cases.hpp"

using namespace clinbench::model;
using clinbench::Error;
using clinbench::ErrorKind;
using clinbench::numerics::CounterRng;
using clinbench::numerics::GradMode;
using namespace clinbench::data;

namespace {

struct Fixture {
  CohortSchema schema;
  Cohort cohort;
};

Fixture synthetic_fixture(std::size_t n, std::vector<std::size_t> cards, std::size_t n_cont, std::uint64_t seed = 1) {
  SyntheticConfig cfg;
  cfg.n = n;
  cfg.cat_cardinalities = std::move(cards);
  cfg.n_continuous = n_cont;
  cfg.seed = seed;
  cfg.subgroup_feature = std::nullopt;
  const SyntheticCohort syn = gen_synthetic(cfg);
  Fixture f;
  f.schema = fit_schema(syn.table, syn.schema);
  f.cohort = load_cohort(syn.table, f.schema);
  return f;
}

ModelConfig small_config(Architecture a) {
  ModelConfig c;
  c.architecture = a;
  c.dim = 8;
  c.layers = 2;
  c.heads = 2;
  c.ff_dim = 16;
  c.attention_dropout = 0.0;
  c.ff_dropout = 0.0;
  c.init_seed = 3;
  if (c.is_llm()) c.embedding_dim = 12;
  return c;
}

/// Deterministic fake embeddings shaped for the model's input.
Batch with_embeddings(Batch b, const Model& m, std::size_t n_features, std::uint64_t seed) {
  const bool pooled = m.config().architecture == Architecture::LlmLinear;
  b.embedding_tokens = pooled ? 1 : n_features;
  b.embedding_dim = m.config().embedding_dim;
  CounterRng rng(seed, 0);
  b.embeddings.resize(b.size * b.embedding_tokens * b.embedding_dim);
  for (double& v : b.embeddings) v = rng.normal();
  return b;
}

Batch input_for(const Model& m, const Fixture& f, std::uint64_t seed = 5) {
  Batch b = make_batch(f.cohort, f.schema);
  return m.config().is_llm() ? with_embeddings(std::move(b), m, f.schema.feature_count(), seed) : b;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::Contract;
}

const Architecture kAll[] = {Architecture::ClinTaT, Architecture::TabTransformer, Architecture::LlmLinear,
                             Architecture::LlmTransformer};

}  // namespace

TEST(BuildModel, ClinTaTSequenceLength) {
  const Fixture f = synthetic_fixture(40, {3, 3, 3, 3, 3}, 11);
  ModelConfig c = small_config(Architecture::ClinTaT);
  EXPECT_EQ(Model::build(c, f.schema).sequence_length(), 16u);
  c.pooling = Pooling::Cls;
  EXPECT_EQ(Model::build(c, f.schema).sequence_length(), 17u);
  c.architecture = Architecture::TabTransformer;
  EXPECT_EQ(Model::build(c, f.schema).sequence_length(), 6u);
}

TEST(BuildModel, LlmLinearParameterCount) {
  const Fixture f = synthetic_fixture(20, {3}, 1);
  ModelConfig c;
  c.architecture = Architecture::LlmLinear;
  c.embedding_dim = 768;
  const Model m = Model::build(c, f.schema);
  EXPECT_EQ(m.parameter_count(), 768u * (2 + 1 + 1) + 4);
  EXPECT_EQ(m.parameter_count(), 3076u);
  ASSERT_EQ(m.parameters().size(), 2u);
  EXPECT_EQ(m.parameters()[0].name, "head.weight");
  EXPECT_EQ(m.parameters()[1].name, "head.bias");
}

TEST(BuildModel, HandDerivedCensus) {
  // Two categorical columns with 2 and 1 categories (vocab 4 and 3 with the
  // reserved ids) and one continuous column.
  const RawTable t = parse_csv(
      "c1,c2,x,bor,ot,oe,pt,pe\n"
      "a,u,1.0,1,1,1,1,1\n"
      "b,u,2.0,0,2,0,2,1\n");
  SchemaConfig sc;
  sc.features = {{"c1", FeatureKind::Categorical}, {"c2", FeatureKind::Categorical}, {"x", FeatureKind::Continuous}};
  sc.endpoints = {"bor", "ot", "oe", "pt", "pe"};
  const CohortSchema schema = fit_schema(t, sc);
  ModelConfig c = small_config(Architecture::ClinTaT);
  c.ff_dim = 0;  // 4 * 8 = 32

  const std::size_t embed = (4 + 3) * 8 + (8 + 8);
  const std::size_t layer = 2 * 8 + (4 * 8 * 8 + 4 * 8) + 2 * 8 + (8 * 32 + 32 + 32 * 8 + 8);
  const std::size_t final_norm = 2 * 8;
  const std::size_t mlp = 3 * 8 * 8 + 8;
  const std::size_t head = 8 * 4 + 4;
  EXPECT_EQ(Model::build(c, schema).parameter_count(), embed + 2 * layer + final_norm + mlp + head);
  EXPECT_EQ(Model::build(c, schema).parameter_count(), 2068u);
}

TEST(BuildModel, DeterministicAcrossBuilds) {
  const Fixture f = synthetic_fixture(30, {3, 2}, 2);
  for (Architecture a : kAll) {
    const Model m1 = Model::build(small_config(a), f.schema);
    const Model m2 = Model::build(small_config(a), f.schema);
    ASSERT_EQ(m1.parameters().size(), m2.parameters().size());
    EXPECT_EQ(m1.parameter_count(), m2.parameter_count());
    for (std::size_t i = 0; i < m1.parameters().size(); ++i) {
      EXPECT_EQ(m1.parameters()[i].name, m2.parameters()[i].name);
      EXPECT_EQ(m1.parameters()[i].value, m2.parameters()[i].value);
    }
  }
}

TEST(BuildModel, NamesAreUnique) {
  const Fixture f = synthetic_fixture(30, {3, 2}, 2);
  for (Architecture a : kAll) {
    ModelConfig c = small_config(a);
    c.embedding_dim = 8;
    c.pooling = a == Architecture::LlmLinear ? std::nullopt : std::optional<Pooling>(Pooling::Cls);
    const Model m = Model::build(c, f.schema);
    std::set<std::string> names;
    for (const auto& p : m.parameters()) names.insert(p.name);
    EXPECT_EQ(names.size(), m.parameters().size());
  }
}

TEST(BuildModel, ConfigErrors) {
  const Fixture f = synthetic_fixture(30, {3}, 2);
  ModelConfig c = small_config(Architecture::ClinTaT);
  c.heads = 3;
  EXPECT_EQ(kind_of([&] { Model::build(c, f.schema); }), ErrorKind::Validation);
  c = small_config(Architecture::ClinTaT);
  c.attention_dropout = 1.0;
  EXPECT_EQ(kind_of([&] { Model::build(c, f.schema); }), ErrorKind::Validation);

  const Fixture cont_only = synthetic_fixture(30, {}, 3);
  EXPECT_EQ(kind_of([&] { Model::build(small_config(Architecture::TabTransformer), cont_only.schema); }),
            ErrorKind::Build);
  EXPECT_NO_THROW(Model::build(small_config(Architecture::ClinTaT), cont_only.schema));
}

TEST(BuildModel, ConfigJsonRoundTrip) {
  ModelConfig c = small_config(Architecture::LlmTransformer);
  c.pooling = Pooling::Cls;
  const ModelConfig back = ModelConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(kind_of([] { ModelConfig::from_json({{"architecture", "mlp"}}); }), ErrorKind::Validation);
}

TEST(Forward, ZeroHeadGivesZeroOutputs) {
  const Fixture f = synthetic_fixture(25, {3, 2}, 2);
  for (Architecture a : kAll) {
    Model m = Model::build(small_config(a), f.schema);
    for (auto& p : m.parameters())
      if (p.name.rfind("head.", 0) == 0) p.value = Tensor::zeros(p.value.shape());
    const Tensor out = m.predict_raw(input_for(m, f));
    for (double v : out.data()) EXPECT_EQ(v, 0.0) << to_string(a);
    EXPECT_EQ(m.predict(input_for(m, f)).responder_prob[0], 0.5);
  }
}

TEST(Forward, EvalIsBitIdentical) {
  const Fixture f = synthetic_fixture(25, {3, 2}, 2);
  for (Architecture a : kAll) {
    ModelConfig c = small_config(a);
    c.attention_dropout = 0.3;
    c.ff_dropout = 0.1;
    const Model m = Model::build(c, f.schema);
    const Batch b = input_for(m, f);
    EXPECT_EQ(m.predict_raw(b), m.predict_raw(b)) << to_string(a);
  }
}

TEST(Forward, TrainEqualsEvalWithoutDropout) {
  const Fixture f = synthetic_fixture(25, {3, 2}, 2);
  for (Architecture a : kAll) {
    const Model m = Model::build(small_config(a), f.schema);
    const Batch b = input_for(m, f);
    Tape tape;
    CounterRng rng(9);
    const Tensor train = m.forward(tape, m.bind(tape), b, Mode::Train, rng).out.value();
    EXPECT_EQ(train, m.predict_raw(b)) << to_string(a);
  }
}

TEST(Forward, DropoutChangesTrainOutputOnly) {
  const Fixture f = synthetic_fixture(25, {3, 2}, 2);
  ModelConfig c = small_config(Architecture::ClinTaT);
  c.attention_dropout = 0.3;
  c.ff_dropout = 0.1;
  const Model m = Model::build(c, f.schema);
  const Batch b = input_for(m, f);
  Tape tape;
  CounterRng rng(9);
  EXPECT_NE(m.forward(tape, m.bind(tape), b, Mode::Train, rng).out.value(), m.predict_raw(b));
}

TEST(Forward, BatchEqualsRecordByRecord) {
  const Fixture f = synthetic_fixture(12, {3, 2}, 3);
  for (Architecture a : kAll) {
    for (Pooling pool : {Pooling::Flatten, Pooling::Mean, Pooling::Cls}) {
      ModelConfig c = small_config(a);
      if (a != Architecture::LlmLinear) c.pooling = pool;
      const Model m = Model::build(c, f.schema);
      const Batch b = input_for(m, f);
      const Tensor all = m.predict_raw(b);
      for (std::size_t i = 0; i < b.size; ++i) {
        const std::size_t idx[] = {i};
        const Tensor one = m.predict_raw(b.rows(idx));
        for (std::size_t k = 0; k < kHeadWidth; ++k) EXPECT_NEAR(one[k], all[i * kHeadWidth + k], 1e-12);
      }
    }
  }
}

TEST(Forward, AttentionRowsSumToOne) {
  const Fixture f = synthetic_fixture(10, {3, 2}, 3);
  const Model m = Model::build(small_config(Architecture::ClinTaT), f.schema);
  std::vector<Tensor> attn;
  Tape tape(GradMode::Disabled);
  CounterRng rng(0);
  m.forward(tape, m.bind(tape), input_for(m, f), Mode::Eval, rng, {&attn});
  ASSERT_EQ(attn.size(), 2u);
  for (const Tensor& p : attn) {
    const std::size_t t = p.shape()[2];
    EXPECT_EQ(p.shape()[0], 10u * 2u);
    for (std::size_t r = 0; r < p.size() / t; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < t; ++k) s += p[r * t + k];
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Forward, PermutingTokensPermutesContextualTokens) {
  const Fixture f = synthetic_fixture(6, {3, 4, 2}, 3);
  ModelConfig c = small_config(Architecture::ClinTaT);
  const Model m = Model::build(c, f.schema);
  const Batch b = make_batch(f.cohort, f.schema);
  const std::vector<std::size_t> perm{4, 0, 5, 2, 1, 3};

  Tape tape(GradMode::Disabled);
  const auto bound = m.bind(tape);
  CounterRng rng(0);
  const Var tok = m.tokens(tape, bound, b);
  const Tensor base = m.encode(bound, tok, Mode::Eval, rng).value();
  std::vector<Var> parts;
  for (std::size_t j : perm) parts.push_back(clinbench::numerics::slice(tok, 1, j, j + 1));
  const Tensor permuted = m.encode(bound, clinbench::numerics::concat(parts, 1), Mode::Eval, rng).value();

  const std::size_t n = b.size, t = perm.size(), d = c.dim;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t pos = 0; pos < t; ++pos)
      for (std::size_t k = 0; k < d; ++k)
        EXPECT_NEAR(permuted[(i * t + pos) * d + k], base[(i * t + perm[pos]) * d + k], 1e-9);
}

TEST(Forward, EmbeddingShapeMismatchIsDimensionError) {
  const Fixture f = synthetic_fixture(5, {3}, 2);
  const Model m = Model::build(small_config(Architecture::LlmTransformer), f.schema);
  Batch b = input_for(m, f);
  b.embedding_tokens = 2;
  EXPECT_EQ(kind_of([&] { m.predict_raw(b); }), ErrorKind::Dimension);
  b = input_for(m, f);
  b.embedding_dim = 5;
  EXPECT_EQ(kind_of([&] { m.predict_raw(b); }), ErrorKind::Dimension);
}

TEST(Forward, UnknownCategoryIdOutOfRangeIsIndexError) {
  const Fixture f = synthetic_fixture(5, {3}, 2);
  const Model m = Model::build(small_config(Architecture::ClinTaT), f.schema);
  Batch b = input_for(m, f);
  b.categorical[0] = 99;
  EXPECT_EQ(kind_of([&] { m.predict_raw(b); }), ErrorKind::Index);
}

class ModelGradient : public ::testing::TestWithParam<std::tuple<Architecture, Pooling>> {};

TEST_P(ModelGradient, MultiTaskLossMatchesFiniteDifferences) {
  const auto [arch, pool] = GetParam();
  const auto r = clinbench::testing::model_gradcheck(arch, pool, 0);
  EXPECT_LT(r.max_relative_error, 1e-4);
  EXPECT_GT(r.coordinates_checked, 0u);
}

INSTANTIATE_TEST_SUITE_P(
    Architectures, ModelGradient,
    ::testing::Values(std::tuple{Architecture::ClinTaT, Pooling::Flatten}, std::tuple{Architecture::ClinTaT, Pooling::Mean},
                      std::tuple{Architecture::ClinTaT, Pooling::Cls},
                      std::tuple{Architecture::TabTransformer, Pooling::Flatten},
                      std::tuple{Architecture::LlmLinear, Pooling::Mean},
                      std::tuple{Architecture::LlmTransformer, Pooling::Mean},
                      std::tuple{Architecture::LlmTransformer, Pooling::Cls}),
    [](const auto& info) {
      return to_string(std::get<0>(info.param)) + "_" + to_string(std::get<1>(info.param));
    });
