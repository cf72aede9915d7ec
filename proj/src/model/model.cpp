#include "model/model.hpp"

#include <cmath>

#include "common/error.hpp"

namespace clinbench::model {

using data::FeatureKind;
using nlohmann::json;
using numerics::CounterRng;
using numerics::Shape;

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::ClinTaT: return "clintat";
    case Architecture::TabTransformer: return "tabtransformer";
    case Architecture::LlmLinear: return "llm_linear";
    case Architecture::LlmTransformer: return "llm_transformer";
  }
  return "clintat";
}

std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::Flatten: return "flatten";
    case Pooling::Mean: return "mean";
    case Pooling::Cls: return "cls";
  }
  return "flatten";
}

Architecture architecture_from_string(const std::string& s) {
  for (Architecture a : {Architecture::ClinTaT, Architecture::TabTransformer, Architecture::LlmLinear,
                         Architecture::LlmTransformer})
    if (to_string(a) == s) return a;
  fail(ErrorKind::Validation, "unknown architecture '" + s + "'");
}

Pooling pooling_from_string(const std::string& s) {
  for (Pooling p : {Pooling::Flatten, Pooling::Mean, Pooling::Cls})
    if (to_string(p) == s) return p;
  fail(ErrorKind::Validation, "unknown pooling '" + s + "'");
}

Pooling ModelConfig::resolved_pooling() const {
  if (pooling) return *pooling;
  return architecture == Architecture::LlmTransformer || architecture == Architecture::LlmLinear ? Pooling::Mean
                                                                                                 : Pooling::Flatten;
}

void ModelConfig::validate() const {
  require(dim > 0 && heads > 0 && dim % heads == 0, ErrorKind::Validation,
          "model dim " + std::to_string(dim) + " is not divisible by " + std::to_string(heads) + " heads");
  require(layers >= 1, ErrorKind::Validation, "model needs at least one layer");
  require(attention_dropout >= 0.0 && attention_dropout < 1.0 && ff_dropout >= 0.0 && ff_dropout < 1.0,
          ErrorKind::Validation, "dropout rates must lie in [0, 1)");
  if (is_llm()) require(embedding_dim > 0, ErrorKind::Validation, "LLM variants need the embedding dim");
}

json ModelConfig::to_json() const {
  return {{"architecture", to_string(architecture)},
          {"dim", dim},
          {"layers", layers},
          {"heads", heads},
          {"attention_dropout", attention_dropout},
          {"ff_dropout", ff_dropout},
          {"ff_dim", ff_width()},
          {"pooling", to_string(resolved_pooling())},
          {"embedding_dim", embedding_dim},
          {"init_seed", init_seed}};
}

ModelConfig ModelConfig::from_json(const json& doc) {
  require(doc.is_object(), ErrorKind::Validation, "model config must be a JSON object");
  ModelConfig c;
  try {
    if (doc.contains("architecture")) c.architecture = architecture_from_string(doc["architecture"].get<std::string>());
    c.dim = doc.value("dim", c.dim);
    c.layers = doc.value("layers", c.layers);
    c.heads = doc.value("heads", c.heads);
    c.attention_dropout = doc.value("attention_dropout", c.attention_dropout);
    c.ff_dropout = doc.value("ff_dropout", c.ff_dropout);
    c.ff_dim = doc.value("ff_dim", c.ff_dim);
    if (doc.contains("pooling") && !doc["pooling"].is_null())
      c.pooling = pooling_from_string(doc["pooling"].get<std::string>());
    c.embedding_dim = doc.value("embedding_dim", c.embedding_dim);
    c.init_seed = doc.value("init_seed", c.init_seed);
  } catch (const json::exception& e) {
    fail(ErrorKind::Validation, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

Batch Batch::rows(std::span<const std::size_t> indices) const {
  Batch b;
  b.size = indices.size();
  b.embedding_tokens = embedding_tokens;
  b.embedding_dim = embedding_dim;
  const std::size_t nc = size ? categorical.size() / size : 0;
  const std::size_t nx = size ? continuous.size() / size : 0;
  const std::size_t ne = embedding_tokens * embedding_dim;
  for (std::size_t i : indices) {
    require(i < size, ErrorKind::Index, "batch row " + std::to_string(i) + " out of range");
    b.categorical.insert(b.categorical.end(), categorical.begin() + i * nc, categorical.begin() + (i + 1) * nc);
    b.continuous.insert(b.continuous.end(), continuous.begin() + i * nx, continuous.begin() + (i + 1) * nx);
    if (!embeddings.empty())
      b.embeddings.insert(b.embeddings.end(), embeddings.begin() + i * ne, embeddings.begin() + (i + 1) * ne);
  }
  return b;
}

Batch make_batch(const data::Cohort& cohort, const data::CohortSchema& schema) {
  Batch b;
  b.size = cohort.size();
  for (const auto& r : cohort.records()) {
    require(r.categorical.size() == schema.categorical_count() && r.continuous.size() == schema.continuous_count(),
            ErrorKind::Dimension, "record '" + r.id + "' does not match the schema");
    b.categorical.insert(b.categorical.end(), r.categorical.begin(), r.categorical.end());
    b.continuous.insert(b.continuous.end(), r.continuous.begin(), r.continuous.end());
  }
  return b;
}

Var HeadOutputs::bor_logits() const { return numerics::slice(out, 1, kBorLogits, kBorLogits + 2); }
Var HeadOutputs::risk_os() const { return numerics::slice(out, 1, kRiskOs, kRiskOs + 1); }
Var HeadOutputs::risk_pfs() const { return numerics::slice(out, 1, kRiskPfs, kRiskPfs + 1); }

namespace {

constexpr double kInitStd = 0.02;

Tensor normal_init(Shape shape, CounterRng rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal() * kInitStd;
  return t;
}

}  // namespace

std::size_t Model::add_param(std::string name, Tensor value) {
  params_.push_back({std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::size_t Model::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  fail(ErrorKind::Index, "no parameter named '" + name + "'");
}

const Tensor& Model::parameter(const std::string& name) const { return params_[index_of(name)].value; }

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Model Model::build(const ModelConfig& config, const data::CohortSchema& schema) {
  config.validate();
  Model m;
  m.config_ = config;
  m.n_categorical_ = schema.categorical_count();
  m.n_continuous_ = schema.continuous_count();
  m.n_features_ = schema.feature_count();
  const std::size_t d = config.dim;
  const Pooling pooling = config.resolved_pooling();
  CounterRng root(config.init_seed, 0);
  std::uint64_t stream = 0;
  auto weight = [&](std::string name, Shape shape) {
    return m.add_param(std::move(name), normal_init(std::move(shape), root.fork(stream++)));
  };
  auto zeros = [&](std::string name, Shape shape) { return m.add_param(std::move(name), Tensor::zeros(std::move(shape))); };
  auto ones = [&](std::string name, Shape shape) {
    return m.add_param(std::move(name), Tensor::full(std::move(shape), 1.0));
  };

  if (config.architecture == Architecture::LlmLinear) {
    m.head_w_ = weight("head.weight", {config.embedding_dim, kHeadWidth});
    m.head_b_ = zeros("head.bias", {kHeadWidth});
    m.seq_len_ = 1;
    return m;
  }

  switch (config.architecture) {
    case Architecture::ClinTaT:
      require(m.n_features_ > 0, ErrorKind::Build, "clintat needs at least one feature");
      for (std::size_t f = 0; f < schema.feature_count(); ++f) {
        const auto& spec = schema.features()[f];
        const std::size_t k = schema.kind_index(f);
        m.token_features_.push_back({spec.kind, k});
        if (spec.kind == FeatureKind::Categorical) {
          m.cat_tables_.push_back(weight("embed.cat." + spec.name, {schema.vocabs()[k].size(), d}));
        } else {
          const std::size_t w = weight("embed.cont." + spec.name + ".weight", {1, d});
          m.cont_maps_.push_back({w, zeros("embed.cont." + spec.name + ".bias", {d})});
        }
      }
      break;
    case Architecture::TabTransformer:
      require(m.n_categorical_ > 0, ErrorKind::Build, "tabtransformer needs at least one categorical feature");
      for (std::size_t f = 0; f < schema.feature_count(); ++f) {
        const auto& spec = schema.features()[f];
        if (spec.kind != FeatureKind::Categorical) continue;
        const std::size_t k = schema.kind_index(f);
        m.token_features_.push_back({spec.kind, k});
        m.cat_tables_.push_back(weight("embed.cat." + spec.name, {schema.vocabs()[k].size(), d}));
      }
      break;
    case Architecture::LlmTransformer:
      require(m.n_features_ > 0, ErrorKind::Build, "llm_transformer needs at least one feature");
      if (config.embedding_dim != d) {
        m.input_w_ = weight("input_proj.weight", {config.embedding_dim, d});
        m.input_b_ = zeros("input_proj.bias", {d});
      }
      break;
    case Architecture::LlmLinear: break;
  }
  const std::size_t n_tokens = config.architecture == Architecture::LlmTransformer ? m.n_features_ : m.token_features_.size();
  if (pooling == Pooling::Cls) m.cls_ = weight("cls", {1, 1, d});
  m.seq_len_ = n_tokens + (pooling == Pooling::Cls ? 1 : 0);

  const std::size_t f = config.ff_width();
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = "encoder.layers." + std::to_string(l) + ".";
    LayerIndex li{};
    li.ln1_g = ones(p + "ln1.gain", {d});
    li.ln1_b = zeros(p + "ln1.bias", {d});
    li.wq = weight(p + "attn.q.weight", {d, d});
    li.bq = zeros(p + "attn.q.bias", {d});
    li.wk = weight(p + "attn.k.weight", {d, d});
    li.bk = zeros(p + "attn.k.bias", {d});
    li.wv = weight(p + "attn.v.weight", {d, d});
    li.bv = zeros(p + "attn.v.bias", {d});
    li.wo = weight(p + "attn.out.weight", {d, d});
    li.bo = zeros(p + "attn.out.bias", {d});
    li.ln2_g = ones(p + "ln2.gain", {d});
    li.ln2_b = zeros(p + "ln2.bias", {d});
    li.w1 = weight(p + "ff.w1", {d, f});
    li.b1 = zeros(p + "ff.b1", {f});
    li.w2 = weight(p + "ff.w2", {f, d});
    li.b2 = zeros(p + "ff.b2", {d});
    m.layers_.push_back(li);
  }
  m.final_g_ = ones("encoder.norm.gain", {d});
  m.final_b_ = zeros("encoder.norm.bias", {d});

  std::size_t pooled = pooling == Pooling::Flatten ? m.seq_len_ * d : d;
  if (config.architecture == Architecture::LlmTransformer) {
    m.head_w_ = weight("head.weight", {pooled, kHeadWidth});
  } else {
    if (config.architecture == Architecture::TabTransformer) pooled += m.n_continuous_;
    m.mlp_w_ = weight("mlp.weight", {pooled, d});
    m.mlp_b_ = zeros("mlp.bias", {d});
    m.head_w_ = weight("head.weight", {d, kHeadWidth});
  }
  m.head_b_ = zeros("head.bias", {kHeadWidth});
  return m;
}

std::vector<Var> Model::bind(Tape& tape) const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(tape.variable(p.value));
  return out;
}

void Model::check_batch(const Batch& b) const {
  require(b.size > 0, ErrorKind::Dimension, "empty batch");
  if (config_.is_llm()) {
    const std::size_t want_tokens = config_.architecture == Architecture::LlmLinear ? 1 : n_features_;
    require(b.embedding_dim == config_.embedding_dim, ErrorKind::Dimension,
            "embedding dim " + std::to_string(b.embedding_dim) + " does not match the model's " +
                std::to_string(config_.embedding_dim));
    require(b.embedding_tokens == want_tokens, ErrorKind::Dimension,
            "expected " + std::to_string(want_tokens) + " embeddings per record, got " +
                std::to_string(b.embedding_tokens));
    require(b.embeddings.size() == b.size * b.embedding_tokens * b.embedding_dim, ErrorKind::Dimension,
            "embedding buffer has the wrong length");
  } else {
    require(b.categorical.size() == b.size * n_categorical_ && b.continuous.size() == b.size * n_continuous_,
            ErrorKind::Dimension, "batch does not match the schema's feature counts");
  }
}

Var Model::tokens(Tape& tape, const std::vector<Var>& bound, const Batch& batch) const {
  check_batch(batch);
  const std::size_t n = batch.size, d = config_.dim;
  if (config_.is_llm()) {
    const std::size_t t = batch.embedding_tokens, e = batch.embedding_dim;
    Var x = tape.constant(Tensor({n * t, e}, batch.embeddings));
    if (input_w_) x = numerics::affine(x, bound[*input_w_], bound[*input_b_]);
    return numerics::reshape(x, {n, t, input_w_ ? d : e});
  }
  std::vector<Var> parts;
  std::size_t cat = 0, cont = 0;
  for (const auto& [kind, k] : token_features_) {
    Var tok;
    if (kind == FeatureKind::Categorical) {
      std::vector<std::int64_t> ids(n);
      for (std::size_t i = 0; i < n; ++i) ids[i] = batch.categorical[i * n_categorical_ + k];
      tok = numerics::embedding_lookup(bound[cat_tables_[cat++]], ids);
    } else {
      Tensor col({n, 1});
      for (std::size_t i = 0; i < n; ++i) col[i] = batch.continuous[i * n_continuous_ + k];
      const auto [w, b] = cont_maps_[cont++];
      tok = numerics::affine(tape.constant(std::move(col)), bound[w], bound[b]);
    }
    parts.push_back(numerics::reshape(tok, {n, 1, d}));
  }
  return parts.size() == 1 ? parts[0] : numerics::concat(parts, 1);
}

Var Model::encode(const std::vector<Var>& bound, const Var& tokens, Mode mode, CounterRng& rng,
                  const ForwardOptions& options) const {
  require(tokens.shape().size() == 3 && tokens.shape()[2] == config_.dim, ErrorKind::Dimension,
          "encoder input must be [N, T, " + std::to_string(config_.dim) + "], got " + numerics::to_string(tokens.shape()));
  const std::size_t n = tokens.shape()[0], t = tokens.shape()[1], d = config_.dim;
  const std::size_t h = config_.heads, dh = d / h;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  auto split_heads = [&](const Var& m) {
    return numerics::reshape(numerics::permute(numerics::reshape(m, {n, t, h, dh}), {0, 2, 1, 3}), {n * h, t, dh});
  };

  Var x = tokens;
  for (const LayerIndex& li : layers_) {
    // Pre-norm self-attention block.
    Var a = numerics::reshape(numerics::layer_norm(x, bound[li.ln1_g], bound[li.ln1_b]), {n * t, d});
    Var q = split_heads(numerics::affine(a, bound[li.wq], bound[li.bq]));
    Var k = split_heads(numerics::affine(a, bound[li.wk], bound[li.bk]));
    Var v = split_heads(numerics::affine(a, bound[li.wv], bound[li.bv]));
    Var p = numerics::softmax(numerics::scale(numerics::bmm(q, k, false, true), inv_sqrt), 2);
    if (options.attention) options.attention->push_back(p.value());
    p = numerics::dropout(p, config_.attention_dropout, mode, rng);
    Var o = numerics::reshape(numerics::permute(numerics::reshape(numerics::bmm(p, v), {n, h, t, dh}), {0, 2, 1, 3}),
                              {n * t, d});
    o = numerics::affine(o, bound[li.wo], bound[li.bo]);
    x = numerics::add(x, numerics::reshape(o, {n, t, d}));

    // Pre-norm feedforward block.
    Var f = numerics::reshape(numerics::layer_norm(x, bound[li.ln2_g], bound[li.ln2_b]), {n * t, d});
    f = numerics::gelu(numerics::affine(f, bound[li.w1], bound[li.b1]));
    f = numerics::dropout(f, config_.ff_dropout, mode, rng);
    f = numerics::affine(f, bound[li.w2], bound[li.b2]);
    x = numerics::add(x, numerics::reshape(f, {n, t, d}));
  }
  return numerics::layer_norm(x, bound[*final_g_], bound[*final_b_]);
}

Var Model::pool_and_head(const std::vector<Var>& bound, const Var& encoded, const Batch& batch, Mode mode,
                         CounterRng& rng) const {
  const std::size_t n = encoded.shape()[0], t = encoded.shape()[1], d = config_.dim;
  Var pooled;
  switch (config_.resolved_pooling()) {
    case Pooling::Flatten: pooled = numerics::reshape(encoded, {n, t * d}); break;
    case Pooling::Mean: pooled = numerics::mean_axis(encoded, 1); break;
    case Pooling::Cls: pooled = numerics::reshape(numerics::slice(encoded, 1, 0, 1), {n, d}); break;
  }
  if (config_.architecture == Architecture::TabTransformer && n_continuous_ > 0) {
    Var raw = encoded.tape().constant(Tensor({n, n_continuous_}, batch.continuous));
    pooled = numerics::concat({pooled, raw}, 1);
  }
  if (mlp_w_) {
    pooled = numerics::gelu(numerics::affine(pooled, bound[*mlp_w_], bound[*mlp_b_]));
    pooled = numerics::dropout(pooled, config_.ff_dropout, mode, rng);
  }
  return numerics::affine(pooled, bound[head_w_], bound[head_b_]);
}

HeadOutputs Model::forward(Tape& tape, const std::vector<Var>& bound, const Batch& batch, Mode mode, CounterRng& rng,
                           const ForwardOptions& options) const {
  require(bound.size() == params_.size(), ErrorKind::Contract, "forward: parameters are not bound to this model");
  if (config_.architecture == Architecture::LlmLinear) {
    check_batch(batch);
    Var x = tape.constant(Tensor({batch.size, batch.embedding_dim}, batch.embeddings));
    return {numerics::affine(x, bound[head_w_], bound[head_b_])};
  }
  Var x = tokens(tape, bound, batch);
  if (cls_) x = numerics::concat({numerics::tile_leading(bound[*cls_], batch.size), x}, 1);
  return {pool_and_head(bound, encode(bound, x, mode, rng, options), batch, mode, rng)};
}

Tensor Model::predict_raw(const Batch& batch) const {
  Tape tape(numerics::GradMode::Disabled);
  CounterRng unused(0);
  return forward(tape, bind(tape), batch, Mode::Eval, unused).out.value();
}

Prediction Model::predict(const Batch& batch) const {
  const Tensor out = predict_raw(batch);
  Prediction p;
  for (std::size_t i = 0; i < batch.size; ++i) {
    const double* row = out.data().data() + i * kHeadWidth;
    // P(responder) = softmax(logits)[1], written in the stable sigmoid form.
    p.responder_prob.push_back(1.0 / (1.0 + std::exp(row[kBorLogits] - row[kBorLogits + 1])));
    p.risk_os.push_back(row[kRiskOs]);
    p.risk_pfs.push_back(row[kRiskPfs]);
  }
  return p;
}

}  // namespace clinbench::model
