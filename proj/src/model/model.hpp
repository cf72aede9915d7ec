#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "data/cohort.hpp"
#include "data/schema.hpp"
#include "json.hpp"
#include "numerics/autograd.hpp"

namespace clinbench::model {

using numerics::Mode;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

enum class Architecture { ClinTaT, TabTransformer, LlmLinear, LlmTransformer };
enum class Pooling { Flatten, Mean, Cls };

std::string to_string(Architecture a);
std::string to_string(Pooling p);
Architecture architecture_from_string(const std::string& s);
Pooling pooling_from_string(const std::string& s);

struct ModelConfig {
  Architecture architecture = Architecture::ClinTaT;
  std::size_t dim = 768;
  std::size_t layers = 6;
  std::size_t heads = 8;
  double attention_dropout = 0.3;
  double ff_dropout = 0.1;
  /// Hidden width of the feedforward block; 0 means 4 * dim.
  std::size_t ff_dim = 0;
  /// Unset: flatten for the tabular models, mean for llm_transformer.
  std::optional<Pooling> pooling;
  /// Width of the frozen sentence embeddings (LLM variants only).
  std::size_t embedding_dim = 0;
  /// Seed for parameter initialisation.
  std::uint64_t init_seed = 0;

  std::size_t ff_width() const noexcept { return ff_dim == 0 ? 4 * dim : ff_dim; }
  Pooling resolved_pooling() const;
  bool is_llm() const noexcept {
    return architecture == Architecture::LlmLinear || architecture == Architecture::LlmTransformer;
  }
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& doc);
};

/// Model input for a batch of records. Tabular models read `categorical`
/// ([size, n_cat]) and `continuous` ([size, n_cont]); LLM variants read
/// `embeddings` ([size, embedding_tokens, embedding_dim]).
struct Batch {
  std::size_t size = 0;
  std::vector<std::int64_t> categorical;
  std::vector<double> continuous;
  std::vector<double> embeddings;
  std::size_t embedding_tokens = 0;
  std::size_t embedding_dim = 0;

  /// Rows in the given order.
  Batch rows(std::span<const std::size_t> indices) const;
};

Batch make_batch(const data::Cohort& cohort, const data::CohortSchema& schema);

/// Column layout of the [N,4] head output.
inline constexpr std::size_t kBorLogits = 0;
inline constexpr std::size_t kRiskOs = 2;
inline constexpr std::size_t kRiskPfs = 3;
inline constexpr std::size_t kHeadWidth = 4;

/// Forward result on a tape. `out` is [N,4]: two response logits, then the
/// OS and PFS log-hazards.
struct HeadOutputs {
  Var out;

  Var bor_logits() const;
  Var risk_os() const;
  Var risk_pfs() const;
};

/// Plain per-record predictions.
struct Prediction {
  std::vector<double> responder_prob;
  std::vector<double> risk_os;
  std::vector<double> risk_pfs;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct ForwardOptions {
  /// When set, receives the attention probabilities of each layer
  /// ([N*H, T, T], before dropout).
  std::vector<Tensor>* attention = nullptr;
};

class Model {
 public:
  /// Tabular models need the schema's features; LLM variants use only the
  /// feature count (the per-feature embedding sequence length).
  static Model build(const ModelConfig& config, const data::CohortSchema& schema);

  const ModelConfig& config() const noexcept { return config_; }
  std::vector<NamedTensor>& parameters() noexcept { return params_; }
  const std::vector<NamedTensor>& parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;
  const Tensor& parameter(const std::string& name) const;
  std::size_t sequence_length() const noexcept { return seq_len_; }

  /// Records every parameter as a tape variable, in parameters() order.
  std::vector<Var> bind(Tape& tape) const;

  /// Per-feature input tokens, [N, T, d] (no cls token).
  Var tokens(Tape& tape, const std::vector<Var>& bound, const Batch& batch) const;
  /// Transformer stack over a token sequence [N, T, d], final norm included.
  Var encode(const std::vector<Var>& bound, const Var& tokens, Mode mode, numerics::CounterRng& rng,
             const ForwardOptions& options = {}) const;
  HeadOutputs forward(Tape& tape, const std::vector<Var>& bound, const Batch& batch, Mode mode,
                      numerics::CounterRng& rng, const ForwardOptions& options = {}) const;

  /// Eval-mode forward without gradients.
  Prediction predict(const Batch& batch) const;
  /// Raw [N,4] head outputs in eval mode.
  Tensor predict_raw(const Batch& batch) const;

 private:
  std::size_t add_param(std::string name, Tensor value);
  std::size_t index_of(const std::string& name) const;
  void check_batch(const Batch& batch) const;
  Var pool_and_head(const std::vector<Var>& bound, const Var& encoded, const Batch& batch, Mode mode,
                    numerics::CounterRng& rng) const;

  struct LayerIndex {
    std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };

  ModelConfig config_;
  std::vector<NamedTensor> params_;
  /// Feature kinds in token order, with the index within the kind.
  std::vector<std::pair<data::FeatureKind, std::size_t>> token_features_;
  std::size_t n_categorical_ = 0;
  std::size_t n_continuous_ = 0;
  std::size_t n_features_ = 0;
  std::size_t seq_len_ = 0;
  std::vector<LayerIndex> layers_;
  std::vector<std::size_t> cat_tables_;
  std::vector<std::pair<std::size_t, std::size_t>> cont_maps_;
  std::optional<std::size_t> cls_, input_w_, input_b_, final_g_, final_b_, mlp_w_, mlp_b_;
  std::size_t head_w_ = 0, head_b_ = 0;
};

}  // namespace clinbench::model
