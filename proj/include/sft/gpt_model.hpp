#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sft/autodiff.hpp"
#include "sft/rng.hpp"
#include "sft/tensor.hpp"

namespace sft::gpt {

enum class HeadKind {
  BinarySigmoid,      // one logit, sigmoid downstream
  MultiClassSoftmax,  // C logits, softmax downstream
  MultiLabelSigmoid,  // C independent logits
};

std::string to_string(HeadKind kind);
HeadKind head_kind_from_string(const std::string& name);

struct GptConfig {
  std::size_t n_vocab = 50257;
  std::size_t n_ctx = 1024;
  std::size_t n_embd = 768;
  std::size_t n_head = 12;
  std::size_t n_layer = 12;
  std::size_t d_ff = 3072;
  float dropout_p = 0.1f;
  float ln_eps = 1e-5f;
  HeadKind head = HeadKind::BinarySigmoid;
  std::size_t n_classes = 1;

  std::size_t head_dim() const { return n_embd / n_head; }
  // Throws ConfigError describing the first violated invariant.
  void validate() const;
};

bool operator==(const GptConfig& a, const GptConfig& b);

// GPT-2 small: 50257 / 1024 / 768 / 12 heads / 12 layers.
GptConfig gpt2_small();
// Desk-scale preset used by tests: 256 / 64 / 64 / 4 heads / 2 layers.
GptConfig tiny();
// "gpt2-small", "tiny", or a path to a JSON config document.
GptConfig config_from_name(const std::string& name_or_path);
// Keys n_vocab, n_ctx, n_embd, n_head, n_layer, d_ff, dropout_p, ln_eps,
// head, n_classes; an optional "preset" supplies the starting values.
GptConfig config_from_json(const nlohmann::json& doc, const std::string& origin = "<json>");
nlohmann::ordered_json config_to_json(const GptConfig& cfg);

// Name and shape of every parameter a config induces, in canonical order.
struct ParamSpec {
  std::string name;
  Shape shape;
};
std::vector<ParamSpec> param_specs(const GptConfig& cfg);
std::string block_prefix(std::size_t block);

// Named parameter map in canonical order.
class ModelParams {
 public:
  ModelParams() = default;

  void insert(std::string name, Tensor tensor);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }

  // Deep copy of every tensor, preserving requires_grad flags.
  ModelParams clone() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t> index_;
};

// Throws DimensionError/ConfigError if names or shapes deviate from cfg.
void check_params(const ModelParams& params, const GptConfig& cfg);

// Normal(0, 0.02) weights, zero biases and LN shifts, unit LN scales;
// residual output projections (wo, w2) scaled by 1/sqrt(2L).
ModelParams init_params(const GptConfig& cfg, Rng& rng);

// Zero-filled parameters with unit LN scales.
ModelParams zero_params(const GptConfig& cfg);

// Right-padded batch: ids and a 0/1 mask whose rows are 1-prefixes.
struct TokenBatch {
  ops::IdGrid ids;
  std::vector<std::uint8_t> mask;  // rows x cols

  std::size_t rows() const { return ids.rows; }
  std::size_t cols() const { return ids.cols; }
};

struct ActivationCache {
  std::vector<Tensor> hidden;               // per layer output, [B x T x d]
  Tensor final_hidden;                      // after lnf, [B x T x d]
  Tensor last_token;                        // h_T, [B x d]
  std::vector<std::size_t> last_index;      // per row
};

class GptModel {
 public:
  GptModel(GptConfig cfg, ModelParams params);

  const GptConfig& config() const { return cfg_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  Tensor embed(const ops::IdGrid& ids, Tape& tape, bool training, Rng* rng) const;
  Tensor causal_attention(std::size_t block, const Tensor& x, const TokenBatch& batch, Tape& tape, bool training,
                          Rng* rng) const;
  Tensor transformer_block(std::size_t block, const Tensor& x, const TokenBatch& batch, Tape& tape, bool training,
                           Rng* rng) const;
  ActivationCache forward(const TokenBatch& batch, Tape& tape, bool training, Rng* rng) const;
  // logits = h_T . head.w^T + head.b; no activation.
  Tensor classify(const Tensor& last_token, Tape& tape) const;

 private:
  GptConfig cfg_;
  ModelParams params_;
};

// Additive attention bias for [B*heads x T x T]: kMaskSentinel at future
// positions and at padded key columns, 0 elsewhere.
std::vector<float> attention_mask_bias(const TokenBatch& batch, std::size_t heads);

// Index of the last mask-1 entry of each row; throws ContractError for an
// all-padding row.
std::vector<std::size_t> last_token_indices(const TokenBatch& batch);

}  // namespace sft::gpt
