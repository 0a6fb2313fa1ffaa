#include "sft/gpt_model.hpp"

#include <cmath>
#include <fstream>
#include "json.hpp"

#include "sft/error.hpp"

namespace sft::gpt {

std::string to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::BinarySigmoid:
      return "binary_sigmoid";
    case HeadKind::MultiClassSoftmax:
      return "multiclass_softmax";
    case HeadKind::MultiLabelSigmoid:
      return "multilabel_sigmoid";
  }
  return "unknown";
}

HeadKind head_kind_from_string(const std::string& name) {
  if (name == "binary_sigmoid") return HeadKind::BinarySigmoid;
  if (name == "multiclass_softmax") return HeadKind::MultiClassSoftmax;
  if (name == "multilabel_sigmoid") return HeadKind::MultiLabelSigmoid;
  throw ConfigError("unknown head kind '" + name + "'");
}

void GptConfig::validate() const {
  if (n_vocab == 0 || n_ctx == 0 || n_embd == 0 || n_head == 0 || n_layer == 0 || d_ff == 0) {
    throw ConfigError("model extents must all be positive");
  }
  if (n_embd % n_head != 0) {
    throw ConfigError("n_embd " + std::to_string(n_embd) + " is not divisible by n_head " + std::to_string(n_head));
  }
  if (n_classes == 0) throw ConfigError("n_classes must be at least 1");
  if (head == HeadKind::BinarySigmoid && n_classes != 1) {
    throw ConfigError("a binary sigmoid head has exactly one logit, got n_classes " + std::to_string(n_classes));
  }
  if (!(dropout_p >= 0.0f) || dropout_p >= 1.0f) throw ConfigError("dropout_p must lie in [0, 1)");
  if (!(ln_eps > 0.0f)) throw ConfigError("ln_eps must be positive");
}

bool operator==(const GptConfig& a, const GptConfig& b) {
  return a.n_vocab == b.n_vocab && a.n_ctx == b.n_ctx && a.n_embd == b.n_embd && a.n_head == b.n_head &&
         a.n_layer == b.n_layer && a.d_ff == b.d_ff && a.dropout_p == b.dropout_p && a.ln_eps == b.ln_eps &&
         a.head == b.head && a.n_classes == b.n_classes;
}

GptConfig gpt2_small() { return GptConfig{}; }

GptConfig tiny() {
  GptConfig cfg;
  cfg.n_vocab = 256;
  cfg.n_ctx = 64;
  cfg.n_embd = 64;
  cfg.n_head = 4;
  cfg.n_layer = 2;
  cfg.d_ff = 256;
  return cfg;
}

GptConfig config_from_json(const nlohmann::json& doc, const std::string& origin) {
  if (!doc.is_object()) throw ConfigError("model config '" + origin + "' must be a JSON object");
  GptConfig cfg = doc.contains("preset") ? config_from_name(doc.at("preset").get<std::string>()) : GptConfig{};
  try {
    if (doc.contains("n_vocab")) cfg.n_vocab = doc.at("n_vocab").get<std::size_t>();
    if (doc.contains("n_ctx")) cfg.n_ctx = doc.at("n_ctx").get<std::size_t>();
    if (doc.contains("n_embd")) {
      cfg.n_embd = doc.at("n_embd").get<std::size_t>();
      cfg.d_ff = 4 * cfg.n_embd;
    }
    if (doc.contains("n_head")) cfg.n_head = doc.at("n_head").get<std::size_t>();
    if (doc.contains("n_layer")) cfg.n_layer = doc.at("n_layer").get<std::size_t>();
    if (doc.contains("d_ff")) cfg.d_ff = doc.at("d_ff").get<std::size_t>();
    if (doc.contains("dropout_p")) cfg.dropout_p = doc.at("dropout_p").get<float>();
    if (doc.contains("ln_eps")) cfg.ln_eps = doc.at("ln_eps").get<float>();
    if (doc.contains("head")) cfg.head = head_kind_from_string(doc.at("head").get<std::string>());
    if (doc.contains("n_classes")) cfg.n_classes = doc.at("n_classes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model config '" + origin + "': " + e.what());
  }
  cfg.validate();
  return cfg;
}

GptConfig config_from_name(const std::string& name_or_path) {
  if (name_or_path == "gpt2-small") return gpt2_small();
  if (name_or_path == "tiny") return tiny();
  std::ifstream in(name_or_path);
  if (!in) throw ConfigError("unknown model preset or unreadable config file '" + name_or_path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model config '" + name_or_path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(doc, name_or_path);
}

nlohmann::ordered_json config_to_json(const GptConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["n_vocab"] = cfg.n_vocab;
  doc["n_ctx"] = cfg.n_ctx;
  doc["n_embd"] = cfg.n_embd;
  doc["n_head"] = cfg.n_head;
  doc["n_layer"] = cfg.n_layer;
  doc["d_ff"] = cfg.d_ff;
  doc["dropout_p"] = cfg.dropout_p;
  doc["ln_eps"] = cfg.ln_eps;
  doc["head"] = to_string(cfg.head);
  doc["n_classes"] = cfg.n_classes;
  return doc;
}

std::string block_prefix(std::size_t block) { return "blocks." + std::to_string(block) + "."; }

std::vector<ParamSpec> param_specs(const GptConfig& cfg) {
  const std::size_t d = cfg.n_embd;
  std::vector<ParamSpec> specs;
  specs.push_back({"wte", {cfg.n_vocab, d}});
  specs.push_back({"wpe", {cfg.n_ctx, d}});
  for (std::size_t b = 0; b < cfg.n_layer; ++b) {
    const std::string p = block_prefix(b);
    specs.push_back({p + "ln1.g", {d}});
    specs.push_back({p + "ln1.b", {d}});
    for (const char* proj : {"q", "k", "v", "o"}) {
      specs.push_back({p + "attn.w" + proj, {d, d}});
      specs.push_back({p + "attn.b" + proj, {d}});
    }
    specs.push_back({p + "ln2.g", {d}});
    specs.push_back({p + "ln2.b", {d}});
    specs.push_back({p + "ffn.w1", {d, cfg.d_ff}});
    specs.push_back({p + "ffn.b1", {cfg.d_ff}});
    specs.push_back({p + "ffn.w2", {cfg.d_ff, d}});
    specs.push_back({p + "ffn.b2", {d}});
  }
  specs.push_back({"lnf.g", {d}});
  specs.push_back({"lnf.b", {d}});
  specs.push_back({"head.w", {cfg.n_classes, d}});
  specs.push_back({"head.b", {cfg.n_classes}});
  return specs;
}

void ModelParams::insert(std::string name, Tensor tensor) {
  if (index_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
  index_[name] = entries_.size();
  entries_.emplace_back(std::move(name), std::move(tensor));
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

ModelParams ModelParams::clone() const {
  ModelParams copy;
  for (const auto& [name, tensor] : entries_) copy.insert(name, tensor.clone());
  return copy;
}

void check_params(const ModelParams& params, const GptConfig& cfg) {
  const auto specs = param_specs(cfg);
  if (params.size() != specs.size()) {
    throw ConfigError("parameter map has " + std::to_string(params.size()) + " tensors, config induces " +
                      std::to_string(specs.size()));
  }
  for (const auto& spec : specs) {
    if (!params.contains(spec.name)) throw ConfigError("missing parameter '" + spec.name + "'");
    const auto& shape = params.at(spec.name).shape();
    if (shape != spec.shape) {
      throw DimensionError("parameter '" + spec.name + "' has shape " + shape_str(shape) + ", config expects " +
                           shape_str(spec.shape));
    }
  }
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_ln_scale(const std::string& name) { return ends_with(name, "ln1.g") || ends_with(name, "ln2.g") || name == "lnf.g"; }

bool is_residual_projection(const std::string& name) {
  return ends_with(name, "attn.wo") || ends_with(name, "ffn.w2");
}

}  // namespace

ModelParams init_params(const GptConfig& cfg, Rng& rng) {
  cfg.validate();
  std::normal_distribution<float> normal(0.0f, 0.02f);
  const float residual_scale = 1.0f / std::sqrt(2.0f * static_cast<float>(cfg.n_layer));
  ModelParams params;
  for (auto& spec : param_specs(cfg)) {
    Tensor t = Tensor::zeros(spec.shape);
    if (is_ln_scale(spec.name)) {
      std::fill(t.data().begin(), t.data().end(), 1.0f);
    } else if (spec.shape.size() == 2) {
      const float factor = is_residual_projection(spec.name) ? residual_scale : 1.0f;
      for (float& v : t.data()) v = normal(rng) * factor;
    }
    params.insert(spec.name, std::move(t));
  }
  return params;
}

ModelParams zero_params(const GptConfig& cfg) {
  ModelParams params;
  for (auto& spec : param_specs(cfg)) {
    Tensor t = Tensor::zeros(spec.shape);
    if (is_ln_scale(spec.name)) std::fill(t.data().begin(), t.data().end(), 1.0f);
    params.insert(spec.name, std::move(t));
  }
  return params;
}

std::vector<float> attention_mask_bias(const TokenBatch& batch, std::size_t heads) {
  const std::size_t rows = batch.rows(), steps = batch.cols();
  std::vector<float> bias(rows * heads * steps * steps, 0.0f);
  for (std::size_t b = 0; b < rows; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      float* block = bias.data() + (b * heads + h) * steps * steps;
      for (std::size_t i = 0; i < steps; ++i) {
        for (std::size_t j = 0; j < steps; ++j) {
          if (j > i || batch.mask[b * steps + j] == 0) block[i * steps + j] = kMaskSentinel;
        }
      }
    }
  }
  return bias;
}

std::vector<std::size_t> last_token_indices(const TokenBatch& batch) {
  std::vector<std::size_t> last(batch.rows());
  for (std::size_t b = 0; b < batch.rows(); ++b) {
    std::size_t count = 0;
    for (std::size_t t = 0; t < batch.cols(); ++t) count += batch.mask[b * batch.cols() + t] ? 1 : 0;
    if (count == 0) throw ContractError("row " + std::to_string(b) + " is all padding: no valid last token");
    last[b] = count - 1;
  }
  return last;
}

GptModel::GptModel(GptConfig cfg, ModelParams params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  check_params(params_, cfg_);
}

Tensor GptModel::embed(const ops::IdGrid& ids, Tape& tape, bool training, Rng* rng) const {
  if (ids.cols > cfg_.n_ctx) {
    throw DimensionError("sequence length " + std::to_string(ids.cols) + " exceeds context length " +
                         std::to_string(cfg_.n_ctx));
  }
  ops::IdGrid positions{ids.rows, ids.cols, std::vector<std::int32_t>(ids.rows * ids.cols)};
  for (std::size_t r = 0; r < ids.rows; ++r) {
    for (std::size_t t = 0; t < ids.cols; ++t) positions.ids[r * ids.cols + t] = static_cast<std::int32_t>(t);
  }
  Tensor tokens = ops::embedding_lookup(tape, params_.at("wte"), ids);
  Tensor pos = ops::embedding_lookup(tape, params_.at("wpe"), positions);
  Tensor z = ops::add(tape, tokens, pos);
  if (training && cfg_.dropout_p > 0.0f) {
    if (rng == nullptr) throw ContractError("training forward with dropout needs an rng");
    z = ops::dropout(tape, z, cfg_.dropout_p, true, *rng);
  }
  return z;
}

Tensor GptModel::causal_attention(std::size_t block, const Tensor& x, const TokenBatch& batch, Tape& tape,
                                  bool training, Rng* rng) const {
  const std::string p = block_prefix(block) + "attn.";
  const std::size_t heads = cfg_.n_head;
  Tensor q = ops::linear(tape, x, params_.at(p + "wq"), params_.at(p + "bq"));
  Tensor k = ops::linear(tape, x, params_.at(p + "wk"), params_.at(p + "bk"));
  Tensor v = ops::linear(tape, x, params_.at(p + "wv"), params_.at(p + "bv"));
  Tensor qh = ops::split_heads(tape, q, heads);
  Tensor kh = ops::split_heads(tape, k, heads);
  Tensor vh = ops::split_heads(tape, v, heads);
  Tensor scores = ops::bmm(tape, qh, kh, true);
  scores = ops::scale(tape, scores, 1.0f / std::sqrt(static_cast<float>(cfg_.head_dim())));
  const auto bias = attention_mask_bias(batch, heads);
  scores = ops::add_constant(tape, scores, bias);
  Tensor weights = ops::softmax_lastdim(tape, scores);
  if (training && cfg_.dropout_p > 0.0f) weights = ops::dropout(tape, weights, cfg_.dropout_p, true, *rng);
  Tensor context = ops::bmm(tape, weights, vh, false);
  Tensor merged = ops::merge_heads(tape, context, heads);
  return ops::linear(tape, merged, params_.at(p + "wo"), params_.at(p + "bo"));
}

Tensor GptModel::transformer_block(std::size_t block, const Tensor& x, const TokenBatch& batch, Tape& tape,
                                   bool training, Rng* rng) const {
  const std::string p = block_prefix(block);
  const bool drop = training && cfg_.dropout_p > 0.0f;
  if (drop && rng == nullptr) throw ContractError("training forward with dropout needs an rng");

  Tensor h = ops::layer_norm(tape, x, params_.at(p + "ln1.g"), params_.at(p + "ln1.b"), cfg_.ln_eps);
  Tensor attn = causal_attention(block, h, batch, tape, training, rng);
  if (drop) attn = ops::dropout(tape, attn, cfg_.dropout_p, true, *rng);
  Tensor x1 = ops::add(tape, x, attn);

  Tensor u = ops::layer_norm(tape, x1, params_.at(p + "ln2.g"), params_.at(p + "ln2.b"), cfg_.ln_eps);
  Tensor f = ops::linear(tape, u, params_.at(p + "ffn.w1"), params_.at(p + "ffn.b1"));
  f = ops::gelu(tape, f);
  f = ops::linear(tape, f, params_.at(p + "ffn.w2"), params_.at(p + "ffn.b2"));
  if (drop) f = ops::dropout(tape, f, cfg_.dropout_p, true, *rng);
  return ops::add(tape, x1, f);
}

ActivationCache GptModel::forward(const TokenBatch& batch, Tape& tape, bool training, Rng* rng) const {
  if (batch.mask.size() != batch.rows() * batch.cols()) throw DimensionError("mask size does not match id grid");
  ActivationCache cache;
  cache.last_index = last_token_indices(batch);
  Tensor x = embed(batch.ids, tape, training, rng);
  for (std::size_t b = 0; b < cfg_.n_layer; ++b) {
    x = transformer_block(b, x, batch, tape, training, rng);
    cache.hidden.push_back(x);
  }
  cache.final_hidden = ops::layer_norm(tape, x, params_.at("lnf.g"), params_.at("lnf.b"), cfg_.ln_eps);
  cache.last_token = ops::gather_rows(tape, cache.final_hidden, cache.last_index);
  return cache;
}

Tensor GptModel::classify(const Tensor& last_token, Tape& tape) const {
  return ops::linear_transposed(tape, last_token, params_.at("head.w"), params_.at("head.b"));
}

}  // namespace sft::gpt
