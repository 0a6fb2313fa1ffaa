#pragma once

#include <map>
#include <string>
#include <vector>

#include "sft/gpt_model.hpp"
#include "sft/label_grid.hpp"

// Straight-line float64 evaluation of the classifier, written with plain
// loops and no tape. It shares no numerics with the autodiff path and serves
// as the finite-difference oracle for gradient checks.
namespace sft::gpt::reference {

using ParamsF64 = std::map<std::string, std::vector<double>>;

ParamsF64 to_f64(const ModelParams& params);

// Hidden states after the final layer norm, [B x T x d].
std::vector<double> final_hidden(const GptConfig& cfg, const ParamsF64& params, const TokenBatch& batch);
// [B x d]
std::vector<double> last_token_features(const GptConfig& cfg, const ParamsF64& params, const TokenBatch& batch);
// [B x C]
std::vector<double> logits(const GptConfig& cfg, const ParamsF64& params, const TokenBatch& batch);
// Mean cross-entropy (softmax head) or BCE-with-logits (sigmoid heads).
double loss(const GptConfig& cfg, const ParamsF64& params, const TokenBatch& batch, const LabelGrid& labels);

}  // namespace sft::gpt::reference
