#pragma once

#include <set>
#include <string>
#include <vector>

#include "sft/gpt_model.hpp"

namespace sft::tune {

// Declarative mapping from parameter names to trainable/frozen status.
class FreezePolicy {
 public:
  enum class Kind { HeadOnly, Selective, Full, Custom };

  static FreezePolicy head_only() { return FreezePolicy(Kind::HeadOnly, {}); }
  // Final block, final layer norm and classification head.
  static FreezePolicy selective() { return FreezePolicy(Kind::Selective, {}); }
  static FreezePolicy full() { return FreezePolicy(Kind::Full, {}); }
  // Glob patterns over parameter names; '*' matches any run of characters.
  static FreezePolicy custom(std::vector<std::string> patterns) {
    return FreezePolicy(Kind::Custom, std::move(patterns));
  }
  // "head", "selective", "full", or "custom:pat1,pat2".
  static FreezePolicy parse(const std::string& text);

  Kind kind() const { return kind_; }
  const std::vector<std::string>& patterns() const { return patterns_; }
  std::string name() const;

  // Names of the trainable parameters for this config. Custom patterns that
  // match nothing raise ConfigError.
  std::set<std::string> resolve(const gpt::GptConfig& cfg) const;

 private:
  FreezePolicy(Kind kind, std::vector<std::string> patterns) : kind_(kind), patterns_(std::move(patterns)) {}

  Kind kind_;
  std::vector<std::string> patterns_;
};

bool glob_match(const std::string& pattern, const std::string& text);

// Sets requires_grad on exactly the resolved set, allocating zeroed grads;
// every other tensor is frozen and its grad buffer released.
void apply_policy(gpt::ModelParams& params, const gpt::GptConfig& cfg, const FreezePolicy& policy);

// Zeroes the grad buffers of trainable tensors; frozen tensors untouched.
void zero_grads(gpt::ModelParams& params);

}  // namespace sft::tune
