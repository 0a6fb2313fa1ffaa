#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sft/gpt_model.hpp"

namespace sft::tune {

struct OptimizerHp {
  float lr = 5e-5f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.0f;

  void validate() const;
};

// Paper-scale defaults per strategy: head 5e-4, selective 5e-5 with decay
// 0.1, full 2e-5.
OptimizerHp default_hp_for(const std::string& policy_name);

// AdamW restricted to tensors with requires_grad. Decay is decoupled from
// the adaptive step and applied only where decays(name, tensor) holds
// (default: tensors of rank >= 2, i.e. weight matrices).
class AdamW {
 public:
  using DecayRule = std::function<bool(const std::string&, const Tensor&)>;

  explicit AdamW(OptimizerHp hp);
  AdamW(OptimizerHp hp, DecayRule decays);

  void step(gpt::ModelParams& params);

  const OptimizerHp& hp() const { return hp_; }
  std::uint64_t steps() const { return t_; }
  bool has_state(const std::string& name) const { return state_.count(name) != 0; }
  std::size_t state_size() const { return state_.size(); }

 private:
  struct Moments {
    std::vector<float> m;
    std::vector<float> v;
  };

  OptimizerHp hp_;
  DecayRule decays_;
  std::map<std::string, Moments> state_;
  std::uint64_t t_ = 0;
};

}  // namespace sft::tune
