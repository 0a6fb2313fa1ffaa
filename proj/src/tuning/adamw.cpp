#include "sft/adamw.hpp"

#include <cmath>

#include "sft/error.hpp"

namespace sft::tune {

void OptimizerHp::validate() const {
  if (!(lr > 0.0f)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0f && beta1 < 1.0f) || !(beta2 >= 0.0f && beta2 < 1.0f)) {
    throw ConfigError("betas must lie in [0, 1)");
  }
  if (!(eps > 0.0f)) throw ConfigError("eps must be positive");
  if (!(weight_decay >= 0.0f)) throw ConfigError("weight decay must be non-negative");
}

OptimizerHp default_hp_for(const std::string& policy_name) {
  OptimizerHp hp;
  if (policy_name == "head") {
    hp.lr = 5e-4f;
  } else if (policy_name == "full") {
    hp.lr = 2e-5f;
  } else {
    hp.lr = 5e-5f;
    hp.weight_decay = 0.1f;
  }
  return hp;
}

AdamW::AdamW(OptimizerHp hp)
    : AdamW(hp, [](const std::string&, const Tensor& t) { return t.rank() >= 2; }) {}

AdamW::AdamW(OptimizerHp hp, DecayRule decays) : hp_(hp), decays_(std::move(decays)) { hp_.validate(); }

void AdamW::step(gpt::ModelParams& params) {
  for (auto& [name, tensor] : params.entries()) {
    if (tensor.requires_grad() && !tensor.has_grad()) {
      throw ContractError("trainable parameter '" + name + "' has no gradient; run backward first");
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(hp_.beta1), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(hp_.beta2), static_cast<double>(t_));
  const float b1 = hp_.beta1, b2 = hp_.beta2;
  for (auto& [name, tensor] : params.entries()) {
    if (!tensor.requires_grad()) continue;
    auto& st = state_[name];
    if (st.m.empty()) {
      st.m.assign(tensor.numel(), 0.0f);
      st.v.assign(tensor.numel(), 0.0f);
    }
    const float decay = decays_(name, tensor) ? hp_.lr * hp_.weight_decay : 0.0f;
    auto theta = tensor.data();
    auto g = tensor.grad();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      st.m[i] = b1 * st.m[i] + (1.0f - b1) * g[i];
      st.v[i] = b2 * st.v[i] + (1.0f - b2) * g[i] * g[i];
      const float m_hat = static_cast<float>(st.m[i] / bc1);
      const float v_hat = static_cast<float>(st.v[i] / bc2);
      const float old = theta[i];
      theta[i] = old - hp_.lr * m_hat / (std::sqrt(v_hat) + hp_.eps) - decay * old;
    }
  }
}

}  // namespace sft::tune
