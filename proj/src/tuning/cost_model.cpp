#include "sft/cost_model.hpp"

#include "sft/error.hpp"

namespace sft::tune {

std::uint64_t block_forward_flops(const gpt::GptConfig& cfg, std::uint64_t batch, std::uint64_t steps) {
  const std::uint64_t d = cfg.n_embd;
  const std::uint64_t dff = cfg.d_ff;
  return 8 * batch * steps * d * d + 4 * batch * steps * steps * d + 4 * batch * steps * d * dff;
}

StepCost estimate_step_cost(const gpt::GptConfig& cfg, const FreezePolicy& policy, std::uint64_t batch,
                            std::uint64_t steps) {
  if (steps > cfg.n_ctx) {
    throw ContractError("sequence length " + std::to_string(steps) + " exceeds context " + std::to_string(cfg.n_ctx));
  }
  StepCost cost;
  if (batch == 0 || steps == 0) return cost;

  const std::uint64_t d = cfg.n_embd;
  const std::uint64_t block = block_forward_flops(cfg, batch, steps);
  const std::uint64_t embed = batch * steps * d;
  const std::uint64_t head = 2 * batch * d * cfg.n_classes;
  cost.block_forward_flops = block;
  cost.forward_flops = cfg.n_layer * block + embed + head;

  const auto trainable = policy.resolve(cfg);
  std::size_t earliest = cfg.n_layer;
  if (trainable.count("wte") || trainable.count("wpe")) {
    earliest = 0;
  } else {
    for (std::size_t b = 0; b < cfg.n_layer && earliest == cfg.n_layer; ++b) {
      const std::string prefix = gpt::block_prefix(b);
      for (const auto& name : trainable) {
        if (name.rfind(prefix, 0) == 0) {
          earliest = b;
          break;
        }
      }
    }
  }
  cost.backward_blocks = cfg.n_layer - earliest;
  cost.backward_block_flops = 2 * cost.backward_blocks * block;
  cost.backward_head_flops = trainable.empty() ? 0 : 2 * head;
  cost.backward_flops = cost.backward_block_flops + cost.backward_head_flops;
  return cost;
}

}  // namespace sft::tune
