#pragma once

#include <cstdint>

#include "sft/freeze_policy.hpp"
#include "sft/gpt_model.hpp"

namespace sft::tune {

// FLOP estimates for one optimizer step; a multiply-add counts as 2 FLOPs.
struct StepCost {
  std::uint64_t forward_flops = 0;
  std::uint64_t backward_flops = 0;
  std::uint64_t block_forward_flops = 0;     // one block
  std::uint64_t backward_block_flops = 0;    // blocks the backward pass visits
  std::uint64_t backward_head_flops = 0;
  std::size_t backward_blocks = 0;
};

// Per block forward: 8 B T d^2 (projections) + 4 B T^2 d (scores, context)
// + 4 B T d d_ff (FFN). Embeddings add B T d, the head 2 B d C.
std::uint64_t block_forward_flops(const gpt::GptConfig& cfg, std::uint64_t batch, std::uint64_t steps);

// Backward costs twice the forward of every block at or above the earliest
// trainable block (all blocks when an embedding table trains), plus the head.
StepCost estimate_step_cost(const gpt::GptConfig& cfg, const FreezePolicy& policy, std::uint64_t batch,
                            std::uint64_t steps);

}  // namespace sft::tune
