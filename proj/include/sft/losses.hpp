#pragma once

#include "sft/autodiff.hpp"
#include "sft/gpt_model.hpp"
#include "sft/label_grid.hpp"

namespace sft::train {

// Mean over the batch of -log softmax(logits)[y], log-sum-exp stable.
Tensor cross_entropy_loss(Tape& tape, const Tensor& logits, const LabelGrid& labels);

// Mean over the batch of sum over labels of max(z,0) - z y + log(1 + e^-|z|).
Tensor bce_with_logits_loss(Tape& tape, const Tensor& logits, const LabelGrid& labels);

// Dispatches on the head kind.
Tensor task_loss(Tape& tape, const Tensor& logits, const LabelGrid& labels, gpt::HeadKind head);

}  // namespace sft::train
