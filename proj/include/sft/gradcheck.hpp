#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sft/freeze_policy.hpp"
#include "sft/gpt_model.hpp"
#include "sft/label_grid.hpp"

namespace sft::tune {

struct GradCheckOptions {
  double step = 1e-3;           // central-difference half width
  double tolerance = 1e-3;      // on |analytic - numeric| / max(|analytic|, |numeric|, floor)
  double floor = 1e-2;          // below this magnitude the error is judged absolutely
  std::size_t max_elements = 0;  // per tensor; 0 checks every element
  std::uint64_t seed = 0;       // element sampling when max_elements > 0
};

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  bool passed = true;
};

// Compares autodiff gradients (float32, evaluation mode) of every trainable
// tensor against float64 central differences of the reference model's loss.
// `tamper` runs on the parameters after backward and may alter grads; tests
// use it as a negative control.
GradCheckReport gradcheck(gpt::GptModel& model, const gpt::TokenBatch& batch, const LabelGrid& labels,
                          const GradCheckOptions& options,
                          const std::function<void(gpt::ModelParams&)>& tamper = {});

// Every entry drawn from Normal(0, stddev), LN scales centred on 1, so no
// gradient path is trivially zero.
void randomize_params(gpt::ModelParams& params, double stddev, Rng& rng);

}  // namespace sft::tune
