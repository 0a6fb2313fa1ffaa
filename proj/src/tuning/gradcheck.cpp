#include "sft/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "sft/losses.hpp"
#include "sft/reference_model.hpp"

namespace sft::tune {

namespace {

// Elements worth probing: for embedding tables only rows the batch touches
// carry signal.
std::vector<std::size_t> candidate_elements(const std::string& name, const Tensor& t, const gpt::TokenBatch& batch) {
  std::vector<std::size_t> out;
  if (name == "wte" || name == "wpe") {
    const std::size_t d = t.dim(1);
    std::set<std::size_t> rows;
    if (name == "wte") {
      for (auto id : batch.ids.ids) rows.insert(static_cast<std::size_t>(id));
    } else {
      for (std::size_t r = 0; r < batch.cols(); ++r) rows.insert(r);
    }
    for (auto r : rows)
      for (std::size_t j = 0; j < d; ++j) out.push_back(r * d + j);
  } else {
    out.resize(t.numel());
    std::iota(out.begin(), out.end(), std::size_t{0});
  }
  return out;
}

}  // namespace

GradCheckReport gradcheck(gpt::GptModel& model, const gpt::TokenBatch& batch, const LabelGrid& labels,
                          const GradCheckOptions& options,
                          const std::function<void(gpt::ModelParams&)>& tamper) {
  auto& params = model.params();
  zero_grads(params);
  {
    Tape tape;
    auto cache = model.forward(batch, tape, false, nullptr);
    Tensor logits = model.classify(cache.last_token, tape);
    Tensor loss = train::task_loss(tape, logits, labels, model.config().head);
    tape.backward(loss);
  }
  if (tamper) tamper(params);

  auto f64 = gpt::reference::to_f64(params);
  Rng rng = make_rng(options.seed);
  GradCheckReport report;
  for (auto& [name, tensor] : params.entries()) {
    if (!tensor.requires_grad()) continue;
    auto candidates = candidate_elements(name, tensor, batch);
    if (options.max_elements > 0 && candidates.size() > options.max_elements) {
      std::shuffle(candidates.begin(), candidates.end(), rng);
      candidates.resize(options.max_elements);
      std::sort(candidates.begin(), candidates.end());
    }
    TensorCheck check{name, 0, 0.0};
    auto& values = f64.at(name);
    for (auto idx : candidates) {
      const double saved = values[idx];
      values[idx] = saved + options.step;
      const double plus = gpt::reference::loss(model.config(), f64, batch, labels);
      values[idx] = saved - options.step;
      const double minus = gpt::reference::loss(model.config(), f64, batch, labels);
      values[idx] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double analytic = tensor.has_grad() ? tensor.grad()[idx] : 0.0;
      const double scale = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double rel = std::abs(analytic - numeric) / scale;
      check.max_rel_error = std::max(check.max_rel_error, rel);
      ++check.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.tensors.push_back(std::move(check));
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

void randomize_params(gpt::ModelParams& params, double stddev, Rng& rng) {
  std::normal_distribution<double> noise(0.0, stddev);
  for (auto& [name, tensor] : params.entries()) {
    const bool ln_scale = name.size() > 2 && name.compare(name.size() - 2, 2, ".g") == 0;
    for (auto& v : tensor.data()) v = static_cast<float>((ln_scale ? 1.0 : 0.0) + noise(rng));
  }
}

}  // namespace sft::tune
