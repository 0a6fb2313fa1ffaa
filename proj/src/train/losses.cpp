#include "sft/losses.hpp"

#include <cmath>
#include <string>

#include "sft/error.hpp"

namespace sft::train {

namespace {

void check_batch(const Tensor& logits, const LabelGrid& labels, const char* op) {
  if (logits.rank() != 2 || logits.dim(0) != labels.rows || labels.values.size() != labels.rows * labels.cols) {
    throw DimensionError(std::string(op) + ": logits " + shape_str(logits.shape()) + " do not match " +
                         std::to_string(labels.rows) + " label rows");
  }
}

}  // namespace

Tensor cross_entropy_loss(Tape& tape, const Tensor& logits, const LabelGrid& labels) {
  check_batch(logits, labels, "cross_entropy_loss");
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  if (labels.cols != 1) throw DimensionError("cross_entropy_loss expects one class index per row");
  for (auto y : labels.values) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ContractError("class " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  Tensor out = tape.make_output({1}, {&logits});
  std::vector<float> probs(rows * classes);
  const float* z = logits.data().data();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = z[r * classes];
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, static_cast<double>(z[r * classes + c]));
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) s += std::exp(z[r * classes + c] - mx);
    const double lse = mx + std::log(s);
    total += lse - z[r * classes + static_cast<std::size_t>(labels.at(r))];
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = static_cast<float>(std::exp(z[r * classes + c] - lse));
  }
  out.data()[0] = static_cast<float>(total / static_cast<double>(rows));
  tape.record(out, [logits = Tensor(logits), out, labels, probs = std::move(probs), rows, classes]() mutable {
    logits.ensure_grad();
    const float g = out.grad()[0] / static_cast<float>(rows);
    float* gz = logits.grad().data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < classes; ++c) {
        const float onehot = static_cast<std::size_t>(labels.at(r)) == c ? 1.0f : 0.0f;
        gz[r * classes + c] += g * (probs[r * classes + c] - onehot);
      }
    }
  });
  return out;
}

Tensor bce_with_logits_loss(Tape& tape, const Tensor& logits, const LabelGrid& labels) {
  check_batch(logits, labels, "bce_with_logits_loss");
  const std::size_t rows = logits.dim(0), width = logits.dim(1);
  if (labels.cols != width) {
    throw DimensionError("bce_with_logits_loss: " + std::to_string(labels.cols) + " targets per row for " +
                         std::to_string(width) + " logits");
  }
  for (auto y : labels.values) {
    if (y != 0 && y != 1) throw ContractError("binary target " + std::to_string(y) + " is not 0 or 1");
  }
  Tensor out = tape.make_output({1}, {&logits});
  const float* z = logits.data().data();
  double total = 0.0;
  for (std::size_t i = 0; i < rows * width; ++i) {
    const double zz = z[i];
    total += std::max(zz, 0.0) - zz * labels.values[i] + std::log1p(std::exp(-std::abs(zz)));
  }
  out.data()[0] = static_cast<float>(total / static_cast<double>(rows));
  tape.record(out, [logits = Tensor(logits), out, labels, rows]() mutable {
    logits.ensure_grad();
    const float g = out.grad()[0] / static_cast<float>(rows);
    const float* z = logits.data().data();
    float* gz = logits.grad().data();
    for (std::size_t i = 0; i < labels.values.size(); ++i) {
      const double sig = 1.0 / (1.0 + std::exp(-static_cast<double>(z[i])));
      gz[i] += g * static_cast<float>(sig - labels.values[i]);
    }
  });
  return out;
}

Tensor task_loss(Tape& tape, const Tensor& logits, const LabelGrid& labels, gpt::HeadKind head) {
  if (head == gpt::HeadKind::MultiClassSoftmax) return cross_entropy_loss(tape, logits, labels);
  return bce_with_logits_loss(tape, logits, labels);
}

}  // namespace sft::train
