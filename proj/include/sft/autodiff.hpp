#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sft/rng.hpp"
#include "sft/tensor.hpp"

namespace sft {

// Additive bias applied to attention scores at masked positions. Softmax
// treats any entry at or below half this value as exactly zero probability.
inline constexpr float kMaskSentinel = -1e9f;

// Records executed operations so gradients can be replayed in reverse.
//
// An operation is recorded only when at least one input requires grad; its
// output then requires grad as well. Everything computed purely from frozen
// tensors is therefore never recorded and backward never visits it.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Creates an op output. requires_grad is set when any input requires grad.
  Tensor make_output(Shape shape, std::initializer_list<const Tensor*> inputs);

  // Registers the backward closure for an output created by make_output.
  // Ignored when the output does not require grad.
  void record(const Tensor& output, std::function<void()> backward_fn);

  // Seeds d(loss)/d(loss) = 1 and runs recorded closures newest-first.
  // Leaf gradients accumulate (+=); non-leaf gradients are reset first.
  void backward(Tensor loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // A non-recording tape produces outputs that never require grad.
  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

 private:
  struct Node {
    Tensor output;
    std::function<void()> backward_fn;
  };
  std::vector<Node> nodes_;
  bool recording_ = true;
};

// Convenience wrapper around Tape::backward.
void backward(Tensor loss, Tape& tape);

namespace ops {

// a[m x k] . b[k x n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// x[n x in] . w[in x out] + bias[out]. bias may be undefined.
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias);

// x[n x in] . w[out x in]^T + bias[out].
Tensor linear_transposed(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias);

// Batched a[g x m x k] . b[g x k x n], or b[g x n x k] transposed when
// transpose_b is set.
Tensor bmm(Tape& tape, const Tensor& a, const Tensor& b, bool transpose_b);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& x, float factor);
Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);

Tensor gelu(Tape& tape, const Tensor& x);

// Softmax over the last axis with max-subtraction. Entries at or below
// kMaskSentinel / 2 receive probability exactly 0.
Tensor softmax_lastdim(Tape& tape, const Tensor& x);

// Adds a constant (non-differentiable) bias of identical shape.
Tensor add_constant(Tape& tape, const Tensor& x, std::span<const float> bias);

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps);

// Integer grid of token ids, row-major with the given shape.
struct IdGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int32_t> ids;

  std::int32_t at(std::size_t r, std::size_t c) const { return ids[r * cols + c]; }
};

// table[V x d], ids[B x T] -> [B x T x d]
Tensor embedding_lookup(Tape& tape, const Tensor& table, const IdGrid& ids);

// Inverted dropout. Identity (same handle) when not training or p == 0.
Tensor dropout(Tape& tape, const Tensor& x, float p, bool training, Rng& rng);

// x[B x T x d] -> [(B*heads) x T x (d/heads)]
Tensor split_heads(Tape& tape, const Tensor& x, std::size_t heads);
// inverse of split_heads
Tensor merge_heads(Tape& tape, const Tensor& x, std::size_t heads);

// x[B x T x d], positions[B] -> [B x d]
Tensor gather_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> positions);

}  // namespace ops

// Scalar reference for the GELU tanh approximation and its derivative.
float gelu_value(float x);
float gelu_derivative(float x);

}  // namespace sft
