#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sft {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major float32 tensor with an optional gradient buffer.
//
// Tensor is a handle: copies share storage, so the tape can keep references
// to intermediates. Use clone() for a deep copy. A default-constructed Tensor
// is empty (defined() == false).
//
// The gradient buffer is only ever allocated for tensors with
// requires_grad() == true; clearing the flag frees it.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, float value);
  static Tensor from(Shape shape, std::vector<float> values);
  static Tensor scalar(float value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<float> data();
  std::span<const float> data() const;
  float item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  // Leaves are tensors not produced by a recorded operation (parameters,
  // inputs). Non-leaf grads are scratch space owned by the tape.
  bool is_leaf() const;

  bool has_grad() const;
  std::span<float> grad();
  std::span<const float> grad() const;
  // Allocates a zero buffer when absent; no-op for frozen tensors.
  void ensure_grad();
  void zero_grad();

  Tensor clone() const;
  // Same storage viewed with a new shape of equal element count. Only valid
  // for tensors that are not part of a recorded graph.
  Tensor reshaped(Shape shape) const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;
    bool requires_grad = false;
    bool leaf = true;
  };

  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<Impl> impl_;

  friend class Tape;
};

// Bitwise equality of shape and data.
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace sft
