#include "sft/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gemm.hpp"
#include "sft/error.hpp"

namespace sft {

namespace {

constexpr float kGeluCoeff = 0.044715f;
const float kSqrt2OverPi = static_cast<float>(std::sqrt(2.0 / 3.14159265358979323846));

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// Rows of a tensor viewed as [rows x last].
std::size_t leading_rows(const Tensor& t) { return t.numel() / t.shape().back(); }

}  // namespace

Tensor Tape::make_output(Shape shape, std::initializer_list<const Tensor*> inputs) {
  Tensor out = Tensor::zeros(std::move(shape));
  bool needs = false;
  for (const Tensor* in : inputs) {
    if (recording_ && in != nullptr && in->defined() && in->requires_grad()) needs = true;
  }
  out.impl_->requires_grad = needs;
  out.impl_->leaf = false;
  return out;
}

void Tape::record(const Tensor& output, std::function<void()> backward_fn) {
  if (!output.requires_grad()) return;
  nodes_.push_back(Node{output, std::move(backward_fn)});
}

void Tape::backward(Tensor loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;
  for (auto& node : nodes_) node.output.zero_grad();
  loss.ensure_grad();
  loss.grad()[0] += 1.0f;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward_fn();
}

void backward(Tensor loss, Tape& tape) { tape.backward(std::move(loss)); }

float gelu_value(float x) {
  const float u = kSqrt2OverPi * (x + kGeluCoeff * x * x * x);
  return 0.5f * x * (1.0f + std::tanh(u));
}

float gelu_derivative(float x) {
  const float u = kSqrt2OverPi * (x + kGeluCoeff * x * x * x);
  const float t = std::tanh(u);
  const float du = kSqrt2OverPi * (1.0f + 3.0f * kGeluCoeff * x * x);
  return 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * du;
}

namespace ops {

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = tape.make_output({m, n}, {&a, &b});
  detail::gemm_acc(false, false, m, n, k, a.data().data(), b.data().data(), out.data().data());
  tape.record(out, [a = Tensor(a), b = Tensor(b), out, m, n, k]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      a.ensure_grad();
      detail::gemm_acc(false, true, m, k, n, g.data(), b.data().data(), a.grad().data());
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      detail::gemm_acc(true, false, k, n, m, a.data().data(), g.data(), b.grad().data());
    }
  });
  return out;
}

namespace {

Tensor linear_impl(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias, bool w_transposed,
                   const char* name) {
  require_rank(w, 2, name);
  const std::size_t in = w_transposed ? w.dim(1) : w.dim(0);
  const std::size_t outf = w_transposed ? w.dim(0) : w.dim(1);
  if (x.rank() < 1 || x.shape().back() != in) {
    throw DimensionError(std::string(name) + ": input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(w.shape()));
  }
  if (bias.defined() && (bias.numel() != outf)) {
    throw DimensionError(std::string(name) + ": bias " + shape_str(bias.shape()) + " incompatible with weight " +
                         shape_str(w.shape()));
  }
  const std::size_t rows = leading_rows(x);
  Shape out_shape = x.shape();
  out_shape.back() = outf;
  Tensor out = tape.make_output(out_shape, {&x, &w, &bias});
  float* y = out.data().data();
  if (bias.defined()) {
    const float* bv = bias.data().data();
    for (std::size_t r = 0; r < rows; ++r) std::copy(bv, bv + outf, y + r * outf);
  }
  detail::gemm_acc(false, w_transposed, rows, outf, in, x.data().data(), w.data().data(), y);
  tape.record(out, [x = Tensor(x), w = Tensor(w), bias = Tensor(bias), out, rows, in, outf, w_transposed]() mutable {
    const float* g = out.grad().data();
    if (x.requires_grad()) {
      x.ensure_grad();
      // dx = g . W^T  (W stored [in x out]) or g . W (W stored [out x in])
      detail::gemm_acc(false, !w_transposed, rows, in, outf, g, w.data().data(), x.grad().data());
    }
    if (w.requires_grad()) {
      w.ensure_grad();
      if (w_transposed) {
        detail::gemm_acc(true, false, outf, in, rows, g, x.data().data(), w.grad().data());
      } else {
        detail::gemm_acc(true, false, in, outf, rows, x.data().data(), g, w.grad().data());
      }
    }
    if (bias.defined() && bias.requires_grad()) {
      bias.ensure_grad();
      float* gb = bias.grad().data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < outf; ++j) gb[j] += g[r * outf + j];
      }
    }
  });
  return out;
}

}  // namespace

Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias) {
  return linear_impl(tape, x, w, bias, false, "linear");
}

Tensor linear_transposed(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias) {
  return linear_impl(tape, x, w, bias, true, "linear_transposed");
}

Tensor bmm(Tape& tape, const Tensor& a, const Tensor& b, bool transpose_b) {
  require_rank(a, 3, "bmm");
  require_rank(b, 3, "bmm");
  const std::size_t groups = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  const std::size_t bk = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != groups || bk != k) {
    throw DimensionError("bmm: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  Tensor out = tape.make_output({groups, m, n}, {&a, &b});
  for (std::size_t g = 0; g < groups; ++g) {
    detail::gemm_acc(false, transpose_b, m, n, k, a.data().data() + g * m * k, b.data().data() + g * k * n,
                     out.data().data() + g * m * n);
  }
  tape.record(out, [a = Tensor(a), b = Tensor(b), out, groups, m, n, k, transpose_b]() mutable {
    const float* go = out.grad().data();
    if (a.requires_grad()) a.ensure_grad();
    if (b.requires_grad()) b.ensure_grad();
    for (std::size_t g = 0; g < groups; ++g) {
      const float* gg = go + g * m * n;
      const float* ag = a.data().data() + g * m * k;
      const float* bg = b.data().data() + g * k * n;
      if (a.requires_grad()) {
        // da = g . B^T, where B is [k x n] (or [n x k] when transposed)
        detail::gemm_acc(false, !transpose_b, m, k, n, gg, bg, a.grad().data() + g * m * k);
      }
      if (b.requires_grad()) {
        if (transpose_b) {
          detail::gemm_acc(true, false, n, k, m, gg, ag, b.grad().data() + g * k * n);
        } else {
          detail::gemm_acc(true, false, k, n, m, ag, gg, b.grad().data() + g * k * n);
        }
      }
    }
  });
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = tape.make_output(a.shape(), {&a, &b});
  auto y = out.data();
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
  tape.record(out, [a = Tensor(a), b = Tensor(b), out]() mutable {
    auto g = out.grad();
    for (Tensor* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      t->ensure_grad();
      auto gt = t->grad();
      for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
    }
  });
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = tape.make_output(a.shape(), {&a, &b});
  auto y = out.data();
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  tape.record(out, [a = Tensor(a), b = Tensor(b), out]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      a.ensure_grad();
      auto ga = a.grad();
      auto bv = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      b.ensure_grad();
      auto gb = b.grad();
      auto av = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
  return out;
}

Tensor scale(Tape& tape, const Tensor& x, float factor) {
  Tensor out = tape.make_output(x.shape(), {&x});
  auto y = out.data();
  auto xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] * factor;
  tape.record(out, [x = Tensor(x), out, factor]() mutable {
    x.ensure_grad();
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
  });
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  Tensor out = tape.make_output({1}, {&x});
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  out.data()[0] = static_cast<float>(acc);
  tape.record(out, [x = Tensor(x), out]() mutable {
    x.ensure_grad();
    const float g = out.grad()[0];
    for (float& gx : x.grad()) gx += g;
  });
  return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
  Tensor total = sum(tape, x);
  return scale(tape, total, 1.0f / static_cast<float>(x.numel()));
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  Tensor out = tape.make_output(std::move(shape), {&x});
  std::copy(x.data().begin(), x.data().end(), out.data().begin());
  tape.record(out, [x = Tensor(x), out]() mutable {
    x.ensure_grad();
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
  return out;
}

Tensor gelu(Tape& tape, const Tensor& x) {
  Tensor out = tape.make_output(x.shape(), {&x});
  auto y = out.data();
  auto xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = gelu_value(xv[i]);
  tape.record(out, [x = Tensor(x), out]() mutable {
    x.ensure_grad();
    auto g = out.grad();
    auto gx = x.grad();
    auto xv = x.data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * gelu_derivative(xv[i]);
  });
  return out;
}

Tensor softmax_lastdim(Tape& tape, const Tensor& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = leading_rows(x);
  Tensor out = tape.make_output(x.shape(), {&x});
  const float masked_below = kMaskSentinel * 0.5f;
  const float* xv = x.data().data();
  float* y = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = xv + r * n;
    float* yr = y + r * n;
    float max_v = -std::numeric_limits<float>::infinity();
    bool any_valid = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (row[j] > masked_below) {
        max_v = std::max(max_v, row[j]);
        any_valid = true;
      }
    }
    if (!any_valid) {
      // Fully masked row: no valid entry to prefer, spread uniformly.
      std::fill(yr, yr + n, 1.0f / static_cast<float>(n));
      continue;
    }
    float total = 0.0f;
    for (std::size_t j = 0; j < n; ++j) {
      if (row[j] > masked_below) {
        yr[j] = std::exp(row[j] - max_v);
        total += yr[j];
      } else {
        yr[j] = 0.0f;
      }
    }
    const float inv = 1.0f / total;
    for (std::size_t j = 0; j < n; ++j) yr[j] *= inv;
  }
  tape.record(out, [x = Tensor(x), out, n, rows]() mutable {
    x.ensure_grad();
    const float* g = out.grad().data();
    const float* y = out.data().data();
    float* gx = x.grad().data();
    for (std::size_t r = 0; r < rows; ++r) {
      float dot = 0.0f;
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
    }
  });
  return out;
}

Tensor add_constant(Tape& tape, const Tensor& x, std::span<const float> bias) {
  if (bias.size() != x.numel()) {
    throw DimensionError("add_constant: bias of " + std::to_string(bias.size()) + " values for tensor " +
                         shape_str(x.shape()));
  }
  Tensor out = tape.make_output(x.shape(), {&x});
  auto y = out.data();
  auto xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] + bias[i];
  tape.record(out, [x = Tensor(x), out]() mutable {
    x.ensure_grad();
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  const std::size_t d = x.shape().back();
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: gamma " + shape_str(gamma.shape()) + " / beta " + shape_str(beta.shape()) +
                         " do not match last extent of " + shape_str(x.shape()));
  }
  const std::size_t rows = leading_rows(x);
  Tensor out = tape.make_output(x.shape(), {&x, &gamma, &beta});
  const bool track = out.requires_grad();
  std::vector<float> xhat(track ? x.numel() : 0);
  std::vector<float> rstd(track ? rows : 0);
  const float* xv = x.data().data();
  const float* gv = gamma.data().data();
  const float* bv = beta.data().data();
  float* y = out.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = xv + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const float inv = static_cast<float>(1.0 / std::sqrt(var + static_cast<double>(eps)));
    const float mu = static_cast<float>(mean);
    for (std::size_t j = 0; j < d; ++j) {
      const float h = (row[j] - mu) * inv;
      y[r * d + j] = h * gv[j] + bv[j];
      if (track) xhat[r * d + j] = h;
    }
    if (track) rstd[r] = inv;
  }
  tape.record(out, [x = Tensor(x), gamma = Tensor(gamma), beta = Tensor(beta), out, xhat = std::move(xhat), rstd = std::move(rstd), rows, d]() mutable {
    const float* g = out.grad().data();
    if (gamma.requires_grad()) {
      gamma.ensure_grad();
      float* gg = gamma.grad().data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < d; ++j) gg[j] += g[r * d + j] * xhat[r * d + j];
      }
    }
    if (beta.requires_grad()) {
      beta.ensure_grad();
      float* gb = beta.grad().data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
      }
    }
    if (x.requires_grad()) {
      x.ensure_grad();
      float* gx = x.grad().data();
      const float* gv = gamma.data().data();
      std::vector<float> gh(d);
      for (std::size_t r = 0; r < rows; ++r) {
        float mean_gh = 0.0f;
        float mean_ghx = 0.0f;
        for (std::size_t j = 0; j < d; ++j) {
          gh[j] = g[r * d + j] * gv[j];
          mean_gh += gh[j];
          mean_ghx += gh[j] * xhat[r * d + j];
        }
        mean_gh /= static_cast<float>(d);
        mean_ghx /= static_cast<float>(d);
        for (std::size_t j = 0; j < d; ++j) {
          gx[r * d + j] += rstd[r] * (gh[j] - mean_gh - xhat[r * d + j] * mean_ghx);
        }
      }
    }
  });
  return out;
}

Tensor embedding_lookup(Tape& tape, const Tensor& table, const IdGrid& ids) {
  require_rank(table, 2, "embedding_lookup");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  if (ids.ids.size() != ids.rows * ids.cols || ids.rows == 0 || ids.cols == 0) {
    throw DimensionError("embedding_lookup: malformed id grid");
  }
  for (auto id : ids.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(id) + " outside [0, " + std::to_string(vocab) + ")");
    }
  }
  Tensor out = tape.make_output({ids.rows, ids.cols, d}, {&table});
  const float* tv = table.data().data();
  float* y = out.data().data();
  for (std::size_t i = 0; i < ids.ids.size(); ++i) {
    const float* src = tv + static_cast<std::size_t>(ids.ids[i]) * d;
    std::copy(src, src + d, y + i * d);
  }
  tape.record(out, [table = Tensor(table), out, ids, d]() mutable {
    table.ensure_grad();
    const float* g = out.grad().data();
    float* gt = table.grad().data();
    for (std::size_t i = 0; i < ids.ids.size(); ++i) {
      float* dst = gt + static_cast<std::size_t>(ids.ids[i]) * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += g[i * d + j];
    }
  });
  return out;
}

Tensor dropout(Tape& tape, const Tensor& x, float p, bool training, Rng& rng) {
  if (!(p >= 0.0f) || p >= 1.0f) {
    throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0f) return x;
  const float keep_scale = 1.0f / (1.0f - p);
  std::vector<float> mask(x.numel());
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  for (auto& m : mask) m = keep(rng) ? keep_scale : 0.0f;
  Tensor out = tape.make_output(x.shape(), {&x});
  auto y = out.data();
  auto xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] * mask[i];
  tape.record(out, [x = Tensor(x), out, mask = std::move(mask)]() mutable {
    x.ensure_grad();
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
  return out;
}

Tensor split_heads(Tape& tape, const Tensor& x, std::size_t heads) {
  require_rank(x, 3, "split_heads");
  const std::size_t batch = x.dim(0), steps = x.dim(1), d = x.dim(2);
  if (heads == 0 || d % heads != 0) {
    throw DimensionError("split_heads: width " + std::to_string(d) + " not divisible by " + std::to_string(heads));
  }
  const std::size_t dk = d / heads;
  Tensor out = tape.make_output({batch * heads, steps, dk}, {&x});
  const float* xv = x.data().data();
  float* y = out.data().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(xv + (b * steps + t) * d + h * dk, dk, y + ((b * heads + h) * steps + t) * dk);
  tape.record(out, [x = Tensor(x), out, batch, steps, heads, dk, d]() mutable {
    x.ensure_grad();
    const float* g = out.grad().data();
    float* gx = x.grad().data();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t k = 0; k < dk; ++k)
            gx[(b * steps + t) * d + h * dk + k] += g[((b * heads + h) * steps + t) * dk + k];
  });
  return out;
}

Tensor merge_heads(Tape& tape, const Tensor& x, std::size_t heads) {
  require_rank(x, 3, "merge_heads");
  if (heads == 0 || x.dim(0) % heads != 0) {
    throw DimensionError("merge_heads: leading extent " + std::to_string(x.dim(0)) + " not divisible by " +
                         std::to_string(heads));
  }
  const std::size_t batch = x.dim(0) / heads, steps = x.dim(1), dk = x.dim(2), d = dk * heads;
  Tensor out = tape.make_output({batch, steps, d}, {&x});
  const float* xv = x.data().data();
  float* y = out.data().data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(xv + ((b * heads + h) * steps + t) * dk, dk, y + (b * steps + t) * d + h * dk);
  tape.record(out, [x = Tensor(x), out, batch, steps, heads, dk, d]() mutable {
    x.ensure_grad();
    const float* g = out.grad().data();
    float* gx = x.grad().data();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t k = 0; k < dk; ++k)
            gx[((b * heads + h) * steps + t) * dk + k] += g[(b * steps + t) * d + h * dk + k];
  });
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& x, std::span<const std::size_t> positions) {
  require_rank(x, 3, "gather_rows");
  const std::size_t batch = x.dim(0), steps = x.dim(1), d = x.dim(2);
  if (positions.size() != batch) {
    throw DimensionError("gather_rows: " + std::to_string(positions.size()) + " positions for batch of " +
                         std::to_string(batch));
  }
  for (auto p : positions) {
    if (p >= steps) throw IndexError("gather_rows: position " + std::to_string(p) + " outside sequence");
  }
  Tensor out = tape.make_output({batch, d}, {&x});
  const float* xv = x.data().data();
  float* y = out.data().data();
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(xv + (b * steps + positions[b]) * d, d, y + b * d);
  std::vector<std::size_t> pos(positions.begin(), positions.end());
  tape.record(out, [x = Tensor(x), out, pos = std::move(pos), steps, d]() mutable {
    x.ensure_grad();
    const float* g = out.grad().data();
    float* gx = x.grad().data();
    for (std::size_t b = 0; b < pos.size(); ++b) {
      for (std::size_t j = 0; j < d; ++j) gx[(b * steps + pos[b]) * d + j] += g[b * d + j];
    }
  });
  return out;
}

}  // namespace ops

}  // namespace sft
