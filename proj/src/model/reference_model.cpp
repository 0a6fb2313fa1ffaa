#include "sft/reference_model.hpp"

#include <cmath>

#include "sft/error.hpp"

namespace sft::gpt::reference {

namespace {

const double kSqrt2OverPi = std::sqrt(2.0 / 3.14159265358979323846);

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kSqrt2OverPi * (x + 0.044715 * x * x * x))); }

void layer_norm(std::vector<double>& x, std::size_t d, const std::vector<double>& g, const std::vector<double>& b,
                double eps) {
  for (std::size_t r = 0; r < x.size() / d; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += x[r * d + j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (x[r * d + j] - mean) * (x[r * d + j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) x[r * d + j] = (x[r * d + j] - mean) * inv * g[j] + b[j];
  }
}

// rows x in  .  in x out  + bias
std::vector<double> affine(const std::vector<double>& x, std::size_t in, const std::vector<double>& w,
                           std::size_t out, const std::vector<double>& bias) {
  const std::size_t rows = x.size() / in;
  std::vector<double> y(rows * out);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += x[r * in + i] * w[i * out + o];
      y[r * out + o] = acc;
    }
  }
  return y;
}

}  // namespace

ParamsF64 to_f64(const ModelParams& params) {
  ParamsF64 out;
  for (const auto& [name, tensor] : params.entries()) out[name] = std::vector<double>(tensor.data().begin(), tensor.data().end());
  return out;
}

std::vector<double> final_hidden(const GptConfig& cfg, const ParamsF64& p, const TokenBatch& batch) {
  const std::size_t B = batch.rows(), T = batch.cols(), d = cfg.n_embd, H = cfg.n_head, dk = cfg.head_dim();
  const double eps = cfg.ln_eps;
  if (T > cfg.n_ctx) throw DimensionError("reference: sequence longer than context");
  std::vector<double> x(B * T * d);
  const auto& wte = p.at("wte");
  const auto& wpe = p.at("wpe");
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = 0; t < T; ++t) {
      const auto id = static_cast<std::size_t>(batch.ids.at(b, t));
      for (std::size_t j = 0; j < d; ++j) x[(b * T + t) * d + j] = wte[id * d + j] + wpe[t * d + j];
    }
  }
  for (std::size_t layer = 0; layer < cfg.n_layer; ++layer) {
    const std::string pre = block_prefix(layer);
    std::vector<double> h = x;
    layer_norm(h, d, p.at(pre + "ln1.g"), p.at(pre + "ln1.b"), eps);
    const auto q = affine(h, d, p.at(pre + "attn.wq"), d, p.at(pre + "attn.bq"));
    const auto k = affine(h, d, p.at(pre + "attn.wk"), d, p.at(pre + "attn.bk"));
    const auto v = affine(h, d, p.at(pre + "attn.wv"), d, p.at(pre + "attn.bv"));
    std::vector<double> ctx(B * T * d, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t head = 0; head < H; ++head) {
        for (std::size_t i = 0; i < T; ++i) {
          std::vector<double> w(T, 0.0);
          double mx = -1e300;
          for (std::size_t j = 0; j <= i; ++j) {
            if (!batch.mask[b * T + j]) continue;
            double s = 0.0;
            for (std::size_t c = 0; c < dk; ++c) s += q[(b * T + i) * d + head * dk + c] * k[(b * T + j) * d + head * dk + c];
            w[j] = s / std::sqrt(static_cast<double>(dk));
            mx = std::max(mx, w[j]);
          }
          double z = 0.0;
          for (std::size_t j = 0; j <= i; ++j) {
            if (!batch.mask[b * T + j]) continue;
            w[j] = std::exp(w[j] - mx);
            z += w[j];
          }
          for (std::size_t j = 0; j <= i; ++j) {
            if (!batch.mask[b * T + j]) continue;
            for (std::size_t c = 0; c < dk; ++c) {
              ctx[(b * T + i) * d + head * dk + c] += (w[j] / z) * v[(b * T + j) * d + head * dk + c];
            }
          }
        }
      }
    }
    const auto attn = affine(ctx, d, p.at(pre + "attn.wo"), d, p.at(pre + "attn.bo"));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += attn[i];
    std::vector<double> u = x;
    layer_norm(u, d, p.at(pre + "ln2.g"), p.at(pre + "ln2.b"), eps);
    auto f = affine(u, d, p.at(pre + "ffn.w1"), cfg.d_ff, p.at(pre + "ffn.b1"));
    for (auto& val : f) val = gelu(val);
    const auto f2 = affine(f, cfg.d_ff, p.at(pre + "ffn.w2"), d, p.at(pre + "ffn.b2"));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += f2[i];
  }
  layer_norm(x, d, p.at("lnf.g"), p.at("lnf.b"), eps);
  return x;
}

std::vector<double> last_token_features(const GptConfig& cfg, const ParamsF64& params, const TokenBatch& batch) {
  const auto hidden = final_hidden(cfg, params, batch);
  const auto last = last_token_indices(batch);
  const std::size_t T = batch.cols(), d = cfg.n_embd;
  std::vector<double> out(batch.rows() * d);
  for (std::size_t b = 0; b < batch.rows(); ++b) {
    for (std::size_t j = 0; j < d; ++j) out[b * d + j] = hidden[(b * T + last[b]) * d + j];
  }
  return out;
}

std::vector<double> logits(const GptConfig& cfg, const ParamsF64& params, const TokenBatch& batch) {
  const auto h = last_token_features(cfg, params, batch);
  const auto& w = params.at("head.w");
  const auto& bias = params.at("head.b");
  const std::size_t d = cfg.n_embd, C = cfg.n_classes;
  std::vector<double> z(batch.rows() * C);
  for (std::size_t b = 0; b < batch.rows(); ++b) {
    for (std::size_t c = 0; c < C; ++c) {
      double acc = bias[c];
      for (std::size_t j = 0; j < d; ++j) acc += h[b * d + j] * w[c * d + j];
      z[b * C + c] = acc;
    }
  }
  return z;
}

double loss(const GptConfig& cfg, const ParamsF64& params, const TokenBatch& batch, const LabelGrid& labels) {
  const auto z = logits(cfg, params, batch);
  const std::size_t B = batch.rows(), C = cfg.n_classes;
  double total = 0.0;
  if (cfg.head == HeadKind::MultiClassSoftmax) {
    for (std::size_t b = 0; b < B; ++b) {
      double mx = z[b * C];
      for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, z[b * C + c]);
      double s = 0.0;
      for (std::size_t c = 0; c < C; ++c) s += std::exp(z[b * C + c] - mx);
      total += mx + std::log(s) - z[b * C + static_cast<std::size_t>(labels.at(b))];
    }
  } else {
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t c = 0; c < C; ++c) {
        const double zz = z[b * C + c];
        const double y = labels.at(b, c);
        total += std::max(zz, 0.0) - zz * y + std::log1p(std::exp(-std::abs(zz)));
      }
    }
  }
  return total / static_cast<double>(B);
}

}  // namespace sft::gpt::reference
