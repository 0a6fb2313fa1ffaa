#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sft/checkpoint.hpp"
#include "sft/error.hpp"
#include "sft/gpt_model.hpp"
#include "sft/reference_model.hpp"

using namespace sft;
using namespace sft::gpt;

namespace {

GptConfig small_cfg(std::size_t d = 8, std::size_t heads = 2, std::size_t layers = 2) {
  GptConfig cfg;
  cfg.n_vocab = 11;
  cfg.n_ctx = 8;
  cfg.n_embd = d;
  cfg.n_head = heads;
  cfg.n_layer = layers;
  cfg.d_ff = 4 * d;
  cfg.dropout_p = 0.0f;
  cfg.head = HeadKind::MultiClassSoftmax;
  cfg.n_classes = 2;
  return cfg;
}

ModelParams random_params(const GptConfig& cfg, std::uint64_t seed, float stddev = 0.3f) {
  Rng rng = make_rng(seed);
  auto params = init_params(cfg, rng);
  std::normal_distribution<float> n(0.0f, stddev);
  for (auto& [name, t] : params.entries())
    for (auto& v : t.data()) v = name.size() > 2 && name.substr(name.size() - 2) == ".g" ? 1.0f + n(rng) : n(rng);
  return params;
}

TokenBatch make_batch(std::vector<std::vector<std::int32_t>> rows, std::size_t T) {
  TokenBatch b;
  b.ids.rows = rows.size();
  b.ids.cols = T;
  for (const auto& r : rows) {
    for (std::size_t t = 0; t < T; ++t) {
      b.ids.ids.push_back(t < r.size() ? r[t] : 0);
      b.mask.push_back(t < r.size() ? 1 : 0);
    }
  }
  return b;
}

std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("config presets and validation") {
  auto g = gpt2_small();
  CHECK(g.n_vocab == 50257);
  CHECK(g.n_ctx == 1024);
  CHECK(g.n_embd == 768);
  CHECK(g.n_layer == 12);
  auto t = tiny();
  CHECK(t.n_embd == 64);
  CHECK(config_from_name("tiny") == t);
  auto bad = t;
  bad.n_head = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = t;
  bad.dropout_p = 1.0f;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = t;
  bad.head = HeadKind::BinarySigmoid;
  bad.n_classes = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(config_from_name("gpt5"), ConfigError);
  CHECK(config_from_json(config_to_json(g)) == g);
}

TEST_CASE("init params") {
  auto cfg = small_cfg(4, 1, 1);
  cfg.n_vocab = 2500;
  Rng rng = make_rng(1);
  auto p = init_params(cfg, rng);
  check_params(p, cfg);
  const auto& wte = p.at("wte");
  double s = 0, s2 = 0;
  for (float v : wte.data()) {
    s += v;
    s2 += double(v) * v;
  }
  const double n = double(wte.numel());
  const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
  CHECK(n == 10000);
  CHECK(sd >= 0.018);
  CHECK(sd <= 0.022);
  for (float v : p.at("blocks.0.ln1.g").data()) CHECK(v == 1.0f);
  for (float v : p.at("blocks.0.attn.bq").data()) CHECK(v == 0.0f);
  Rng rng2 = make_rng(1);
  auto p2 = init_params(cfg, rng2);
  for (const auto& [name, t] : p.entries()) CHECK(bitwise_equal(t, p2.at(name)));
}

TEST_CASE("embed") {
  auto cfg = small_cfg();
  auto params = random_params(cfg, 2);
  auto batch = make_batch({{3, 1, 4}}, 3);
  {
    auto p = params.clone();
    for (auto& v : p.at("wte").data()) v = 0.0f;
    GptModel m(cfg, std::move(p));
    Tape tape;
    auto e = m.embed(batch.ids, tape, false, nullptr);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t k = 0; k < cfg.n_embd; ++k) CHECK(e.data()[t * cfg.n_embd + k] == m.params().at("wpe").data()[t * cfg.n_embd + k]);
  }
  GptModel m(cfg, params.clone());
  Tape tape;
  auto e = m.embed(batch.ids, tape, false, nullptr);
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t k = 0; k < cfg.n_embd; ++k)
      CHECK(e.data()[t * cfg.n_embd + k] ==
            params.at("wte").data()[batch.ids.ids[t] * cfg.n_embd + k] + params.at("wpe").data()[t * cfg.n_embd + k]);
  auto too_long = make_batch({{1, 1, 1, 1, 1, 1, 1, 1, 1}}, 9);
  CHECK_THROWS(m.embed(too_long.ids, tape, false, nullptr));
}

TEST_CASE("attention matches a per-head loop") {
  auto cfg = small_cfg(8, 2, 1);
  auto params = random_params(cfg, 3);
  GptModel m(cfg, params.clone());
  const std::size_t T = 3, d = 8, H = 2, dk = 4;
  Rng rng = make_rng(4);
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> xv(T * d);
  for (auto& v : xv) v = n(rng);
  auto x = Tensor::from({1, T, d}, xv);
  auto batch = make_batch({{1, 2, 3}}, T);
  Tape tape;
  auto y = m.causal_attention(0, x, batch, tape, false, nullptr);

  auto W = [&](const char* name) { return params.at(std::string("blocks.0.attn.") + name).data(); };
  auto proj = [&](const char* w, const char* b) {
    std::vector<double> out(T * d);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t o = 0; o < d; ++o) {
        double acc = W(b)[o];
        for (std::size_t i = 0; i < d; ++i) acc += double(xv[t * d + i]) * W(w)[i * d + o];
        out[t * d + o] = acc;
      }
    return out;
  };
  auto q = proj("wq", "bq"), k = proj("wk", "bk"), v = proj("wv", "bv");
  std::vector<double> ctx(T * d, 0.0);
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t i = 0; i < T; ++i) {
      std::vector<double> s(i + 1);
      double mx = -1e300;
      for (std::size_t j = 0; j <= i; ++j) {
        double acc = 0;
        for (std::size_t c = 0; c < dk; ++c) acc += q[i * d + h * dk + c] * k[j * d + h * dk + c];
        s[j] = acc / std::sqrt(double(dk));
        mx = std::max(mx, s[j]);
      }
      double z = 0;
      for (auto& e : s) z += (e = std::exp(e - mx));
      for (std::size_t j = 0; j <= i; ++j)
        for (std::size_t c = 0; c < dk; ++c) ctx[i * d + h * dk + c] += s[j] / z * v[j * d + h * dk + c];
    }
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t o = 0; o < d; ++o) {
      double acc = W("bo")[o];
      for (std::size_t i = 0; i < d; ++i) acc += ctx[t * d + i] * W("wo")[i * d + o];
      CHECK(y.data()[t * d + o] == doctest::Approx(acc).epsilon(1e-5));
    }
}

TEST_CASE("single token attends to itself") {
  auto cfg = small_cfg(8, 2, 1);
  auto params = random_params(cfg, 5);
  GptModel m(cfg, params.clone());
  auto x = Tensor::from({1, 1, 8}, {0.1f, -0.2f, 0.3f, 0.4f, -0.5f, 0.6f, 0.7f, -0.8f});
  Tape tape;
  auto y = m.causal_attention(0, x, make_batch({{1}}, 1), tape, false, nullptr);
  auto W = [&](const char* name) { return params.at(std::string("blocks.0.attn.") + name).data(); };
  std::vector<double> v(8);
  for (std::size_t o = 0; o < 8; ++o) {
    v[o] = W("bv")[o];
    for (std::size_t i = 0; i < 8; ++i) v[o] += double(x.data()[i]) * W("wv")[i * 8 + o];
  }
  for (std::size_t o = 0; o < 8; ++o) {
    double acc = W("bo")[o];
    for (std::size_t i = 0; i < 8; ++i) acc += v[i] * W("wo")[i * 8 + o];
    CHECK(y.data()[o] == doctest::Approx(acc).epsilon(1e-5));
  }
}

TEST_CASE("mask bias") {
  auto batch = make_batch({{1, 2}, {3, 4, 5}}, 3);
  auto bias = attention_mask_bias(batch, 1);
  REQUIRE(bias.size() == 2 * 9);
  // Row 0: key 2 is padding; row 1: only the future is masked.
  CHECK(bias[0 * 3 + 1] == kMaskSentinel);
  CHECK(bias[1 * 3 + 0] == 0.0f);
  CHECK(bias[2 * 3 + 2] == kMaskSentinel);
  CHECK(bias[9 + 2 * 3 + 2] == 0.0f);
  CHECK(last_token_indices(batch) == std::vector<std::size_t>{1, 2});
  CHECK_THROWS_AS(last_token_indices(make_batch({{}}, 2)), ContractError);
}

TEST_CASE("zero network") {
  auto cfg = small_cfg();
  auto params = zero_params(cfg);
  for (auto& v : params.at("lnf.b").data()) v = 0.75f;
  params.at("lnf.b").data()[3] = -2.0f;
  {
    GptModel block_model(cfg, params.clone());
    Tape tape;
    auto x = Tensor::from({1, 2, 8}, std::vector<float>(16, 0.5f));
    x.data()[3] = -1.0f;
    auto y = block_model.transformer_block(0, x, make_batch({{1, 2}}, 2), tape, false, nullptr);
    CHECK(values(y) == values(x));
  }
  GptModel m(cfg, std::move(params));
  Tape tape;
  auto cache = m.forward(make_batch({{1, 2, 3}, {4}}, 3), tape, false, nullptr);
  CHECK(cache.hidden.size() == cfg.n_layer);
  REQUIRE(cache.last_token.shape() == Shape{2, 8});
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t k = 0; k < 8; ++k) CHECK(cache.last_token.data()[r * 8 + k] == m.params().at("lnf.b").data()[k]);
}

TEST_CASE("forward shapes and reference agreement") {
  auto cfg = small_cfg(16, 4, 2);
  auto params = random_params(cfg, 6);
  GptModel m(cfg, params.clone());
  auto batch = make_batch({{1, 2, 3, 4, 5, 6, 7, 8}, {9, 10, 1}}, 8);
  Tape tape;
  auto cache = m.forward(batch, tape, false, nullptr);
  CHECK(cache.hidden[0].shape() == Shape{2, 8, 16});
  CHECK(cache.last_token.shape() == Shape{2, 16});
  CHECK(cache.last_index == std::vector<std::size_t>{7, 2});
  auto logits = m.classify(cache.last_token, tape);
  const auto ref = reference::logits(cfg, reference::to_f64(params), batch);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(logits.data()[i] == doctest::Approx(ref[i]).epsilon(1e-4));
}

TEST_CASE("classify") {
  auto cfg = small_cfg();
  auto params = zero_params(cfg);
  params.at("head.b").data()[0] = 1.0f;
  params.at("head.b").data()[1] = -1.0f;
  GptModel m(cfg, std::move(params));
  Tape tape;
  Rng rng = make_rng(8);
  std::normal_distribution<float> n;
  std::vector<float> h(3 * 8);
  for (auto& v : h) v = n(rng);
  auto logits = m.classify(Tensor::from({3, 8}, h), tape);
  CHECK(values(logits) == std::vector<float>{1, -1, 1, -1, 1, -1});

  auto p = random_params(cfg, 9);
  GptModel m2(cfg, p.clone());
  auto z = m2.classify(Tensor::from({3, 8}, h), tape);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 2; ++c) {
      double acc = p.at("head.b").data()[c];
      for (std::size_t k = 0; k < 8; ++k) acc += double(h[r * 8 + k]) * p.at("head.w").data()[c * 8 + k];
      CHECK(z.data()[r * 2 + c] == doctest::Approx(acc).epsilon(1e-5));
    }
}

TEST_CASE("causality and padding invariance") {
  Rng rng = make_rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    auto cfg = small_cfg(8, 2, 2);
    GptModel m(cfg, random_params(cfg, 100 + trial));
    std::uniform_int_distribution<std::int32_t> id(0, 10);
    std::vector<std::int32_t> row(6);
    for (auto& v : row) v = id(rng);
    Tape tape;
    auto base = m.forward(make_batch({row}, 6), tape, false, nullptr);
    auto changed = row;
    changed[4] = (changed[4] + 1) % 11;
    auto alt = m.forward(make_batch({changed}, 6), tape, false, nullptr);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t k = 0; k < 8; ++k)
        CHECK(base.final_hidden.data()[t * 8 + k] == alt.final_hidden.data()[t * 8 + k]);
    auto short_row = std::vector<std::int32_t>(row.begin(), row.begin() + 4);
    auto tight = m.forward(make_batch({short_row}, 4), tape, false, nullptr);
    auto padded = m.forward(make_batch({short_row}, 8), tape, false, nullptr);
    for (std::size_t k = 0; k < 8; ++k)
      CHECK(tight.last_token.data()[k] == doctest::Approx(padded.last_token.data()[k]).epsilon(1e-5));
  }
}

TEST_CASE("checkpoint round trip and errors") {
  auto cfg = small_cfg();
  auto params = random_params(cfg, 11);
  const auto dir = std::filesystem::temp_directory_path() / "sft_test_gpt";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.ckpt";
  save_checkpoint(params, path);
  auto loaded = load_checkpoint(path, cfg);
  CHECK(loaded.size() == params.size());
  for (const auto& [name, t] : params.entries()) CHECK(bitwise_equal(t, loaded.at(name)));

  auto expect_kind = [&](const std::filesystem::path& p, const GptConfig& c, CheckpointError::Kind kind) {
    try {
      load_checkpoint(p, c);
      FAIL("expected a checkpoint error");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == kind);
    }
  };
  auto other = cfg;
  other.n_embd = 16;
  other.d_ff = 64;
  expect_kind(path, other, CheckpointError::Kind::ShapeMismatch);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  {
    std::ofstream out(dir / "short.ckpt", std::ios::binary);
    out << bytes.substr(0, bytes.size() - 5);
  }
  expect_kind(dir / "short.ckpt", cfg, CheckpointError::Kind::Truncated);
  {
    std::ofstream out(dir / "magic.ckpt", std::ios::binary);
    out << "NOTACKPT" << bytes.substr(8);
  }
  expect_kind(dir / "magic.ckpt", cfg, CheckpointError::Kind::BadMagic);
  expect_kind(dir / "missing.ckpt", cfg, CheckpointError::Kind::Io);
  std::filesystem::remove_all(dir);
}
