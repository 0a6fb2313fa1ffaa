#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sft/adamw.hpp"
#include "sft/cost_model.hpp"
#include "sft/error.hpp"
#include "sft/freeze_policy.hpp"
#include "sft/gradcheck.hpp"
#include "sft/param_ledger.hpp"

using namespace sft;
using namespace sft::tune;

namespace {

gpt::GptConfig probe_cfg(gpt::HeadKind head = gpt::HeadKind::BinarySigmoid, std::size_t classes = 1) {
  gpt::GptConfig cfg;
  cfg.n_vocab = 13;
  cfg.n_ctx = 6;
  cfg.n_embd = 8;
  cfg.n_head = 2;
  cfg.n_layer = 2;
  cfg.d_ff = 16;
  cfg.dropout_p = 0.0f;
  cfg.head = head;
  cfg.n_classes = classes;
  return cfg;
}

gpt::TokenBatch probe_batch() {
  gpt::TokenBatch b;
  b.ids = {2, 5, {1, 7, 3, 12, 4, 9, 2, 0, 0, 0}};
  b.mask = {1, 1, 1, 1, 1, 1, 1, 0, 0, 0};
  return b;
}

}  // namespace

TEST_CASE("policy resolution") {
  auto g = gpt::gpt2_small();
  g.head = gpt::HeadKind::MultiClassSoftmax;
  g.n_classes = 2;
  auto sel = FreezePolicy::selective().resolve(g);
  std::set<std::string> expected = {"lnf.g", "lnf.b", "head.w", "head.b"};
  for (const auto& spec : gpt::param_specs(g))
    if (spec.name.rfind("blocks.11.", 0) == 0) expected.insert(spec.name);
  CHECK(sel == expected);
  CHECK(FreezePolicy::head_only().resolve(g) == std::set<std::string>{"head.w", "head.b"});
  CHECK(FreezePolicy::full().resolve(g).size() == gpt::param_specs(g).size());
  CHECK(FreezePolicy::parse("custom:lnf.*,head.w").resolve(g) == std::set<std::string>{"lnf.g", "lnf.b", "head.w"});
  CHECK_THROWS_AS(FreezePolicy::parse("custom:nothing.*").resolve(g), ConfigError);
  CHECK_THROWS_AS(FreezePolicy::parse("partial"), ConfigError);
  CHECK(glob_match("blocks.*.attn.w?", "blocks.3.attn.wq") == glob_match("blocks.*.attn.w?", "blocks.3.attn.wq"));
  CHECK(glob_match("blocks.*", "blocks.10.ln1.g"));
  CHECK(!glob_match("head.*", "lnf.g"));
}

TEST_CASE("apply policy flags") {
  auto cfg = probe_cfg();
  Rng rng = make_rng(1);
  auto params = gpt::init_params(cfg, rng);
  apply_policy(params, cfg, FreezePolicy::selective());
  for (const auto& [name, t] : params.entries()) {
    const bool want = name.rfind("blocks.1.", 0) == 0 || name.rfind("lnf.", 0) == 0 || name.rfind("head.", 0) == 0;
    CHECK(t.requires_grad() == want);
    CHECK(t.has_grad() == want);
  }
}

TEST_CASE("ledger for gpt2-small") {
  auto g = gpt::gpt2_small();
  g.head = gpt::HeadKind::MultiClassSoftmax;
  g.n_classes = 2;
  auto paper = count_params(g, FreezePolicy::selective(), Convention::Paper);
  CHECK(paper.block_attention == 2'359'296);
  CHECK(paper.block_ffn == 4'718'592);
  CHECK(paper.block_ln == 3'072);
  CHECK(paper.block_total == 7'080'960);
  CHECK(paper.token_embeddings == 38'597'376);
  CHECK(paper.positional_embeddings == 786'432);
  CHECK(paper.embeddings == 38'597'376ull + 786'432ull);
  CHECK(paper.final_ln == 1'536);
  CHECK(paper.head == 1'538);
  CHECK(paper.trainable == 7'084'034);
  CHECK(paper.trainable_fraction() < 0.06);
  auto full = count_params(g, FreezePolicy::full(), Convention::Full);
  CHECK(full.total == 124'441'346);
  CHECK(full.trainable == full.total);
  std::uint64_t exact = 0;
  for (const auto& s : gpt::param_specs(g)) exact += shape_numel(s.shape);
  CHECK(full.total == exact);
  CHECK(humanize_count(1538) == "1.5k");
  CHECK(humanize_count(7'084'034) == "7.08M");
  CHECK(humanize_count(124'358'402) == "124M");
  CHECK(with_thousands(1234567) == "1,234,567");
  CHECK(with_thousands(12) == "12");
}

TEST_CASE("ledger at unit scale") {
  gpt::GptConfig cfg;
  cfg.n_vocab = 1;
  cfg.n_ctx = 1;
  cfg.n_embd = 1;
  cfg.n_head = 1;
  cfg.n_layer = 1;
  cfg.d_ff = 4;
  cfg.n_classes = 1;
  auto l = count_params(cfg, FreezePolicy::full(), Convention::Paper);
  CHECK(l.block_total == 16);
  CHECK(l.embeddings == 2);
}

TEST_CASE("step cost") {
  gpt::GptConfig cfg;
  cfg.n_vocab = 4;
  cfg.n_ctx = 4;
  cfg.n_embd = 2;
  cfg.n_head = 1;
  cfg.n_layer = 1;
  cfg.d_ff = 8;
  CHECK(block_forward_flops(cfg, 1, 2) == 224);
  CHECK(estimate_step_cost(cfg, FreezePolicy::full(), 4, 0).forward_flops == 0);
  auto g = gpt::gpt2_small();
  auto sel = estimate_step_cost(g, FreezePolicy::selective(), 2, 16);
  auto full = estimate_step_cost(g, FreezePolicy::full(), 2, 16);
  CHECK(sel.backward_blocks == 1);
  CHECK(full.backward_blocks == 12);
  CHECK(sel.backward_block_flops * 12 == full.backward_block_flops);
  CHECK(estimate_step_cost(g, FreezePolicy::head_only(), 2, 16).backward_blocks == 0);
}

TEST_CASE("adamw closed forms") {
  auto make = [](float value, float grad) {
    gpt::ModelParams p;
    auto t = Tensor::from({1, 1}, {value});
    t.set_requires_grad(true);
    t.ensure_grad();
    t.grad()[0] = grad;
    p.insert("w", t);
    return p;
  };
  OptimizerHp hp;
  hp.lr = 0.1f;
  hp.weight_decay = 0.0f;
  auto p = make(1.0f, 1.0f);
  AdamW opt(hp);
  opt.step(p);
  CHECK(p.at("w").data()[0] == doctest::Approx(0.9).epsilon(1e-6));

  hp.weight_decay = 0.1f;
  auto q = make(1.0f, 0.0f);
  AdamW decay(hp);
  decay.step(q);
  CHECK(q.at("w").data()[0] == doctest::Approx(0.99).epsilon(1e-6));

  gpt::ModelParams frozen;
  auto f = Tensor::from({2, 2}, {1, 2, 3, 4});
  frozen.insert("f", f);
  auto before = f.clone();
  AdamW opt2(hp);
  for (int i = 0; i < 100; ++i) opt2.step(frozen);
  CHECK(bitwise_equal(before, frozen.at("f")));
  CHECK(!opt2.has_state("f"));

  gpt::ModelParams nograd;
  auto t = Tensor::from({1}, {1.0f});
  t.set_requires_grad(true);
  nograd.insert("t", t);
  CHECK_THROWS_AS(opt2.step(nograd), ContractError);

  OptimizerHp bad;
  bad.lr = 0.0f;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("gradcheck passes and catches tampering") {
  for (auto head : {gpt::HeadKind::BinarySigmoid, gpt::HeadKind::MultiClassSoftmax, gpt::HeadKind::MultiLabelSigmoid}) {
    const std::size_t classes = head == gpt::HeadKind::BinarySigmoid ? 1 : 3;
    auto cfg = probe_cfg(head, classes);
    LabelGrid labels;
    labels.rows = 2;
    labels.cols = head == gpt::HeadKind::MultiLabelSigmoid ? 3 : 1;
    labels.values = head == gpt::HeadKind::MultiLabelSigmoid ? std::vector<std::int32_t>{1, 0, 1, 0, 0, 1}
                                                              : std::vector<std::int32_t>{1, 0};
    if (head == gpt::HeadKind::MultiClassSoftmax) labels.values = {2, 0};
    for (const char* policy : {"head", "selective", "full"}) {
      Rng rng = make_rng(3);
      auto params = gpt::init_params(cfg, rng);
      randomize_params(params, 0.2, rng);
      apply_policy(params, cfg, FreezePolicy::parse(policy));
      gpt::GptModel model(cfg, std::move(params));
      GradCheckOptions opts;
      auto report = gradcheck(model, probe_batch(), labels, opts);
      CHECK_MESSAGE(report.passed, policy, " max error ", report.max_rel_error);
      CHECK(report.max_rel_error < 1e-3);
    }
  }
  auto cfg = probe_cfg();
  Rng rng = make_rng(4);
  auto params = gpt::init_params(cfg, rng);
  randomize_params(params, 0.2, rng);
  apply_policy(params, cfg, FreezePolicy::selective());
  gpt::GptModel model(cfg, std::move(params));
  LabelGrid labels{2, 1, {1, 0}};
  auto report = gradcheck(model, probe_batch(), labels, {}, [](gpt::ModelParams& p) {
    p.at("blocks.1.ffn.w1").grad()[0] += 0.5f;
  });
  CHECK(!report.passed);
}
