#include "sft/compare.hpp"

#include <cstdio>

#include "sft/csv.hpp"
#include "sft/error.hpp"
#include "sft/param_ledger.hpp"

namespace sft::train {

std::string strategy_label(const std::string& policy) {
  if (policy == "head") return "Linear head only";
  if (policy == "selective") return "Selective fine-tuning";
  if (policy == "full") return "Full fine-tuning";
  return "Custom (" + policy + ")";
}

std::vector<StrategyResult> compare_strategies(const CompareSetup& setup, const StrategyCallback& on_done) {
  if (setup.strategies.empty()) throw ContractError("compare needs at least one strategy");
  if (setup.test_set.empty()) throw ContractError("compare needs a nonempty test split");
  const auto test_batches = data::make_batches(setup.test_set, data::natural_order(setup.test_set.size()),
                                               setup.base.seq_len, setup.base.batch, setup.pad_id);
  const auto val_batches =
      setup.val_set.empty() ? std::vector<data::Batch>{}
                            : data::make_batches(setup.val_set, data::natural_order(setup.val_set.size()),
                                                 setup.base.seq_len, setup.base.batch, setup.pad_id);
  std::vector<StrategyResult> results;
  for (const auto& spec : setup.strategies) {
    const auto policy = tune::FreezePolicy::parse(spec.policy);
    TrainConfig cfg = setup.base;
    cfg.policy = policy;
    cfg.hp = spec.hp;

    gpt::GptModel model(setup.model_cfg, setup.initial.clone());
    auto run = train(model, setup.train_set, setup.val_set, setup.task, cfg, setup.pad_id);

    StrategyResult r;
    r.policy = policy.name();
    r.label = strategy_label(r.policy);
    r.trainable_paper = tune::count_params(setup.model_cfg, policy, tune::Convention::Paper).trainable;
    r.trainable_full = tune::count_params(setup.model_cfg, policy, tune::Convention::Full).trainable;
    for (const auto& rec : run.records) r.total_seconds += rec.seconds;
    r.seconds_per_epoch = run.records.empty() ? 0.0 : r.total_seconds / static_cast<double>(run.records.size());
    r.records = std::move(run.records);
    if (!val_batches.empty()) r.val = evaluate(model, val_batches).metrics;
    r.test_eval = evaluate(model, test_batches);
    r.test = r.test_eval.metrics;
    if (on_done) on_done(r);
    results.push_back(std::move(r));
  }
  return results;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string comparison_csv(const std::vector<StrategyResult>& results) {
  std::string out = csv::join({"Fine-Tuning Strategy", "Trainable Parameters", "Time / Epoch (min)", "Val. Acc.",
                               "Test Acc.", "F1 Score", "AUROC"}) +
                    "\n";
  for (const auto& r : results) {
    out += csv::join({r.label, tune::humanize_count(r.trainable_paper), fixed(r.seconds_per_epoch / 60.0, 4),
                      fixed(100.0 * r.val.accuracy, 2), fixed(100.0 * r.test.accuracy, 2), fixed(r.test.f1, 4),
                      r.test.auroc ? fixed(*r.test.auroc, 4) : std::string()}) +
           "\n";
  }
  return out;
}

std::string timing_csv(const std::vector<StrategyResult>& results) {
  std::string out = "strategy,policy,trainable_paper,trainable_full,epochs,seconds_per_epoch,total_seconds\n";
  for (const auto& r : results) {
    out += csv::join({r.label, r.policy, std::to_string(r.trainable_paper), std::to_string(r.trainable_full),
                      std::to_string(r.records.size()), fixed(r.seconds_per_epoch, 6), fixed(r.total_seconds, 6)}) +
           "\n";
  }
  return out;
}

}  // namespace sft::train
