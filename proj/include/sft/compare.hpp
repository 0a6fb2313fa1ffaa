#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sft/dataset.hpp"
#include "sft/trainer.hpp"

namespace sft::train {

struct StrategySpec {
  std::string policy;  // head | selective | full | custom:...
  tune::OptimizerHp hp;
};

struct CompareSetup {
  gpt::GptConfig model_cfg;
  gpt::ModelParams initial;  // every strategy starts from a copy
  std::vector<data::EncodedExample> train_set;
  std::vector<data::EncodedExample> val_set;
  std::vector<data::EncodedExample> test_set;
  data::TaskKind task = data::TaskKind::Binary;
  std::int32_t pad_id = 0;
  TrainConfig base;  // policy and hp are overridden per strategy
  std::vector<StrategySpec> strategies;
};

struct StrategyResult {
  std::string label;   // "Linear head only", "Selective fine-tuning", ...
  std::string policy;
  std::uint64_t trainable_paper = 0;  // ledger, paper convention
  std::uint64_t trainable_full = 0;   // ledger, full convention
  double seconds_per_epoch = 0.0;
  double total_seconds = 0.0;
  Metrics val;
  Metrics test;
  std::vector<EpochRecord> records;
  EvalResult test_eval;
};

std::string strategy_label(const std::string& policy);

using StrategyCallback = std::function<void(const StrategyResult&)>;

std::vector<StrategyResult> compare_strategies(const CompareSetup& setup, const StrategyCallback& on_done = {});

// Table-1 shaped: Fine-Tuning Strategy, Trainable Parameters, Time / Epoch
// (min), Val. Acc., Test Acc., F1 Score, AUROC. Accuracies in percent.
std::string comparison_csv(const std::vector<StrategyResult>& results);
// strategy, policy, exact trainable counts, epochs, seconds per epoch, total.
std::string timing_csv(const std::vector<StrategyResult>& results);

}  // namespace sft::train
