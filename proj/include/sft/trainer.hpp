#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sft/adamw.hpp"
#include "sft/dataset.hpp"
#include "sft/freeze_policy.hpp"
#include "sft/gpt_model.hpp"
#include "sft/metrics.hpp"

namespace sft::train {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch = 8;
  std::size_t seq_len = 64;
  tune::FreezePolicy policy = tune::FreezePolicy::selective();
  tune::OptimizerHp hp = tune::default_hp_for("selective");
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;       // validation every k epochs; 0 disables
  std::size_t draws_per_epoch = 0;  // weighted draws per epoch, 0 means N
  bool weighted_sampling = true;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> val_loss;
  std::optional<double> val_acc;
  double seconds = 0.0;  // training batches only
  std::size_t steps = 0;
};

struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;                // binary: positive class; multiclass: macro; multilabel: micro
  std::optional<double> auroc;    // absent when a class is missing
  double loss = 0.0;
  std::size_t n = 0;
};

struct EvalResult {
  Metrics metrics;
  ConfusionMatrix confusion;
  std::vector<RocPoint> roc;      // binary and multilabel (micro); multiclass leaves it empty
  std::vector<std::int32_t> predicted;
  std::vector<double> scores;     // rows x classes
};

// Task-aware decoding of a logits row into predictions; exposed for tests.
std::vector<std::int32_t> decode_predictions(const std::vector<float>& logits, std::size_t rows, std::size_t classes,
                                             gpt::HeadKind head);

// Evaluation mode: no dropout, nothing recorded, parameters untouched.
EvalResult evaluate(const gpt::GptModel& model, const std::vector<data::Batch>& batches);

struct TrainResult {
  std::vector<EpochRecord> records;
  std::uint64_t steps = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Applies cfg.policy to the model, then runs the fixed-epoch loop. NaN or
// infinite loss throws TrainingError naming the epoch and batch.
TrainResult train(gpt::GptModel& model, const std::vector<data::EncodedExample>& train_set,
                  const std::vector<data::EncodedExample>& val_set, data::TaskKind task, const TrainConfig& cfg,
                  std::int32_t pad_id, const EpochCallback& on_epoch = {});

// Columns epoch, train_loss, val_loss, train_acc, val_acc, seconds.
std::string learning_curves_csv(const std::vector<EpochRecord>& records, bool with_seconds = true);
void export_learning_curves(const std::vector<EpochRecord>& records, const std::filesystem::path& path);
std::vector<EpochRecord> parse_learning_curves(const std::string& csv_text);

std::string metrics_csv(const Metrics& m, const std::string& split);

}  // namespace sft::train
