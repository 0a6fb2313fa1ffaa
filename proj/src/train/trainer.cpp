#include "sft/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "sft/csv.hpp"
#include "sft/error.hpp"
#include "sft/fileio.hpp"
#include "sft/losses.hpp"

namespace sft::train {

void TrainConfig::validate() const {
  if (batch == 0) throw ConfigError("batch size must be at least 1");
  if (seq_len == 0) throw ConfigError("sequence length must be at least 1");
  hp.validate();
}

namespace {

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

bool is_binary_like(gpt::HeadKind head) { return head != gpt::HeadKind::MultiClassSoftmax; }

// Correct decisions in a batch: rows for single-label heads, entries for
// multilabel.
std::size_t count_correct(const std::vector<std::int32_t>& pred, const LabelGrid& labels) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels.values[i];
  return hits;
}

}  // namespace

std::vector<std::int32_t> decode_predictions(const std::vector<float>& logits, std::size_t rows, std::size_t classes,
                                             gpt::HeadKind head) {
  std::vector<std::int32_t> out;
  if (is_binary_like(head)) {
    out.reserve(rows * classes);
    for (float z : logits) out.push_back(z >= 0.0f ? 1 : 0);
    return out;
  }
  out.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (logits[r * classes + c] > logits[r * classes + best]) best = c;
    }
    out.push_back(static_cast<std::int32_t>(best));
  }
  return out;
}

EvalResult evaluate(const gpt::GptModel& model, const std::vector<data::Batch>& batches) {
  if (batches.empty()) throw ContractError("evaluate needs at least one batch");
  const auto head = model.config().head;
  const std::size_t classes = model.config().n_classes;
  EvalResult res;
  res.confusion = ConfusionMatrix(is_binary_like(head) ? 2 : classes);
  std::vector<std::int32_t> truth;
  double loss_sum = 0.0;
  std::size_t rows = 0;
  for (const auto& batch : batches) {
    Tape tape;
    tape.set_recording(false);
    const auto cache = model.forward(batch.tokens, tape, false, nullptr);
    const Tensor logits = model.classify(cache.last_token, tape);
    const Tensor loss = task_loss(tape, logits, batch.labels, head);
    const std::size_t n = batch.tokens.rows();
    loss_sum += static_cast<double>(loss.item()) * static_cast<double>(n);
    rows += n;
    const std::vector<float> z(logits.data().begin(), logits.data().end());
    const auto pred = decode_predictions(z, n, classes, head);
    res.predicted.insert(res.predicted.end(), pred.begin(), pred.end());
    truth.insert(truth.end(), batch.labels.values.begin(), batch.labels.values.end());
    if (is_binary_like(head)) {
      for (float v : z) res.scores.push_back(sigmoid(v));
    } else {
      for (std::size_t r = 0; r < n; ++r) {
        double mx = z[r * classes];
        for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, static_cast<double>(z[r * classes + c]));
        double s = 0.0;
        for (std::size_t c = 0; c < classes; ++c) s += std::exp(z[r * classes + c] - mx);
        for (std::size_t c = 0; c < classes; ++c) res.scores.push_back(std::exp(z[r * classes + c] - mx) / s);
      }
    }
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    res.confusion.at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(res.predicted[i])) += 1;
  }
  res.metrics.n = rows;
  res.metrics.loss = loss_sum / static_cast<double>(rows);
  res.metrics.accuracy = accuracy(res.predicted, truth);
  if (is_binary_like(head)) {
    res.metrics.f1 = f1_score(res.confusion.one_vs_rest(1));
    try {
      res.metrics.auroc = auroc(res.scores, truth);
      res.roc = roc_points(res.scores, truth);
    } catch (const UndefinedMetricError&) {
    }
  } else {
    res.metrics.f1 = macro_f1(res.confusion);
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      std::vector<double> s(rows);
      std::vector<std::int32_t> y(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        s[r] = res.scores[r * classes + k];
        y[r] = truth[r] == static_cast<std::int32_t>(k) ? 1 : 0;
      }
      try {
        sum += auroc(s, y);
        ++defined;
      } catch (const UndefinedMetricError&) {
      }
    }
    if (defined > 0) res.metrics.auroc = sum / static_cast<double>(defined);
  }
  return res;
}

TrainResult train(gpt::GptModel& model, const std::vector<data::EncodedExample>& train_set,
                  const std::vector<data::EncodedExample>& val_set, data::TaskKind task, const TrainConfig& cfg,
                  std::int32_t pad_id, const EpochCallback& on_epoch) {
  cfg.validate();
  const auto& mcfg = model.config();
  if (data::head_for(task) != mcfg.head || data::classes_for(task) != mcfg.n_classes) {
    throw ConfigError("task " + data::to_string(task) + " does not match the model head " + gpt::to_string(mcfg.head) +
                      " with " + std::to_string(mcfg.n_classes) + " outputs");
  }
  if (cfg.seq_len > mcfg.n_ctx) {
    throw ConfigError("sequence length " + std::to_string(cfg.seq_len) + " exceeds the context window " +
                      std::to_string(mcfg.n_ctx));
  }
  TrainResult result;
  if (cfg.epochs == 0) return result;
  if (train_set.empty()) throw ContractError("training set is empty");

  tune::apply_policy(model.params(), mcfg, cfg.policy);
  tune::AdamW opt(cfg.hp);
  Rng order_rng = make_rng(cfg.seed);
  Rng dropout_rng = make_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

  data::SamplerWeights weights;
  if (cfg.weighted_sampling) {
    std::vector<std::int32_t> classes;
    for (const auto& ex : train_set) {
      data::Example tmp;
      tmp.labels = ex.labels;
      classes.push_back(data::sampling_class(tmp, task));
    }
    weights = data::sampler_weights(classes);
  }
  std::vector<data::Batch> val_batches;
  if (!val_set.empty()) {
    val_batches = data::make_batches(val_set, data::natural_order(val_set.size()), cfg.seq_len, cfg.batch, pad_id);
  }

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order;
    if (cfg.weighted_sampling) {
      order = data::train_order(weights, cfg.draws_per_epoch, order_rng);
    } else {
      order = data::natural_order(train_set.size());
      std::shuffle(order.begin(), order.end(), order_rng);
    }
    const auto batches = data::make_batches(train_set, order, cfg.seq_len, cfg.batch, pad_id);

    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t hits = 0, decisions = 0, rows = 0;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& batch = batches[bi];
      tune::zero_grads(model.params());
      Tape tape;
      const auto cache = model.forward(batch.tokens, tape, true, &dropout_rng);
      const Tensor logits = model.classify(cache.last_token, tape);
      const Tensor loss = task_loss(tape, logits, batch.labels, mcfg.head);
      const float value = loss.item();
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi));
      }
      tape.backward(loss);
      opt.step(model.params());
      const std::size_t n = batch.tokens.rows();
      loss_sum += static_cast<double>(value) * static_cast<double>(n);
      rows += n;
      const std::vector<float> z(logits.data().begin(), logits.data().end());
      const auto pred = decode_predictions(z, n, mcfg.n_classes, mcfg.head);
      hits += count_correct(pred, batch.labels);
      decisions += pred.size();
      ++rec.steps;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.train_loss = loss_sum / static_cast<double>(rows);
    rec.train_acc = static_cast<double>(hits) / static_cast<double>(decisions);
    if (!val_batches.empty() && cfg.eval_every > 0 && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      const auto ev = evaluate(model, val_batches);
      rec.val_loss = ev.metrics.loss;
      rec.val_acc = ev.metrics.accuracy;
    }
    result.steps += rec.steps;
    result.records.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

std::string learning_curves_csv(const std::vector<EpochRecord>& records, bool with_seconds) {
  std::string out = with_seconds ? "epoch,train_loss,val_loss,train_acc,val_acc,seconds\n"
                                 : "epoch,train_loss,val_loss,train_acc,val_acc\n";
  for (const auto& r : records) {
    std::vector<std::string> f = {std::to_string(r.epoch), fmt(r.train_loss), fmt_opt(r.val_loss), fmt(r.train_acc),
                                  fmt_opt(r.val_acc)};
    if (with_seconds) f.push_back(fmt(r.seconds));
    out += csv::join(f) + "\n";
  }
  return out;
}

void export_learning_curves(const std::vector<EpochRecord>& records, const std::filesystem::path& path) {
  write_file(path, learning_curves_csv(records));
}

std::vector<EpochRecord> parse_learning_curves(const std::string& csv_text) {
  const auto table = csv::parse_table(csv_text);
  const auto num = [](const std::string& s) { return std::stod(s); };
  const auto opt = [&](const std::string& s) { return s.empty() ? std::optional<double>() : std::optional<double>(num(s)); };
  std::vector<EpochRecord> out;
  const auto sec = table.find("seconds");
  for (const auto& row : table.rows) {
    EpochRecord r;
    r.epoch = std::stoul(row[table.column("epoch")]);
    r.train_loss = num(row[table.column("train_loss")]);
    r.val_loss = opt(row[table.column("val_loss")]);
    r.train_acc = num(row[table.column("train_acc")]);
    r.val_acc = opt(row[table.column("val_acc")]);
    if (sec) r.seconds = num(row[*sec]);
    out.push_back(r);
  }
  return out;
}

std::string metrics_csv(const Metrics& m, const std::string& split) {
  std::string out = "split,n,loss,accuracy,f1,auroc\n";
  out += csv::join({split, std::to_string(m.n), fmt(m.loss), fmt(m.accuracy), fmt(m.f1), fmt_opt(m.auroc)}) + "\n";
  return out;
}

}  // namespace sft::train
