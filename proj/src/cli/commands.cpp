#include <cstdio>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "sft/checkpoint.hpp"
#include "sft/cli.hpp"
#include "sft/compare.hpp"
#include "sft/cost_model.hpp"
#include "sft/csv.hpp"
#include "sft/dataset.hpp"
#include "sft/error.hpp"
#include "sft/fileio.hpp"
#include "sft/gradcheck.hpp"
#include "sft/labeler_io.hpp"
#include "sft/manifest.hpp"
#include "sft/param_ledger.hpp"
#include "sft/synthetic.hpp"
#include "sft/trainer.hpp"

namespace sft::cli {

namespace {

namespace fs = std::filesystem;

struct LabelOpts {
  std::string input, output, config, format, input_format;
  bool strict = false;
  bool no_text = false;
};

struct PrevalenceOpts {
  std::string input, config, format, out;
};

struct SplitOpts {
  std::string input, out_dir, format;
  std::uint64_t seed = 0;
};

struct TrainOpts {
  std::string data, task = "binary", target, policy = "selective", model_cfg = "gpt2-small", tokenizer;
  std::string checkpoint_in, checkpoint_out, curves_out, metrics_out;
  std::size_t epochs = 10, batch = 8, seq_len = 0, draws = 0;
  std::optional<float> lr, wd;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> split_seed;
  bool no_sampler = false;
};

struct EvalOpts {
  std::string checkpoint, data, out, split = "all", target, task;
  std::size_t batch = 8;
};

struct CountOpts {
  std::string model_cfg = "gpt2-small", policy = "selective", convention = "both", csv;
  std::size_t classes = 2, batch = 8, seq_len = 0;
};

struct CompareOpts {
  std::string data, task = "binary", target = "label_any_disease_pos_or_unc", model_cfg = "tiny", tokenizer, out;
  std::vector<std::string> strategies = {"head", "selective", "full"};
  std::vector<std::string> lr, wd;
  std::size_t epochs = 10, batch = 8, seq_len = 64, draws = 0;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> split_seed;
};

struct GradcheckOpts {
  std::string model_cfg = "tiny", task = "binary";
  std::vector<std::string> policies = {"head", "selective", "full"};
  std::uint64_t seed = 0;
  double tolerance = 1e-3, step = 1e-3, init_std = 0.2;
  std::size_t batch = 2, seq_len = 8;
  std::optional<std::size_t> max_elements;
};

struct SynthOpts {
  std::string output;
  std::size_t n = 2000;
  std::uint64_t seed = 0;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  RunManifest& manifest;
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

data::Tokenizer tokenizer_for(const gpt::GptConfig& cfg, const std::string& path) {
  if (!path.empty()) {
    auto tok = data::Tokenizer::load(path);
    if (tok.vocab_size() > cfg.n_vocab) {
      throw ConfigError("tokenizer has " + std::to_string(tok.vocab_size()) + " tokens, model vocabulary only " +
                        std::to_string(cfg.n_vocab));
    }
    return tok;
  }
  if (cfg.n_vocab < 256) throw ConfigError("the byte-level tokenizer needs a vocabulary of at least 256");
  return data::Tokenizer::byte_level();
}

gpt::GptConfig model_for_task(const std::string& name, data::TaskKind task) {
  auto cfg = gpt::config_from_name(name);
  cfg.head = data::head_for(task);
  cfg.n_classes = data::classes_for(task);
  cfg.validate();
  return cfg;
}

std::size_t resolve_seq_len(std::size_t requested, const gpt::GptConfig& cfg) {
  const std::size_t T = requested == 0 ? std::min<std::size_t>(1024, cfg.n_ctx) : requested;
  if (T > cfg.n_ctx) {
    throw ConfigError("--seq-len " + std::to_string(T) + " exceeds the model context " + std::to_string(cfg.n_ctx));
  }
  return T;
}

// "policy=value" pairs.
std::map<std::string, float> parse_overrides(const std::vector<std::string>& items, const char* flag) {
  std::map<std::string, float> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError(std::string(flag) + " expects policy=value, got '" + item + "'");
    try {
      out[item.substr(0, eq)] = std::stof(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError(std::string(flag) + " value is not a number: '" + item + "'");
    }
  }
  return out;
}

std::vector<std::string> ids_of(const data::Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(ds.examples[i].id);
  return out;
}

std::string lines_of(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += s + "\n";
  return out;
}

int cmd_label(const LabelOpts& o, Context& ctx) {
  auto cfg = o.config.empty() ? label::LabelerConfig::defaults() : label::LabelerConfig::load(o.config);
  const auto in_fmt = label::format_from(o.input_format, o.input);
  const auto out_fmt = label::format_from(o.format, o.output);
  ctx.manifest.config["labeler"] = cfg.to_json();
  ctx.manifest.inputs = {o.input};
  if (!o.config.empty()) ctx.manifest.inputs.push_back(o.config);
  ctx.manifest.outputs = {o.output};

  auto report = label::parse_reports(label::read_rows(o.input, in_fmt));
  std::vector<label::ReportRecord> kept;
  std::vector<label::ReportLabels> labels;
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    try {
      labels.push_back(label::label_report(report.records[i].text, cfg));
      kept.push_back(report.records[i]);
    } catch (const EncodingError& e) {
      report.errors.push_back({report.lines[i], report.records[i].note_id, e.what()});
    }
  }
  write_file(o.output, label::write_labeled(kept, labels, cfg, out_fmt, !o.no_text));
  for (const auto& e : report.errors) {
    ctx.err << "row " << e.line;
    if (!e.note_id.empty()) ctx.err << " (note_id " << e.note_id << ")";
    ctx.err << ": " << e.message << "\n";
  }
  const std::size_t total = kept.size() + report.errors.size();
  ctx.out << "labeled " << kept.size() << " of " << total << " records -> " << o.output << "\n";
  ctx.manifest.config["rows_labeled"] = kept.size();
  ctx.manifest.config["rows_failed"] = report.errors.size();
  return o.strict && !report.errors.empty() ? 1 : 0;
}

int cmd_prevalence(const PrevalenceOpts& o, Context& ctx) {
  auto cfg = o.config.empty() ? label::LabelerConfig::defaults() : label::LabelerConfig::load(o.config);
  ctx.manifest.inputs = {o.input};
  const auto rows = label::read_rows(o.input, label::format_from(o.format, o.input));
  std::vector<label::ReportLabels> corpus;
  for (const auto& row : rows) corpus.push_back(label::labels_from_row(row, cfg));
  const auto table = label::prevalence(corpus, cfg);
  ctx.out << label::prevalence_text(table);
  if (!o.out.empty()) {
    write_file(o.out, label::prevalence_csv(table));
    ctx.manifest.outputs = {o.out};
  }
  return 0;
}

int cmd_split(const SplitOpts& o, Context& ctx) {
  ctx.manifest.inputs = {o.input};
  ctx.manifest.seeds["split"] = o.seed;
  const auto rows = label::read_rows(o.input, label::format_from(o.format, o.input));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto id = label::string_field(rows[i], "note_id");
    ids.push_back(id.empty() ? std::to_string(i) : id);
  }
  const auto split = data::random_split(ids.size(), o.seed);
  const auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::string> out;
    for (auto i : idx) out.push_back(ids[i]);
    return out;
  };
  const fs::path dir(o.out_dir);
  const std::vector<std::pair<std::string, const std::vector<std::size_t>*>> parts = {
      {"train", &split.train}, {"val", &split.val}, {"test", &split.test}};
  for (const auto& [name, idx] : parts) {
    const auto path = dir / (name + "_ids.txt");
    write_file(path, lines_of(pick(*idx)));
    ctx.manifest.outputs.push_back(path.string());
  }
  nlohmann::ordered_json summary;
  summary["n"] = ids.size();
  summary["seed"] = o.seed;
  summary["train"] = split.train.size();
  summary["val"] = split.val.size();
  summary["test"] = split.test.size();
  write_file(dir / "split.json", summary.dump(2) + "\n");
  ctx.manifest.outputs.push_back((dir / "split.json").string());
  ctx.out << "train " << split.train.size() << ", val " << split.val.size() << ", test " << split.test.size()
          << " (N = " << ids.size() << ", seed " << o.seed << ")\n";
  return 0;
}

fs::path sidecar_path(const fs::path& checkpoint) { return fs::path(checkpoint.string() + ".config.json"); }

int cmd_train(const TrainOpts& o, Context& ctx) {
  const auto task = data::task_from_string(o.task);
  const auto cfg = model_for_task(o.model_cfg, task);
  const auto policy = tune::FreezePolicy::parse(o.policy);
  const std::size_t T = resolve_seq_len(o.seq_len, cfg);
  const auto tok = tokenizer_for(cfg, o.tokenizer);
  const std::uint64_t split_seed = o.split_seed.value_or(o.seed);

  train::TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch = o.batch;
  tc.seq_len = T;
  tc.policy = policy;
  tc.hp = tune::default_hp_for(policy.name());
  if (o.lr) tc.hp.lr = *o.lr;
  if (o.wd) tc.hp.weight_decay = *o.wd;
  tc.seed = o.seed;
  tc.draws_per_epoch = o.draws;
  tc.weighted_sampling = !o.no_sampler;
  tc.validate();

  auto& snap = ctx.manifest.config;
  snap["model"] = gpt::config_to_json(cfg);
  snap["task"] = o.task;
  snap["target"] = o.target;
  snap["policy"] = policy.name();
  snap["epochs"] = tc.epochs;
  snap["batch"] = tc.batch;
  snap["seq_len"] = T;
  snap["lr"] = tc.hp.lr;
  snap["weight_decay"] = tc.hp.weight_decay;
  snap["weighted_sampling"] = tc.weighted_sampling;
  snap["draws_per_epoch"] = tc.draws_per_epoch;
  ctx.manifest.seeds["train"] = o.seed;
  ctx.manifest.seeds["split"] = split_seed;
  ctx.manifest.inputs = {o.data};
  if (!o.checkpoint_in.empty()) ctx.manifest.inputs.push_back(o.checkpoint_in);
  ctx.out << "train: model " << o.model_cfg << ", task " << o.task << ", policy " << policy.name() << ", epochs "
          << tc.epochs << ", batch " << tc.batch << ", seq-len " << T << ", lr " << tc.hp.lr << ", wd "
          << tc.hp.weight_decay << ", seed " << o.seed << "\n";

  const auto ds = data::load_dataset(o.data, task, o.target);
  const auto split = data::random_split(ds.size(), split_seed);
  const auto enc_train = data::encode_examples(ds, split.train, tok, T);
  const auto enc_val = data::encode_examples(ds, split.val, tok, T);
  const auto enc_test = data::encode_examples(ds, split.test, tok, T);

  gpt::ModelParams params;
  if (o.checkpoint_in.empty()) {
    Rng rng = make_rng(o.seed);
    params = gpt::init_params(cfg, rng);
  } else {
    params = gpt::load_checkpoint(o.checkpoint_in, cfg);
  }
  const auto initial = params.clone();
  gpt::GptModel model(cfg, std::move(params));
  const auto result = train::train(model, enc_train, enc_val, task, tc, tok.pad_id(), [&](const train::EpochRecord& r) {
    ctx.out << "epoch " << r.epoch << ": train_loss " << fmt("%.4f", r.train_loss) << ", train_acc "
            << fmt("%.4f", r.train_acc);
    if (r.val_loss) ctx.out << ", val_loss " << fmt("%.4f", *r.val_loss) << ", val_acc " << fmt("%.4f", *r.val_acc);
    ctx.out << ", " << fmt("%.2f", r.seconds) << " s\n";
  });

  // Frozen tensors must come out bitwise identical.
  const auto trainable = tc.epochs == 0 ? std::set<std::string>{} : policy.resolve(cfg);
  std::size_t frozen = 0;
  for (const auto& [name, tensor] : initial.entries()) {
    if (trainable.count(name)) continue;
    ++frozen;
    if (!bitwise_equal(tensor, model.params().at(name))) {
      throw TrainingError("self-check failed: frozen tensor '" + name + "' changed during training");
    }
  }
  ctx.out << "self-check: " << frozen << " frozen tensors unchanged\n";

  if (!enc_test.empty()) {
    const auto batches = data::make_batches(enc_test, data::natural_order(enc_test.size()), T, tc.batch, tok.pad_id());
    const auto ev = train::evaluate(model, batches);
    ctx.out << "test: accuracy " << fmt("%.4f", ev.metrics.accuracy) << ", f1 " << fmt("%.4f", ev.metrics.f1);
    if (ev.metrics.auroc) ctx.out << ", auroc " << fmt("%.4f", *ev.metrics.auroc);
    ctx.out << " (n = " << ev.metrics.n << ")\n";
    if (!o.metrics_out.empty()) {
      write_file(o.metrics_out, train::metrics_csv(ev.metrics, "test"));
      ctx.manifest.outputs.push_back(o.metrics_out);
    }
  }
  if (!o.checkpoint_out.empty()) {
    gpt::save_checkpoint(model.params(), o.checkpoint_out);
    nlohmann::ordered_json side;
    side["model"] = gpt::config_to_json(cfg);
    side["task"] = o.task;
    side["target"] = o.target;
    side["seq_len"] = T;
    side["split_seed"] = split_seed;
    side["tokenizer"] = o.tokenizer;
    write_file(sidecar_path(o.checkpoint_out), side.dump(2) + "\n");
    ctx.manifest.outputs.push_back(o.checkpoint_out);
    ctx.manifest.outputs.push_back(sidecar_path(o.checkpoint_out).string());
  }
  if (!o.curves_out.empty()) {
    train::export_learning_curves(result.records, o.curves_out);
    ctx.manifest.outputs.push_back(o.curves_out);
  }
  return 0;
}

int cmd_eval(const EvalOpts& o, Context& ctx) {
  const auto side_path = sidecar_path(o.checkpoint);
  if (!fs::exists(side_path)) throw ConfigError("checkpoint has no config sidecar: " + side_path.string());
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_file(side_path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config sidecar " + side_path.string() + " is not valid JSON: " + e.what());
  }
  const auto cfg = gpt::config_from_json(side.at("model"), side_path.string());
  const std::string task_name = side.value("task", std::string("binary"));
  if (!o.task.empty() && o.task != task_name) {
    throw ConfigError("checkpoint was trained for task " + task_name + " (head " + gpt::to_string(cfg.head) +
                      "), incompatible with --task " + o.task);
  }
  const auto task = data::task_from_string(task_name);
  if (data::head_for(task) != cfg.head || data::classes_for(task) != cfg.n_classes) {
    throw ConfigError("checkpoint head " + gpt::to_string(cfg.head) + " does not fit task " + task_name);
  }
  const std::size_t T = side.value("seq_len", cfg.n_ctx);
  const auto tok = tokenizer_for(cfg, side.value("tokenizer", std::string()));
  const std::string target = o.target.empty() ? side.value("target", std::string()) : o.target;
  ctx.manifest.inputs = {o.checkpoint, o.data};
  ctx.manifest.config["model"] = gpt::config_to_json(cfg);
  ctx.manifest.config["task"] = task_name;
  ctx.manifest.config["target"] = target;
  ctx.manifest.config["split"] = o.split;

  gpt::GptModel model(cfg, gpt::load_checkpoint(o.checkpoint, cfg));
  const auto ds = data::load_dataset(o.data, task, target);
  std::vector<std::size_t> idx;
  if (o.split == "all") {
    idx = data::natural_order(ds.size());
  } else {
    const std::uint64_t seed = side.value("split_seed", std::uint64_t{0});
    ctx.manifest.seeds["split"] = seed;
    const auto split = data::random_split(ds.size(), seed);
    if (o.split == "train") {
      idx = split.train;
    } else if (o.split == "val") {
      idx = split.val;
    } else if (o.split == "test") {
      idx = split.test;
    } else {
      throw ConfigError("--split must be all, train, val or test");
    }
  }
  const auto enc = data::encode_examples(ds, idx, tok, T);
  const auto batches = data::make_batches(enc, data::natural_order(enc.size()), T, o.batch, tok.pad_id());
  const auto ev = train::evaluate(model, batches);
  const fs::path dir(o.out);
  write_file(dir / "metrics.csv", train::metrics_csv(ev.metrics, o.split));
  write_file(dir / "confusion.csv", train::confusion_csv(ev.confusion));
  ctx.manifest.outputs = {(dir / "metrics.csv").string(), (dir / "confusion.csv").string()};
  if (!ev.roc.empty()) {
    write_file(dir / "roc.csv", train::roc_csv(ev.roc));
    ctx.manifest.outputs.push_back((dir / "roc.csv").string());
  }
  ctx.out << "eval (" << o.split << ", n = " << ev.metrics.n << "): accuracy " << fmt("%.4f", ev.metrics.accuracy)
          << ", f1 " << fmt("%.4f", ev.metrics.f1);
  if (ev.metrics.auroc) ctx.out << ", auroc " << fmt("%.4f", *ev.metrics.auroc);
  ctx.out << "\n";
  return 0;
}

int cmd_count_params(const CountOpts& o, Context& ctx) {
  auto cfg = gpt::config_from_name(o.model_cfg);
  cfg.head = o.classes == 1 ? gpt::HeadKind::BinarySigmoid : gpt::HeadKind::MultiClassSoftmax;
  cfg.n_classes = o.classes;
  cfg.validate();
  const auto policy = tune::FreezePolicy::parse(o.policy);
  ctx.manifest.config["model"] = gpt::config_to_json(cfg);
  ctx.manifest.config["policy"] = policy.name();
  ctx.manifest.config["convention"] = o.convention;
  if (o.convention != "both") tune::convention_from_string(o.convention);

  const auto paper = tune::count_params(cfg, policy, tune::Convention::Paper);
  const auto full = tune::count_params(cfg, policy, tune::Convention::Full);
  ctx.out << "model " << o.model_cfg << " (head classes " << o.classes << ")\n";
  ctx.out << tune::ledger_text(paper, full, policy.name());
  const auto show = [&](const tune::ParamLedger& l) {
    ctx.out << tune::to_string(l.convention) << " convention: trainable " << tune::with_thousands(l.trainable)
            << " of " << tune::with_thousands(l.total) << " (" << fmt("%.4f", 100.0 * l.trainable_fraction())
            << "%), frozen " << fmt("%.2f", 100.0 * (1.0 - l.trainable_fraction())) << "%\n";
  };
  if (o.convention != "full") show(paper);
  if (o.convention != "paper") show(full);

  const std::size_t T = resolve_seq_len(o.seq_len, cfg);
  const auto cost = tune::estimate_step_cost(cfg, policy, o.batch, T);
  ctx.out << "step cost at B=" << o.batch << ", T=" << T << ": forward " << tune::with_thousands(cost.forward_flops)
          << " FLOPs, backward " << tune::with_thousands(cost.backward_flops) << " FLOPs over "
          << cost.backward_blocks << " block(s)\n";
  if (!o.csv.empty()) {
    write_file(o.csv, tune::ledger_csv(paper, full));
    ctx.manifest.outputs = {o.csv};
  }
  return 0;
}

int cmd_compare(const CompareOpts& o, Context& ctx) {
  const auto task = data::task_from_string(o.task);
  const auto cfg = model_for_task(o.model_cfg, task);
  const std::size_t T = resolve_seq_len(o.seq_len, cfg);
  const auto tok = tokenizer_for(cfg, o.tokenizer);
  const auto lr = parse_overrides(o.lr, "--lr");
  const auto wd = parse_overrides(o.wd, "--wd");
  const std::uint64_t split_seed = o.split_seed.value_or(o.seed);

  const auto ds = data::load_dataset(o.data, task, o.target);
  const auto split = data::random_split(ds.size(), split_seed);
  train::CompareSetup setup;
  setup.model_cfg = cfg;
  {
    Rng rng = make_rng(o.seed);
    setup.initial = gpt::init_params(cfg, rng);
  }
  setup.train_set = data::encode_examples(ds, split.train, tok, T);
  setup.val_set = data::encode_examples(ds, split.val, tok, T);
  setup.test_set = data::encode_examples(ds, split.test, tok, T);
  setup.task = task;
  setup.pad_id = tok.pad_id();
  setup.base.epochs = o.epochs;
  setup.base.batch = o.batch;
  setup.base.seq_len = T;
  setup.base.seed = o.seed;
  setup.base.draws_per_epoch = o.draws;

  auto& snap = ctx.manifest.config;
  snap["model"] = gpt::config_to_json(cfg);
  snap["task"] = o.task;
  snap["target"] = o.target;
  snap["epochs"] = o.epochs;
  snap["batch"] = o.batch;
  snap["seq_len"] = T;
  snap["strategies"] = nlohmann::ordered_json::array();
  for (const auto& name : o.strategies) {
    const auto policy = tune::FreezePolicy::parse(name);
    auto hp = tune::default_hp_for(policy.name());
    if (lr.count(name)) hp.lr = lr.at(name);
    if (wd.count(name)) hp.weight_decay = wd.at(name);
    setup.strategies.push_back({name, hp});
    snap["strategies"].push_back({{"policy", policy.name()}, {"lr", hp.lr}, {"weight_decay", hp.weight_decay}});
  }
  ctx.manifest.seeds["init_and_train"] = o.seed;
  ctx.manifest.seeds["split"] = split_seed;
  ctx.manifest.inputs = {o.data};
  ctx.out << "compare: " << ds.size() << " examples (train " << split.train.size() << ", val " << split.val.size()
          << ", test " << split.test.size() << "), model " << o.model_cfg << ", epochs " << o.epochs << ", batch "
          << o.batch << ", seq-len " << T << "\n";

  const fs::path dir(o.out);
  const auto results = train::compare_strategies(setup, [&](const train::StrategyResult& r) {
    ctx.out << r.label << ": test acc " << fmt("%.4f", r.test.accuracy) << ", f1 " << fmt("%.4f", r.test.f1)
            << ", auroc " << (r.test.auroc ? fmt("%.4f", *r.test.auroc) : std::string("n/a")) << ", "
            << fmt("%.2f", r.seconds_per_epoch) << " s/epoch\n";
    const std::string tag = r.policy.find(':') == std::string::npos ? r.policy : "custom";
    write_file(dir / ("curves_" + tag + ".csv"), train::learning_curves_csv(r.records));
    write_file(dir / ("metrics_" + tag + ".csv"), train::metrics_csv(r.test, "test"));
    write_file(dir / ("confusion_" + tag + ".csv"), train::confusion_csv(r.test_eval.confusion));
    ctx.manifest.outputs.push_back((dir / ("curves_" + tag + ".csv")).string());
    ctx.manifest.outputs.push_back((dir / ("metrics_" + tag + ".csv")).string());
    ctx.manifest.outputs.push_back((dir / ("confusion_" + tag + ".csv")).string());
    if (!r.test_eval.roc.empty()) {
      write_file(dir / ("roc_" + tag + ".csv"), train::roc_csv(r.test_eval.roc));
      ctx.manifest.outputs.push_back((dir / ("roc_" + tag + ".csv")).string());
    }
  });
  write_file(dir / "comparison.csv", train::comparison_csv(results));
  write_file(dir / "timing.csv", train::timing_csv(results));
  ctx.manifest.outputs.push_back((dir / "comparison.csv").string());
  ctx.manifest.outputs.push_back((dir / "timing.csv").string());
  ctx.out << train::comparison_csv(results);
  return 0;
}

int cmd_gradcheck(const GradcheckOpts& o, Context& ctx) {
  const auto task = data::task_from_string(o.task);
  auto cfg = model_for_task(o.model_cfg, task);
  cfg.dropout_p = 0.0f;
  if (o.seq_len > cfg.n_ctx) throw ConfigError("--seq-len exceeds the model context");
  // Small models are checked exhaustively; larger ones per-tensor sampled.
  const std::size_t max_elements = o.max_elements.value_or(cfg.n_embd <= 16 && o.seq_len <= 8 ? 0 : 64);
  auto& snap = ctx.manifest.config;
  snap["model"] = gpt::config_to_json(cfg);
  snap["tolerance"] = o.tolerance;
  snap["step"] = o.step;
  snap["init_std"] = o.init_std;
  snap["batch"] = o.batch;
  snap["seq_len"] = o.seq_len;
  snap["max_elements"] = max_elements;
  ctx.manifest.seeds["gradcheck"] = o.seed;

  bool all_passed = true;
  for (const auto& name : o.policies) {
    const auto policy = tune::FreezePolicy::parse(name);
    Rng rng = make_rng(o.seed);
    auto params = gpt::init_params(cfg, rng);
    tune::randomize_params(params, o.init_std, rng);
    tune::apply_policy(params, cfg, policy);
    gpt::GptModel model(cfg, std::move(params));

    gpt::TokenBatch batch;
    batch.ids.rows = o.batch;
    batch.ids.cols = o.seq_len;
    std::uniform_int_distribution<std::int32_t> id(0, static_cast<std::int32_t>(cfg.n_vocab) - 1);
    std::uniform_int_distribution<std::size_t> len(1, o.seq_len);
    for (std::size_t r = 0; r < o.batch; ++r) {
      const std::size_t n = r == 0 ? o.seq_len : len(rng);
      for (std::size_t t = 0; t < o.seq_len; ++t) {
        batch.ids.ids.push_back(t < n ? id(rng) : 0);
        batch.mask.push_back(t < n ? 1 : 0);
      }
    }
    LabelGrid labels;
    labels.rows = o.batch;
    labels.cols = data::label_columns(task);
    std::uniform_int_distribution<std::int32_t> cls(0, task == data::TaskKind::Multiclass4 ? 3 : 1);
    for (std::size_t i = 0; i < labels.rows * labels.cols; ++i) labels.values.push_back(cls(rng));

    tune::GradCheckOptions opts;
    opts.step = o.step;
    opts.tolerance = o.tolerance;
    opts.max_elements = max_elements;
    opts.seed = o.seed;
    const auto report = tune::gradcheck(model, batch, labels, opts);
    std::size_t checked = 0;
    for (const auto& t : report.tensors) checked += t.checked;
    ctx.out << "policy " << policy.name() << ": " << report.tensors.size() << " trainable tensors, " << checked
            << " elements, max relative error " << fmt("%.3e", report.max_rel_error) << " -> "
            << (report.passed ? "PASS" : "FAIL") << "\n";
    for (const auto& t : report.tensors) {
      if (t.max_rel_error >= o.tolerance) ctx.out << "  " << t.name << ": " << fmt("%.3e", t.max_rel_error) << "\n";
    }
    snap["max_rel_error_" + policy.name()] = report.max_rel_error;
    all_passed = all_passed && report.passed;
  }
  return all_passed ? 0 : 1;
}

int cmd_synth(const SynthOpts& o, Context& ctx) {
  train::SyntheticOptions so;
  so.n = o.n;
  so.seed = o.seed;
  const auto reports = train::synthetic_reports(so);
  std::string out;
  for (const auto& r : reports) {
    nlohmann::ordered_json row;
    row["note_id"] = r.note_id;
    row["subject_id"] = r.subject_id;
    row["hadm_id"] = r.hadm_id;
    row["text"] = r.text;
    out += row.dump() + "\n";
  }
  write_file(o.output, out);
  ctx.manifest.seeds["synth"] = o.seed;
  ctx.manifest.config["n"] = o.n;
  ctx.manifest.outputs = {o.output};
  ctx.out << "wrote " << reports.size() << " synthetic reports -> " << o.output << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Selective fine-tuning toolkit: weak labeling, training and evaluation of GPT-style classifiers",
               "sftune"};
  app.require_subcommand(1);
  app.set_config("--settings", "", "TOML file with option defaults; command-line flags take precedence");
  app.set_version_flag("--version", kToolVersion);
  std::string manifest_path;
  app.add_option("--manifest", manifest_path, "Where to write the run manifest (default: next to the main output)");

  LabelOpts lo;
  auto* label_cmd = app.add_subcommand("label", "Weak-label radiology reports");
  label_cmd->add_option("--input", lo.input, "JSONL or CSV with note_id, subject_id, hadm_id, text")->required();
  label_cmd->add_option("--output", lo.output, "Labeled output file")->required();
  label_cmd->add_option("--config", lo.config, "Labeler config JSON (default: built-in lists)");
  label_cmd->add_option("--format", lo.format, "Output format: jsonl or csv (default: from extension)");
  label_cmd->add_option("--input-format", lo.input_format, "Input format: jsonl or csv (default: from extension)");
  label_cmd->add_flag("--strict", lo.strict, "Exit nonzero when any row fails");
  label_cmd->add_flag("--no-text", lo.no_text, "Leave the report text out of the output");

  PrevalenceOpts po;
  auto* prev_cmd = app.add_subcommand("prevalence", "Two-scheme label prevalence of a labeled corpus");
  prev_cmd->add_option("--input", po.input, "Labeled JSONL or CSV")->required();
  prev_cmd->add_option("--config", po.config, "Labeler config JSON naming the conditions");
  prev_cmd->add_option("--format", po.format, "Input format: jsonl or csv");
  prev_cmd->add_option("--out", po.out, "Also write the table as CSV");

  SplitOpts so;
  auto* split_cmd = app.add_subcommand("split", "70/10/20 train/val/test split into id manifests");
  split_cmd->add_option("--input", so.input, "JSONL or CSV with note_id")->required();
  split_cmd->add_option("--seed", so.seed, "Shuffle seed");
  split_cmd->add_option("--out-dir", so.out_dir, "Directory for train_ids.txt, val_ids.txt, test_ids.txt")->required();
  split_cmd->add_option("--format", so.format, "Input format: jsonl or csv");

  TrainOpts to;
  auto* train_cmd = app.add_subcommand("train", "Fine-tune a classifier under a freeze policy");
  train_cmd->add_option("--data", to.data, "Labeled dataset (JSONL/CSV)")->required();
  train_cmd->add_option("--task", to.task, "binary | multiclass4 | multilabel13")->capture_default_str();
  train_cmd->add_option("--target", to.target, "Label column, e.g. label_any_disease_pos_or_unc or y_edema_3");
  train_cmd->add_option("--policy", to.policy, "head | selective | full | custom:glob,...")->capture_default_str();
  train_cmd->add_option("--epochs", to.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--batch", to.batch, "Batch size")->capture_default_str();
  train_cmd->add_option("--lr", to.lr, "Learning rate (default: per policy)");
  train_cmd->add_option("--wd", to.wd, "Weight decay (default: per policy)");
  train_cmd->add_option("--seed", to.seed, "Initialization, sampling and dropout seed")->capture_default_str();
  train_cmd->add_option("--split-seed", to.split_seed, "Split seed (default: --seed)");
  train_cmd->add_option("--seq-len", to.seq_len, "Tokens per example (default: min(1024, n_ctx))");
  train_cmd->add_option("--model-cfg", to.model_cfg, "gpt2-small | tiny | config JSON")->capture_default_str();
  train_cmd->add_option("--tokenizer", to.tokenizer, "Tokenizer JSON (default: byte level)");
  train_cmd->add_option("--draws", to.draws, "Weighted draws per epoch (default: training set size)");
  train_cmd->add_flag("--no-sampler", to.no_sampler, "Shuffle instead of inverse-frequency sampling");
  train_cmd->add_option("--checkpoint-in", to.checkpoint_in, "Start from this checkpoint");
  train_cmd->add_option("--checkpoint-out", to.checkpoint_out, "Write the trained checkpoint here");
  train_cmd->add_option("--curves-out", to.curves_out, "Learning-curve CSV");
  train_cmd->add_option("--metrics-out", to.metrics_out, "Test metrics CSV");

  EvalOpts eo;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eo.checkpoint, "Checkpoint written by train")->required();
  eval_cmd->add_option("--data", eo.data, "Labeled dataset")->required();
  eval_cmd->add_option("--out", eo.out, "Directory for metrics.csv, confusion.csv, roc.csv")->required();
  eval_cmd->add_option("--split", eo.split, "all | train | val | test")->capture_default_str();
  eval_cmd->add_option("--target", eo.target, "Label column (default: as trained)");
  eval_cmd->add_option("--task", eo.task, "Expected task; must match the checkpoint head");
  eval_cmd->add_option("--batch", eo.batch, "Batch size")->capture_default_str();

  CountOpts co;
  auto* count_cmd = app.add_subcommand("count-params", "Parameter ledger and step cost for a freeze policy");
  count_cmd->add_option("model", co.model_cfg, "gpt2-small | tiny | config JSON");
  count_cmd->add_option("--model-cfg", co.model_cfg, "Same as the positional model argument");
  count_cmd->add_option("--policy", co.policy, "head | selective | full | custom:glob,...")->capture_default_str();
  count_cmd->add_option("--convention", co.convention, "paper | full | both")->capture_default_str();
  count_cmd->add_option("--classes", co.classes, "Classification head outputs")->capture_default_str();
  count_cmd->add_option("--batch", co.batch, "Batch size for the cost estimate")->capture_default_str();
  count_cmd->add_option("--seq-len", co.seq_len, "Sequence length for the cost estimate (default: min(1024, n_ctx))");
  count_cmd->add_option("--csv", co.csv, "Write the ledger as CSV");

  CompareOpts cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Train each strategy from one initialization and tabulate");
  cmp_cmd->add_option("--data", cmp.data, "Labeled dataset")->required();
  cmp_cmd->add_option("--model-cfg", cmp.model_cfg, "gpt2-small | tiny | config JSON")->capture_default_str();
  cmp_cmd->add_option("--strategies", cmp.strategies, "Policies to compare")->delimiter(',')->capture_default_str();
  cmp_cmd->add_option("--out", cmp.out, "Output directory")->required();
  cmp_cmd->add_option("--task", cmp.task, "binary | multiclass4 | multilabel13")->capture_default_str();
  cmp_cmd->add_option("--target", cmp.target, "Label column")->capture_default_str();
  cmp_cmd->add_option("--epochs", cmp.epochs, "Training epochs")->capture_default_str();
  cmp_cmd->add_option("--batch", cmp.batch, "Batch size")->capture_default_str();
  cmp_cmd->add_option("--seq-len", cmp.seq_len, "Tokens per example")->capture_default_str();
  cmp_cmd->add_option("--seed", cmp.seed, "Initialization, sampling and dropout seed")->capture_default_str();
  cmp_cmd->add_option("--split-seed", cmp.split_seed, "Split seed (default: --seed)");
  cmp_cmd->add_option("--draws", cmp.draws, "Weighted draws per epoch (default: training set size)");
  cmp_cmd->add_option("--lr", cmp.lr, "Per-policy learning rate, policy=value")->delimiter(',');
  cmp_cmd->add_option("--wd", cmp.wd, "Per-policy weight decay, policy=value")->delimiter(',');
  cmp_cmd->add_option("--tokenizer", cmp.tokenizer, "Tokenizer JSON (default: byte level)");

  GradcheckOpts go;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every trainable gradient");
  grad_cmd->add_option("--model-cfg", go.model_cfg, "gpt2-small | tiny | config JSON")->capture_default_str();
  grad_cmd->add_option("--seed", go.seed, "Parameter and batch seed")->capture_default_str();
  grad_cmd->add_option("--tolerance", go.tolerance, "Maximum relative error")->capture_default_str();
  grad_cmd->add_option("--policies", go.policies, "Policies to check")->delimiter(',')->capture_default_str();
  grad_cmd->add_option("--task", go.task, "binary | multiclass4 | multilabel13")->capture_default_str();
  grad_cmd->add_option("--batch", go.batch, "Rows in the probe batch")->capture_default_str();
  grad_cmd->add_option("--seq-len", go.seq_len, "Tokens per row")->capture_default_str();
  grad_cmd->add_option("--step", go.step, "Central-difference half width")->capture_default_str();
  grad_cmd->add_option("--init-std", go.init_std, "Std of the random parameters")->capture_default_str();
  grad_cmd->add_option("--max-elements", go.max_elements,
                       "Elements probed per tensor, 0 for all (default: all when d <= 16 and T <= 8, else 64)");

  SynthOpts syo;
  auto* synth_cmd = app.add_subcommand("synth", "Generate template reports for desk-scale experiments");
  synth_cmd->add_option("--output", syo.output, "JSONL output")->required();
  synth_cmd->add_option("--n", syo.n, "Number of reports")->capture_default_str();
  synth_cmd->add_option("--seed", syo.seed, "Generator seed")->capture_default_str();

  std::string rerun_path;
  auto* rerun_cmd = app.add_subcommand("rerun", "Replay the command recorded in a run manifest");
  rerun_cmd->add_option("manifest", rerun_path, "manifest JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  if (rerun_cmd->parsed()) {
    try {
      const auto m = RunManifest::load(rerun_path);
      out << "rerun: sftune";
      for (const auto& a : m.argv) out << ' ' << a;
      out << "\n";
      return run(m.argv, out, err);
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
  }

  RunManifest manifest;
  manifest.argv = args;
  manifest.started_at = utc_timestamp();
  Context ctx{out, err, manifest};
  std::function<int()> body;
  std::string default_manifest;
  if (label_cmd->parsed()) {
    manifest.command = "label";
    body = [&] { return cmd_label(lo, ctx); };
    default_manifest = lo.output + ".manifest.json";
  } else if (prev_cmd->parsed()) {
    manifest.command = "prevalence";
    body = [&] { return cmd_prevalence(po, ctx); };
    default_manifest = po.out.empty() ? "sftune-prevalence.manifest.json" : po.out + ".manifest.json";
  } else if (split_cmd->parsed()) {
    manifest.command = "split";
    body = [&] { return cmd_split(so, ctx); };
    default_manifest = (fs::path(so.out_dir) / "manifest.json").string();
  } else if (train_cmd->parsed()) {
    manifest.command = "train";
    body = [&] { return cmd_train(to, ctx); };
    default_manifest = to.checkpoint_out.empty() ? "sftune-train.manifest.json" : to.checkpoint_out + ".manifest.json";
  } else if (eval_cmd->parsed()) {
    manifest.command = "eval";
    body = [&] { return cmd_eval(eo, ctx); };
    default_manifest = (fs::path(eo.out) / "manifest.json").string();
  } else if (count_cmd->parsed()) {
    manifest.command = "count-params";
    body = [&] { return cmd_count_params(co, ctx); };
    default_manifest = co.csv.empty() ? "sftune-count-params.manifest.json" : co.csv + ".manifest.json";
  } else if (cmp_cmd->parsed()) {
    manifest.command = "compare";
    body = [&] { return cmd_compare(cmp, ctx); };
    default_manifest = (fs::path(cmp.out) / "manifest.json").string();
  } else if (grad_cmd->parsed()) {
    manifest.command = "gradcheck";
    body = [&] { return cmd_gradcheck(go, ctx); };
    default_manifest = "sftune-gradcheck.manifest.json";
  } else {
    manifest.command = "synth";
    body = [&] { return cmd_synth(syo, ctx); };
    default_manifest = syo.output + ".manifest.json";
  }

  int code = 0;
  try {
    code = body();
    manifest.status = code == 0 ? "ok" : "failed";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    manifest.status = "error";
    manifest.error = e.what();
    code = 2;
  }
  manifest.exit_code = code;
  manifest.finished_at = utc_timestamp();
  try {
    manifest.write(manifest_path.empty() ? default_manifest : manifest_path);
  } catch (const Error& e) {
    err << "error: could not write run manifest: " << e.what() << "\n";
    if (code == 0) code = 2;
  }
  return code;
}

}  // namespace sft::cli
