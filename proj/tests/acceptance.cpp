// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "labeler_golden.hpp"
#include "sft/cli.hpp"
#include "sft/csv.hpp"
#include "sft/dataset.hpp"
#include "sft/error.hpp"
#include "sft/fileio.hpp"
#include "sft/freeze_policy.hpp"
#include "sft/gpt_model.hpp"
#include "sft/labeler.hpp"
#include "sft/losses.hpp"
#include "sft/metrics.hpp"
#include "sft/param_ledger.hpp"
#include "sft/rng.hpp"
#include "sft/trainer.hpp"

namespace fs = std::filesystem;
using namespace sft;

namespace {

struct Verdict {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      if (ok) detail.clear();
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* pattern, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation sftune(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "sftune_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::map<std::string, std::pair<std::string, std::string>> ledger_rows(const fs::path& csv_path) {
  std::map<std::string, std::pair<std::string, std::string>> rows;
  for (const auto& r : csv::parse_table(read_file(csv_path)).rows) rows[r[0]] = {r[1], r[2]};
  return rows;
}

Verdict ledger_exactness() {
  Verdict v;
  const auto dir = workdir("c1");
  const auto run = sftune({"--manifest", (dir / "m.json").string(), "count-params", "gpt2-small", "--convention",
                           "paper", "--policy", "selective", "--csv", (dir / "ledger.csv").string()});
  v.require(run.code == 0, "count-params exit " + std::to_string(run.code));
  if (run.code != 0) return v;
  auto rows = ledger_rows(dir / "ledger.csv");
  const std::vector<std::pair<std::string, std::string>> expected = {
      {"block.attention", "2359296"}, {"block.ffn", "4718592"},       {"block.layer_norm", "3072"},
      {"block.total", "7080960"},     {"embeddings.token", "38597376"}, {"final_layer_norm", "1536"},
      {"head", "1538"}};
  for (const auto& [key, value] : expected) {
    v.require(rows[key].first == value, key + " = " + rows[key].first + ", expected " + value);
  }
  const double frac = std::stod(rows["trainable_fraction"].first);
  v.require(frac < 0.06, "selective fraction " + rows["trainable_fraction"].first);
  v.require(run.out.find("38,597,376") != std::string::npos, "text report lacks 38,597,376");
  if (v.ok) {
    v.detail = "attention 2,359,296, FFN 4,718,592, block LN 3,072, block 7,080,960, token embeddings 38,597,376, "
               "final LN 1,536, head 1,538, selective fraction " + fmt("%.4f%%", 100 * frac);
  }
  return v;
}

Verdict total_sanity() {
  Verdict v;
  const auto dir = workdir("c2");
  const auto run = sftune({"--manifest", (dir / "m.json").string(), "count-params", "gpt2-small", "--convention",
                           "full", "--csv", (dir / "ledger.csv").string()});
  v.require(run.code == 0, "count-params exit " + std::to_string(run.code));
  if (run.code != 0) return v;
  const auto total = std::stoull(ledger_rows(dir / "ledger.csv")["total"].second);
  v.require(total >= 123'000'000 && total <= 125'000'000, "full total " + std::to_string(total));
  if (v.ok) v.detail = "full-convention total " + tune::with_thousands(total);
  return v;
}

Verdict gradient_correctness() {
  Verdict v;
  const auto dir = workdir("c3");
  const auto run = sftune({"--manifest", (dir / "m.json").string(), "gradcheck", "--model-cfg", "tiny",
                           "--policies", "head,selective,full", "--tolerance", "1e-3", "--max-elements", "128"});
  v.require(run.code == 0, "gradcheck exit " + std::to_string(run.code) + ": " + run.out + run.err);
  for (const char* policy : {"policy head:", "policy selective:", "policy full:"}) {
    const auto at = run.out.find(policy);
    v.require(at != std::string::npos, std::string("no report for ") + policy);
    if (at != std::string::npos) {
      const auto line = run.out.substr(at, run.out.find('\n', at) - at);
      v.require(line.find("PASS") != std::string::npos, line);
      if (v.ok) v.detail += (v.detail.empty() ? "" : "; ") + line;
    }
  }
  return v;
}

Verdict freeze_semantics() {
  Verdict v;
  auto cfg = gpt::tiny();
  cfg.head = data::head_for(data::TaskKind::Binary);
  cfg.n_classes = data::classes_for(data::TaskKind::Binary);
  Rng rng = make_rng(41);
  const auto initial = gpt::init_params(cfg, rng);

  std::uniform_int_distribution<std::int32_t> tok(0, 255), len(1, 16), bit(0, 1);
  auto random_examples = [&](std::size_t n) {
    std::vector<data::EncodedExample> out(n);
    for (auto& e : out) {
      for (int k = len(rng); k > 0; --k) e.ids.push_back(tok(rng));
      e.labels = {bit(rng)};
    }
    return out;
  };
  const auto train_set = random_examples(80);

  train::TrainConfig tc;
  tc.epochs = 10;
  tc.batch = 8;
  tc.seq_len = 16;
  tc.policy = tune::FreezePolicy::selective();
  tc.hp = tune::default_hp_for("selective");
  tc.hp.lr = 1e-3f;
  tc.seed = 42;
  gpt::GptModel model(cfg, initial.clone());
  const auto res = train::train(model, train_set, {}, data::TaskKind::Binary, tc, 255);
  v.require(res.steps == 100, "ran " + std::to_string(res.steps) + " steps");

  const auto trainable = tune::FreezePolicy::selective().resolve(cfg);
  std::size_t frozen = 0, moved = 0;
  for (const auto& [name, t] : initial.entries()) {
    const bool same = bitwise_equal(t, model.params().at(name));
    if (trainable.count(name)) {
      moved += !same;
    } else {
      ++frozen;
      v.require(same, "frozen tensor " + name + " changed");
    }
  }
  v.require(moved > 0, "no trainable tensor moved");

  const auto probe = data::make_batches(random_examples(8), data::natural_order(8), 16, 8, 255).front();
  auto grads_under = [&](const tune::FreezePolicy& policy) {
    gpt::GptModel m(cfg, model.params().clone());
    tune::apply_policy(m.params(), cfg, policy);
    tune::zero_grads(m.params());
    Tape tape;
    const auto cache = m.forward(probe.tokens, tape, false, nullptr);
    const auto loss = train::task_loss(tape, m.classify(cache.last_token, tape), probe.labels, cfg.head);
    tape.backward(loss);
    std::map<std::string, std::vector<float>> g;
    for (const auto& name : trainable) {
      const auto& grad = m.params().at(name).grad();
      g[name].assign(grad.begin(), grad.end());
    }
    return g;
  };
  const auto sel = grads_under(tune::FreezePolicy::selective());
  const auto full = grads_under(tune::FreezePolicy::full());
  double worst = 0.0;
  for (const auto& [name, g] : sel) {
    const auto& f = full.at(name);
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::fabs(double(g[i]) - double(f[i])));
  }
  v.require(worst <= 1e-6, "selective vs full gradient gap " + fmt("%.3e", worst));
  if (v.ok) {
    v.detail = "100 steps, " + std::to_string(frozen) + " frozen tensors bitwise unchanged, " + std::to_string(moved) +
               " trainable tensors moved, max gradient gap " + fmt("%.3e", worst);
  }
  return v;
}

Verdict labeler_oracle() {
  Verdict v;
  const std::string fixtures = std::string(SFT_SOURCE_DIR) + "/tests/fixtures/";
  std::size_t reports = 0;
  const auto mismatches =
      testing::compare_with_golden(fixtures + "labeler_corpus.jsonl", fixtures + "labeler_golden.jsonl", reports);
  v.require(reports >= 30, "fixture has only " + std::to_string(reports) + " reports");
  for (const auto& m : mismatches) v.require(false, m.note_id + " " + m.field + ": " + m.expected + " vs " + m.actual);

  const auto cfg = label::LabelerConfig::defaults();
  const std::vector<std::string> vocab = {
      "no",     "not",      "without",  "possible", "likely",   "may",          "versus",   "cannot",
      "be",     "excluded", "evidence", "of",       "free",     "pneumonia",    "edema",    "effusions",
      "mass",   "masses",   "nodule",   "cardiomegaly", "atelectasis", "pneumothorax", "fracture", "tube",
      "lines",  "pacemaker", "opacity", "consolidation", "no acute cardiopulmonary process", "normal",
      "clear",  "lungs",    "is",       "are",      "seen",     "mild",         "small",    "new",
      "resolved", "\xc3\xa9panchement", "\xe2\x80\x94", ".", ";", ",", "!", "?", "\n", "(", ")"};
  Rng rng = make_rng(2024);
  std::uniform_int_distribution<std::size_t> len(0, 40), pick(0, vocab.size() - 1);
  std::uniform_int_distribution<int> glue(0, 9);
  std::size_t violations = 0, errors = 0;
  for (int i = 0; i < 100'000; ++i) {
    std::string text;
    for (std::size_t k = len(rng); k > 0; --k) {
      text += vocab[pick(rng)];
      text += glue(rng) == 0 ? "" : " ";
    }
    try {
      const auto l = label::label_report(text, cfg);
      for (const auto& c : l.conditions) violations += c.bin_posonly > c.bin_pos_or_unc;
      violations += l.label_any_disease_posonly > l.label_any_disease_pos_or_unc;
    } catch (const std::exception&) {
      ++errors;
    }
  }
  v.require(violations == 0, std::to_string(violations) + " monotonicity violations");
  v.require(errors == 0, std::to_string(errors) + " labeling errors");
  if (v.ok) {
    v.detail = std::to_string(reports) + " fixture reports match the golden file; 100000 fuzzed texts monotone";
  }
  return v;
}

Verdict encoding_round_trip() {
  Verdict v;
  const std::vector<std::pair<label::Label3, int>> table = {
      {label::Label3::Pos, 1}, {label::Label3::Neg, 0}, {label::Label3::Unc, 2}, {label::Label3::Null, 3}};
  std::vector<int> seen;
  for (const auto& [l, code] : table) {
    v.require(label::encode(l) == code, label::to_string(l) + " encodes to " + std::to_string(label::encode(l)));
    v.require(label::decode(code) == l, "code " + std::to_string(code) + " decodes wrongly");
    v.require(label::decode(label::encode(l)) == l, "round trip of " + label::to_string(l));
    seen.push_back(label::encode(l));
  }
  std::sort(seen.begin(), seen.end());
  v.require(seen == std::vector<int>{0, 1, 2, 3}, "codes are not a permutation of 0..3");
  for (int code = 0; code < 4; ++code) v.require(label::encode(label::decode(code)) == code, "code round trip");
  for (int bad : {-1, 4}) {
    bool threw = false;
    try {
      label::decode(bad);
    } catch (const std::exception&) {
      threw = true;
    }
    v.require(threw, "decode accepted " + std::to_string(bad));
  }
  if (v.ok) v.detail = "Pos 1, Neg 0, Unc 2, Null 3; both directions exhaustive, out-of-range codes rejected";
  return v;
}

Verdict auroc_oracle() {
  Verdict v;
  Rng rng = make_rng(7);
  std::uniform_int_distribution<std::size_t> len(2, 200);
  std::uniform_int_distribution<int> mode(0, 2), coarse(0, 6), bit(0, 1);
  std::uniform_real_distribution<double> fine(0.0, 1.0);
  std::size_t exact = 0, tied = 0;
  double worst_trap = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = len(rng);
    const int m = mode(rng);
    std::vector<double> s(n);
    std::vector<std::int32_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = m == 0 ? fine(rng) : m == 1 ? coarse(rng) / 6.0 : std::round(fine(rng) * 20.0) / 20.0;
      y[i] = bit(rng);
    }
    y[0] = 1;
    y[n - 1] = 0;
    double wins = 0.0;
    std::size_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < n; ++i) (y[i] ? pos : neg)++;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (y[i] == 1 && y[j] == 0) wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    const double oracle = wins / (static_cast<double>(pos) * static_cast<double>(neg));
    const double a = train::auroc(s, y);
    exact += a == oracle;
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    tied += std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
    worst_trap = std::max(worst_trap, std::fabs(train::trapezoid_area(train::roc_points(s, y)) - a));
  }
  v.require(exact == 1000, std::to_string(1000 - exact) + " instances differ from the Mann-Whitney oracle");
  v.require(tied > 0, "no instance had ties");
  v.require(worst_trap <= 1e-12, "trapezoid gap " + fmt("%.3e", worst_trap));
  if (v.ok) {
    v.detail = "1000/1000 exact (" + std::to_string(tied) + " with ties), max trapezoid gap " + fmt("%.1e", worst_trap);
  }
  return v;
}

Verdict sampler_balance() {
  Verdict v;
  std::vector<std::int32_t> classes(900, 0);
  classes.insert(classes.end(), 100, 1);
  const auto weights = data::sampler_weights(classes);
  Rng rng = make_rng(99);
  const auto draws = data::weighted_sample(weights, 10'000, rng);
  std::size_t minority = 0;
  for (auto i : draws) minority += classes[i] == 1;
  const double frac = static_cast<double>(minority) / static_cast<double>(draws.size());
  v.require(draws.size() == 10'000, "drew " + std::to_string(draws.size()));
  v.require(std::fabs(frac - 0.5) <= 0.02, "minority fraction " + fmt("%.4f", frac));

  std::size_t bad = 0;
  for (std::size_t n = 3; n <= 1000; ++n) {
    const auto s = data::random_split(n, n);
    const std::size_t tr = 7 * n / 10, va = n / 10;
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.val.begin(), s.val.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    bool ok = s.train.size() == tr && s.val.size() == va && s.test.size() == n - tr - va;
    for (std::size_t i = 0; ok && i < n; ++i) ok = all[i] == i;
    bad += !ok;
  }
  v.require(bad == 0, std::to_string(bad) + " split sizes wrong");
  if (v.ok) v.detail = "minority fraction " + fmt("%.4f", frac) + "; splits exact for N = 3..1000";
  return v;
}

// Desk-scale learning rates; the optimizer defaults are tuned for 124M
// parameters and 1024-token inputs.
const char* kDeskLr = "selective=5e-4,full=5e-4";

Invocation pipeline(const fs::path& dir) {
  const auto raw = (dir / "reports.jsonl").string();
  const auto labeled = (dir / "labeled.jsonl").string();
  auto r = sftune({"synth", "--output", raw, "--n", "2000", "--seed", "7"});
  if (r.code != 0) return r;
  r = sftune({"label", "--input", raw, "--output", labeled});
  if (r.code != 0) return r;
  return sftune({"compare", "--data", labeled, "--model-cfg", "tiny", "--strategies", "head,selective,full",
                 "--target", "label_any_disease_pos_or_unc", "--epochs", "10", "--batch", "8", "--seq-len", "64",
                 "--seed", "7", "--lr", kDeskLr, "--out", (dir / "out").string()});
}

struct StrategyRow {
  double test_acc = 0, auroc = 0, minutes = 0;
};

std::map<std::string, StrategyRow> comparison_rows(const fs::path& path) {
  const auto table = csv::parse_table(read_file(path));
  std::map<std::string, StrategyRow> rows;
  for (const auto& r : table.rows) {
    rows[r[0]] = {std::stod(r[table.column("Test Acc.")]) / 100.0, std::stod(r[table.column("AUROC")]),
                  std::stod(r[table.column("Time / Epoch (min)")])};
  }
  return rows;
}

Verdict synthetic_end_to_end(const fs::path& dir, std::string& table) {
  Verdict v;
  const auto run = pipeline(dir);
  v.require(run.code == 0, "pipeline exit " + std::to_string(run.code) + ": " + run.err);
  if (run.code != 0) return v;
  table = read_file(dir / "out" / "comparison.csv");
  auto rows = comparison_rows(dir / "out" / "comparison.csv");
  const auto& head = rows["Linear head only"];
  const auto& sel = rows["Selective fine-tuning"];
  const auto& full = rows["Full fine-tuning"];
  v.require(sel.test_acc >= 0.90, "selective test accuracy " + fmt("%.4f", sel.test_acc));
  v.require(sel.auroc >= 0.95, "selective AUROC " + fmt("%.4f", sel.auroc));
  v.require(head.test_acc < sel.test_acc, "head accuracy not below selective");
  v.require(head.auroc < sel.auroc, "head AUROC not below selective");
  v.require(head.minutes < sel.minutes && sel.minutes < full.minutes,
            "epoch times head " + fmt("%.4f", head.minutes) + ", selective " + fmt("%.4f", sel.minutes) + ", full " +
                fmt("%.4f", full.minutes) + " min");
  v.detail = (v.ok ? "" : v.detail + "; ") + "selective acc " + fmt("%.4f", sel.test_acc) + " AUROC " +
             fmt("%.4f", sel.auroc) + ", head acc " + fmt("%.4f", head.test_acc) + " AUROC " +
             fmt("%.4f", head.auroc) + ", min/epoch head " + fmt("%.4f", head.minutes) + " < selective " +
             fmt("%.4f", sel.minutes) + " < full " + fmt("%.4f", full.minutes);
  return v;
}

// Wall-clock fields are dropped: the seconds column of learning curves, the
// time column of the comparison table and the timing file.
std::string comparable(const fs::path& path) {
  const auto name = path.filename().string();
  const auto text = read_file(path);
  if (name.rfind("curves_", 0) == 0) return train::learning_curves_csv(train::parse_learning_curves(text), false);
  if (name == "comparison.csv") {
    auto table = csv::parse_table(text);
    const auto drop = table.column("Time / Epoch (min)");
    std::string out;
    auto emit = [&](std::vector<std::string> row) {
      row.erase(row.begin() + static_cast<std::ptrdiff_t>(drop));
      out += csv::join(row) + "\n";
    };
    emit(table.header);
    for (const auto& r : table.rows) emit(r);
    return out;
  }
  return text;
}

Verdict determinism(const fs::path& first, const fs::path& second) {
  Verdict v;
  const auto run = pipeline(second);
  v.require(run.code == 0, "second pipeline exit " + std::to_string(run.code) + ": " + run.err);
  if (run.code != 0) return v;
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(first)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), first);
    const auto ext = rel.extension().string();
    if (rel.filename() == "timing.csv" || (ext != ".csv" && ext != ".jsonl")) continue;
    const auto other = second / rel;
    v.require(fs::exists(other), rel.string() + " missing from the rerun");
    if (!fs::exists(other)) continue;
    v.require(comparable(entry.path()) == comparable(other), rel.string() + " differs");
    ++compared;
  }
  v.require(compared >= 14, "only " + std::to_string(compared) + " files compared");
  if (v.ok) v.detail = std::to_string(compared) + " CSV/JSONL files identical (wall-clock fields excluded)";
  return v;
}

gpt::TokenBatch batch_of(const std::vector<std::vector<std::int32_t>>& rows, std::size_t T, std::int32_t pad) {
  gpt::TokenBatch b;
  b.ids.rows = rows.size();
  b.ids.cols = T;
  for (const auto& r : rows) {
    for (std::size_t t = 0; t < T; ++t) {
      b.ids.ids.push_back(t < r.size() ? r[t] : pad);
      b.mask.push_back(t < r.size() ? 1 : 0);
    }
  }
  return b;
}

Verdict causality_padding() {
  Verdict v;
  Rng rng = make_rng(11);
  std::uniform_int_distribution<std::size_t> heads(1, 4), per_head(2, 6), layers(1, 3), rows_d(1, 4), ctx(4, 16);
  std::normal_distribution<float> n(0.0f, 0.3f);
  double worst_pad = 0.0;
  std::size_t configs = 0;
  for (int trial = 0; trial < 100; ++trial) {
    gpt::GptConfig cfg;
    cfg.n_vocab = 50;
    cfg.n_head = heads(rng);
    cfg.n_embd = cfg.n_head * per_head(rng);
    cfg.n_layer = layers(rng);
    cfg.d_ff = 4 * cfg.n_embd;
    cfg.n_ctx = ctx(rng);
    cfg.dropout_p = 0.0f;
    cfg.head = gpt::HeadKind::BinarySigmoid;
    cfg.n_classes = 1;
    auto params = gpt::init_params(cfg, rng);
    for (auto& [name, t] : params.entries())
      for (auto& x : t.data()) x = name.size() > 2 && name.substr(name.size() - 2) == ".g" ? 1.0f + n(rng) : n(rng);
    gpt::GptModel model(cfg, std::move(params));
    ++configs;

    const std::size_t T = cfg.n_ctx, d = cfg.n_embd, B = rows_d(rng);
    std::uniform_int_distribution<std::int32_t> tok(0, 49);
    std::uniform_int_distribution<std::size_t> len(1, T);
    std::vector<std::vector<std::int32_t>> rows(B);
    for (auto& r : rows) {
      r.resize(len(rng));
      for (auto& t : r) t = tok(rng);
    }
    Tape tape;
    tape.set_recording(false);

    auto full_rows = rows;
    for (auto& r : full_rows)
      while (r.size() < T) r.push_back(tok(rng));
    const auto base = model.forward(batch_of(full_rows, T, 0), tape, false, nullptr);
    const std::size_t cut = std::uniform_int_distribution<std::size_t>(0, T - 1)(rng);
    auto future = full_rows;
    for (auto& r : future)
      for (std::size_t t = cut + 1; t < T; ++t) r[t] = (r[t] + 1 + tok(rng)) % 50;
    const auto alt = model.forward(batch_of(future, T, 0), tape, false, nullptr);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t <= cut; ++t)
        for (std::size_t k = 0; k < d; ++k) {
          const std::size_t i = (b * T + t) * d + k;
          if (base.final_hidden.data()[i] != alt.final_hidden.data()[i]) {
            v.require(false, "trial " + std::to_string(trial) + ": position " + std::to_string(t) +
                                 " depends on tokens after " + std::to_string(cut));
            b = B;
            t = cut + 1;
            break;
          }
        }

    const auto padded = model.forward(batch_of(rows, T, 0), tape, false, nullptr);
    const auto repadded = model.forward(batch_of(rows, T, 49), tape, false, nullptr);
    for (std::size_t b = 0; b < B; ++b) {
      const auto alone = model.forward(batch_of({rows[b]}, rows[b].size(), 0), tape, false, nullptr);
      for (std::size_t k = 0; k < d; ++k) {
        const double a = alone.last_token.data()[k];
        const double p = padded.last_token.data()[b * d + k];
        const double q = repadded.last_token.data()[b * d + k];
        const double gap = std::max(std::fabs(a - p), std::fabs(p - q)) / std::max(1.0, std::fabs(a));
        worst_pad = std::max(worst_pad, gap);
      }
    }
  }
  v.require(worst_pad <= 1e-5, "padding changes h_T by " + fmt("%.3e", worst_pad));
  if (v.ok) {
    v.detail = std::to_string(configs) + " configurations: future tokens never reach earlier positions (bitwise); " +
               "h_T padding gap " + fmt("%.2e", worst_pad);
  }
  return v;
}

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Verdict()> check;
};

}  // namespace

// Optional arguments select criteria by number; 10 needs 9.
int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  std::string table;
  const auto base = fs::temp_directory_path() / "sftune_acceptance";
  const auto first = base / "run1";
  const auto second = base / "run2";
  const std::vector<Criterion> criteria = {
      {1, "parameter ledger exactness", 1.0, ledger_exactness},
      {2, "total parameter sanity", 1.0, total_sanity},
      {3, "gradient correctness", 120.0, gradient_correctness},
      {4, "freeze semantics", 120.0, freeze_semantics},
      {5, "labeler oracle", 60.0, labeler_oracle},
      {6, "encoding round trip", 1.0, encoding_round_trip},
      {7, "AUROC oracle", 60.0, auroc_oracle},
      {8, "sampler balance and split sizes", 60.0, sampler_balance},
      {9, "synthetic end to end", 900.0,
       [&] {
         fs::remove_all(first);
         fs::create_directories(first);
         return synthetic_end_to_end(first, table);
       }},
      {10, "determinism", 900.0,
       [&] {
         fs::remove_all(second);
         fs::create_directories(second);
         return determinism(first, second);
       }},
      {11, "causality and padding", 120.0, causality_padding},
  };

  std::ofstream report("acceptance_report.txt");
  auto emit = [&](const std::string& text) {
    std::cout << text << std::flush;
    report << text << std::flush;
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.require(secs < c.budget_seconds, "took " + fmt("%.2f", secs) + " s, budget " + fmt("%.0f", c.budget_seconds) + " s");
    failures += !v.ok;
    emit(std::string(v.ok ? "PASS" : "FAIL") + " criterion " + std::to_string(c.id) + " (" + c.name + "): " + v.detail +
         " [" + fmt("%.2f", secs) + " s]\n");
    if (c.id == 9 && !table.empty()) emit(table);
  }
  emit(failures == 0 ? "all criteria passed\n" : std::to_string(failures) + " criteria failed\n");
  return failures == 0 ? 0 : 1;
}
