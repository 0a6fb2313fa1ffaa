#include "sft/param_ledger.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "sft/error.hpp"

namespace sft::tune {

std::string to_string(Convention c) { return c == Convention::Paper ? "paper" : "full"; }

Convention convention_from_string(const std::string& name) {
  if (name == "paper") return Convention::Paper;
  if (name == "full") return Convention::Full;
  throw ConfigError("unknown convention '" + name + "' (expected paper or full)");
}

bool counted_in(const std::string& name, Convention convention) {
  if (convention == Convention::Full) return true;
  const auto dot = name.rfind('.');
  const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
  const bool linear_bias = (name.find(".attn.") != std::string::npos && leaf.size() == 2 && leaf[0] == 'b') ||
                           (name.find(".ffn.") != std::string::npos && leaf[0] == 'b');
  return !linear_bias;
}

ParamLedger count_params(const gpt::GptConfig& cfg, const FreezePolicy& policy, Convention convention) {
  cfg.validate();
  const std::uint64_t d = cfg.n_embd;
  const std::uint64_t dff = cfg.d_ff;
  const std::uint64_t c = cfg.n_classes;
  const bool full = convention == Convention::Full;

  ParamLedger ledger;
  ledger.convention = convention;
  ledger.n_layer = cfg.n_layer;
  ledger.token_embeddings = static_cast<std::uint64_t>(cfg.n_vocab) * d;
  ledger.positional_embeddings = static_cast<std::uint64_t>(cfg.n_ctx) * d;
  ledger.embeddings = ledger.token_embeddings + ledger.positional_embeddings;
  ledger.block_attention = 4 * d * d + (full ? 4 * d : 0);
  ledger.block_ffn = 2 * d * dff + (full ? dff + d : 0);
  ledger.block_ln = 2 * 2 * d;
  ledger.block_total = ledger.block_attention + ledger.block_ffn + ledger.block_ln;
  ledger.final_ln = 2 * d;
  ledger.head = d * c + c;

  ledger.rows.push_back({"embeddings", ledger.embeddings, 0});
  for (std::size_t b = 0; b < cfg.n_layer; ++b) {
    ledger.rows.push_back({"blocks." + std::to_string(b), ledger.block_total, 0});
  }
  ledger.rows.push_back({"lnf", ledger.final_ln, 0});
  ledger.rows.push_back({"head", ledger.head, 0});

  const auto trainable = policy.resolve(cfg);
  for (const auto& spec : gpt::param_specs(cfg)) {
    if (!counted_in(spec.name, convention) || trainable.count(spec.name) == 0) continue;
    const std::uint64_t n = shape_numel(spec.shape);
    std::size_t row = 0;
    if (spec.name == "wte" || spec.name == "wpe") {
      row = 0;
    } else if (spec.name.rfind("blocks.", 0) == 0) {
      row = 1 + std::stoul(spec.name.substr(7, spec.name.find('.', 7) - 7));
    } else if (spec.name.rfind("lnf.", 0) == 0) {
      row = 1 + cfg.n_layer;
    } else {
      row = 2 + cfg.n_layer;
    }
    ledger.rows[row].trainable += n;
  }

  for (const auto& r : ledger.rows) {
    ledger.total += r.count;
    ledger.trainable += r.trainable;
  }
  ledger.frozen = ledger.total - ledger.trainable;
  return ledger;
}

std::string with_thousands(std::uint64_t value) {
  std::string digits = std::to_string(value);
  std::string out;
  const std::size_t n = digits.size();
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(digits[i]);
    if ((n - i - 1) % 3 == 0 && i + 1 < n) out.push_back(',');
  }
  return out;
}

std::string humanize_count(std::uint64_t value) {
  char buf[32];
  const double v = static_cast<double>(value);
  if (value >= 100'000'000) {
    std::snprintf(buf, sizeof buf, "%.0fM", v / 1e6);
  } else if (value >= 1'000'000) {
    std::snprintf(buf, sizeof buf, "%.2fM", v / 1e6);
  } else if (value >= 1'000) {
    std::snprintf(buf, sizeof buf, "%.1fk", v / 1e3);
  } else {
    std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(value));
  }
  return buf;
}

namespace {

struct TableLine {
  std::string label;
  std::string paper;
  std::string full;
};

std::vector<TableLine> table_lines(const ParamLedger& paper, const ParamLedger& full, bool pretty) {
  auto fmt = [pretty](std::uint64_t v) { return pretty ? with_thousands(v) : std::to_string(v); };
  auto frac = [](double f) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", f);
    return std::string(buf);
  };
  std::vector<TableLine> lines;
  lines.push_back({"embeddings.token", fmt(paper.token_embeddings), fmt(full.token_embeddings)});
  lines.push_back({"embeddings.positional", fmt(paper.positional_embeddings), fmt(full.positional_embeddings)});
  lines.push_back({"embeddings", fmt(paper.embeddings), fmt(full.embeddings)});
  lines.push_back({"block.attention", fmt(paper.block_attention), fmt(full.block_attention)});
  lines.push_back({"block.ffn", fmt(paper.block_ffn), fmt(full.block_ffn)});
  lines.push_back({"block.layer_norm", fmt(paper.block_ln), fmt(full.block_ln)});
  lines.push_back({"block.total", fmt(paper.block_total), fmt(full.block_total)});
  lines.push_back({"blocks.all", fmt(paper.block_total * paper.n_layer), fmt(full.block_total * full.n_layer)});
  lines.push_back({"final_layer_norm", fmt(paper.final_ln), fmt(full.final_ln)});
  lines.push_back({"head", fmt(paper.head), fmt(full.head)});
  lines.push_back({"total", fmt(paper.total), fmt(full.total)});
  lines.push_back({"trainable", fmt(paper.trainable), fmt(full.trainable)});
  lines.push_back({"frozen", fmt(paper.frozen), fmt(full.frozen)});
  lines.push_back({"trainable_fraction", frac(paper.trainable_fraction()), frac(full.trainable_fraction())});
  return lines;
}

}  // namespace

std::string ledger_csv(const ParamLedger& paper, const ParamLedger& full) {
  std::ostringstream out;
  out << "component,paper_convention,full_convention\n";
  for (const auto& line : table_lines(paper, full, false)) out << line.label << ',' << line.paper << ',' << line.full << '\n';
  return out.str();
}

std::string ledger_text(const ParamLedger& paper, const ParamLedger& full, const std::string& policy_name) {
  std::ostringstream out;
  const auto lines = table_lines(paper, full, true);
  std::size_t w0 = 9, w1 = 16, w2 = 15;
  for (const auto& l : lines) {
    w0 = std::max(w0, l.label.size());
    w1 = std::max(w1, l.paper.size());
    w2 = std::max(w2, l.full.size());
  }
  char buf[256];
  out << "policy: " << policy_name << "\n";
  std::snprintf(buf, sizeof buf, "%-*s  %*s  %*s\n", static_cast<int>(w0), "component", static_cast<int>(w1),
                "paper convention", static_cast<int>(w2), "full convention");
  out << buf;
  for (const auto& l : lines) {
    std::snprintf(buf, sizeof buf, "%-*s  %*s  %*s\n", static_cast<int>(w0), l.label.c_str(), static_cast<int>(w1),
                  l.paper.c_str(), static_cast<int>(w2), l.full.c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace sft::tune
