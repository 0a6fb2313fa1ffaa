#include "sft/labeler.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cstdio>

#include "sft/error.hpp"

namespace sft::label {

std::string to_string(Label3 label) {
  switch (label) {
    case Label3::Pos: return "pos";
    case Label3::Neg: return "neg";
    case Label3::Unc: return "unc";
    case Label3::Null: return "null";
  }
  return "null";
}

std::optional<int> table_code(Label3 label) {
  switch (label) {
    case Label3::Pos: return 1;
    case Label3::Neg: return 0;
    case Label3::Unc: return -1;
    case Label3::Null: return std::nullopt;
  }
  return std::nullopt;
}

Label3 from_table_code(std::optional<int> code) {
  if (!code) return Label3::Null;
  switch (*code) {
    case 1: return Label3::Pos;
    case 0: return Label3::Neg;
    case -1: return Label3::Unc;
    default: throw ContractError("3-class label must be 1, 0, -1 or null, got " + std::to_string(*code));
  }
}

int encode(Label3 label) {
  switch (label) {
    case Label3::Pos: return 1;
    case Label3::Neg: return 0;
    case Label3::Unc: return 2;
    case Label3::Null: return 3;
  }
  return 3;
}

Label3 decode(int code) {
  switch (code) {
    case 1: return Label3::Pos;
    case 0: return Label3::Neg;
    case 2: return Label3::Unc;
    case 3: return Label3::Null;
    default: throw ContractError("encoded label must be in {0,1,2,3}, got " + std::to_string(code));
  }
}

bool operator==(const ConditionLabel& a, const ConditionLabel& b) {
  return a.y3 == b.y3 && a.bin_posonly == b.bin_posonly && a.bin_pos_or_unc == b.bin_pos_or_unc;
}

std::string display_name(const std::string& condition) {
  std::string out = condition;
  std::replace(out.begin(), out.end(), '_', ' ');
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Bytes of multi-byte characters count as word characters.
bool is_word(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

bool is_delim(char c) { return c == '.' || c == '!' || c == '?' || c == ';'; }

void check_utf8(std::string_view s) {
  std::size_t i = 0;
  const auto fail = [&](std::size_t at) {
    throw EncodingError("invalid UTF-8 at byte " + std::to_string(at));
  };
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
      ++i;
      continue;
    }
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      fail(i);
    }
    if (i + len > s.size()) fail(i);
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) fail(i + k);
      cp = (cp << 6) | (cc & 0x3F);
    }
    const std::uint32_t min_cp = len == 2 ? 0x80 : len == 3 ? 0x800 : 0x10000;
    if (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail(i);
    i += len;
  }
}

// Length of the match of phrase at pos, or 0. Plural tolerance accepts one
// trailing 's' before the right boundary.
std::size_t match_at(std::string_view text, std::size_t pos, std::string_view phrase, bool plural_s) {
  if (phrase.empty() || pos + phrase.size() > text.size()) return 0;
  if (pos > 0 && is_word(static_cast<unsigned char>(text[pos - 1]))) return 0;
  if (text.compare(pos, phrase.size(), phrase) != 0) return 0;
  const std::size_t end = pos + phrase.size();
  const auto boundary = [&](std::size_t at) { return at == text.size() || !is_word(static_cast<unsigned char>(text[at])); };
  if (boundary(end)) return phrase.size();
  if (plural_s && text[end] == 's' && boundary(end + 1)) return phrase.size() + 1;
  return 0;
}

// Cue matches must lie inside [lo, hi); word boundaries are judged against
// the full text so a clamped window edge never splits a word into a cue.
bool cue_in(std::string_view text, std::string_view cue, std::size_t lo, std::size_t hi) {
  for (std::size_t pos = text.find(cue, lo); pos != std::string_view::npos && pos < hi; pos = text.find(cue, pos + 1)) {
    const std::size_t len = match_at(text, pos, cue, false);
    if (len > 0 && pos + len <= hi) return true;
  }
  return false;
}

CueHits cues_between(std::string_view text, std::size_t lo, std::size_t hi, const std::vector<std::string>& negation,
                     const std::vector<std::string>& uncertainty) {
  CueHits hits;
  hits.negated = std::any_of(negation.begin(), negation.end(), [&](const auto& c) { return cue_in(text, c, lo, hi); });
  hits.uncertain =
      std::any_of(uncertainty.begin(), uncertainty.end(), [&](const auto& c) { return cue_in(text, c, lo, hi); });
  return hits;
}

}  // namespace

std::string normalize_text(std::string_view raw) {
  check_utf8(raw);
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
  }
  return out;
}

std::vector<Mention> find_mentions(std::string_view text, const Condition& condition) {
  std::vector<const Keyword*> order;
  for (const auto& k : condition.keywords) order.push_back(&k);
  std::stable_sort(order.begin(), order.end(),
                   [](const Keyword* a, const Keyword* b) { return a->phrase.size() > b->phrase.size(); });

  std::vector<Mention> mentions;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t len = 0;
    const Keyword* hit = nullptr;
    for (const Keyword* k : order) {
      len = match_at(text, pos, k->phrase, k->plural_s);
      if (len > 0) {
        hit = k;
        break;
      }
    }
    if (hit) {
      mentions.push_back({condition.name, pos, pos + len, hit->phrase});
      pos += len;
    } else {
      ++pos;
    }
  }
  return mentions;
}

ContextWindow context_window(std::string_view text, const Mention& mention, std::size_t w) {
  if (mention.begin > mention.end || mention.end > text.size()) {
    throw ContractError("mention span lies outside the text");
  }
  std::size_t start = mention.begin;
  while (start > 0 && !is_delim(text[start - 1])) --start;
  while (start < mention.begin && text[start] == ' ') ++start;
  std::size_t stop = mention.end;
  while (stop < text.size() && !is_delim(text[stop])) ++stop;
  if (stop < text.size()) ++stop;  // keep the delimiter

  if (stop - start > 2 * w) {
    const std::size_t centre = mention.begin + (mention.end - mention.begin) / 2;
    const std::size_t lo = std::max(start, centre >= w ? centre - w : 0);
    const std::size_t hi = std::min(stop, centre + w + 1);
    start = std::min(lo, mention.begin);
    stop = std::max(hi, mention.end);
  }
  ContextWindow win;
  win.text = std::string(text.substr(start, stop - start));
  win.source_begin = start;
  win.mention_begin = mention.begin - start;
  win.mention_end = mention.end - start;
  return win;
}

CueHits detect_cues(const ContextWindow& window, const std::vector<std::string>& negation,
                    const std::vector<std::string>& uncertainty, CueScope scope) {
  const std::size_t limit = scope == CueScope::PreMention ? window.mention_begin : window.text.size();
  return cues_between(window.text, 0, limit, negation, uncertainty);
}

Label3 label_condition(std::string_view normalized, const Condition& condition, const LabelerConfig& cfg) {
  const auto mentions = find_mentions(normalized, condition);
  if (mentions.empty()) return Label3::Null;
  bool pos = false, unc = false, neg_all = true;
  for (const auto& m : mentions) {
    const auto window = context_window(normalized, m, cfg.window_chars);
    const std::size_t lo = window.source_begin;
    const std::size_t hi = cfg.cue_scope == CueScope::PreMention ? m.begin : lo + window.text.size();
    const auto cues = cues_between(normalized, lo, hi, cfg.negation_cues, cfg.uncertainty_cues);
    if (!cues.negated) {
      neg_all = false;
      if (cues.uncertain) {
        unc = true;
      } else {
        pos = true;
      }
    }
  }
  if (pos) return Label3::Pos;
  if (unc) return Label3::Unc;
  if (neg_all) return Label3::Neg;
  // A non-negated mention always sets pos or unc, so this is dead code.
  assert(false && "ambiguous fallback reached");
  return Label3::Null;
}

bool match_any_pattern(std::string_view normalized, const std::vector<std::string>& patterns) {
  for (const auto& p : patterns) {
    if (cue_in(normalized, p, 0, normalized.size())) return true;
  }
  return false;
}

void derive_binaries(ReportLabels& labels) {
  bool any_pos = false, any_pu = false;
  for (auto& c : labels.conditions) {
    c.bin_posonly = c.y3 == Label3::Pos;
    c.bin_pos_or_unc = c.y3 == Label3::Pos || c.y3 == Label3::Unc;
    any_pos = any_pos || c.bin_posonly;
    any_pu = any_pu || c.bin_pos_or_unc;
  }
  labels.label_any_disease_posonly = any_pos;
  labels.label_any_disease_pos_or_unc = any_pu;
  labels.label_no_finding_strict = labels.y_no_finding_phrase && !any_pu;
}

ReportLabels label_report(std::string_view raw_text, const LabelerConfig& cfg) {
  const std::string text = normalize_text(raw_text);
  ReportLabels out;
  out.y_no_finding_phrase = match_any_pattern(text, cfg.no_finding_patterns);
  out.conditions.reserve(cfg.conditions.size());
  for (const auto& c : cfg.conditions) out.conditions.push_back({label_condition(text, c, cfg), false, false});
  derive_binaries(out);
  return out;
}

EncodedLabels encode_labels(const ReportLabels& labels) {
  EncodedLabels e;
  e.y_no_finding_phrase = labels.y_no_finding_phrase ? 1 : 0;
  for (const auto& c : labels.conditions) {
    e.y3.push_back(encode(c.y3));
    e.bin_posonly.push_back(c.bin_posonly ? 1 : 0);
    e.bin_pos_or_unc.push_back(c.bin_pos_or_unc ? 1 : 0);
  }
  e.label_any_disease_posonly = labels.label_any_disease_posonly ? 1 : 0;
  e.label_any_disease_pos_or_unc = labels.label_any_disease_pos_or_unc ? 1 : 0;
  e.label_no_finding_strict = labels.label_no_finding_strict ? 1 : 0;
  return e;
}

ReportLabels decode_labels(const EncodedLabels& e) {
  if (e.bin_posonly.size() != e.y3.size() || e.bin_pos_or_unc.size() != e.y3.size()) {
    throw ContractError("encoded label record has ragged condition fields");
  }
  const auto bit = [](int v, const char* what) {
    if (v != 0 && v != 1) throw ContractError(std::string(what) + " must be 0 or 1");
    return v == 1;
  };
  ReportLabels r;
  r.y_no_finding_phrase = bit(e.y_no_finding_phrase, "y_no_finding_phrase");
  for (std::size_t i = 0; i < e.y3.size(); ++i) {
    r.conditions.push_back({decode(e.y3[i]), bit(e.bin_posonly[i], "bin_posonly"),
                            bit(e.bin_pos_or_unc[i], "bin_pos_or_unc")});
  }
  r.label_any_disease_posonly = bit(e.label_any_disease_posonly, "label_any_disease_posonly");
  r.label_any_disease_pos_or_unc = bit(e.label_any_disease_pos_or_unc, "label_any_disease_pos_or_unc");
  r.label_no_finding_strict = bit(e.label_no_finding_strict, "label_no_finding_strict");
  return r;
}

PrevalenceTable prevalence(const std::vector<ReportLabels>& corpus, const LabelerConfig& cfg) {
  if (corpus.empty()) throw ContractError("prevalence of an empty corpus is undefined");
  PrevalenceTable table;
  table.n = corpus.size();
  std::vector<PrevalenceRow> rows(2 + cfg.conditions.size());
  rows[0].label = "Any abnormality";
  rows[1].label = "No finding (strict)";
  for (std::size_t c = 0; c < cfg.conditions.size(); ++c) rows[2 + c].label = display_name(cfg.conditions[c].name);
  for (const auto& r : corpus) {
    if (r.conditions.size() != cfg.conditions.size()) {
      throw ContractError("report " + r.note_id + " has " + std::to_string(r.conditions.size()) +
                          " conditions, config has " + std::to_string(cfg.conditions.size()));
    }
    rows[0].posonly += r.label_any_disease_posonly;
    rows[0].pos_or_unc += r.label_any_disease_pos_or_unc;
    rows[1].posonly += r.label_no_finding_strict;
    rows[1].pos_or_unc += r.label_no_finding_strict;
    for (std::size_t c = 0; c < r.conditions.size(); ++c) {
      rows[2 + c].posonly += r.conditions[c].bin_posonly;
      rows[2 + c].pos_or_unc += r.conditions[c].bin_pos_or_unc;
    }
  }
  const double n = static_cast<double>(table.n);
  for (auto& row : rows) {
    row.posonly_pct = static_cast<double>(row.posonly) / n * 100.0;
    row.pos_or_unc_pct = static_cast<double>(row.pos_or_unc) / n * 100.0;
  }
  table.rows = std::move(rows);
  return table;
}

namespace {

std::string thousands(std::size_t v) {
  std::string digits = std::to_string(v), out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    out.push_back(digits[i]);
    const std::size_t left = digits.size() - i - 1;
    if (left > 0 && left % 3 == 0) out.push_back(',');
  }
  return out;
}

std::string count_pct(std::size_t count, double pct) {
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.2f%%)", pct);
  return thousands(count) + buf;
}

}  // namespace

std::string prevalence_text(const PrevalenceTable& table) {
  std::size_t w0 = 5, w1 = 22, w2 = 28;
  std::vector<std::array<std::string, 3>> lines;
  for (const auto& r : table.rows) {
    lines.push_back({r.label, count_pct(r.posonly, r.posonly_pct), count_pct(r.pos_or_unc, r.pos_or_unc_pct)});
    w0 = std::max(w0, lines.back()[0].size());
    w1 = std::max(w1, lines.back()[1].size());
    w2 = std::max(w2, lines.back()[2].size());
  }
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-*s  %*s  %*s\n", static_cast<int>(w0), "Label", static_cast<int>(w1),
                "Positive-only, n (%)", static_cast<int>(w2), "Positive-or-uncertain, n (%)");
  out += buf;
  for (const auto& l : lines) {
    std::snprintf(buf, sizeof buf, "%-*s  %*s  %*s\n", static_cast<int>(w0), l[0].c_str(), static_cast<int>(w1),
                  l[1].c_str(), static_cast<int>(w2), l[2].c_str());
    out += buf;
  }
  out += "N = " + thousands(table.n) + "\n";
  return out;
}

std::string prevalence_csv(const PrevalenceTable& table) {
  std::string out = "label,posonly_n,posonly_pct,pos_or_unc_n,pos_or_unc_pct\n";
  char buf[256];
  for (const auto& r : table.rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.2f,%zu,%.2f\n", r.label.c_str(), r.posonly, r.posonly_pct, r.pos_or_unc,
                  r.pos_or_unc_pct);
    out += buf;
  }
  return out;
}

}  // namespace sft::label
