#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace sft::label {

// Condition status: affirmed, explicitly negated, hedged, not mentioned.
enum class Label3 { Pos, Neg, Unc, Null };

std::string to_string(Label3 label);
// Report-table coding: Pos 1, Neg 0, Unc -1, Null none.
std::optional<int> table_code(Label3 label);
Label3 from_table_code(std::optional<int> code);
// Training encoding: Pos 1, Neg 0, Unc 2, Null 3.
int encode(Label3 label);
Label3 decode(int code);

enum class CueScope { AnywhereInWindow, PreMention };

struct Keyword {
  std::string phrase;
  bool plural_s = true;  // also match the phrase followed by a single 's'
};

struct Condition {
  std::string name;  // snake_case, used in column names
  std::vector<Keyword> keywords;
};

struct LabelerConfig {
  std::vector<Condition> conditions;
  std::vector<std::string> negation_cues;
  std::vector<std::string> uncertainty_cues;
  std::vector<std::string> no_finding_patterns;
  std::size_t window_chars = 120;
  CueScope cue_scope = CueScope::AnywhereInWindow;

  // Built-in lists for the 13 abnormal observations.
  static LabelerConfig defaults();
  static LabelerConfig from_json(const nlohmann::json& doc);
  static LabelerConfig load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;

  // Normalizes phrases and throws ConfigError on duplicate names or empty cues.
  void validate();
  std::size_t index_of(const std::string& condition) const;
};

// "enlarged_cardiomediastinum" -> "Enlarged cardiomediastinum"
std::string display_name(const std::string& condition);

struct Mention {
  std::string condition;
  std::size_t begin = 0;  // byte span in the normalized text
  std::size_t end = 0;
  std::string keyword;
};

struct ContextWindow {
  std::string text;
  std::size_t source_begin = 0;   // offset of text within the report
  std::size_t mention_begin = 0;  // mention span relative to text
  std::size_t mention_end = 0;
};

struct CueHits {
  bool negated = false;
  bool uncertain = false;
};

// Lowercase, whitespace runs collapsed to one space, trimmed, punctuation
// kept. Throws EncodingError for invalid UTF-8.
std::string normalize_text(std::string_view raw);

// Non-overlapping, word-boundary anchored, left to right, longest keyword
// first at each position.
std::vector<Mention> find_mentions(std::string_view text, const Condition& condition);

// The sentence holding the mention (delimiters . ! ? ;), clamped to
// +/- w characters around the mention centre when longer than 2w.
ContextWindow context_window(std::string_view text, const Mention& mention, std::size_t w);

CueHits detect_cues(const ContextWindow& window, const std::vector<std::string>& negation,
                    const std::vector<std::string>& uncertainty, CueScope scope);

// Aggregates mention decisions: any plain mention -> Pos, else any
// non-negated hedged mention -> Unc, else all negated -> Neg, no mention ->
// Null. Negation is checked before uncertainty for each mention.
Label3 label_condition(std::string_view normalized, const Condition& condition, const LabelerConfig& cfg);

// Whole-phrase, word-boundary match of any pattern.
bool match_any_pattern(std::string_view normalized, const std::vector<std::string>& patterns);

struct ConditionLabel {
  Label3 y3 = Label3::Null;
  bool bin_posonly = false;
  bool bin_pos_or_unc = false;
};

struct ReportLabels {
  std::string note_id;
  std::string subject_id;
  std::string hadm_id;
  bool y_no_finding_phrase = false;
  std::vector<ConditionLabel> conditions;  // parallel to LabelerConfig::conditions
  bool label_any_disease_posonly = false;
  bool label_any_disease_pos_or_unc = false;
  bool label_no_finding_strict = false;

  bool operator==(const ReportLabels&) const = default;
};

bool operator==(const ConditionLabel& a, const ConditionLabel& b);

ReportLabels label_report(std::string_view raw_text, const LabelerConfig& cfg);

// Recomputes binaries and aggregates from the 3-class labels.
void derive_binaries(ReportLabels& labels);

struct EncodedLabels {
  int y_no_finding_phrase = 0;
  std::vector<int> y3;  // {1,0,2,3}
  std::vector<int> bin_posonly;
  std::vector<int> bin_pos_or_unc;
  int label_any_disease_posonly = 0;
  int label_any_disease_pos_or_unc = 0;
  int label_no_finding_strict = 0;
};

EncodedLabels encode_labels(const ReportLabels& labels);
ReportLabels decode_labels(const EncodedLabels& encoded);

struct PrevalenceRow {
  std::string label;
  std::size_t posonly = 0;
  double posonly_pct = 0.0;
  std::size_t pos_or_unc = 0;
  double pos_or_unc_pct = 0.0;
};

struct PrevalenceTable {
  std::size_t n = 0;
  std::vector<PrevalenceRow> rows;  // any abnormality, no finding (strict), conditions
};

PrevalenceTable prevalence(const std::vector<ReportLabels>& corpus, const LabelerConfig& cfg);
// "Any abnormality  183,046 (26.88%)  225,925 (33.18%)"
std::string prevalence_text(const PrevalenceTable& table);
std::string prevalence_csv(const PrevalenceTable& table);

}  // namespace sft::label
