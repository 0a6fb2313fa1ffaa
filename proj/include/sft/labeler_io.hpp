#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "sft/labeler.hpp"

namespace sft::label {

enum class Format { Jsonl, Csv };

// "jsonl" / "csv", or inferred from the file extension when name is empty.
Format format_from(const std::string& name, const std::filesystem::path& path);

// Rows as JSON objects. CSV fields become strings; empty fields become null.
std::vector<nlohmann::json> read_rows(const std::filesystem::path& path, Format format);

struct ReportRecord {
  std::string note_id;
  std::string subject_id;
  std::string hadm_id;
  std::string text;
};

struct RowError {
  std::size_t line = 0;  // 1-based data row
  std::string note_id;
  std::string message;
};

struct ReadReport {
  std::vector<ReportRecord> records;
  std::vector<std::size_t> lines;  // data row of each record
  std::vector<RowError> errors;
};

ReadReport parse_reports(const std::vector<nlohmann::json>& rows);

// note_id, subject_id, hadm_id, y_no_finding_phrase, y_*_3, y_*_bin_posonly,
// y_*_bin_pos_or_unc, the three aggregates, then text when requested.
std::vector<std::string> label_columns(const LabelerConfig& cfg, bool with_text);

// One output object per report; 3-class labels coded 1/0/-1/null.
nlohmann::ordered_json labeled_row(const ReportRecord& record, const ReportLabels& labels, const LabelerConfig& cfg,
                                   bool with_text);

std::string write_labeled(const std::vector<ReportRecord>& records, const std::vector<ReportLabels>& labels,
                          const LabelerConfig& cfg, Format format, bool with_text);

// Reads y_no_finding_phrase and the y_*_3 columns of a labeled row and
// derives the rest.
ReportLabels labels_from_row(const nlohmann::json& row, const LabelerConfig& cfg);

// Accepts JSON numbers, booleans, numeric strings; null and "" give nullopt.
std::optional<long long> int_field(const nlohmann::json& row, const std::string& key);
std::string string_field(const nlohmann::json& row, const std::string& key);

}  // namespace sft::label
