#include "sft/labeler_io.hpp"

#include <charconv>
#include <sstream>

#include "sft/csv.hpp"
#include "sft/error.hpp"
#include "sft/fileio.hpp"

namespace sft::label {

Format format_from(const std::string& name, const std::filesystem::path& path) {
  if (name == "jsonl") return Format::Jsonl;
  if (name == "csv") return Format::Csv;
  if (!name.empty()) throw ConfigError("unknown format '" + name + "' (expected jsonl or csv)");
  return path.extension() == ".csv" ? Format::Csv : Format::Jsonl;
}

std::vector<nlohmann::json> read_rows(const std::filesystem::path& path, Format format) {
  const std::string text = read_file(path);
  std::vector<nlohmann::json> rows;
  if (format == Format::Csv) {
    const auto table = csv::parse_table(text);
    for (const auto& rec : table.rows) {
      nlohmann::json obj = nlohmann::json::object();
      for (std::size_t i = 0; i < table.header.size(); ++i) {
        obj[table.header[i]] = rec[i].empty() ? nlohmann::json(nullptr) : nlohmann::json(rec[i]);
      }
      rows.push_back(std::move(obj));
    }
    return rows;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      // Keep a placeholder so row numbering stays aligned with the file.
      rows.push_back({{"__parse_error", std::string(e.what())}, {"__line", n}});
    }
  }
  return rows;
}

std::string string_field(const nlohmann::json& row, const std::string& key) {
  if (!row.contains(key) || row.at(key).is_null()) return {};
  const auto& v = row.at(key);
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::optional<long long> int_field(const nlohmann::json& row, const std::string& key) {
  if (!row.contains(key) || row.at(key).is_null()) return std::nullopt;
  const auto& v = row.at(key);
  if (v.is_boolean()) return v.get<bool>() ? 1 : 0;
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d != static_cast<double>(static_cast<long long>(d))) throw ContractError("field '" + key + "' is not an integer");
    return static_cast<long long>(d);
  }
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s.empty() || s == "NULL" || s == "null") return std::nullopt;
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ContractError("field '" + key + "' is not an integer: '" + s + "'");
    }
    return out;
  }
  throw ContractError("field '" + key + "' has an unsupported type");
}

ReadReport parse_reports(const std::vector<nlohmann::json>& rows) {
  ReadReport out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::size_t line = i + 1;
    if (row.contains("__parse_error")) {
      out.errors.push_back({line, "", "malformed JSON: " + row.at("__parse_error").get<std::string>()});
      continue;
    }
    if (!row.is_object()) {
      out.errors.push_back({line, "", "row is not an object"});
      continue;
    }
    ReportRecord rec;
    rec.note_id = string_field(row, "note_id");
    if (rec.note_id.empty()) {
      out.errors.push_back({line, "", "missing note_id"});
      continue;
    }
    if (!row.contains("text") || !row.at("text").is_string()) {
      out.errors.push_back({line, rec.note_id, "missing text field"});
      continue;
    }
    rec.subject_id = string_field(row, "subject_id");
    rec.hadm_id = string_field(row, "hadm_id");
    rec.text = row.at("text").get<std::string>();
    out.records.push_back(std::move(rec));
    out.lines.push_back(line);
  }
  return out;
}

std::vector<std::string> label_columns(const LabelerConfig& cfg, bool with_text) {
  std::vector<std::string> cols = {"note_id", "subject_id", "hadm_id", "y_no_finding_phrase"};
  for (const auto& c : cfg.conditions) cols.push_back("y_" + c.name + "_3");
  for (const auto& c : cfg.conditions) cols.push_back("y_" + c.name + "_bin_posonly");
  for (const auto& c : cfg.conditions) cols.push_back("y_" + c.name + "_bin_pos_or_unc");
  cols.push_back("label_any_disease_posonly");
  cols.push_back("label_any_disease_pos_or_unc");
  cols.push_back("label_no_finding_strict");
  if (with_text) cols.push_back("text");
  return cols;
}

nlohmann::ordered_json labeled_row(const ReportRecord& record, const ReportLabels& labels, const LabelerConfig& cfg,
                                   bool with_text) {
  nlohmann::ordered_json row;
  row["note_id"] = record.note_id;
  row["subject_id"] = record.subject_id;
  row["hadm_id"] = record.hadm_id;
  row["y_no_finding_phrase"] = labels.y_no_finding_phrase ? 1 : 0;
  for (std::size_t i = 0; i < cfg.conditions.size(); ++i) {
    const auto code = table_code(labels.conditions[i].y3);
    row["y_" + cfg.conditions[i].name + "_3"] = code ? nlohmann::ordered_json(*code) : nlohmann::ordered_json(nullptr);
  }
  for (std::size_t i = 0; i < cfg.conditions.size(); ++i) {
    row["y_" + cfg.conditions[i].name + "_bin_posonly"] = labels.conditions[i].bin_posonly ? 1 : 0;
  }
  for (std::size_t i = 0; i < cfg.conditions.size(); ++i) {
    row["y_" + cfg.conditions[i].name + "_bin_pos_or_unc"] = labels.conditions[i].bin_pos_or_unc ? 1 : 0;
  }
  row["label_any_disease_posonly"] = labels.label_any_disease_posonly ? 1 : 0;
  row["label_any_disease_pos_or_unc"] = labels.label_any_disease_pos_or_unc ? 1 : 0;
  row["label_no_finding_strict"] = labels.label_no_finding_strict ? 1 : 0;
  if (with_text) row["text"] = record.text;
  return row;
}

std::string write_labeled(const std::vector<ReportRecord>& records, const std::vector<ReportLabels>& labels,
                          const LabelerConfig& cfg, Format format, bool with_text) {
  if (records.size() != labels.size()) throw ContractError("records and labels differ in length");
  std::string out;
  if (format == Format::Jsonl) {
    for (std::size_t i = 0; i < records.size(); ++i) out += labeled_row(records[i], labels[i], cfg, with_text).dump() + "\n";
    return out;
  }
  const auto cols = label_columns(cfg, with_text);
  out += csv::join(cols) + "\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto row = labeled_row(records[i], labels[i], cfg, with_text);
    std::vector<std::string> fields;
    for (const auto& c : cols) {
      const auto& v = row.at(c);
      fields.push_back(v.is_null() ? std::string() : v.is_string() ? v.get<std::string>() : v.dump());
    }
    out += csv::join(fields) + "\n";
  }
  return out;
}

ReportLabels labels_from_row(const nlohmann::json& row, const LabelerConfig& cfg) {
  ReportLabels r;
  r.note_id = string_field(row, "note_id");
  r.subject_id = string_field(row, "subject_id");
  r.hadm_id = string_field(row, "hadm_id");
  const auto phrase = int_field(row, "y_no_finding_phrase");
  if (!phrase) throw ContractError("row " + r.note_id + " lacks y_no_finding_phrase");
  r.y_no_finding_phrase = *phrase == 1;
  for (const auto& c : cfg.conditions) {
    const std::string key = "y_" + c.name + "_3";
    if (!row.contains(key)) throw ContractError("row " + r.note_id + " lacks column " + key);
    const auto code = int_field(row, key);
    r.conditions.push_back({from_table_code(code ? std::optional<int>(static_cast<int>(*code)) : std::nullopt)});
  }
  derive_binaries(r);
  return r;
}

}  // namespace sft::label
