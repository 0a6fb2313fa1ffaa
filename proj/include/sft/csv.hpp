#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sft::csv {

// Quotes a field when it holds a comma, quote, CR or LF.
std::string escape(std::string_view field);
// One record without the trailing newline.
std::string join(const std::vector<std::string>& fields);

// RFC-4180 records; accepts LF or CRLF line ends. Throws IoError on an
// unterminated quoted field.
std::vector<std::vector<std::string>> parse(std::string_view text);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find(const std::string& column) const;
  std::size_t column(const std::string& name) const;  // IoError if absent
};

// First record is the header; ragged rows raise IoError naming the line.
Table parse_table(std::string_view text);
Table read_table(const std::filesystem::path& path);

}  // namespace sft::csv
