#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sft::data {

// Byte-pair tokenizer with greedy lowest-rank merging inside pre-split units
// (alphanumeric runs, every other byte alone). Tokens are raw byte strings.
class Tokenizer {
 public:
  // vocab[i] is the byte string of id i; merges are in rank order.
  Tokenizer(std::vector<std::string> vocab, std::vector<std::pair<std::string, std::string>> merges,
            std::int32_t pad_id, std::int32_t eos_id = -1);

  // 256 single-byte tokens, id = byte value, pad id 255 (0xFF never occurs
  // in UTF-8 text).
  static Tokenizer byte_level();

  // {"vocab": {token: id}, "merges": [[a, b], ...] or ["a b", ...],
  //  "pad_id": n, "eos_id": n}. Token strings may use \xHH escapes;
  // tokens spelled <0xHH> act as byte fallbacks.
  static Tokenizer load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::vector<std::int32_t> encode(std::string_view text) const;
  std::string decode(const std::vector<std::int32_t>& ids) const;

  std::size_t vocab_size() const { return vocab_.size(); }
  std::int32_t pad_id() const { return pad_id_; }
  std::int32_t eos_id() const { return eos_id_; }
  std::int32_t id_of(const std::string& token) const;  // -1 when absent
  const std::string& token(std::int32_t id) const;

 private:
  void encode_unit(std::string_view unit, std::vector<std::int32_t>& out) const;

  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::int32_t> index_;
  std::map<std::pair<std::string, std::string>, std::size_t> ranks_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::vector<std::int32_t> byte_fallback_;  // 256 entries, -1 when missing
  std::int32_t pad_id_;
  std::int32_t eos_id_;
};

// "\xHH" and "\\" escapes to bytes, and back (printable ASCII kept).
std::string unescape_token(std::string_view s);
std::string escape_token(std::string_view s);

struct PaddedRow {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;
};

// Keeps the first T ids or right-pads with pad_id. Empty input is a contract
// error since the row would have no last token.
PaddedRow pad_truncate(const std::vector<std::int32_t>& ids, std::size_t T, std::int32_t pad_id);

}  // namespace sft::data
