#include "sft/tokenizer.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>

#include "json.hpp"
#include "sft/error.hpp"
#include "sft/fileio.hpp"

namespace sft::data {

namespace {

bool unit_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// "<0x41>" -> 0x41, otherwise -1.
int fallback_byte(const std::string& token) {
  if (token.size() != 6 || token.compare(0, 3, "<0x") != 0 || token[5] != '>') return -1;
  const int hi = hex_value(token[3]), lo = hex_value(token[4]);
  return hi < 0 || lo < 0 ? -1 : hi * 16 + lo;
}

}  // namespace

std::string unescape_token(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == '\\') {
      out.push_back('\\');
      ++i;
    } else if (s[i] == '\\' && i + 3 < s.size() && s[i + 1] == 'x' && hex_value(s[i + 2]) >= 0 &&
               hex_value(s[i + 3]) >= 0) {
      out.push_back(static_cast<char>(hex_value(s[i + 2]) * 16 + hex_value(s[i + 3])));
      i += 3;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::string escape_token(std::string_view s) {
  std::string out;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (c == '\\') {
      out += "\\\\";
    } else if (c >= 0x20 && c < 0x7F) {
      out.push_back(ch);
    } else {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\x%02x", c);
      out += buf;
    }
  }
  return out;
}

Tokenizer::Tokenizer(std::vector<std::string> vocab, std::vector<std::pair<std::string, std::string>> merges,
                     std::int32_t pad_id, std::int32_t eos_id)
    : vocab_(std::move(vocab)), merges_(std::move(merges)), byte_fallback_(256, -1), pad_id_(pad_id), eos_id_(eos_id) {
  if (vocab_.empty()) throw TokenizerError("tokenizer vocabulary is empty");
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (vocab_[i].empty()) throw TokenizerError("token " + std::to_string(i) + " is empty");
    if (!index_.emplace(vocab_[i], static_cast<std::int32_t>(i)).second) {
      throw TokenizerError("duplicate token '" + escape_token(vocab_[i]) + "'");
    }
  }
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    const int fb = fallback_byte(vocab_[i]);
    if (fb >= 0) byte_fallback_[static_cast<std::size_t>(fb)] = static_cast<std::int32_t>(i);
  }
  // Literal single-byte tokens win over <0xHH> spellings.
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (vocab_[i].size() == 1) byte_fallback_[static_cast<unsigned char>(vocab_[i][0])] = static_cast<std::int32_t>(i);
  }
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto& [a, b] = merges_[r];
    if (!index_.count(a + b)) {
      throw TokenizerError("merge " + std::to_string(r) + " produces '" + escape_token(a + b) +
                           "' which is not in the vocabulary");
    }
    ranks_.emplace(merges_[r], r);
  }
  const auto n = static_cast<std::int32_t>(vocab_.size());
  if (pad_id_ < 0 || pad_id_ >= n) throw TokenizerError("pad_id outside the vocabulary");
  if (eos_id_ >= n) throw TokenizerError("eos_id outside the vocabulary");
}

Tokenizer Tokenizer::byte_level() {
  std::vector<std::string> vocab;
  for (int b = 0; b < 256; ++b) vocab.emplace_back(1, static_cast<char>(b));
  return Tokenizer(std::move(vocab), {}, 255);
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw TokenizerError("tokenizer file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.contains("vocab") || !doc.at("vocab").is_object()) throw TokenizerError("tokenizer file lacks a vocab object");
  const auto& v = doc.at("vocab");
  std::vector<std::string> vocab(v.size());
  std::vector<bool> seen(v.size(), false);
  for (const auto& [key, id_json] : v.items()) {
    const auto id = id_json.get<long long>();
    if (id < 0 || static_cast<std::size_t>(id) >= v.size() || seen[static_cast<std::size_t>(id)]) {
      throw TokenizerError("vocab ids must be dense and unique in [0, " + std::to_string(v.size()) + ")");
    }
    seen[static_cast<std::size_t>(id)] = true;
    vocab[static_cast<std::size_t>(id)] = unescape_token(key);
  }
  std::vector<std::pair<std::string, std::string>> merges;
  for (const auto& m : doc.value("merges", nlohmann::json::array())) {
    if (m.is_array() && m.size() == 2) {
      merges.emplace_back(unescape_token(m[0].get<std::string>()), unescape_token(m[1].get<std::string>()));
    } else if (m.is_string()) {
      const std::string s = m.get<std::string>();
      const auto sp = s.find(' ');
      if (sp == std::string::npos) throw TokenizerError("merge '" + s + "' is not of the form 'a b'");
      merges.emplace_back(unescape_token(s.substr(0, sp)), unescape_token(s.substr(sp + 1)));
    } else {
      throw TokenizerError("merges must be pairs or 'a b' strings");
    }
  }
  return Tokenizer(std::move(vocab), std::move(merges), doc.value("pad_id", 0), doc.value("eos_id", -1));
}

void Tokenizer::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json v = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < vocab_.size(); ++i) v[escape_token(vocab_[i])] = i;
  doc["vocab"] = v;
  doc["merges"] = nlohmann::ordered_json::array();
  for (const auto& [a, b] : merges_) doc["merges"].push_back({escape_token(a), escape_token(b)});
  doc["pad_id"] = pad_id_;
  doc["eos_id"] = eos_id_;
  write_file(path, doc.dump(1) + "\n");
}

std::int32_t Tokenizer::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

const std::string& Tokenizer::token(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) {
    throw TokenizerError("token id " + std::to_string(id) + " outside [0, " + std::to_string(vocab_.size()) + ")");
  }
  return vocab_[static_cast<std::size_t>(id)];
}

void Tokenizer::encode_unit(std::string_view unit, std::vector<std::int32_t>& out) const {
  std::vector<std::string> parts;
  for (char c : unit) parts.emplace_back(1, c);
  while (parts.size() > 1 && !ranks_.empty()) {
    std::size_t best = SIZE_MAX, best_rank = SIZE_MAX;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      auto it = ranks_.find({parts[i], parts[i + 1]});
      if (it != ranks_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = i;
      }
    }
    if (best == SIZE_MAX) break;
    // Merge every occurrence of the winning pair, left to right.
    const auto pair = merges_[best_rank];
    std::vector<std::string> next;
    for (std::size_t i = 0; i < parts.size();) {
      if (i + 1 < parts.size() && parts[i] == pair.first && parts[i + 1] == pair.second) {
        next.push_back(parts[i] + parts[i + 1]);
        i += 2;
      } else {
        next.push_back(parts[i]);
        ++i;
      }
    }
    parts = std::move(next);
  }
  for (const auto& p : parts) {
    auto it = index_.find(p);
    if (it != index_.end()) {
      out.push_back(it->second);
      continue;
    }
    for (char c : p) {
      const auto id = byte_fallback_[static_cast<unsigned char>(c)];
      if (id < 0) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "0x%02x", static_cast<unsigned char>(c));
        throw TokenizerError(std::string("byte ") + buf + " has no vocabulary entry and no fallback");
      }
      out.push_back(id);
    }
  }
}

std::vector<std::int32_t> Tokenizer::encode(std::string_view text) const {
  std::vector<std::int32_t> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t j = i + 1;
    if (unit_byte(static_cast<unsigned char>(text[i]))) {
      while (j < text.size() && unit_byte(static_cast<unsigned char>(text[j]))) ++j;
    }
    encode_unit(text.substr(i, j - i), out);
    i = j;
  }
  return out;
}

std::string Tokenizer::decode(const std::vector<std::int32_t>& ids) const {
  std::string out;
  for (auto id : ids) {
    const auto& t = token(id);
    const int fb = fallback_byte(t);
    if (fb >= 0) {
      out.push_back(static_cast<char>(fb));
    } else {
      out += t;
    }
  }
  return out;
}

PaddedRow pad_truncate(const std::vector<std::int32_t>& ids, std::size_t T, std::int32_t pad_id) {
  if (T == 0) throw ContractError("sequence length must be at least 1");
  if (ids.empty()) throw ContractError("cannot pad an empty token sequence: it has no last token");
  PaddedRow row;
  const std::size_t keep = std::min(ids.size(), T);
  row.ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep));
  row.mask.assign(keep, 1);
  row.ids.resize(T, pad_id);
  row.mask.resize(T, 0);
  return row;
}

}  // namespace sft::data
