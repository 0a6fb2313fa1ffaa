#include "sft/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include "json.hpp"

namespace sft::gpt {

namespace {

using Kind = CheckpointError::Kind;

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32_le(std::string& out, float v) { put_u32_le(out, std::bit_cast<std::uint32_t>(v)); }

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  nlohmann::json header = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, tensor] : params.entries()) {
    header.push_back({{"name", name}, {"shape", tensor.shape()}, {"offset", offset}});
    offset += tensor.numel() * sizeof(float);
  }
  const std::string header_text = header.dump();

  std::string bytes(kCheckpointMagic, 8);
  put_u32_le(bytes, static_cast<std::uint32_t>(header_text.size()));
  bytes += header_text;
  bytes.reserve(bytes.size() + offset);
  for (const auto& [name, tensor] : params.entries()) {
    for (float v : tensor.data()) put_f32_le(bytes, v);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::Io, "cannot open checkpoint for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::Io, "failed writing checkpoint: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path, const GptConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::Io, "cannot open checkpoint: " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());

  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw CheckpointError(Kind::BadMagic, "not a GPTCKPT1 checkpoint: " + path.string());
  }
  if (bytes.size() < 12) throw CheckpointError(Kind::Truncated, "checkpoint ends inside the header length field");
  const std::size_t header_len = get_u32_le(raw + 8);
  if (bytes.size() < 12 + header_len) throw CheckpointError(Kind::Truncated, "checkpoint ends inside the header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Kind::BadHeader, std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (!header.is_array()) throw CheckpointError(Kind::BadHeader, "checkpoint header must be a JSON array");

  const auto specs = param_specs(cfg);
  if (header.size() != specs.size()) {
    throw CheckpointError(Kind::ShapeMismatch, "checkpoint holds " + std::to_string(header.size()) +
                                                   " tensors, config induces " + std::to_string(specs.size()));
  }
  std::map<std::string, Shape> expected;
  for (const auto& s : specs) expected[s.name] = s.shape;

  const std::size_t payload_start = 12 + header_len;
  const std::size_t payload_size = bytes.size() - payload_start;

  // Collect entries keyed by name, then emit in canonical config order.
  std::map<std::string, Tensor> loaded;
  std::size_t expected_total = 0;
  for (const auto& entry : header) {
    std::string name;
    Shape shape;
    std::size_t offset = 0;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<Shape>();
      offset = entry.at("offset").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError(Kind::BadHeader, std::string("malformed checkpoint header entry: ") + e.what());
    }
    auto it = expected.find(name);
    if (it == expected.end()) throw CheckpointError(Kind::ShapeMismatch, "unexpected tensor '" + name + "'");
    if (it->second != shape) {
      throw CheckpointError(Kind::ShapeMismatch, "tensor '" + name + "' has shape " + shape_str(shape) +
                                                     ", config expects " + shape_str(it->second));
    }
    if (loaded.count(name)) throw CheckpointError(Kind::BadHeader, "tensor '" + name + "' listed twice");
    const std::size_t count = shape_numel(shape);
    const std::size_t nbytes = count * sizeof(float);
    expected_total += nbytes;
    if (offset + nbytes > payload_size) {
      throw CheckpointError(Kind::Truncated, "payload too short for tensor '" + name + "'");
    }
    std::vector<float> values(count);
    const unsigned char* src = raw + payload_start + offset;
    for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<float>(get_u32_le(src + 4 * i));
    loaded.emplace(name, Tensor::from(shape, std::move(values)));
  }
  if (payload_size != expected_total) {
    throw CheckpointError(payload_size < expected_total ? Kind::Truncated : Kind::BadHeader,
                          "payload is " + std::to_string(payload_size) + " bytes, header describes " +
                              std::to_string(expected_total));
  }

  ModelParams params;
  for (const auto& s : specs) params.insert(s.name, loaded.at(s.name));
  return params;
}

}  // namespace sft::gpt
