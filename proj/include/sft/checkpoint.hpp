#pragma once

#include <filesystem>
#include <string>

#include "sft/error.hpp"
#include "sft/gpt_model.hpp"

namespace sft::gpt {

// On-disk layout:
//   bytes 0..7    magic "GPTCKPT1"
//   bytes 8..11   little-endian u32 header length N
//   bytes 12..12+N  UTF-8 JSON array of {"name", "shape", "offset"}
//   payload       float32 little-endian tensors, row-major, contiguous in
//                 offset order; offsets are byte offsets from payload start
inline constexpr char kCheckpointMagic[] = "GPTCKPT1";

class CheckpointError : public Error {
 public:
  enum class Kind { BadMagic, BadHeader, ShapeMismatch, Truncated, Io };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path, const GptConfig& cfg);

}  // namespace sft::gpt
