#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace sft::cli {

inline constexpr const char* kToolVersion = "sftune 0.1.0";

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;  // without the program name
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string version = kToolVersion;
  std::string started_at;
  std::string finished_at;
  std::string status = "running";  // ok | error
  std::string error;
  int exit_code = 0;

  nlohmann::ordered_json to_json() const;
  static RunManifest from_json(const nlohmann::json& doc);
  static RunManifest load(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;
};

// UTC, second resolution: 2026-01-31T12:00:00Z
std::string utc_timestamp();

}  // namespace sft::cli
