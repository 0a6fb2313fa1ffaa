#include "sft/manifest.hpp"

#include <chrono>
#include <ctime>

#include "sft/error.hpp"
#include "sft/fileio.hpp"

namespace sft::cli {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json doc;
  doc["command"] = command;
  doc["argv"] = argv;
  doc["config"] = config;
  doc["seeds"] = seeds;
  doc["inputs"] = inputs;
  doc["outputs"] = outputs;
  doc["version"] = version;
  doc["started_at"] = started_at;
  doc["finished_at"] = finished_at;
  doc["status"] = status;
  doc["error"] = error;
  doc["exit_code"] = exit_code;
  return doc;
}

RunManifest RunManifest::from_json(const nlohmann::json& doc) {
  RunManifest m;
  try {
    m.command = doc.at("command").get<std::string>();
    m.argv = doc.at("argv").get<std::vector<std::string>>();
    if (doc.contains("config")) m.config = doc.at("config");
    if (doc.contains("seeds")) m.seeds = doc.at("seeds").get<std::map<std::string, std::uint64_t>>();
    if (doc.contains("inputs")) m.inputs = doc.at("inputs").get<std::vector<std::string>>();
    if (doc.contains("outputs")) m.outputs = doc.at("outputs").get<std::vector<std::string>>();
    m.version = doc.value("version", std::string());
    m.started_at = doc.value("started_at", std::string());
    m.finished_at = doc.value("finished_at", std::string());
    m.status = doc.value("status", std::string());
    m.error = doc.value("error", std::string());
    m.exit_code = doc.value("exit_code", 0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run manifest: ") + e.what());
  }
  return m;
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("run manifest " + path.string() + " is not valid JSON: " + e.what());
  }
}

void RunManifest::write(const std::filesystem::path& path) const { write_file(path, to_json().dump(2) + "\n"); }

}  // namespace sft::cli
