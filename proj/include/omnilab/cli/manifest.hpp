#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace omnilab::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Compact JSON with object keys sorted, so key order in the source file
/// does not matter.
std::string canonical_json(const nlohmann::json& j);

/// Hex SHA-256 of canonical_json(j).
std::string config_hash(const nlohmann::json& j);

/// UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::vector<std::uint64_t> seeds;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> outputs;  // relative to the output directory
  std::string version = kToolVersion;

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace omnilab::cli
