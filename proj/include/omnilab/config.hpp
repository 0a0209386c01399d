#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace omnilab {

/// Invalid configuration value. `path()` is a JSON-pointer-like field path
/// such as "model.rope.scheme".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string path, const std::string& detail)
      : std::invalid_argument(path + ": " + detail), path_(std::move(path)), detail_(detail) {}
  const std::string& path() const noexcept { return path_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string path_;
  std::string detail_;
};

inline std::string join_path(std::string_view parent, std::string_view key) {
  if (parent.empty()) return std::string(key);
  return std::string(parent) + "." + std::string(key);
}

inline void require_object(const nlohmann::json& j, std::string_view path) {
  if (!j.is_object()) throw ConfigError(std::string(path), "expected an object");
}

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<std::string_view> known,
                                std::string_view path) {
  require_object(j, path);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto k : known) ok = ok || k == it.key();
    if (!ok) throw ConfigError(join_path(path, it.key()), "unknown field");
  }
}

/// Reads `j[key]` into `out` when present; wrong types raise ConfigError.
template <class V>
void read_field(const nlohmann::json& j, std::string_view key, V& out,
                std::string_view path) {
  auto it = j.find(std::string(key));
  if (it == j.end()) return;
  try {
    out = it->template get<V>();
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(join_path(path, key), e.what());
  }
}

}  // namespace omnilab
