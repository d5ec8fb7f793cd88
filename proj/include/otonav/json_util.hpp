#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

namespace otonav {

using Json = nlohmann::json;

// Invalid configuration content. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejects keys outside `allowed` so that typos in config files surface.
void require_keys(const Json& j, std::string_view section, std::initializer_list<std::string_view> allowed);

template <typename T>
void read_optional(const Json& j, std::string_view section, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(section) + "." + key + ": " + e.what());
  }
}

// Shortest round-trip formatting is not used for persisted numeric data;
// every double goes out with 17 significant digits.
std::string format_double(double v);

}  // namespace otonav
