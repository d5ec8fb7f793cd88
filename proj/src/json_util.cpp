#include "otonav/json_util.hpp"

#include <cmath>
#include <cstdio>

namespace otonav {

void require_keys(const Json& j, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || (a == key);
    if (!known) throw ConfigError(std::string(section) + ": unknown key '" + key + "'");
  }
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace otonav
