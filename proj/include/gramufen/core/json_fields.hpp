#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "gramufen/core/error.hpp"

namespace gramufen {

using json = nlohmann::json;

namespace detail {

/// Reads `key` into `out` when present; absent keys keep their defaults.
template <class V>
void read_field(const json& j, std::string_view key, V& out) {
  auto it = j.find(std::string(key));
  if (it == j.end()) return;
  try {
    it->get_to(out);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, "field '" + std::string(key) + "': " + e.what());
  }
}

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> known, std::string_view what) {
  if (!j.is_object()) throw Error(Errc::InvalidConfig, std::string(what) + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto k : known) ok = ok || it.key() == k;
    if (!ok) throw Error(Errc::InvalidConfig, "unknown " + std::string(what) + " field '" + it.key() + "'");
  }
}

}  // namespace detail

}  // namespace gramufen
