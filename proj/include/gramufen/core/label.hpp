#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "gramufen/core/error.hpp"

namespace gramufen {

/// Class index 1 is the positive (fake) class throughout.
enum class Label : std::uint8_t { Real = 0, Fake = 1 };

inline std::string_view label_name(Label l) { return l == Label::Fake ? "fake" : "real"; }

inline std::size_t label_index(Label l) { return static_cast<std::size_t>(l); }

inline Label parse_label(std::string_view s) {
  if (s == "fake" || s == "Fake" || s == "FAKE" || s == "1") return Label::Fake;
  if (s == "real" || s == "Real" || s == "REAL" || s == "0") return Label::Real;
  throw Error(Errc::InvalidLabel, "unknown label '" + std::string(s) + "'");
}

inline Label label_from_index(long long i) {
  if (i == 0) return Label::Real;
  if (i == 1) return Label::Fake;
  throw Error(Errc::InvalidLabel, "label index " + std::to_string(i) + " is not 0 or 1");
}

}  // namespace gramufen
