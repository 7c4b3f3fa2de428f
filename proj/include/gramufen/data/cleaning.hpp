#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gramufen/data/manifest.hpp"
#include "gramufen/text_graph.hpp"

namespace gramufen {

namespace detail {

inline bool starts_with_ci(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  return true;
}

inline bool is_url_token(std::string_view tok) {
  return starts_with_ci(tok, "http://") || starts_with_ci(tok, "https://") || starts_with_ci(tok, "www.");
}

inline bool is_mention_token(std::string_view tok) { return tok.size() > 1 && tok.front() == '@'; }

/// Removes URLs and @mentions that start mid-token, e.g. "see:http://x".
inline std::string strip_embedded(std::string_view tok) {
  std::string out;
  std::size_t i = 0;
  while (i < tok.size()) {
    const auto rest = tok.substr(i);
    if (is_url_token(rest)) break;  // a URL runs to the end of the token
    if (tok[i] == '@' && i + 1 < tok.size()) {
      ++i;
      while (i < tok.size() && (std::isalnum(static_cast<unsigned char>(tok[i])) || tok[i] == '_')) ++i;
      continue;
    }
    out.push_back(tok[i]);
    ++i;
  }
  return out;
}

inline std::string clean_pass(std::string_view lowered) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < lowered.size()) {
    while (i < lowered.size() && std::isspace(static_cast<unsigned char>(lowered[i]))) ++i;
    const std::size_t b = i;
    while (i < lowered.size() && !std::isspace(static_cast<unsigned char>(lowered[i]))) ++i;
    if (i > b) tokens.emplace_back(lowered.substr(b, i - b));
  }
  std::string out;
  bool leading = true;
  for (const auto& tok : tokens) {
    if (is_url_token(tok)) continue;
    if (leading && (tok == "rt" || tok == ":" || is_mention_token(tok))) continue;
    auto kept = strip_embedded(tok);
    if (kept.empty() || (leading && (kept == "rt" || kept == ":"))) continue;
    leading = false;
    if (!out.empty()) out.push_back(' ');
    out += kept;
  }
  return out;
}

}  // namespace detail

/// Normalises post text: lowercases, drops leading retweet markers and the
/// mentions that follow them, removes URLs and @mentions anywhere and
/// collapses whitespace. Passes repeat until nothing changes, so applying it
/// twice gives the same result as applying it once.
inline std::string clean_text(std::string_view raw) {
  std::string cur = detail::clean_pass(ascii_lower(std::string(raw)));
  for (;;) {
    auto next = detail::clean_pass(cur);
    if (next == cur) return cur;
    cur = std::move(next);
  }
}

/// Cleans every sample's text, dropping those that become empty.
inline std::vector<Sample> clean_samples(std::vector<Sample> samples, std::vector<DropRecord>* dropped = nullptr) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (auto& s : samples) {
    s.text = clean_text(s.text);
    if (s.text.empty()) {
      if (dropped) dropped->push_back({s.id, "empty-after-cleaning"});
      continue;
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Keeps the first sample for each (text, label) pair. Texts are expected to
/// be cleaned already.
inline std::vector<Sample> deduplicate(const std::vector<Sample>& samples) {
  std::set<std::pair<std::string, Label>> seen;
  std::vector<Sample> out;
  for (const auto& s : samples)
    if (seen.emplace(s.text, s.label).second) out.push_back(s);
  return out;
}

/// Seeded shuffle, then the first round(n * val_fraction) samples (at least
/// one, at most n - 1) become validation data.
inline std::pair<std::vector<Sample>, std::vector<Sample>> split_train_val(const std::vector<Sample>& samples,
                                                                           double val_fraction, std::uint64_t seed) {
  if (samples.size() < 2)
    throw Error(Errc::TooFewSamples, "need at least 2 samples to split, have " + std::to_string(samples.size()));
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw Error(Errc::InvalidConfig, "validation fraction must lie in (0, 1)");
  const std::size_t n = samples.size();
  auto n_val = static_cast<std::size_t>(std::llround(double(n) * val_fraction));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::pair<std::vector<Sample>, std::vector<Sample>> out;
  for (std::size_t k = 0; k < n; ++k) (k < n_val ? out.second : out.first).push_back(samples[order[k]]);
  return out;
}

}  // namespace gramufen
