#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gramufen/core/label.hpp"

namespace gramufen {

enum class Split { Train, Val, Test };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

inline Split parse_split(std::string_view s) {
  if (s.empty() || s == "train") return Split::Train;
  if (s == "val" || s == "valid" || s == "validation") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error(Errc::ParseError, "unknown split '" + std::string(s) + "'");
}

/// One news item: text, attached image paths (first one is used) and label.
struct Sample {
  std::string id;
  std::string text;
  std::vector<std::string> image_refs;
  Label label = Label::Real;
  std::optional<std::string> event_id;
  Split split = Split::Train;
};

struct DropRecord {
  std::string id;
  std::string reason;
};

struct DatasetManifest {
  std::vector<Sample> samples;
  std::filesystem::path image_root;
  std::vector<DropRecord> dropped;

  std::vector<Sample> subset(Split s) const {
    std::vector<Sample> out;
    for (const auto& x : samples)
      if (x.split == s) out.push_back(x);
    return out;
  }
};

inline void write_drop_log(std::ostream& os, const std::vector<DropRecord>& records) {
  for (const auto& r : records) os << "DROP " << r.id << ' ' << r.reason << '\n';
}

namespace detail {

inline std::vector<std::string> split_on(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Undoes the \t, \n and \\ escapes allowed inside the text column.
inline std::string unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char n = s[i + 1];
      if (n == 't' || n == 'n' || n == '\\') {
        out.push_back(n == 't' ? '\t' : n == 'n' ? '\n' : '\\');
        ++i;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else if (c == '\\') out += "\\\\";
    else out.push_back(c);
  }
  return out;
}

}  // namespace detail

inline constexpr std::string_view kManifestHeader = "id\ttext\timage_paths\tlabel\tevent_id\tsplit";

/// Reads a tab-separated manifest with header
///   id  text  image_paths  label  event_id  split
/// (columns matched by name; event_id and split may be omitted). Multiple
/// image paths are '|'-separated and resolved against `image_root`, which
/// defaults to the manifest's directory. Rows with empty text, no image, or
/// a first image that does not exist are dropped and recorded.
inline DatasetManifest load_manifest(const std::filesystem::path& path,
                                     std::optional<std::filesystem::path> image_root = std::nullopt) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::ParseError, "cannot open manifest " + path.string());
  DatasetManifest m;
  m.image_root = image_root ? *image_root : path.parent_path();
  if (m.image_root.empty()) m.image_root = ".";
  if (!std::filesystem::is_directory(m.image_root))
    throw Error(Errc::MissingImageRoot, "image root " + m.image_root.string() + " is not a directory");

  std::string line;
  if (!std::getline(is, line)) throw Error(Errc::ParseError, "manifest is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::map<std::string, std::size_t> col;
  const auto header = detail::split_on(line, '\t');
  for (std::size_t i = 0; i < header.size(); ++i) col[detail::trim(header[i])] = i;
  for (const char* required : {"id", "text", "image_paths", "label"})
    if (!col.count(required))
      throw Error(Errc::ParseError, std::string("manifest header lacks column '") + required + "'");

  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_on(line, '\t');
    if (fields.size() != header.size())
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " fields, found " +
                                        std::to_string(fields.size()));
    auto field = [&](const char* name) -> std::string {
      auto it = col.find(name);
      return it == col.end() ? std::string{} : fields[it->second];
    };
    Sample s;
    s.id = detail::trim(field("id"));
    if (s.id.empty()) throw Error(Errc::ParseError, path.string() + ":" + std::to_string(line_no) + ": empty id");
    if (!seen.insert(s.id).second)
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(line_no) + ": duplicate id " + s.id);
    s.text = detail::unescape(field("text"));
    try {
      s.label = parse_label(detail::trim(field("label")));
    } catch (const Error& e) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    for (auto& ref : detail::split_on(field("image_paths"), '|')) {
      auto r = detail::trim(ref);
      if (!r.empty()) s.image_refs.push_back(std::move(r));
    }
    if (auto ev = detail::trim(field("event_id")); !ev.empty()) s.event_id = ev;
    s.split = parse_split(detail::trim(field("split")));

    if (detail::trim(s.text).empty()) {
      m.dropped.push_back({s.id, "empty-text"});
    } else if (s.image_refs.empty()) {
      m.dropped.push_back({s.id, "no-image"});
    } else if (!std::filesystem::exists(m.image_root / s.image_refs.front())) {
      m.dropped.push_back({s.id, "missing-image"});
    } else {
      m.samples.push_back(std::move(s));
    }
  }
  return m;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error(Errc::IoError, "cannot write manifest " + path.string());
  os << kManifestHeader << '\n';
  for (const auto& s : samples) {
    os << s.id << '\t' << detail::escape(s.text) << '\t';
    for (std::size_t i = 0; i < s.image_refs.size(); ++i) os << (i ? "|" : "") << s.image_refs[i];
    os << '\t' << label_name(s.label) << '\t' << s.event_id.value_or("") << '\t' << split_name(s.split) << '\n';
  }
}

}  // namespace gramufen
