#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "gramufen/core/parameter.hpp"

namespace gramufen {

/// On-disk layout (little-endian):
///   8 bytes   magic "GMFNARC1"
///   u64       metadata length, then that many bytes of JSON
///   u64       array count
///   per array: u32 name length, name bytes, u32 rank, u64 dims[rank],
///              f64 values[prod(dims)]
/// Values are stored as doubles so float and double models round-trip exactly.
struct Archive {
  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, Tensor<double>> arrays;

  static constexpr char kMagic[8] = {'G', 'M', 'F', 'N', 'A', 'R', 'C', '1'};

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(Errc::IoError, "cannot write archive " + path.string());
    auto put_u32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
    auto put_u64 = [&](std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
    os.write(kMagic, sizeof kMagic);
    const std::string meta = metadata.dump();
    put_u64(meta.size());
    os.write(meta.data(), std::streamsize(meta.size()));
    put_u64(arrays.size());
    for (const auto& [name, t] : arrays) {
      put_u32(static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), std::streamsize(name.size()));
      put_u32(static_cast<std::uint32_t>(t.dim()));
      for (auto d : t.shape()) put_u64(d);
      os.write(reinterpret_cast<const char*>(t.data()), std::streamsize(t.numel() * sizeof(double)));
    }
    if (!os) throw Error(Errc::IoError, "short write to " + path.string());
  }

  static Archive load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(Errc::IoError, "cannot open archive " + path.string());
    auto fail = [&](const std::string& why) -> Error {
      return Error(Errc::CheckpointMismatch, path.string() + ": " + why);
    };
    auto get_u32 = [&] {
      std::uint32_t v = 0;
      if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw fail("truncated");
      return v;
    };
    auto get_u64 = [&] {
      std::uint64_t v = 0;
      if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw fail("truncated");
      return v;
    };
    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
      throw fail("not a gramufen archive");
    Archive a;
    const auto meta_len = get_u64();
    std::string meta(meta_len, '\0');
    if (!is.read(meta.data(), std::streamsize(meta_len))) throw fail("truncated metadata");
    try {
      a.metadata = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception& e) {
      throw fail(std::string("bad metadata: ") + e.what());
    }
    const auto count = get_u64();
    for (std::uint64_t k = 0; k < count; ++k) {
      std::string name(get_u32(), '\0');
      if (!is.read(name.data(), std::streamsize(name.size()))) throw fail("truncated name");
      Shape shape(get_u32());
      for (auto& d : shape) d = get_u64();
      Tensor<double> t(shape);
      if (!is.read(reinterpret_cast<char*>(t.data()), std::streamsize(t.numel() * sizeof(double))))
        throw fail("truncated array " + name);
      a.arrays.emplace(std::move(name), std::move(t));
    }
    return a;
  }

  template <class T>
  void put(const ParamList<T>& params) {
    for (const auto* p : params) arrays[p->name] = p->var.value().template cast<double>();
  }

  /// Copies every named parameter out of the archive. Missing names or
  /// shape disagreements abort before any parameter is modified.
  template <class T>
  void restore(const ParamList<T>& params) const {
    for (const auto* p : params) {
      auto it = arrays.find(p->name);
      if (it == arrays.end()) throw Error(Errc::CheckpointMismatch, "archive lacks parameter " + p->name);
      if (it->second.shape() != p->var.shape())
        throw Error(Errc::CheckpointMismatch, "parameter " + p->name + " has shape " +
                                                  shape_str(it->second.shape()) + " in archive, model expects " +
                                                  shape_str(p->var.shape()));
    }
    for (auto* p : params) {
      const auto& src = arrays.at(p->name);
      auto& dst = p->var.mutable_value();
      for (std::size_t i = 0; i < src.numel(); ++i) dst[i] = static_cast<T>(src[i]);
    }
  }
};

}  // namespace gramufen
