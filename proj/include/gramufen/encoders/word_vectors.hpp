#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "gramufen/core/tensor.hpp"
#include "gramufen/text_graph.hpp"

namespace gramufen {

enum class WordVectorFormat { Text, Binary };

/// Summary of an embedding-table fill from a pretrained source.
struct WordVectorStats {
  std::size_t found = 0;
  std::size_t missing = 0;
};

/// Fills an embedding table for `vocab` from a word2vec file. Both the plain
/// text layout ("word v1 ... vD" per line) and the original binary layout
/// (header line, then "word " followed by D little-endian floats) are read.
/// Tokens the file lacks draw from U(-0.05, 0.05); the PAD row stays zero.
/// Lookup tries the token as-is first, then its lowercase form.
template <class T>
Tensor<T> load_word_vectors(const std::filesystem::path& path, WordVectorFormat format, const Vocab& vocab,
                            std::size_t dim, std::mt19937_64& rng, WordVectorStats* stats = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::IoError, "cannot open word vectors " + path.string());
  std::string header;
  std::getline(is, header);
  std::size_t count = 0, file_dim = 0;
  std::istringstream(header) >> count >> file_dim;
  if (file_dim != dim)
    throw Error(Errc::DimensionMismatch, "word vectors have dimension " + std::to_string(file_dim) +
                                             ", encoder expects " + std::to_string(dim));

  Tensor<T> table({vocab.size(), dim});
  std::vector<bool> filled(vocab.size(), false);
  auto assign = [&](const std::string& word, const float* v) {
    std::int64_t id = vocab.id(word);
    if (id == Vocab::kUnk && word != Vocab::kUnkToken) id = vocab.id(ascii_lower(word));
    if (id == Vocab::kUnk || id == Vocab::kPad || filled[std::size_t(id)]) return;
    for (std::size_t c = 0; c < dim; ++c) table(std::size_t(id), c) = static_cast<T>(v[c]);
    filled[std::size_t(id)] = true;
  };

  std::vector<float> buf(dim);
  for (std::size_t k = 0; k < count && is; ++k) {
    std::string word;
    if (format == WordVectorFormat::Binary) {
      char ch = 0;
      while (is.get(ch) && (ch == '\n' || ch == ' ')) {
      }
      if (!is) break;
      do word.push_back(ch);
      while (is.get(ch) && ch != ' ');
      if (!is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(dim * sizeof(float))))
        throw Error(Errc::ParseError, "truncated binary word vectors at entry " + std::to_string(k));
    } else {
      std::string line;
      if (!std::getline(is, line)) break;
      std::istringstream ls(line);
      ls >> word;
      for (auto& v : buf)
        if (!(ls >> v)) throw Error(Errc::ParseError, "short vector for '" + word + "'");
    }
    assign(word, buf.data());
  }

  std::uniform_real_distribution<double> fallback(-0.05, 0.05);
  WordVectorStats s;
  for (std::size_t id = 0; id < vocab.size(); ++id) {
    if (std::int64_t(id) == Vocab::kPad) continue;
    if (filled[id]) {
      ++s.found;
      continue;
    }
    ++s.missing;
    for (std::size_t c = 0; c < dim; ++c) table(id, c) = static_cast<T>(fallback(rng));
  }
  if (stats) *stats = s;
  return table;
}

}  // namespace gramufen
