#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gramufen/core/error.hpp"
#include "gramufen/core/ops.hpp"

namespace gramufen {

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Whitespace split on the lowercased text.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{ascii_lower(text)};
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

/// Token <-> id mapping. Ids 0 and 1 are reserved for padding and unknown
/// tokens; corpus tokens start at 2.
class Vocab {
 public:
  static constexpr std::int64_t kPad = 0;
  static constexpr std::int64_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab() : id_to_token_{std::string(kPadToken), std::string(kUnkToken)} { reindex(); }

  /// Rebuilds a vocabulary from its full id-ordered token list (as stored in
  /// checkpoints). The first two entries must be the reserved tokens.
  static Vocab from_id_order(std::vector<std::string> tokens) {
    if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken)
      throw Error(Errc::ParseError, "vocabulary must start with the reserved <pad> and <unk> tokens");
    Vocab v;
    v.id_to_token_ = std::move(tokens);
    v.reindex();
    if (v.token_to_id_.size() != v.id_to_token_.size())
      throw Error(Errc::ParseError, "vocabulary contains duplicate tokens");
    return v;
  }

  std::int64_t id(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    return it == token_to_id_.end() ? kUnk : it->second;
  }
  bool contains(std::string_view token) const { return token_to_id_.count(std::string(token)) != 0; }
  const std::string& token(std::int64_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
      throw Error(Errc::IdOutOfRange, "vocabulary id " + std::to_string(id));
    return id_to_token_[static_cast<std::size_t>(id)];
  }
  std::size_t size() const { return id_to_token_.size(); }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

  /// Keeps the `max_size` lowest ids (the most frequent tokens).
  void truncate(std::size_t max_size) {
    if (max_size < 2) throw Error(Errc::InvalidConfig, "vocabulary size must be at least 2");
    if (id_to_token_.size() <= max_size) return;
    id_to_token_.resize(max_size);
    reindex();
  }

 private:
  friend Vocab build_vocab(const std::vector<std::string>&, std::size_t);

  void reindex() {
    token_to_id_.clear();
    for (std::size_t i = 0; i < id_to_token_.size(); ++i)
      token_to_id_.emplace(id_to_token_[i], static_cast<std::int64_t>(i));
  }

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, std::int64_t> token_to_id_;
};

/// Ids ordered by descending corpus frequency, ties broken lexicographically.
/// Tokens seen fewer than `min_freq` times are left out (they map to UNK).
inline Vocab build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq = 1) {
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "cannot build a vocabulary from no documents");
  if (min_freq < 1) throw Error(Errc::InvalidConfig, "min_freq must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : corpus)
    for (auto& w : split_words(doc)) ++counts[w];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts)
    if (n >= min_freq && tok != Vocab::kPadToken && tok != Vocab::kUnkToken) ranked.emplace_back(tok, n);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (auto& [tok, n] : ranked) v.id_to_token_.push_back(tok);
  v.reindex();
  return v;
}

struct TokenSeq {
  std::vector<std::int64_t> ids;
  std::size_t length() const { return ids.size(); }
};

inline TokenSeq tokenize(std::string_view text, const Vocab& vocab) {
  TokenSeq seq;
  for (const auto& w : split_words(text)) seq.ids.push_back(vocab.id(w));
  if (seq.ids.empty()) throw Error(Errc::EmptyText, "no tokens in text");
  return seq;
}

using Edge = std::pair<std::size_t, std::size_t>;

/// One node per token occurrence. Edges are directed pairs; co-occurrence
/// edges appear in both directions and every node has exactly one self-loop.
struct SentenceGraph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  std::vector<std::int64_t> node_token_ids;
};

/// Links positions i and j whenever 0 < |i - j| < window_size, plus a
/// self-loop per node. Edges come out sorted by (src, dst), without repeats.
inline SentenceGraph sentence_to_graph(const TokenSeq& seq, std::size_t window_size = 2) {
  if (window_size < 1) throw Error(Errc::InvalidConfig, "window_size must be at least 1");
  if (seq.length() < 1) throw Error(Errc::EmptyText, "cannot build a graph from an empty sequence");
  SentenceGraph g;
  g.num_nodes = seq.length();
  g.node_token_ids = seq.ids;
  const std::size_t reach = window_size - 1;
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    const std::size_t lo = i >= reach ? i - reach : 0;
    const std::size_t hi = std::min(g.num_nodes - 1, i + reach);
    for (std::size_t j = lo; j <= hi; ++j) g.edges.emplace_back(i, j);
  }
  return g;
}

/// Disjoint union of sentence graphs. Nodes of graph g occupy the contiguous
/// range [graph_offsets[g], graph_offsets[g+1]).
struct BatchedGraph {
  std::vector<std::int64_t> node_token_ids;
  std::vector<Edge> edges;
  std::vector<std::size_t> batch_vector;
  std::vector<std::size_t> graph_offsets{0};
  std::size_t graph_count = 0;

  std::size_t num_nodes() const { return node_token_ids.size(); }
  std::size_t graph_size(std::size_t g) const { return graph_offsets[g + 1] - graph_offsets[g]; }
};

inline BatchedGraph batch_graphs(const std::vector<SentenceGraph>& graphs) {
  if (graphs.empty()) throw Error(Errc::EmptyBatch, "cannot batch zero graphs");
  BatchedGraph b;
  for (const auto& g : graphs) {
    const std::size_t offset = b.node_token_ids.size();
    b.node_token_ids.insert(b.node_token_ids.end(), g.node_token_ids.begin(), g.node_token_ids.end());
    for (auto [s, d] : g.edges) b.edges.emplace_back(s + offset, d + offset);
    b.batch_vector.insert(b.batch_vector.end(), g.num_nodes, b.graph_count);
    b.graph_offsets.push_back(b.node_token_ids.size());
    ++b.graph_count;
  }
  return b;
}

inline std::vector<SentenceGraph> unbatch(const BatchedGraph& b) {
  std::vector<SentenceGraph> out(b.graph_count);
  for (std::size_t g = 0; g < b.graph_count; ++g) {
    out[g].num_nodes = b.graph_size(g);
    out[g].node_token_ids.assign(b.node_token_ids.begin() + std::ptrdiff_t(b.graph_offsets[g]),
                                 b.node_token_ids.begin() + std::ptrdiff_t(b.graph_offsets[g + 1]));
  }
  for (auto [s, d] : b.edges) {
    const std::size_t g = b.batch_vector[s];
    out[g].edges.emplace_back(s - b.graph_offsets[g], d - b.graph_offsets[g]);
  }
  return out;
}

/// Incoming-neighbor lists: for node i, every src with an edge (src, i).
inline ops::Csr incoming_adjacency(std::size_t num_nodes, const std::vector<Edge>& edges) {
  ops::Csr csr;
  csr.offsets.assign(num_nodes + 1, 0);
  for (auto [s, d] : edges) {
    if (s >= num_nodes || d >= num_nodes)
      throw Error(Errc::DimensionMismatch, "edge (" + std::to_string(s) + "," + std::to_string(d) +
                                               ") outside " + std::to_string(num_nodes) + " nodes");
    ++csr.offsets[d + 1];
  }
  for (std::size_t i = 0; i < num_nodes; ++i) csr.offsets[i + 1] += csr.offsets[i];
  csr.indices.resize(edges.size());
  std::vector<std::size_t> fill(csr.offsets.begin(), csr.offsets.end() - 1);
  for (auto [s, d] : edges) csr.indices[fill[d]++] = s;
  return csr;
}

// Debug dump: "N <num_nodes>" then one "E <src> <dst>" line per edge.

inline void write_graph_dump(std::ostream& os, const SentenceGraph& g) {
  os << "N " << g.num_nodes << '\n';
  for (auto [s, d] : g.edges) os << "E " << s << ' ' << d << '\n';
}

inline SentenceGraph read_graph_dump(std::istream& is) {
  SentenceGraph g;
  std::string tag;
  bool have_header = false;
  while (is >> tag) {
    if (tag == "N") {
      if (!(is >> g.num_nodes)) throw Error(Errc::ParseError, "graph dump: bad node count");
      have_header = true;
    } else if (tag == "E") {
      std::size_t s = 0, d = 0;
      if (!(is >> s >> d)) throw Error(Errc::ParseError, "graph dump: bad edge line");
      g.edges.emplace_back(s, d);
    } else {
      throw Error(Errc::ParseError, "graph dump: unexpected record '" + tag + "'");
    }
  }
  if (!have_header) throw Error(Errc::ParseError, "graph dump: missing N record");
  return g;
}

}  // namespace gramufen
