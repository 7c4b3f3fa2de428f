#pragma once

#include <random>
#include <string>

#include "gramufen/core/parameter.hpp"

namespace gramufen {

/// GraphSAGE convolution with mean aggregation:
///   H'_i = W_self H_i + W_neigh mean_{j in N(i)} H_j + b
/// where N(i) is the set of incoming neighbors (self-loops included when the
/// graph has them). With `l2_normalize` every nonzero output row is scaled to
/// unit length. No activation is applied here.
template <class T>
class SageLayer {
 public:
  SageLayer() = default;
  SageLayer(std::size_t in, std::size_t out, bool l2_normalize, std::mt19937_64& rng)
      : neigh_(in, out, rng, true), self_(in, out, rng, false), l2_normalize_(l2_normalize) {}

  Var<T> operator()(const Var<T>& h, const ops::Csr& adjacency) const {
    if (h.value().cols() != neigh_.in_features())
      throw Error(Errc::DimensionMismatch, "sage layer expects width " + std::to_string(neigh_.in_features()) +
                                               ", got " + shape_str(h.shape()));
    auto out = ops::add(neigh_(ops::neighbor_mean(h, adjacency)), self_(h));
    return l2_normalize_ ? ops::l2_normalize_rows(out) : out;
  }

  Linear<T>& neighbor_transform() { return neigh_; }
  Linear<T>& self_transform() { return self_; }
  bool normalizes() const { return l2_normalize_; }

  void collect(ParamList<T>& out, const std::string& prefix) {
    neigh_.collect(out, prefix + "lin_neigh.");
    self_.collect(out, prefix + "lin_self.");
  }

 private:
  Linear<T> neigh_;
  Linear<T> self_;
  bool l2_normalize_ = false;
};

/// Residual projection head:
///   A = W1 X + b1,  Z = W2 gelu(A) + b2 + A
template <class T>
class ProjectionHead {
 public:
  ProjectionHead() = default;
  ProjectionHead(std::size_t in, std::size_t out, std::mt19937_64& rng) : first_(in, out, rng), second_(out, out, rng) {}

  std::size_t in_features() const { return first_.in_features(); }
  std::size_t out_features() const { return first_.out_features(); }

  Var<T> operator()(const Var<T>& x) const {
    auto a = first_(x);
    return ops::add(second_(ops::gelu(a)), a);
  }

  Linear<T>& first() { return first_; }
  Linear<T>& second() { return second_; }

  void collect(ParamList<T>& out, const std::string& prefix) {
    first_.collect(out, prefix + "first.");
    second_.collect(out, prefix + "second.");
  }

 private:
  Linear<T> first_;
  Linear<T> second_;
};

/// Maps X through a projection head; X must match the head's input width.
template <class T>
Var<T> project(const ProjectionHead<T>& head, const Var<T>& x) {
  return head(x);
}

/// Per-graph mean of node rows.
template <class T>
Var<T> global_mean_pool(const Var<T>& nodes, std::span<const std::size_t> batch_vector, std::size_t graph_count) {
  return ops::segment_mean(nodes, batch_vector, graph_count);
}

}  // namespace gramufen
