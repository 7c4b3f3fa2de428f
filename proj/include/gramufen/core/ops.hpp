#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gramufen/core/autograd.hpp"

// Differentiable primitives on 2-D (rows x cols) tensors. Each op computes its
// forward value eagerly and, when recording, attaches a closure that pushes the
// output gradient back into its inputs.
namespace gramufen::ops {

using detail::parent_grad;
using detail::parent_needs;

template <class T>
Var<T> constant(Tensor<T> t) {
  return Var<T>(std::move(t), false);
}

namespace detail {
template <class T>
void require_2d(const Tensor<T>& t, std::string_view op) {
  if (t.dim() != 2)
    throw Error(Errc::DimensionMismatch, std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}
template <class T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, std::string_view op) {
  if (a.shape() != b.shape())
    throw Error(Errc::DimensionMismatch,
                std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
}
template <class T>
Var<T> unary(const Var<T>& a, auto forward, auto derivative) {
  const auto& x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = forward(x[i]);
  return Var<T>::make(std::move(y), {a}, [derivative](Node<T>& n) {
    const auto& x = n.parents[0]->value;
    auto& gx = parent_grad(n, 0);
    for (std::size_t i = 0; i < x.numel(); ++i) gx[i] += n.grad[i] * derivative(x[i], n.value[i]);
  });
}
}  // namespace detail

/// A (m x k) * B (k x n)
template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  detail::require_2d(a.value(), "matmul");
  detail::require_2d(b.value(), "matmul");
  if (a.value().cols() != b.value().rows())
    throw Error(Errc::DimensionMismatch,
                "matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Tensor<T> out({a.value().rows(), b.value().cols()});
  out.mat().noalias() = a.value().mat() * b.value().mat();
  return Var<T>::make(std::move(out), {a, b}, [](Node<T>& n) {
    const auto& A = n.parents[0]->value;
    const auto& B = n.parents[1]->value;
    if (parent_needs(n, 0)) parent_grad(n, 0).mat().noalias() += n.grad.mat() * B.mat().transpose();
    if (parent_needs(n, 1)) parent_grad(n, 1).mat().noalias() += A.mat().transpose() * n.grad.mat();
  });
}

/// A (m x k) * B(n x k)^T
template <class T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  detail::require_2d(a.value(), "matmul_nt");
  detail::require_2d(b.value(), "matmul_nt");
  if (a.value().cols() != b.value().cols())
    throw Error(Errc::DimensionMismatch,
                "matmul_nt: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  Tensor<T> out({a.value().rows(), b.value().rows()});
  out.mat().noalias() = a.value().mat() * b.value().mat().transpose();
  return Var<T>::make(std::move(out), {a, b}, [](Node<T>& n) {
    const auto& A = n.parents[0]->value;
    const auto& B = n.parents[1]->value;
    if (parent_needs(n, 0)) parent_grad(n, 0).mat().noalias() += n.grad.mat() * B.mat();
    if (parent_needs(n, 1)) parent_grad(n, 1).mat().noalias() += n.grad.mat().transpose() * A.mat();
  });
}

/// Same data, new shape.
template <class T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> out = a.value().reshaped(std::move(shape));
  return Var<T>::make(std::move(out), {a}, [](Node<T>& n) {
    auto& g = parent_grad(n, 0);
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

template <class T>
Var<T> transpose(const Var<T>& a) {
  detail::require_2d(a.value(), "transpose");
  Tensor<T> out({a.value().cols(), a.value().rows()});
  out.mat() = a.value().mat().transpose();
  return Var<T>::make(std::move(out), {a}, [](Node<T>& n) {
    parent_grad(n, 0).mat() += n.grad.mat().transpose();
  });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a.value(), b.value(), "add");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return Var<T>::make(std::move(out), {a, b}, [](Node<T>& n) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!parent_needs(n, p)) continue;
      auto& g = parent_grad(n, p);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a.value(), b.value(), "sub");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return Var<T>::make(std::move(out), {a, b}, [](Node<T>& n) {
    if (parent_needs(n, 0)) {
      auto& g = parent_grad(n, 0);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
    if (parent_needs(n, 1)) {
      auto& g = parent_grad(n, 1);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] -= n.grad[i];
    }
  });
}

/// Elementwise product.
template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a.value(), b.value(), "mul");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return Var<T>::make(std::move(out), {a, b}, [](Node<T>& n) {
    const auto& A = n.parents[0]->value;
    const auto& B = n.parents[1]->value;
    if (parent_needs(n, 0)) {
      auto& g = parent_grad(n, 0);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * B[i];
    }
    if (parent_needs(n, 1)) {
      auto& g = parent_grad(n, 1);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * A[i];
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T c) {
  return detail::unary<T>(a, [c](T x) { return c * x; }, [c](T, T) { return c; });
}

template <class T>
Var<T> add_scalar(const Var<T>& a, T c) {
  return detail::unary<T>(a, [c](T x) { return x + c; }, [](T, T) { return T{1}; });
}

/// 1 - a
template <class T>
Var<T> one_minus(const Var<T>& a) {
  return detail::unary<T>(a, [](T x) { return T{1} - x; }, [](T, T) { return T{-1}; });
}

/// Adds a length-n vector to every row of an (m x n) matrix.
template <class T>
Var<T> add_row(const Var<T>& a, const Var<T>& bias) {
  detail::require_2d(a.value(), "add_row");
  const std::size_t m = a.value().rows(), k = a.value().cols();
  if (bias.value().numel() != k)
    throw Error(Errc::DimensionMismatch,
                "add_row: bias " + shape_str(bias.shape()) + " for matrix " + shape_str(a.shape()));
  Tensor<T> out = a.value();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < k; ++c) out[r * k + c] += bias.value()[c];
  return Var<T>::make(std::move(out), {a, bias}, [m, k](Node<T>& n) {
    if (parent_needs(n, 0)) {
      auto& g = parent_grad(n, 0);
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    }
    if (parent_needs(n, 1)) {
      auto& g = parent_grad(n, 1);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < k; ++c) g[c] += n.grad[r * k + c];
    }
  });
}

/// X W^T + b with W stored (out x in), the usual dense-layer layout.
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  auto y = matmul_nt(x, weight);
  return bias ? add_row(y, bias) : y;
}

template <class T>
Var<T> relu(const Var<T>& a) {
  return detail::unary<T>(a, [](T x) { return x > T{0} ? x : T{0}; },
                          [](T x, T) { return x > T{0} ? T{1} : T{0}; });
}

/// Exact (erf-based) GELU.
template <class T>
Var<T> gelu(const Var<T>& a) {
  constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  constexpr T inv_sqrt2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
  return detail::unary<T>(
      a, [](T x) { return T(0.5) * x * (T{1} + std::erf(x * inv_sqrt2)); },
      [](T x, T) {
        const T cdf = T(0.5) * (T{1} + std::erf(x * inv_sqrt2));
        return cdf + x * inv_sqrt2pi * std::exp(T(-0.5) * x * x);
      });
}

template <class T>
inline T stable_sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
  return detail::unary<T>(a, [](T x) { return stable_sigmoid(x); },
                          [](T, T y) { return y * (T{1} - y); });
}

template <class T>
Var<T> log(const Var<T>& a) {
  return detail::unary<T>(a, [](T x) { return std::log(x); }, [](T x, T) { return T{1} / x; });
}

/// Gradient passes only where lo <= x <= hi.
template <class T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
  return detail::unary<T>(a, [lo, hi](T x) { return std::clamp(x, lo, hi); },
                          [lo, hi](T x, T) { return (x >= lo && x <= hi) ? T{1} : T{0}; });
}

template <class T>
Var<T> row_softmax(const Var<T>& a) {
  detail::require_2d(a.value(), "row_softmax");
  const std::size_t m = a.value().rows(), k = a.value().cols();
  Tensor<T> y(a.shape());
  for (std::size_t r = 0; r < m; ++r) {
    const T* x = a.value().data() + r * k;
    T* out = y.data() + r * k;
    const T mx = *std::max_element(x, x + k);
    T sum{0};
    for (std::size_t c = 0; c < k; ++c) sum += (out[c] = std::exp(x[c] - mx));
    for (std::size_t c = 0; c < k; ++c) out[c] /= sum;
  }
  return Var<T>::make(std::move(y), {a}, [m, k](Node<T>& n) {
    auto& g = parent_grad(n, 0);
    for (std::size_t r = 0; r < m; ++r) {
      const T* y = n.value.data() + r * k;
      const T* gy = n.grad.data() + r * k;
      T dot{0};
      for (std::size_t c = 0; c < k; ++c) dot += gy[c] * y[c];
      for (std::size_t c = 0; c < k; ++c) g[r * k + c] += y[c] * (gy[c] - dot);
    }
  });
}

template <class T>
Var<T> sum_all(const Var<T>& a) {
  T s{0};
  for (std::size_t i = 0; i < a.value().numel(); ++i) s += a.value()[i];
  return Var<T>::make(Tensor<T>({1}, std::vector<T>{s}), {a}, [](Node<T>& n) {
    auto& g = parent_grad(n, 0);
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += n.grad[0];
  });
}

template <class T>
Var<T> mean_all(const Var<T>& a) {
  const auto count = a.value().numel();
  if (count == 0) throw Error(Errc::DimensionMismatch, "mean_all over an empty tensor");
  return scale(sum_all(a), T{1} / static_cast<T>(count));
}

/// Concatenate along the feature axis: (m x p) | (m x q) -> (m x (p+q)).
template <class T>
Var<T> concat_cols(const Var<T>& a, const Var<T>& b) {
  detail::require_2d(a.value(), "concat_cols");
  detail::require_2d(b.value(), "concat_cols");
  if (a.value().rows() != b.value().rows())
    throw Error(Errc::DimensionMismatch,
                "concat_cols: row counts " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t m = a.value().rows(), p = a.value().cols(), q = b.value().cols();
  Tensor<T> out({m, p + q});
  out.mat().leftCols(Eigen::Index(p)) = a.value().mat();
  out.mat().rightCols(Eigen::Index(q)) = b.value().mat();
  return Var<T>::make(std::move(out), {a, b}, [p, q](Node<T>& n) {
    if (parent_needs(n, 0)) parent_grad(n, 0).mat() += n.grad.mat().leftCols(Eigen::Index(p));
    if (parent_needs(n, 1)) parent_grad(n, 1).mat() += n.grad.mat().rightCols(Eigen::Index(q));
  });
}

/// Inverted dropout. Identity when not training or p == 0.
template <class T>
Var<T> dropout(const Var<T>& a, double p, bool training, std::mt19937_64& rng) {
  if (!training || p <= 0.0) return a;
  std::bernoulli_distribution keep(1.0 - p);
  const T scale_kept = T(1.0 / (1.0 - p));
  Tensor<T> mask(a.shape());
  for (std::size_t i = 0; i < mask.numel(); ++i) mask[i] = keep(rng) ? scale_kept : T{0};
  return mul(a, constant(std::move(mask)));
}

/// Scales each row to unit Euclidean norm; all-zero rows pass through.
template <class T>
Var<T> l2_normalize_rows(const Var<T>& a) {
  detail::require_2d(a.value(), "l2_normalize_rows");
  const std::size_t m = a.value().rows(), k = a.value().cols();
  Tensor<T> y = a.value();
  std::vector<T> norms(m);
  for (std::size_t r = 0; r < m; ++r) {
    T s{0};
    for (std::size_t c = 0; c < k; ++c) s += y[r * k + c] * y[r * k + c];
    norms[r] = std::sqrt(s);
    if (norms[r] > T{0})
      for (std::size_t c = 0; c < k; ++c) y[r * k + c] /= norms[r];
  }
  return Var<T>::make(std::move(y), {a}, [m, k, norms = std::move(norms)](Node<T>& n) {
    auto& g = parent_grad(n, 0);
    for (std::size_t r = 0; r < m; ++r) {
      const T* y = n.value.data() + r * k;
      const T* gy = n.grad.data() + r * k;
      if (norms[r] == T{0}) {
        for (std::size_t c = 0; c < k; ++c) g[r * k + c] += gy[c];
        continue;
      }
      T dot{0};
      for (std::size_t c = 0; c < k; ++c) dot += y[c] * gy[c];
      for (std::size_t c = 0; c < k; ++c) g[r * k + c] += (gy[c] - y[c] * dot) / norms[r];
    }
  });
}

/// Row lookup into an embedding table. Gradient never reaches row `pad_id`.
template <class T>
Var<T> embedding_lookup(const Var<T>& table, std::span<const std::int64_t> ids, std::int64_t pad_id) {
  detail::require_2d(table.value(), "embedding_lookup");
  const std::size_t vocab = table.value().rows(), d = table.value().cols();
  Tensor<T> out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab)
      throw Error(Errc::IdOutOfRange,
                  "token id " + std::to_string(ids[i]) + " outside table of " + std::to_string(vocab));
    std::copy_n(table.value().data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  std::vector<std::int64_t> idx(ids.begin(), ids.end());
  return Var<T>::make(std::move(out), {table}, [idx = std::move(idx), d, pad_id](Node<T>& n) {
    auto& g = parent_grad(n, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] == pad_id) continue;
      T* row = g.data() + static_cast<std::size_t>(idx[i]) * d;
      for (std::size_t c = 0; c < d; ++c) row[c] += n.grad[i * d + c];
    }
  });
}

/// Compressed adjacency: neighbors of node i are indices[offsets[i] .. offsets[i+1]).
struct Csr {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> indices;
  std::size_t num_nodes() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

/// out_i = mean over j in N(i) of H_j; nodes without neighbors get a zero row.
template <class T>
Var<T> neighbor_mean(const Var<T>& h, const Csr& adjacency) {
  detail::require_2d(h.value(), "neighbor_mean");
  const std::size_t nodes = h.value().rows(), k = h.value().cols();
  if (adjacency.num_nodes() != nodes)
    throw Error(Errc::DimensionMismatch, "neighbor_mean: adjacency covers " +
                                             std::to_string(adjacency.num_nodes()) + " nodes, features " +
                                             std::to_string(nodes));
  Tensor<T> out({nodes, k});
  auto agg = out.mat();
  const auto hin = h.value().mat();
  for (std::size_t i = 0; i < nodes; ++i) {
    const std::size_t b = adjacency.offsets[i], e = adjacency.offsets[i + 1];
    if (b == e) continue;
    for (std::size_t p = b; p < e; ++p) agg.row(Eigen::Index(i)) += hin.row(Eigen::Index(adjacency.indices[p]));
    agg.row(Eigen::Index(i)) /= static_cast<T>(e - b);
  }
  return Var<T>::make(std::move(out), {h}, [adjacency](Node<T>& n) {
    auto g = parent_grad(n, 0).mat();
    const auto gy = n.grad.mat();
    for (std::size_t i = 0; i + 1 < adjacency.offsets.size(); ++i) {
      const std::size_t b = adjacency.offsets[i], e = adjacency.offsets[i + 1];
      if (b == e) continue;
      const T w = T{1} / static_cast<T>(e - b);
      for (std::size_t p = b; p < e; ++p)
        g.row(Eigen::Index(adjacency.indices[p])) += w * gy.row(Eigen::Index(i));
    }
  });
}

/// Row g of the result is the mean of rows r with membership[r] == g.
template <class T>
Var<T> segment_mean(const Var<T>& h, std::span<const std::size_t> membership, std::size_t segments) {
  detail::require_2d(h.value(), "segment_mean");
  const std::size_t nodes = h.value().rows(), k = h.value().cols();
  if (membership.size() != nodes)
    throw Error(Errc::DimensionMismatch, "segment_mean: membership length " +
                                             std::to_string(membership.size()) + " for " +
                                             std::to_string(nodes) + " rows");
  std::vector<std::size_t> counts(segments, 0);
  for (auto s : membership) {
    if (s >= segments)
      throw Error(Errc::DimensionMismatch, "segment_mean: segment index " + std::to_string(s) +
                                               " out of range " + std::to_string(segments));
    ++counts[s];
  }
  for (std::size_t s = 0; s < segments; ++s)
    if (counts[s] == 0) throw Error(Errc::EmptyGraph, "graph " + std::to_string(s) + " has no nodes");
  Tensor<T> out({segments, k});
  auto o = out.mat();
  const auto hin = h.value().mat();
  for (std::size_t r = 0; r < nodes; ++r) o.row(Eigen::Index(membership[r])) += hin.row(Eigen::Index(r));
  for (std::size_t s = 0; s < segments; ++s) o.row(Eigen::Index(s)) /= static_cast<T>(counts[s]);
  std::vector<std::size_t> member(membership.begin(), membership.end());
  return Var<T>::make(std::move(out), {h}, [member = std::move(member), counts = std::move(counts)](Node<T>& n) {
    auto g = parent_grad(n, 0).mat();
    const auto gy = n.grad.mat();
    for (std::size_t r = 0; r < member.size(); ++r)
      g.row(Eigen::Index(r)) += gy.row(Eigen::Index(member[r])) / static_cast<T>(counts[member[r]]);
  });
}

}  // namespace gramufen::ops
