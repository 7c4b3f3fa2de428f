#pragma once

#include <random>
#include <string>
#include <vector>

#include "gramufen/core/label.hpp"
#include "gramufen/core/parameter.hpp"
#include "gramufen/encoders/config.hpp"

// Text/image alignment loss and the concatenation classifier.
//
// The similarity loss compares the cross-modal score matrix P = Zt Zi^T with a
// soft target E = rowsoftmax((Zi Zi^T + Zt Zt^T) / 2). Raw inner products are
// unbounded, so P is passed through the logistic function before the binary
// cross-entropy; probabilities are clamped to [eps, 1 - eps]. Gradients flow
// through both P and E.
namespace gramufen {

inline constexpr double kProbEpsilon = 1e-7;

template <class T>
struct SimilarityBundle {
  Var<T> p;  // B x B cross-modal scores
  Var<T> e;  // B x B soft targets
  Var<T> l_text, l_img, l_s;
};

template <class T>
struct LossBundle {
  Var<T> l_s, l_c, total;
};

namespace detail {
template <class T>
void require_pair(const Var<T>& z_text, const Var<T>& z_img) {
  if (z_text.value().dim() != 2 || z_img.value().dim() != 2 || z_text.shape() != z_img.shape())
    throw Error(Errc::DimensionMismatch, "text embeddings " + shape_str(z_text.shape()) +
                                             " and image embeddings " + shape_str(z_img.shape()) +
                                             " must have equal batch and width");
}

/// mean over entries of -(y log q + (1 - y) log(1 - q)), q clamped.
template <class T>
Var<T> mean_bce(const Var<T>& q, const Var<T>& target) {
  const T eps = static_cast<T>(kProbEpsilon);
  auto qc = ops::clamp(q, eps, T{1} - eps);
  auto pos = ops::mul(target, ops::log(qc));
  auto neg = ops::mul(ops::one_minus(target), ops::log(ops::one_minus(qc)));
  return ops::scale(ops::mean_all(ops::add(pos, neg)), T{-1});
}
}  // namespace detail

/// P[i][j] = <z_text_i, z_img_j>
template <class T>
Var<T> similarity_logits(const Var<T>& z_text, const Var<T>& z_img) {
  detail::require_pair(z_text, z_img);
  return ops::matmul_nt(z_text, z_img);
}

template <class T>
Var<T> expected_matrix(const Var<T>& z_text, const Var<T>& z_img) {
  detail::require_pair(z_text, z_img);
  auto gram = ops::scale(ops::add(ops::matmul_nt(z_img, z_img), ops::matmul_nt(z_text, z_text)), T(0.5));
  return ops::row_softmax(gram);
}

/// Returns (l_text, l_img, l_s); l_img uses the transposed matrices.
template <class T>
SimilarityBundle<T> similarity_loss(const Var<T>& p, const Var<T>& e) {
  if (p.shape() != e.shape() || p.value().dim() != 2 || p.value().rows() != p.value().cols())
    throw Error(Errc::DimensionMismatch, "similarity_loss: P " + shape_str(p.shape()) + ", E " + shape_str(e.shape()));
  SimilarityBundle<T> out{p, e, {}, {}, {}};
  out.l_text = detail::mean_bce(ops::sigmoid(p), e);
  out.l_img = detail::mean_bce(ops::sigmoid(ops::transpose(p)), ops::transpose(e));
  out.l_s = ops::scale(ops::add(out.l_text, out.l_img), T(0.5));
  return out;
}

template <class T>
SimilarityBundle<T> similarity(const Var<T>& z_text, const Var<T>& z_img) {
  return similarity_loss(similarity_logits(z_text, z_img), expected_matrix(z_text, z_img));
}

/// hidden = gelu(W5 z + b5) + b6, Z = softmax(W6 hidden) over 2 classes.
template <class T>
class Classifier {
 public:
  Classifier() = default;
  Classifier(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng)
      : hidden_(input_dim, hidden_dim, rng),
        hidden_bias_(make_param<T>("b6", uniform_tensor<T>({hidden_dim}, fan_in_bound(hidden_dim), rng), true, false)),
        output_(hidden_dim, 2, rng, false) {}

  std::size_t input_dim() const { return hidden_.in_features(); }

  /// Pre-softmax class scores (B x 2).
  Var<T> logits(const Var<T>& z_combined) const {
    auto h = ops::add_row(ops::gelu(hidden_(z_combined)), hidden_bias_.var);
    return output_(h);
  }

  Linear<T>& hidden() { return hidden_; }
  Parameter<T>& hidden_bias() { return hidden_bias_; }
  Linear<T>& output() { return output_; }

  void collect(ParamList<T>& out, const std::string& prefix) {
    hidden_.collect(out, prefix + "hidden.");
    hidden_bias_.name = prefix + "hidden_bias";
    out.push_back(&hidden_bias_);
    output_.collect(out, prefix + "output.");
  }

 private:
  Linear<T> hidden_;
  Parameter<T> hidden_bias_;
  Linear<T> output_;
};

/// Concatenates (z_text | z_img) and returns the (B x 2) class probabilities.
template <class T>
Var<T> classify(const Var<T>& z_text, const Var<T>& z_img, const Classifier<T>& params) {
  if (z_text.value().rows() != z_img.value().rows())
    throw Error(Errc::DimensionMismatch, "classify: batch sizes " + shape_str(z_text.shape()) + " and " +
                                             shape_str(z_img.shape()));
  auto combined = ops::concat_cols(z_text, z_img);
  if (combined.value().cols() != params.input_dim())
    throw Error(Errc::DimensionMismatch, "classify: combined width " + std::to_string(combined.value().cols()) +
                                             ", classifier expects " + std::to_string(params.input_dim()));
  return ops::row_softmax(params.logits(combined));
}

/// Binary cross-entropy against one-hot labels, averaged over batch and both
/// class columns.
template <class T>
Var<T> classification_loss(const Var<T>& z, const std::vector<Label>& labels) {
  if (z.value().dim() != 2 || z.value().cols() != 2 || z.value().rows() != labels.size())
    throw Error(Errc::DimensionMismatch, "classification_loss: probabilities " + shape_str(z.shape()) + " for " +
                                             std::to_string(labels.size()) + " labels");
  Tensor<T> onehot({labels.size(), 2});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto k = static_cast<std::uint8_t>(labels[i]);
    if (k > 1) throw Error(Errc::InvalidLabel, "label value " + std::to_string(k));
    onehot(i, k) = T{1};
  }
  return detail::mean_bce(z, ops::constant(std::move(onehot)));
}

/// Integer-label form: 0 = real, 1 = fake; anything else is InvalidLabel.
template <class T>
Var<T> classification_loss(const Var<T>& z, const std::vector<int>& labels) {
  std::vector<Label> typed;
  typed.reserve(labels.size());
  for (int l : labels) typed.push_back(label_from_index(l));
  return classification_loss(z, typed);
}

template <class T>
Var<T> total_loss(const Var<T>& l_c, const Var<T>& l_s) {
  return ops::add(l_c, l_s);
}

template <class T>
T scalar(const Var<T>& v) {
  return v.value()[0];
}

}  // namespace gramufen
