#pragma once

#include <random>
#include <string>
#include <vector>

#include "gramufen/core/parameter.hpp"

namespace gramufen {

namespace ops {

/// One unidirectional LSTM layer run independently over each sentence.
///
/// `x` holds the token rows of every sentence back to back; sentence s owns
/// rows [offsets[s], offsets[s+1]). Row r of the result is the hidden state
/// after consuming token r. Gate layout in the stacked weights is (i, f, g, o):
///   w_ih (4H x in), w_hh (4H x H), bias (4H).
/// State starts at zero for every sentence and never crosses a boundary.
template <class T>
Var<T> lstm_layer(const Var<T>& x, std::span<const std::size_t> offsets, const Var<T>& w_ih,
                  const Var<T>& w_hh, const Var<T>& bias) {
  const std::size_t n = x.value().rows(), in = x.value().cols();
  const std::size_t hid = w_hh.value().cols(), g4 = 4 * hid;
  if (w_ih.shape() != Shape{g4, in} || w_hh.shape() != Shape{g4, hid} || bias.value().numel() != g4)
    throw Error(Errc::DimensionMismatch, "lstm_layer: weights " + shape_str(w_ih.shape()) + ", " +
                                             shape_str(w_hh.shape()) + " for input " + shape_str(x.shape()));
  if (offsets.empty() || offsets.back() != n)
    throw Error(Errc::DimensionMismatch, "lstm_layer: sentence offsets do not cover the input rows");
  const std::size_t sentences = offsets.size() - 1;
  std::size_t max_len = 0;
  for (std::size_t s = 0; s < sentences; ++s) max_len = std::max(max_len, offsets[s + 1] - offsets[s]);

  using Mat = RowMatrix<T>;
  // Input contribution for every row at once.
  Mat pre = x.value().mat() * w_ih.value().mat().transpose();
  for (Eigen::Index r = 0; r < pre.rows(); ++r)
    pre.row(r) += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.value().data(), Eigen::Index(g4));

  Tensor<T> h_out({n, hid});
  auto gates = std::make_shared<Mat>(Mat::Zero(Eigen::Index(n), Eigen::Index(g4)));  // activated i,f,g,o
  auto cell = std::make_shared<Mat>(Mat::Zero(Eigen::Index(n), Eigen::Index(hid)));
  auto H = h_out.mat();
  const auto Whh = w_hh.value().mat();

  auto active_rows = [offsets, sentences](std::size_t t) {
    std::vector<std::pair<std::size_t, std::size_t>> act;  // (sentence, row)
    for (std::size_t s = 0; s < sentences; ++s)
      if (offsets[s] + t < offsets[s + 1]) act.emplace_back(s, offsets[s] + t);
    return act;
  };

  for (std::size_t t = 0; t < max_len; ++t) {
    const auto act = active_rows(t);
    Mat hprev = Mat::Zero(Eigen::Index(act.size()), Eigen::Index(hid));
    if (t > 0)
      for (std::size_t k = 0; k < act.size(); ++k) hprev.row(Eigen::Index(k)) = H.row(Eigen::Index(act[k].second - 1));
    Mat z = hprev * Whh.transpose();
    for (std::size_t k = 0; k < act.size(); ++k) {
      const auto r = Eigen::Index(act[k].second);
      auto zr = z.row(Eigen::Index(k));
      zr += pre.row(r);
      auto gr = gates->row(r);
      for (std::size_t j = 0; j < hid; ++j) {
        const auto J = Eigen::Index(j), H1 = Eigen::Index(hid);
        gr(J) = stable_sigmoid(zr(J));
        gr(H1 + J) = stable_sigmoid(zr(H1 + J));
        gr(2 * H1 + J) = std::tanh(zr(2 * H1 + J));
        gr(3 * H1 + J) = stable_sigmoid(zr(3 * H1 + J));
        const T c_prev = t > 0 ? (*cell)(r - 1, J) : T{0};
        const T c = gr(H1 + J) * c_prev + gr(J) * gr(2 * H1 + J);
        (*cell)(r, J) = c;
        H(r, J) = gr(3 * H1 + J) * std::tanh(c);
      }
    }
  }

  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  return Var<T>::make(std::move(h_out), {x, w_ih, w_hh, bias},
                      [offs = std::move(offs), gates, cell, hid, max_len](Node<T>& node) {
    const std::size_t sentences = offs.size() - 1, g4 = 4 * hid;
    const auto& X = node.parents[0]->value;
    const auto& Wih = node.parents[1]->value;
    const auto& Whh_t = node.parents[2]->value;
    const auto Hv = node.value.mat();
    const auto dH = node.grad.mat();
    const auto rows = Eigen::Index(X.rows());
    Mat dpre = Mat::Zero(rows, Eigen::Index(g4));
    Mat dh_next = Mat::Zero(Eigen::Index(sentences), Eigen::Index(hid));
    Mat dc_next = Mat::Zero(Eigen::Index(sentences), Eigen::Index(hid));
    Mat dWhh = Mat::Zero(Eigen::Index(g4), Eigen::Index(hid));

    for (std::size_t tt = max_len; tt-- > 0;) {
      std::vector<std::pair<std::size_t, std::size_t>> act;
      for (std::size_t s = 0; s < sentences; ++s)
        if (offs[s] + tt < offs[s + 1]) act.emplace_back(s, offs[s] + tt);
      Mat dz(Eigen::Index(act.size()), Eigen::Index(g4));
      Mat hprev = Mat::Zero(Eigen::Index(act.size()), Eigen::Index(hid));
      for (std::size_t k = 0; k < act.size(); ++k) {
        const auto [s, r_] = act[k];
        const auto r = Eigen::Index(r_), S = Eigen::Index(s), K = Eigen::Index(k);
        if (tt > 0) hprev.row(K) = Hv.row(r - 1);
        const auto g = gates->row(r);
        for (std::size_t j = 0; j < hid; ++j) {
          const auto J = Eigen::Index(j), H1 = Eigen::Index(hid);
          const T ig = g(J), fg = g(H1 + J), gg = g(2 * H1 + J), og = g(3 * H1 + J);
          const T c = (*cell)(r, J);
          const T c_prev = tt > 0 ? (*cell)(r - 1, J) : T{0};
          const T tc = std::tanh(c);
          const T dh = dH(r, J) + dh_next(S, J);
          const T dc = dc_next(S, J) + dh * og * (T{1} - tc * tc);
          dz(K, J) = dc * gg * ig * (T{1} - ig);
          dz(K, H1 + J) = dc * c_prev * fg * (T{1} - fg);
          dz(K, 2 * H1 + J) = dc * ig * (T{1} - gg * gg);
          dz(K, 3 * H1 + J) = dh * tc * og * (T{1} - og);
          dc_next(S, J) = dc * fg;
        }
        dpre.row(r) = dz.row(K);
      }
      dWhh.noalias() += dz.transpose() * hprev;
      const Mat dh_prev = dz * Whh_t.mat();
      for (std::size_t k = 0; k < act.size(); ++k) dh_next.row(Eigen::Index(act[k].first)) = dh_prev.row(Eigen::Index(k));
    }

    if (parent_needs(node, 0)) parent_grad(node, 0).mat().noalias() += dpre * Wih.mat();
    if (parent_needs(node, 1)) parent_grad(node, 1).mat().noalias() += dpre.transpose() * X.mat();
    if (parent_needs(node, 2)) parent_grad(node, 2).mat() += dWhh;
    if (parent_needs(node, 3)) {
      auto& gb = parent_grad(node, 3);
      const Eigen::Matrix<T, 1, Eigen::Dynamic> colsum = dpre.colwise().sum();
      for (std::size_t j = 0; j < g4; ++j) gb[j] += colsum(Eigen::Index(j));
    }
  });
}

}  // namespace ops

/// Stacked unidirectional LSTM. Dropout sits between layers (not after the
/// last one) and is active only while training.
template <class T>
class Lstm {
 public:
  struct Layer {
    Parameter<T> w_ih, w_hh, bias;
  };

  Lstm() = default;
  Lstm(std::size_t input_dim, std::size_t hidden_dim, std::size_t layers, double dropout, std::mt19937_64& rng)
      : hidden_(hidden_dim), dropout_(dropout) {
    const double bound = fan_in_bound(hidden_dim);
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = l == 0 ? input_dim : hidden_dim;
      layers_.push_back(Layer{
          make_param<T>("w_ih", uniform_tensor<T>({4 * hidden_dim, in}, bound, rng)),
          make_param<T>("w_hh", uniform_tensor<T>({4 * hidden_dim, hidden_dim}, bound, rng)),
          make_param<T>("bias", uniform_tensor<T>({4 * hidden_dim}, bound, rng), true, false),
      });
    }
  }

  std::size_t hidden_dim() const { return hidden_; }
  std::size_t num_layers() const { return layers_.size(); }

  Var<T> operator()(Var<T> x, std::span<const std::size_t> offsets, bool training, std::mt19937_64& rng) const {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& L = layers_[l];
      x = ops::lstm_layer(x, offsets, L.w_ih.var, L.w_hh.var, L.bias.var);
      if (l + 1 < layers_.size()) x = ops::dropout(x, dropout_, training, rng);
    }
    return x;
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const std::string p = prefix + "layer" + std::to_string(l) + ".";
      layers_[l].w_ih.name = p + "w_ih";
      layers_[l].w_hh.name = p + "w_hh";
      layers_[l].bias.name = p + "bias";
      out.push_back(&layers_[l].w_ih);
      out.push_back(&layers_[l].w_hh);
      out.push_back(&layers_[l].bias);
    }
  }

 private:
  std::size_t hidden_ = 0;
  double dropout_ = 0.0;
  std::vector<Layer> layers_;
};

}  // namespace gramufen
