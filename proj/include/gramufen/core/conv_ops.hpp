#pragma once

#include <limits>
#include <vector>

#include "gramufen/core/ops.hpp"

// Image ops on NCHW tensors.
namespace gramufen::ops {

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kernel_h, kernel_w;
  std::size_t stride, padding;
  std::size_t out_h() const { return (height + 2 * padding - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (width + 2 * padding - kernel_w) / stride + 1; }
  std::size_t patch() const { return channels * kernel_h * kernel_w; }
  bool pointwise() const { return kernel_h == 1 && kernel_w == 1 && stride == 1 && padding == 0; }
};

namespace detail {

template <class T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        T* row = cols + ((c * g.kernel_h + ky) * g.kernel_w + kx) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          const std::ptrdiff_t iy = std::ptrdiff_t(y * g.stride + ky) - std::ptrdiff_t(g.padding);
          for (std::size_t x = 0; x < ow; ++x) {
            const std::ptrdiff_t ix = std::ptrdiff_t(x * g.stride + kx) - std::ptrdiff_t(g.padding);
            const bool inside = iy >= 0 && ix >= 0 && iy < std::ptrdiff_t(g.height) && ix < std::ptrdiff_t(g.width);
            row[y * ow + x] = inside ? image[(c * g.height + std::size_t(iy)) * g.width + std::size_t(ix)] : T{0};
          }
        }
      }
}

template <class T>
void col2im_add(const T* cols, const ConvGeometry& g, T* image) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        const T* row = cols + ((c * g.kernel_h + ky) * g.kernel_w + kx) * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
          const std::ptrdiff_t iy = std::ptrdiff_t(y * g.stride + ky) - std::ptrdiff_t(g.padding);
          if (iy < 0 || iy >= std::ptrdiff_t(g.height)) continue;
          for (std::size_t x = 0; x < ow; ++x) {
            const std::ptrdiff_t ix = std::ptrdiff_t(x * g.stride + kx) - std::ptrdiff_t(g.padding);
            if (ix < 0 || ix >= std::ptrdiff_t(g.width)) continue;
            image[(c * g.height + std::size_t(iy)) * g.width + std::size_t(ix)] += row[y * ow + x];
          }
        }
      }
}

template <class T>
void require_nchw(const Tensor<T>& t, std::string_view op) {
  if (t.dim() != 4)
    throw Error(Errc::DimensionMismatch, std::string(op) + ": expected NCHW input, got " + shape_str(t.shape()));
}

}  // namespace detail

/// 2-D convolution. weight is (out, in, kh, kw); bias may be empty.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, std::size_t stride,
              std::size_t padding) {
  detail::require_nchw(x.value(), "conv2d");
  detail::require_nchw(weight.value(), "conv2d weight");
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  if (ws[1] != xs[1])
    throw Error(Errc::DimensionMismatch,
                "conv2d: weight " + shape_str(ws) + " applied to input " + shape_str(xs));
  const ConvGeometry g{xs[1], xs[2], xs[3], ws[2], ws[3], stride, padding};
  if (xs[2] + 2 * padding < ws[2] || xs[3] + 2 * padding < ws[3])
    throw Error(Errc::DimensionMismatch, "conv2d: kernel larger than padded input " + shape_str(xs));
  const std::size_t batch = xs[0], out_c = ws[0], oh = g.out_h(), ow = g.out_w(), spatial = oh * ow;
  if (bias && bias.value().numel() != out_c)
    throw Error(Errc::DimensionMismatch, "conv2d: bias " + shape_str(bias.shape()));

  Tensor<T> out({batch, out_c, oh, ow});
  ConstMatMap<T> w(weight.value().data(), Eigen::Index(out_c), Eigen::Index(g.patch()));
  std::vector<T> cols(g.pointwise() ? 0 : g.patch() * spatial);
  const std::size_t in_stride = g.channels * g.height * g.width;
  for (std::size_t b = 0; b < batch; ++b) {
    const T* img = x.value().data() + b * in_stride;
    const T* src = img;
    if (!g.pointwise()) {
      detail::im2col(img, g, cols.data());
      src = cols.data();
    }
    ConstMatMap<T> c(src, Eigen::Index(g.patch()), Eigen::Index(spatial));
    MatMap<T> o(out.data() + b * out_c * spatial, Eigen::Index(out_c), Eigen::Index(spatial));
    o.noalias() = w * c;
    if (bias)
      for (std::size_t k = 0; k < out_c; ++k) o.row(Eigen::Index(k)).array() += bias.value()[k];
  }

  return Var<T>::make(std::move(out), {x, weight, bias ? bias : constant(Tensor<T>())},
                      [g, batch, out_c, spatial, in_stride, has_bias = bool(bias)](Node<T>& n) {
    const auto& X = n.parents[0]->value;
    const auto& W = n.parents[1]->value;
    ConstMatMap<T> w(W.data(), Eigen::Index(out_c), Eigen::Index(g.patch()));
    std::vector<T> cols(g.patch() * spatial);
    const bool need_x = parent_needs(n, 0), need_w = parent_needs(n, 1);
    const bool need_b = has_bias && parent_needs(n, 2);
    for (std::size_t b = 0; b < batch; ++b) {
      ConstMatMap<T> go(n.grad.data() + b * out_c * spatial, Eigen::Index(out_c), Eigen::Index(spatial));
      if (need_w) {
        const T* src = X.data() + b * in_stride;
        if (!g.pointwise()) {
          detail::im2col(src, g, cols.data());
          src = cols.data();
        }
        ConstMatMap<T> c(src, Eigen::Index(g.patch()), Eigen::Index(spatial));
        MatMap<T> gw(parent_grad(n, 1).data(), Eigen::Index(out_c), Eigen::Index(g.patch()));
        gw.noalias() += go * c.transpose();
      }
      if (need_b) {
        auto& gb = parent_grad(n, 2);
        for (std::size_t k = 0; k < out_c; ++k) gb[k] += go.row(Eigen::Index(k)).sum();
      }
      if (need_x) {
        T* gx = parent_grad(n, 0).data() + b * in_stride;
        if (g.pointwise()) {
          MatMap<T> gxm(gx, Eigen::Index(g.patch()), Eigen::Index(spatial));
          gxm.noalias() += w.transpose() * go;
        } else {
          MatMap<T> gc(cols.data(), Eigen::Index(g.patch()), Eigen::Index(spatial));
          gc.noalias() = w.transpose() * go;
          detail::col2im_add(cols.data(), g, gx);
        }
      }
    }
  });
}

template <class T>
Var<T> max_pool2d(const Var<T>& x, std::size_t kernel, std::size_t stride, std::size_t padding) {
  detail::require_nchw(x.value(), "max_pool2d");
  const auto& s = x.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  const std::size_t oh = (h + 2 * padding - kernel) / stride + 1, ow = (w + 2 * padding - kernel) / stride + 1;
  Tensor<T> out({s[0], s[1], oh, ow});
  std::vector<std::size_t> argmax(out.numel());
  for (std::size_t p = 0; p < planes; ++p) {
    const T* in = x.value().data() + p * h * w;
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xo = 0; xo < ow; ++xo) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_i = 0;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          const std::ptrdiff_t iy = std::ptrdiff_t(y * stride + ky) - std::ptrdiff_t(padding);
          if (iy < 0 || iy >= std::ptrdiff_t(h)) continue;
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::ptrdiff_t ix = std::ptrdiff_t(xo * stride + kx) - std::ptrdiff_t(padding);
            if (ix < 0 || ix >= std::ptrdiff_t(w)) continue;
            const std::size_t idx = std::size_t(iy) * w + std::size_t(ix);
            if (in[idx] > best) {
              best = in[idx];
              best_i = idx;
            }
          }
        }
        const std::size_t o = (p * oh + y) * ow + xo;
        out[o] = best;
        argmax[o] = p * h * w + best_i;
      }
  }
  return Var<T>::make(std::move(out), {x}, [argmax = std::move(argmax)](Node<T>& n) {
    auto& g = parent_grad(n, 0);
    for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += n.grad[o];
  });
}

/// (B, C, H, W) -> (B, C) spatial mean.
template <class T>
Var<T> global_avg_pool2d(const Var<T>& x) {
  detail::require_nchw(x.value(), "global_avg_pool2d");
  const auto& s = x.shape();
  const std::size_t planes = s[0] * s[1], area = s[2] * s[3];
  Tensor<T> out({s[0], s[1]});
  for (std::size_t p = 0; p < planes; ++p) {
    const T* in = x.value().data() + p * area;
    T sum{0};
    for (std::size_t i = 0; i < area; ++i) sum += in[i];
    out[p] = sum / static_cast<T>(area);
  }
  return Var<T>::make(std::move(out), {x}, [planes, area](Node<T>& n) {
    auto& g = parent_grad(n, 0);
    for (std::size_t p = 0; p < planes; ++p) {
      const T v = n.grad[p] / static_cast<T>(area);
      for (std::size_t i = 0; i < area; ++i) g[p * area + i] += v;
    }
  });
}

/// Batch norm with fixed running statistics and trainable affine terms:
/// y = gamma * (x - mean) / sqrt(var + eps) + beta, per channel.
template <class T>
Var<T> frozen_batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, const Tensor<T>& mean,
                         const Tensor<T>& var, T eps) {
  detail::require_nchw(x.value(), "frozen_batch_norm");
  const auto& s = x.shape();
  const std::size_t batch = s[0], ch = s[1], area = s[2] * s[3];
  for (const Tensor<T>* t : {&gamma.value(), &beta.value(), &mean, &var})
    if (t->numel() != ch)
      throw Error(Errc::DimensionMismatch, "frozen_batch_norm: per-channel tensor " + shape_str(t->shape()) +
                                               " for input " + shape_str(s));
  std::vector<T> inv_std(ch);
  for (std::size_t c = 0; c < ch; ++c) inv_std[c] = T{1} / std::sqrt(var[c] + eps);
  Tensor<T> out(s);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c) {
      const T a = gamma.value()[c] * inv_std[c];
      const T sh = beta.value()[c] - mean[c] * a;
      const std::size_t base = (b * ch + c) * area;
      for (std::size_t i = 0; i < area; ++i) out[base + i] = x.value()[base + i] * a + sh;
    }
  std::vector<T> mu(mean.storage());
  return Var<T>::make(std::move(out), {x, gamma, beta},
                      [batch, ch, area, inv_std = std::move(inv_std), mu = std::move(mu)](Node<T>& n) {
    const auto& X = n.parents[0]->value;
    const auto& G = n.parents[1]->value;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < ch; ++c) {
        const std::size_t base = (b * ch + c) * area;
        if (parent_needs(n, 0)) {
          auto& gx = parent_grad(n, 0);
          const T a = G[c] * inv_std[c];
          for (std::size_t i = 0; i < area; ++i) gx[base + i] += n.grad[base + i] * a;
        }
        if (parent_needs(n, 1)) {
          T acc{0};
          for (std::size_t i = 0; i < area; ++i) acc += n.grad[base + i] * (X[base + i] - mu[c]) * inv_std[c];
          parent_grad(n, 1)[c] += acc;
        }
        if (parent_needs(n, 2)) {
          T acc{0};
          for (std::size_t i = 0; i < area; ++i) acc += n.grad[base + i];
          parent_grad(n, 2)[c] += acc;
        }
      }
  });
}

}  // namespace gramufen::ops
