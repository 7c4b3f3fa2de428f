#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <vector>

#include "gramufen/model.hpp"

namespace gramufen {

struct ClipResult {
  double pre_norm = 0.0;
  double post_norm = 0.0;
  bool clipped = false;
};

template <class T>
double global_norm(const std::vector<Tensor<T>*>& grads) {
  double sq = 0.0;
  for (const auto* g : grads)
    for (std::size_t i = 0; i < g->numel(); ++i) sq += double((*g)[i]) * double((*g)[i]);
  return std::sqrt(sq);
}

/// Scales every gradient by clip_norm / g when the global L2 norm g exceeds
/// clip_norm; otherwise leaves them untouched.
template <class T>
ClipResult clip_gradients(const std::vector<Tensor<T>*>& grads, double clip_norm) {
  if (!(clip_norm > 0.0)) throw Error(Errc::InvalidConfig, "clip_norm must be > 0");
  ClipResult r;
  r.pre_norm = global_norm(grads);
  r.post_norm = r.pre_norm;
  if (r.pre_norm > clip_norm) {
    const double scale = clip_norm / r.pre_norm;
    for (auto* g : grads)
      for (auto& v : g->storage()) v = static_cast<T>(double(v) * scale);
    r.clipped = true;
    r.post_norm = global_norm(grads);
  }
  return r;
}

template <class T>
ClipResult clip_gradients(std::vector<Tensor<T>>& grads, double clip_norm) {
  std::vector<Tensor<T>*> ptrs;
  for (auto& g : grads) ptrs.push_back(&g);
  return clip_gradients(ptrs, clip_norm);
}

/// Gradients of the trainable parameters that received one this step.
template <class T>
std::vector<Tensor<T>*> trainable_grads(const ParamList<T>& params) {
  std::vector<Tensor<T>*> out;
  for (auto* p : params)
    if (p->trainable && p->var.has_grad()) out.push_back(&p->var.grad_buffer());
  return out;
}

template <class T>
void zero_grads(const ParamList<T>& params) {
  for (auto* p : params)
    if (p->var) p->var.zero_grad();
}

/// Adam with decoupled weight decay:
///   p <- p - lr * wd * p
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Parameters flagged `decay = false` skip the decay term; untrainable ones
/// are never touched.
template <class T>
class AdamW {
 public:
  struct Hyper {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  };

  AdamW(GroupedParams<T> groups, Hyper hyper) : groups_(std::move(groups)), hyper_(hyper) {
    for (const auto& [g, list] : groups_)
      for (auto* p : list)
        if (p->trainable) state_.emplace(p, Moments{Tensor<double>(p->var.shape()), Tensor<double>(p->var.shape())});
  }

  /// One update with the given per-group learning rates and weight decays.
  void step(const std::map<ParamGroup, double>& lr, const std::map<ParamGroup, double>& weight_decay) {
    ++t_;
    const double c1 = 1.0 - std::pow(hyper_.beta1, double(t_));
    const double c2 = 1.0 - std::pow(hyper_.beta2, double(t_));
    for (const auto& [g, list] : groups_) {
      const double rate = lr.at(g);
      const double wd = weight_decay.at(g);
      for (auto* p : list) {
        if (!p->trainable || !p->var.has_grad()) continue;
        auto& st = state_.at(p);
        auto& value = p->var.mutable_value();
        const auto& grad = p->var.grad();
        const bool decay = p->decay && wd > 0.0;
        for (std::size_t i = 0; i < value.numel(); ++i) {
          double w = value[i];
          const double gi = grad[i];
          if (decay) w -= rate * wd * w;
          st.m[i] = hyper_.beta1 * st.m[i] + (1.0 - hyper_.beta1) * gi;
          st.v[i] = hyper_.beta2 * st.v[i] + (1.0 - hyper_.beta2) * gi * gi;
          const double m_hat = st.m[i] / c1;
          const double v_hat = st.v[i] / c2;
          w -= rate * m_hat / (std::sqrt(v_hat) + hyper_.eps);
          value[i] = static_cast<T>(w);
        }
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  struct Moments {
    Tensor<double> m, v;
  };
  GroupedParams<T> groups_;
  Hyper hyper_;
  std::map<const Parameter<T>*, Moments> state_;
  std::size_t t_ = 0;
};

/// Reduce-on-plateau over a single monitored value; every group shares the
/// firing count, and each group's rate is initial * factor^firings.
class PlateauScheduler {
 public:
  static constexpr double kThreshold = 1e-8;

  PlateauScheduler(double factor, std::size_t patience) : factor_(factor), patience_(patience) {
    if (!(factor > 0.0 && factor < 1.0)) throw Error(Errc::InvalidConfig, "scheduler factor must lie in (0, 1)");
  }

  /// Returns true when this observation triggered a reduction.
  bool step(double monitored) {
    if (monitored < best_ - kThreshold) {
      best_ = monitored;
      bad_epochs_ = 0;
      return false;
    }
    ++bad_epochs_;
    if (bad_epochs_ > patience_) {
      ++firings_;
      bad_epochs_ = 0;
      return true;
    }
    return false;
  }

  double scale() const { return std::pow(factor_, double(firings_)); }
  double lr(double initial) const { return initial * scale(); }
  std::size_t firings() const { return firings_; }
  std::size_t bad_epochs() const { return bad_epochs_; }
  double best() const { return best_; }
  double factor() const { return factor_; }
  std::size_t patience() const { return patience_; }

 private:
  double factor_;
  std::size_t patience_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs_ = 0;
  std::size_t firings_ = 0;
};

}  // namespace gramufen
