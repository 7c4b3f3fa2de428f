#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gramufen/core/ops.hpp"

namespace gramufen {

/// A named tensor owned by a module. Buffers (e.g. frozen batch-norm
/// statistics) are parameters that never receive gradients.
template <class T>
struct Parameter {
  std::string name;
  Var<T> var;
  bool trainable = true;
  bool decay = true;  // weight decay applies
};

template <class T>
using ParamList = std::vector<Parameter<T>*>;

template <class T>
Parameter<T> make_param(std::string name, Tensor<T> value, bool trainable = true, bool decay = true) {
  Parameter<T> p{std::move(name), Var<T>(std::move(value), trainable), trainable, decay};
  return p;
}

template <class T>
void set_trainable(Parameter<T>& p, bool trainable) {
  p.trainable = trainable;
  p.var.set_requires_grad(trainable);
}

/// Uniform(-bound, bound) fill, the default initializer for dense layers
/// with bound = 1/sqrt(fan_in).
template <class T>
Tensor<T> uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.storage()) v = static_cast<T>(dist(rng));
  return t;
}

template <class T>
Tensor<T> normal_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.storage()) v = static_cast<T>(dist(rng));
  return t;
}

inline double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

/// Dense layer y = x W^T + b.
template <class T>
struct Linear {
  Parameter<T> weight;
  Parameter<T> bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng, bool with_bias = true)
      : weight(make_param<T>("weight", uniform_tensor<T>({out, in}, fan_in_bound(in), rng))) {
    if (with_bias) bias = make_param<T>("bias", uniform_tensor<T>({out}, fan_in_bound(in), rng), true, false);
  }

  std::size_t in_features() const { return weight.var.value().cols(); }
  std::size_t out_features() const { return weight.var.value().rows(); }

  Var<T> operator()(const Var<T>& x) const {
    if (x.value().cols() != in_features())
      throw Error(Errc::DimensionMismatch, "linear layer expects width " + std::to_string(in_features()) +
                                               ", got " + shape_str(x.shape()));
    return ops::linear(x, weight.var, bias.var);
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    weight.name = prefix + "weight";
    out.push_back(&weight);
    if (bias.var) {
      bias.name = prefix + "bias";
      out.push_back(&bias);
    }
  }
};

}  // namespace gramufen
