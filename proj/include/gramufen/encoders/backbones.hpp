#pragma once

#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "gramufen/core/conv_ops.hpp"
#include "gramufen/core/parameter.hpp"

namespace gramufen {

template <class T>
struct Conv2d {
  Parameter<T> weight;
  Parameter<T> bias;
  std::size_t stride = 1, padding = 0;

  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride_, std::size_t padding_,
         bool with_bias, std::mt19937_64& rng)
      : stride(stride_), padding(padding_) {
    // He initialisation on fan-out, as for ReLU networks.
    const double std_dev = std::sqrt(2.0 / double(out * kernel * kernel));
    weight = make_param<T>("weight", normal_tensor<T>({out, in, kernel, kernel}, std_dev, rng));
    if (with_bias)
      bias = make_param<T>("bias", uniform_tensor<T>({out}, fan_in_bound(in * kernel * kernel), rng), true, false);
  }

  Var<T> operator()(const Var<T>& x) const { return ops::conv2d(x, weight.var, bias.var, stride, padding); }

  void collect(ParamList<T>& out, const std::string& prefix) {
    weight.name = prefix + "weight";
    out.push_back(&weight);
    if (bias.var) {
      bias.name = prefix + "bias";
      out.push_back(&bias);
    }
  }
};

/// Batch norm that always normalises with its stored running statistics.
/// Scale and shift stay trainable; the statistics are buffers.
template <class T>
struct FrozenBatchNorm {
  Parameter<T> gamma, beta, running_mean, running_var;
  static constexpr double kEps = 1e-5;

  FrozenBatchNorm() = default;
  explicit FrozenBatchNorm(std::size_t channels)
      : gamma(make_param<T>("weight", Tensor<T>({channels}, T{1}))),
        beta(make_param<T>("bias", Tensor<T>({channels}, T{0}), true, false)),
        running_mean(make_param<T>("running_mean", Tensor<T>({channels}, T{0}), false, false)),
        running_var(make_param<T>("running_var", Tensor<T>({channels}, T{1}), false, false)) {}

  Var<T> operator()(const Var<T>& x) const {
    return ops::frozen_batch_norm(x, gamma.var, beta.var, running_mean.var.value(), running_var.var.value(),
                                  static_cast<T>(kEps));
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    gamma.name = prefix + "weight";
    beta.name = prefix + "bias";
    running_mean.name = prefix + "running_mean";
    running_var.name = prefix + "running_var";
    for (auto* p : {&gamma, &beta, &running_mean, &running_var}) out.push_back(p);
  }
};

/// Two conv blocks, a pool and a dense map to `feature_dim`. Accepts any
/// spatial size; exists so tests run without pretrained weights.
template <class T>
class TinyCnn {
 public:
  TinyCnn() = default;
  TinyCnn(std::size_t feature_dim, std::mt19937_64& rng)
      : conv1_(3, 8, 3, 1, 1, true, rng), conv2_(8, 16, 3, 1, 1, true, rng), fc_(16, feature_dim, rng) {}

  Var<T> operator()(const Var<T>& images) const {
    auto x = ops::relu(conv1_(images));
    x = ops::max_pool2d(x, 2, 2, 0);
    x = ops::relu(conv2_(x));
    return fc_(ops::global_avg_pool2d(x));
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    conv1_.collect(out, prefix + "conv1.");
    conv2_.collect(out, prefix + "conv2.");
    fc_.collect(out, prefix + "fc.");
  }

 private:
  Conv2d<T> conv1_, conv2_;
  Linear<T> fc_;
};

/// ResNet-152 trunk (bottleneck blocks 3-8-36-3, stride on the 3x3 conv)
/// ending in global average pooling, i.e. (B, 3, H, W) -> (B, 2048).
/// Parameter names follow the torchvision state dict so converted weights
/// load by name; the final fc layer is not part of the trunk.
template <class T>
class ResNet152 {
 public:
  static constexpr std::size_t kFeatureDim = 2048;
  static constexpr std::array<std::size_t, 4> kBlocks{3, 8, 36, 3};

  ResNet152() = default;
  explicit ResNet152(std::mt19937_64& rng) : conv1_(3, 64, 7, 2, 3, false, rng), bn1_(64) {
    std::size_t in = 64;
    for (std::size_t stage = 0; stage < 4; ++stage) {
      const std::size_t width = 64u << stage;
      std::vector<Bottleneck> blocks;
      for (std::size_t b = 0; b < kBlocks[stage]; ++b) {
        const std::size_t stride = (b == 0 && stage > 0) ? 2 : 1;
        blocks.emplace_back(in, width, stride, rng);
        in = width * 4;
      }
      stages_.push_back(std::move(blocks));
    }
  }

  Var<T> operator()(const Var<T>& images) const {
    auto x = ops::relu(bn1_(conv1_(images)));
    x = ops::max_pool2d(x, 3, 2, 1);
    for (const auto& stage : stages_)
      for (const auto& block : stage) x = block(x);
    return ops::global_avg_pool2d(x);
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    conv1_.collect(out, prefix + "conv1.");
    bn1_.collect(out, prefix + "bn1.");
    for (std::size_t s = 0; s < stages_.size(); ++s)
      for (std::size_t b = 0; b < stages_[s].size(); ++b)
        stages_[s][b].collect(out, prefix + "layer" + std::to_string(s + 1) + "." + std::to_string(b) + ".");
  }

 private:
  struct Bottleneck {
    Conv2d<T> conv1, conv2, conv3;
    FrozenBatchNorm<T> bn1, bn2, bn3;
    bool has_downsample = false;
    Conv2d<T> down_conv;
    FrozenBatchNorm<T> down_bn;

    Bottleneck(std::size_t in, std::size_t width, std::size_t stride, std::mt19937_64& rng)
        : conv1(in, width, 1, 1, 0, false, rng),
          conv2(width, width, 3, stride, 1, false, rng),
          conv3(width, width * 4, 1, 1, 0, false, rng),
          bn1(width),
          bn2(width),
          bn3(width * 4),
          has_downsample(stride != 1 || in != width * 4) {
      if (has_downsample) {
        down_conv = Conv2d<T>(in, width * 4, 1, stride, 0, false, rng);
        down_bn = FrozenBatchNorm<T>(width * 4);
      }
    }

    Var<T> operator()(const Var<T>& x) const {
      auto y = ops::relu(bn1(conv1(x)));
      y = ops::relu(bn2(conv2(y)));
      y = bn3(conv3(y));
      auto shortcut = has_downsample ? down_bn(down_conv(x)) : x;
      return ops::relu(ops::add(y, shortcut));
    }

    void collect(ParamList<T>& out, const std::string& p) {
      conv1.collect(out, p + "conv1.");
      bn1.collect(out, p + "bn1.");
      conv2.collect(out, p + "conv2.");
      bn2.collect(out, p + "bn2.");
      conv3.collect(out, p + "conv3.");
      bn3.collect(out, p + "bn3.");
      if (has_downsample) {
        down_conv.collect(out, p + "downsample.0.");
        down_bn.collect(out, p + "downsample.1.");
      }
    }
  };

  Conv2d<T> conv1_;
  FrozenBatchNorm<T> bn1_;
  std::vector<std::vector<Bottleneck>> stages_;
};

}  // namespace gramufen
