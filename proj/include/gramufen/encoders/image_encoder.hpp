#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <variant>

#include "gramufen/core/archive.hpp"
#include "gramufen/encoders/backbones.hpp"
#include "gramufen/encoders/config.hpp"

namespace gramufen {

/// CNN backbone producing (B x feature_dim) image features. The projection
/// head is held separately, next to the text head.
template <class T>
class ImageEncoder {
 public:
  ImageEncoder() = default;

  /// For the ResNet-152 backbone the weights file named in the config must
  /// exist; it is an archive whose arrays use torchvision parameter names.
  /// Pass `load_weights = false` when every parameter is about to be
  /// restored from a checkpoint anyway.
  ImageEncoder(const ImageEncoderConfig& config, std::mt19937_64& rng, bool load_weights = true) : config_(config) {
    config_.validate();
    if (config_.backbone == Backbone::TinyCnnTest) {
      backbone_.template emplace<TinyCnn<T>>(config_.feature_dim, rng);
      return;
    }
    if (!load_weights) {
      backbone_.template emplace<ResNet152<T>>(rng);
      return;
    }
    if (config_.weights_path.empty() || !std::filesystem::exists(config_.weights_path))
      throw Error(Errc::BackboneWeightsMissing,
                  "resnet152-pretrained needs a weights archive; not found at '" + config_.weights_path + "'");
    auto& net = backbone_.template emplace<ResNet152<T>>(rng);
    ParamList<T> params;
    net.collect(params, "");
    Archive::load(config_.weights_path).restore(params);
  }

  const ImageEncoderConfig& config() const { return config_; }
  std::size_t output_dim() const { return config_.feature_dim; }

  Var<T> operator()(const Var<T>& images) const {
    if (images.value().dim() != 4 || images.value().size(1) != 3)
      throw Error(Errc::DimensionMismatch, "image encoder expects (B, 3, H, W), got " + shape_str(images.shape()));
    return std::visit([&](const auto& net) { return net(images); }, backbone_);
  }

  void collect(ParamList<T>& out, const std::string& prefix) {
    std::visit([&](auto& net) { net.collect(out, prefix); }, backbone_);
  }

 private:
  ImageEncoderConfig config_;
  std::variant<TinyCnn<T>, ResNet152<T>> backbone_;
};

}  // namespace gramufen
