#pragma once

#include <array>
#include <map>
#include <random>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "gramufen/encoders/image_encoder.hpp"
#include "gramufen/encoders/sage.hpp"
#include "gramufen/encoders/text_encoder.hpp"
#include "gramufen/fusion.hpp"

namespace gramufen {

enum class ParamGroup { TextEncoder, TextHead, ImageEncoder, ImageHead, Classifier };

inline constexpr std::array<ParamGroup, 5> kAllGroups{ParamGroup::TextEncoder, ParamGroup::TextHead,
                                                      ParamGroup::ImageEncoder, ParamGroup::ImageHead,
                                                      ParamGroup::Classifier};

NLOHMANN_JSON_SERIALIZE_ENUM(ParamGroup, {{ParamGroup::TextEncoder, "text_encoder"},
                                          {ParamGroup::TextHead, "text_head"},
                                          {ParamGroup::ImageEncoder, "image_encoder"},
                                          {ParamGroup::ImageHead, "image_head"},
                                          {ParamGroup::Classifier, "classifier"}})

inline std::string_view group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::TextEncoder: return "text_encoder";
    case ParamGroup::TextHead: return "text_head";
    case ParamGroup::ImageEncoder: return "image_encoder";
    case ParamGroup::ImageHead: return "image_head";
    case ParamGroup::Classifier: return "classifier";
  }
  return "classifier";
}

struct ModelConfig {
  TextEncoderConfig text;
  ImageEncoderConfig image;
  ClassifierConfig classifier;
};

inline void to_json(json& j, const ModelConfig& c) {
  j = json{{"text", c.text}, {"image", c.image}, {"classifier", c.classifier}};
}

inline void from_json(const json& j, ModelConfig& c) {
  detail::reject_unknown(j, {"text", "image", "classifier"}, "model");
  detail::read_field(j, "text", c.text);
  detail::read_field(j, "image", c.image);
  detail::read_field(j, "classifier", c.classifier);
}

template <class T>
using GroupedParams = std::map<ParamGroup, ParamList<T>>;

template <class T>
ParamList<T> flatten(const GroupedParams<T>& groups) {
  ParamList<T> out;
  for (const auto& [g, list] : groups) out.insert(out.end(), list.begin(), list.end());
  return out;
}

// Models hand out raw pointers to their parameters, so they are pinned in
// memory once built.

/// Text encoder with a dense two-class head on the pooled graph features.
template <class T>
class TextPretrainModel {
 public:
  TextPretrainModel(const TextEncoderConfig& config, std::mt19937_64& rng)
      : encoder_(config, rng), head_(config.sage_hidden_dim, 2, rng) {}
  TextPretrainModel(const TextPretrainModel&) = delete;
  TextPretrainModel& operator=(const TextPretrainModel&) = delete;

  /// (B x 2) class probabilities.
  Var<T> operator()(const BatchedGraph& graph, bool training, std::mt19937_64& rng) const {
    return ops::row_softmax(head_(encoder_(graph, training, rng)));
  }

  TextEncoder<T>& encoder() { return encoder_; }

  GroupedParams<T> params() {
    GroupedParams<T> g;
    encoder_.collect(g[ParamGroup::TextEncoder], "text_encoder.");
    head_.collect(g[ParamGroup::Classifier], "text_pretrain_head.");
    return g;
  }

 private:
  TextEncoder<T> encoder_;
  Linear<T> head_;
};

/// Image backbone with a dense two-class head on its features.
template <class T>
class ImagePretrainModel {
 public:
  ImagePretrainModel(const ImageEncoderConfig& config, std::mt19937_64& rng, bool load_backbone_weights = true)
      : encoder_(config, rng, load_backbone_weights), head_(config.feature_dim, 2, rng) {}
  ImagePretrainModel(const ImagePretrainModel&) = delete;
  ImagePretrainModel& operator=(const ImagePretrainModel&) = delete;

  Var<T> operator()(const Var<T>& images) const { return ops::row_softmax(head_(encoder_(images))); }

  ImageEncoder<T>& encoder() { return encoder_; }

  GroupedParams<T> params() {
    GroupedParams<T> g;
    encoder_.collect(g[ParamGroup::ImageEncoder], "image_encoder.");
    head_.collect(g[ParamGroup::Classifier], "image_pretrain_head.");
    return g;
  }

 private:
  ImageEncoder<T> encoder_;
  Linear<T> head_;
};

template <class T>
struct MultiModalOutput {
  Var<T> z_text;  // B x projection_dim
  Var<T> z_img;   // B x projection_dim
  Var<T> probs;   // B x 2
};

/// Both encoders, their projection heads and the concatenation classifier.
template <class T>
class MultiModalModel {
 public:
  MultiModalModel(const ModelConfig& config, std::mt19937_64& rng, bool load_backbone_weights = true)
      : config_(config),
        text_encoder_(config.text, rng),
        text_head_(config.text.sage_hidden_dim, config.text.projection_dim, rng),
        image_encoder_(config.image, rng, load_backbone_weights),
        image_head_(config.image.feature_dim, config.image.projection_dim, rng),
        classifier_(config.text.projection_dim + config.image.projection_dim, config.classifier.hidden_dim, rng) {
    if (config.text.projection_dim != config.image.projection_dim)
      throw Error(Errc::InvalidConfig, "text and image projection widths differ: " +
                                           std::to_string(config.text.projection_dim) + " vs " +
                                           std::to_string(config.image.projection_dim));
  }
  MultiModalModel(const MultiModalModel&) = delete;
  MultiModalModel& operator=(const MultiModalModel&) = delete;

  const ModelConfig& config() const { return config_; }

  Var<T> encode_text(const BatchedGraph& graph, bool training, std::mt19937_64& rng) const {
    return text_head_(text_encoder_(graph, training, rng));
  }

  Var<T> encode_image(const Var<T>& images) const { return image_head_(image_encoder_(images)); }

  MultiModalOutput<T> operator()(const BatchedGraph& graph, const Var<T>& images, bool training,
                                 std::mt19937_64& rng) const {
    if (graph.graph_count != images.value().size(0))
      throw Error(Errc::DimensionMismatch, "batch has " + std::to_string(graph.graph_count) + " texts and " +
                                               std::to_string(images.value().size(0)) + " images");
    MultiModalOutput<T> out;
    out.z_text = encode_text(graph, training, rng);
    out.z_img = encode_image(images);
    out.probs = classify(out.z_text, out.z_img, classifier_);
    return out;
  }

  TextEncoder<T>& text_encoder() { return text_encoder_; }
  ProjectionHead<T>& text_head() { return text_head_; }
  ImageEncoder<T>& image_encoder() { return image_encoder_; }
  ProjectionHead<T>& image_head() { return image_head_; }
  Classifier<T>& classifier() { return classifier_; }

  GroupedParams<T> params() {
    GroupedParams<T> g;
    text_encoder_.collect(g[ParamGroup::TextEncoder], "text_encoder.");
    text_head_.collect(g[ParamGroup::TextHead], "text_head.");
    image_encoder_.collect(g[ParamGroup::ImageEncoder], "image_encoder.");
    image_head_.collect(g[ParamGroup::ImageHead], "image_head.");
    classifier_.collect(g[ParamGroup::Classifier], "classifier.");
    return g;
  }

 private:
  ModelConfig config_;
  TextEncoder<T> text_encoder_;
  ProjectionHead<T> text_head_;
  ImageEncoder<T> image_encoder_;
  ProjectionHead<T> image_head_;
  Classifier<T> classifier_;
};

}  // namespace gramufen
