#pragma once

#include <cstddef>
#include <string>

#include "gramufen/core/json_fields.hpp"

namespace gramufen {

struct TextEncoderConfig {
  // Table rows for the pretrained embedding source. The live table is sized
  // to the corpus vocabulary (capped at this value).
  std::size_t vocab_size = 8991;
  std::size_t embed_dim = 16;
  bool embed_frozen = false;
  double embed_dropout = 0.0;
  std::size_t lstm_layers = 2;
  std::size_t lstm_hidden_dim = 32;
  double lstm_dropout = 0.0;
  std::size_t sage_layers = 3;
  std::size_t sage_hidden_dim = 32;
  bool sage_l2_normalize = false;
  // ReLU follows every SAGE layer except the last unless this is set.
  bool sage_relu_after_last = false;
  double dropout_rate = 0.5;
  std::size_t projection_dim = 512;

  void validate() const {
    auto dim = [](std::size_t v, const char* name) {
      if (v < 1) throw Error(Errc::InvalidConfig, std::string("text encoder: ") + name + " must be >= 1");
    };
    auto rate = [](double r, const char* name) {
      if (!(r >= 0.0 && r < 1.0))
        throw Error(Errc::InvalidConfig, std::string("text encoder: ") + name + " must lie in [0, 1)");
    };
    dim(vocab_size, "vocab_size");
    dim(embed_dim, "embed_dim");
    dim(lstm_layers, "lstm_layers");
    dim(lstm_hidden_dim, "lstm_hidden_dim");
    dim(sage_layers, "sage_layers");
    dim(sage_hidden_dim, "sage_hidden_dim");
    dim(projection_dim, "projection_dim");
    rate(embed_dropout, "embed_dropout");
    rate(lstm_dropout, "lstm_dropout");
    rate(dropout_rate, "dropout_rate");
  }
};

enum class Backbone { Resnet152Pretrained, TinyCnnTest };

NLOHMANN_JSON_SERIALIZE_ENUM(Backbone, {{Backbone::Resnet152Pretrained, "resnet152-pretrained"},
                                        {Backbone::TinyCnnTest, "tiny-cnn-test"}})

struct ImageEncoderConfig {
  Backbone backbone = Backbone::TinyCnnTest;
  std::size_t feature_dim = 2048;
  std::size_t projection_dim = 512;
  std::string weights_path;

  void validate() const {
    if (feature_dim < 1 || projection_dim < 1)
      throw Error(Errc::InvalidConfig, "image encoder: dims must be >= 1");
    if (backbone == Backbone::Resnet152Pretrained && feature_dim != 2048)
      throw Error(Errc::InvalidConfig, "image encoder: resnet152 produces 2048 features, config says " +
                                           std::to_string(feature_dim));
  }
};

struct ClassifierConfig {
  std::size_t hidden_dim = 512;
};

#define GRAMUFEN_TEXT_FIELDS(X)                                                                            \
  X(vocab_size) X(embed_dim) X(embed_frozen) X(embed_dropout) X(lstm_layers) X(lstm_hidden_dim) X(lstm_dropout) \
  X(sage_layers) X(sage_hidden_dim) X(sage_l2_normalize) X(sage_relu_after_last) X(dropout_rate) X(projection_dim)

inline void to_json(json& j, const TextEncoderConfig& c) {
#define X(f) j[#f] = c.f;
  GRAMUFEN_TEXT_FIELDS(X)
#undef X
}

inline void from_json(const json& j, TextEncoderConfig& c) {
#define X(f) #f,
  detail::reject_unknown(j, {GRAMUFEN_TEXT_FIELDS(X)}, "text encoder");
#undef X
#define X(f) detail::read_field(j, #f, c.f);
  GRAMUFEN_TEXT_FIELDS(X)
#undef X
}

#undef GRAMUFEN_TEXT_FIELDS

inline void to_json(json& j, const ImageEncoderConfig& c) {
  j = json{{"backbone", c.backbone}, {"feature_dim", c.feature_dim}, {"projection_dim", c.projection_dim},
           {"weights_path", c.weights_path}};
}

inline void from_json(const json& j, ImageEncoderConfig& c) {
  detail::reject_unknown(j, {"backbone", "feature_dim", "projection_dim", "weights_path"}, "image encoder");
  detail::read_field(j, "backbone", c.backbone);
  detail::read_field(j, "feature_dim", c.feature_dim);
  detail::read_field(j, "projection_dim", c.projection_dim);
  detail::read_field(j, "weights_path", c.weights_path);
}

inline void to_json(json& j, const ClassifierConfig& c) { j = json{{"hidden_dim", c.hidden_dim}}; }

inline void from_json(const json& j, ClassifierConfig& c) {
  detail::reject_unknown(j, {"hidden_dim"}, "classifier");
  detail::read_field(j, "hidden_dim", c.hidden_dim);
}

namespace presets {

/// Word2vec-initialised encoder for the Twitter corpus.
inline TextEncoderConfig twitter_text() {
  TextEncoderConfig c;
  c.vocab_size = 3'000'000;
  c.embed_dim = 300;
  c.embed_frozen = true;
  c.lstm_layers = 3;
  c.lstm_hidden_dim = 256;
  c.lstm_dropout = 0.3;
  c.sage_layers = 3;
  c.sage_hidden_dim = 512;
  c.sage_l2_normalize = true;
  c.dropout_rate = 0.5;
  return c;
}

/// Encoder trained from scratch on the Weibo corpus.
inline TextEncoderConfig weibo_text() {
  TextEncoderConfig c;
  c.vocab_size = 8991;
  c.embed_dim = 16;
  c.embed_frozen = false;
  c.embed_dropout = 0.5;
  c.lstm_layers = 2;
  c.lstm_hidden_dim = 32;
  c.lstm_dropout = 0.0;
  c.sage_layers = 3;
  c.sage_hidden_dim = 32;
  c.sage_l2_normalize = false;
  c.dropout_rate = 0.5;
  return c;
}

inline ImageEncoderConfig resnet152_image(std::string weights_path = {}) {
  return ImageEncoderConfig{Backbone::Resnet152Pretrained, 2048, 512, std::move(weights_path)};
}

}  // namespace presets

}  // namespace gramufen
