#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "gramufen/training/trainer.hpp"
#include "oracles.hpp"

namespace testing_support {

using namespace gramufen;

inline oracle::Mat to_mat(const Tensor<double>& t) {
  oracle::Mat m = oracle::zeros(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  return m;
}

inline oracle::Vec to_vec(const Tensor<double>& t) { return oracle::Vec(t.storage().begin(), t.storage().end()); }

inline Tensor<double> from_mat(const oracle::Mat& m) {
  Tensor<double> t({m.size(), m.front().size()});
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) t(i, j) = m[i][j];
  return t;
}

inline double max_abs_diff(const Tensor<double>& t, const oracle::Mat& m) {
  double d = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) d = std::max(d, std::abs(t(i, j) - m[i][j]));
  return d;
}

/// Two well-separated classes: each class has its own word pool and image
/// stripe orientation; shared filler words and pixel noise blur the edges.
struct SyntheticSet {
  std::vector<Sample> samples;
  std::vector<std::shared_ptr<const Tensor<float>>> images;
};

inline SyntheticSet make_synthetic(std::size_t n, std::uint64_t seed, std::size_t side = 16) {
  const std::vector<std::string> fake_words{"shocking", "hoax", "unbelievable", "viral", "secret", "exposed"};
  const std::vector<std::string> real_words{"official", "report", "confirmed", "update", "statement", "press"};
  const std::vector<std::string> filler{"the", "news", "today", "city", "people", "photo"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(4, 8), pick(0, 5);
  std::bernoulli_distribution from_class(0.6);
  std::normal_distribution<double> noise(0.0, 0.3);
  SyntheticSet s;
  for (std::size_t k = 0; k < n; ++k) {
    const bool fake = k % 2 == 0;
    std::string text;
    const std::size_t words = len(rng);
    for (std::size_t w = 0; w < words; ++w) {
      const auto& pool = from_class(rng) ? (fake ? fake_words : real_words) : filler;
      text += (w ? " " : "") + pool[pick(rng)];
    }
    Tensor<float> img({3, side, side});
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          const std::size_t stripe = fake ? y : x;
          img[(c * side + y) * side + x] = float(((stripe / 2) % 2 ? 1.0 : -1.0) + noise(rng));
        }
    Sample smp;
    smp.id = "s" + std::to_string(k);
    smp.text = text;
    smp.image_refs = {"mem" + std::to_string(k) + ".png"};
    smp.label = fake ? Label::Fake : Label::Real;
    s.samples.push_back(smp);
    s.images.push_back(std::make_shared<const Tensor<float>>(std::move(img)));
  }
  return s;
}

inline std::shared_ptr<const std::vector<Example>> to_examples(const SyntheticSet& s, const Vocab& vocab) {
  auto out = std::make_shared<std::vector<Example>>();
  for (std::size_t k = 0; k < s.samples.size(); ++k)
    out->push_back({s.samples[k].id, tokenize(s.samples[k].text, vocab), s.images[k], s.samples[k].label});
  return out;
}

inline Vocab vocab_of(const SyntheticSet& s) {
  std::vector<std::string> corpus;
  for (const auto& smp : s.samples) corpus.push_back(smp.text);
  return build_vocab(corpus);
}

/// Train and validation examples drawn from one synthetic set; the
/// vocabulary covers both.
struct SyntheticData {
  TrainData data;
  Vocab vocab;
};

inline SyntheticData synthetic_data(std::size_t n_train, std::size_t n_val, std::uint64_t seed) {
  const auto set = make_synthetic(n_train + n_val, seed);
  SyntheticData out{{}, vocab_of(set)};
  const auto all = to_examples(set, out.vocab);
  out.data.train = std::make_shared<const std::vector<Example>>(all->begin(), all->begin() + long(n_train));
  out.data.val = std::make_shared<const std::vector<Example>>(all->begin() + long(n_train), all->end());
  return out;
}

/// Small encoder stack used by the training-level tests.
inline ModelConfig tiny_model(std::size_t vocab_size) {
  ModelConfig m;
  m.text.vocab_size = vocab_size;
  m.text.embed_dim = 8;
  m.text.lstm_layers = 1;
  m.text.lstm_hidden_dim = 8;
  m.text.sage_layers = 2;
  m.text.sage_hidden_dim = 8;
  m.text.dropout_rate = 0.1;
  m.text.projection_dim = 8;
  m.image.backbone = Backbone::TinyCnnTest;
  m.image.feature_dim = 8;
  m.image.projection_dim = 8;
  m.classifier.hidden_dim = 16;
  return m;
}

inline TrainConfig tiny_train_config(std::size_t vocab_size, std::size_t epochs, std::uint64_t seed = 7) {
  TrainConfig c;
  c.task = TaskKind::Combined;
  c.model = tiny_model(vocab_size);
  c.epochs = epochs;
  c.batch_size = 8;
  c.set_all_groups(5e-3, 0.01);
  c.scheduler = {0.9, 2, Monitor::Auto};
  c.clip_norm = 1.0;
  c.seed = seed;
  return c;
}

/// Central finite differences over every element of every trainable
/// parameter. Relative error uses max(|analytic|, |numeric|, floor).
struct GradCheck {
  double max_rel_error = 0;
  std::string worst;
  std::size_t checked = 0;
};

inline GradCheck finite_difference_check(const ParamList<double>& params, const std::function<Var<double>()>& loss,
                                         double h = 1e-5, double floor = 1e-6) {
  zero_grads(params);
  backward(loss());
  std::vector<Tensor<double>> analytic;
  for (auto* p : params)
    analytic.push_back(p->var.has_grad() ? p->var.grad() : Tensor<double>(p->var.shape()));
  GradCheck r;
  NoGradGuard guard;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto* p = params[k];
    if (!p->trainable) continue;
    auto& value = p->var.mutable_value();
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double orig = value[i];
      value[i] = orig + h;
      const double up = scalar(loss());
      value[i] = orig - h;
      const double down = scalar(loss());
      value[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++r.checked;
      if (rel > r.max_rel_error) {
        r.max_rel_error = rel;
        r.worst = p->name + "[" + std::to_string(i) + "] analytic=" + std::to_string(a) +
                  " numeric=" + std::to_string(numeric);
      }
    }
  }
  return r;
}

}  // namespace testing_support
