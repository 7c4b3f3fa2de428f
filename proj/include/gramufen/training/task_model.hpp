#pragma once

#include <memory>
#include <random>

#include "gramufen/data/batching.hpp"
#include "gramufen/model.hpp"
#include "gramufen/training/config.hpp"

namespace gramufen {

template <class T>
struct StepOutputs {
  Var<T> probs;  // B x 2
  Var<T> l_c;
  Var<T> l_s;    // null for pretraining tasks
  Var<T> total;
};

/// Uniform face over the three trainable setups so one loop drives them all.
template <class T>
class TaskModel {
 public:
  virtual ~TaskModel() = default;
  virtual TaskKind kind() const = 0;
  virtual bool needs_images() const = 0;
  virtual StepOutputs<T> forward(const Batch<T>& batch, bool training, std::mt19937_64& rng) = 0;
  virtual GroupedParams<T> params() = 0;
  /// The text encoder, when the task has one (for embedding setup).
  virtual TextEncoder<T>* text_encoder() { return nullptr; }
};

template <class T>
class TextPretrainTask final : public TaskModel<T> {
 public:
  TextPretrainTask(const ModelConfig& config, std::mt19937_64& rng) : model_(config.text, rng) {}
  TaskKind kind() const override { return TaskKind::TextPretrain; }
  bool needs_images() const override { return false; }
  StepOutputs<T> forward(const Batch<T>& batch, bool training, std::mt19937_64& rng) override {
    StepOutputs<T> out;
    out.probs = model_(batch.graph, training, rng);
    out.l_c = classification_loss(out.probs, batch.labels);
    out.total = out.l_c;
    return out;
  }
  GroupedParams<T> params() override { return model_.params(); }
  TextEncoder<T>* text_encoder() override { return &model_.encoder(); }
  TextPretrainModel<T>& model() { return model_; }

 private:
  TextPretrainModel<T> model_;
};

template <class T>
class ImagePretrainTask final : public TaskModel<T> {
 public:
  ImagePretrainTask(const ModelConfig& config, std::mt19937_64& rng, bool load_backbone_weights)
      : model_(config.image, rng, load_backbone_weights) {}
  TaskKind kind() const override { return TaskKind::ImagePretrain; }
  bool needs_images() const override { return true; }
  StepOutputs<T> forward(const Batch<T>& batch, bool, std::mt19937_64&) override {
    StepOutputs<T> out;
    out.probs = model_(Var<T>(batch.images));
    out.l_c = classification_loss(out.probs, batch.labels);
    out.total = out.l_c;
    return out;
  }
  GroupedParams<T> params() override { return model_.params(); }
  ImagePretrainModel<T>& model() { return model_; }

 private:
  ImagePretrainModel<T> model_;
};

template <class T>
class CombinedTask final : public TaskModel<T> {
 public:
  CombinedTask(const ModelConfig& config, std::mt19937_64& rng, bool load_backbone_weights)
      : model_(config, rng, load_backbone_weights) {}
  TaskKind kind() const override { return TaskKind::Combined; }
  bool needs_images() const override { return true; }
  StepOutputs<T> forward(const Batch<T>& batch, bool training, std::mt19937_64& rng) override {
    auto fwd = model_(batch.graph, Var<T>(batch.images), training, rng);
    StepOutputs<T> out;
    out.probs = fwd.probs;
    out.l_c = classification_loss(fwd.probs, batch.labels);
    out.l_s = similarity(fwd.z_text, fwd.z_img).l_s;
    out.total = total_loss(out.l_c, out.l_s);
    return out;
  }
  GroupedParams<T> params() override { return model_.params(); }
  TextEncoder<T>* text_encoder() override { return &model_.text_encoder(); }
  MultiModalModel<T>& model() { return model_; }

 private:
  MultiModalModel<T> model_;
};

template <class T>
std::unique_ptr<TaskModel<T>> make_task_model(TaskKind kind, const ModelConfig& config, std::mt19937_64& rng,
                                              bool load_backbone_weights = true) {
  switch (kind) {
    case TaskKind::TextPretrain: return std::make_unique<TextPretrainTask<T>>(config, rng);
    case TaskKind::ImagePretrain: return std::make_unique<ImagePretrainTask<T>>(config, rng, load_backbone_weights);
    case TaskKind::Combined: return std::make_unique<CombinedTask<T>>(config, rng, load_backbone_weights);
  }
  throw Error(Errc::InvalidConfig, "unknown task kind");
}

}  // namespace gramufen
