#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gramufen/core/json_fields.hpp"
#include "gramufen/data/images.hpp"
#include "gramufen/model.hpp"

namespace gramufen {

enum class TaskKind { TextPretrain, ImagePretrain, Combined };

NLOHMANN_JSON_SERIALIZE_ENUM(TaskKind, {{TaskKind::TextPretrain, "text-pretrain"},
                                        {TaskKind::ImagePretrain, "image-pretrain"},
                                        {TaskKind::Combined, "combined"}})

inline std::string_view task_name(TaskKind k) {
  switch (k) {
    case TaskKind::TextPretrain: return "text-pretrain";
    case TaskKind::ImagePretrain: return "image-pretrain";
    case TaskKind::Combined: return "combined";
  }
  return "combined";
}

/// Which validation loss drives the plateau scheduler and model selection.
/// Auto picks the total loss for combined training and the classification
/// loss for pretraining.
enum class Monitor { Auto, Total, Classification };

NLOHMANN_JSON_SERIALIZE_ENUM(Monitor, {{Monitor::Auto, "auto"},
                                       {Monitor::Total, "val_total"},
                                       {Monitor::Classification, "val_classification"}})

struct GroupHyper {
  double lr = 1e-3;
  double weight_decay = 0.01;
};

struct SchedulerConfig {
  double factor = 0.9;
  std::size_t patience = 2;
  Monitor monitor = Monitor::Auto;
};

struct TrainConfig {
  TaskKind task = TaskKind::Combined;
  ModelConfig model;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::map<ParamGroup, GroupHyper> groups{{ParamGroup::TextEncoder, {}},
                                          {ParamGroup::TextHead, {}},
                                          {ParamGroup::ImageEncoder, {}},
                                          {ParamGroup::ImageHead, {}},
                                          {ParamGroup::Classifier, {}}};
  SchedulerConfig scheduler;
  double clip_norm = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool mixed_precision = false;
  bool deterministic = true;
  std::uint64_t seed = 0;
  std::size_t window_size = 2;
  double val_fraction = 0.2;
  std::size_t min_token_freq = 1;
  std::size_t image_size = kImageSize;
  std::size_t decode_workers = 0;
  std::string word_vectors_path;
  std::string word_vectors_format = "text";  // "text" or "binary"

  Monitor monitor() const {
    if (scheduler.monitor != Monitor::Auto) return scheduler.monitor;
    return task == TaskKind::Combined ? Monitor::Total : Monitor::Classification;
  }

  void set_all_groups(double lr, double weight_decay) {
    for (auto g : kAllGroups) groups[g] = GroupHyper{lr, weight_decay};
  }

  const GroupHyper& group(ParamGroup g) const {
    auto it = groups.find(g);
    if (it == groups.end())
      throw Error(Errc::InvalidConfig, "no hyperparameters for group " + std::string(group_name(g)));
    return it->second;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(Errc::InvalidConfig, m); };
    if (epochs < 1) fail("epochs must be >= 1");
    if (batch_size < 1) fail("batch_size must be >= 1");
    for (auto g : kAllGroups) {
      const auto& h = group(g);
      if (!(h.lr > 0.0) || !std::isfinite(h.lr)) fail("learning rate for " + std::string(group_name(g)) + " must be > 0");
      if (!(h.weight_decay >= 0.0)) fail("weight decay for " + std::string(group_name(g)) + " must be >= 0");
    }
    if (!(scheduler.factor > 0.0 && scheduler.factor < 1.0)) fail("scheduler factor must lie in (0, 1)");
    if (!(clip_norm > 0.0)) fail("clip_norm must be > 0");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam betas must lie in [0, 1)");
    if (!(adam_eps > 0.0)) fail("adam_eps must be > 0");
    if (window_size < 1) fail("window_size must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) fail("val_fraction must lie in (0, 1)");
    if (min_token_freq < 1) fail("min_token_freq must be >= 1");
    if (image_size < 1) fail("image_size must be >= 1");
    if (word_vectors_format != "text" && word_vectors_format != "binary")
      fail("word_vectors_format must be 'text' or 'binary'");
    model.text.validate();
    model.image.validate();
  }
};

inline void to_json(json& j, const GroupHyper& h) { j = json{{"lr", h.lr}, {"weight_decay", h.weight_decay}}; }

inline void from_json(const json& j, GroupHyper& h) {
  detail::reject_unknown(j, {"lr", "weight_decay"}, "group");
  detail::read_field(j, "lr", h.lr);
  detail::read_field(j, "weight_decay", h.weight_decay);
}

inline void to_json(json& j, const SchedulerConfig& s) {
  j = json{{"factor", s.factor}, {"patience", s.patience}, {"monitor", s.monitor}};
}

inline void from_json(const json& j, SchedulerConfig& s) {
  detail::reject_unknown(j, {"factor", "patience", "monitor"}, "scheduler");
  detail::read_field(j, "factor", s.factor);
  detail::read_field(j, "patience", s.patience);
  detail::read_field(j, "monitor", s.monitor);
}

#define GRAMUFEN_TRAIN_SCALARS(X)                                                                                  \
  X(epochs) X(batch_size) X(clip_norm) X(adam_beta1) X(adam_beta2) X(adam_eps) X(mixed_precision) X(deterministic) \
  X(seed) X(window_size) X(val_fraction) X(min_token_freq) X(image_size) X(decode_workers) X(word_vectors_path)    \
  X(word_vectors_format)

inline void to_json(json& j, const TrainConfig& c) {
  j = json::object();
  j["task"] = c.task;
  j["model"] = c.model;
  json groups = json::object();
  for (const auto& [g, h] : c.groups) groups[std::string(group_name(g))] = h;
  j["groups"] = groups;
  j["scheduler"] = c.scheduler;
#define X(f) j[#f] = c.f;
  GRAMUFEN_TRAIN_SCALARS(X)
#undef X
}

/// Fields absent from `j` keep the values already in `c`, so a config file
/// can override a preset selectively. "lr" and "weight_decay" at top level
/// set every group at once; "groups" entries then refine single groups.
inline void merge_json(const json& j, TrainConfig& c) {
#define X(f) #f,
  detail::reject_unknown(j, {"task", "model", "groups", "scheduler", "lr", "weight_decay", GRAMUFEN_TRAIN_SCALARS(X)},
                         "train config");
#undef X
  detail::read_field(j, "task", c.task);
  if (auto it = j.find("model"); it != j.end()) {
    json merged = c.model;
    merged.merge_patch(*it);
    c.model = merged.get<ModelConfig>();
  }
  if (auto it = j.find("lr"); it != j.end())
    for (auto g : kAllGroups) detail::read_field(j, "lr", c.groups[g].lr);
  if (auto it = j.find("weight_decay"); it != j.end())
    for (auto g : kAllGroups) detail::read_field(j, "weight_decay", c.groups[g].weight_decay);
  if (auto it = j.find("groups"); it != j.end()) {
    if (!it->is_object()) throw Error(Errc::InvalidConfig, "groups must be an object");
    for (auto g = it->begin(); g != it->end(); ++g) {
      ParamGroup key{};
      bool found = false;
      for (auto candidate : kAllGroups)
        if (group_name(candidate) == g.key()) key = candidate, found = true;
      if (!found) throw Error(Errc::InvalidConfig, "unknown parameter group '" + g.key() + "'");
      json merged = c.groups[key];
      merged.merge_patch(g.value());
      c.groups[key] = merged.get<GroupHyper>();
    }
  }
  if (auto it = j.find("scheduler"); it != j.end()) {
    json merged = c.scheduler;
    merged.merge_patch(*it);
    c.scheduler = merged.get<SchedulerConfig>();
  }
#define X(f) detail::read_field(j, #f, c.f);
  GRAMUFEN_TRAIN_SCALARS(X)
#undef X
}

#undef GRAMUFEN_TRAIN_SCALARS

inline void from_json(const json& j, TrainConfig& c) {
  c = TrainConfig{};
  merge_json(j, c);
}

namespace presets {

inline constexpr std::array<std::string_view, 6> kTrainPresetNames{
    "twitter-text-pretrain", "twitter-image-pretrain", "twitter-combined",
    "weibo-text-pretrain",   "weibo-image-pretrain",   "weibo-combined"};

inline TrainConfig twitter_text_pretrain() {
  TrainConfig c;
  c.task = TaskKind::TextPretrain;
  c.model.text = twitter_text();
  c.model.image = resnet152_image();
  c.epochs = 30;
  c.batch_size = 256;
  c.set_all_groups(3e-3, 0.01);
  c.scheduler = {0.8, 3, Monitor::Auto};
  return c;
}

inline TrainConfig twitter_image_pretrain() {
  TrainConfig c;
  c.task = TaskKind::ImagePretrain;
  c.model.text = twitter_text();
  c.model.image = resnet152_image();
  c.epochs = 10;
  c.batch_size = 128;
  c.set_all_groups(1e-4, 0.07);
  c.scheduler = {0.7, 5, Monitor::Auto};
  return c;
}

inline TrainConfig twitter_combined() {
  TrainConfig c;
  c.task = TaskKind::Combined;
  c.model.text = twitter_text();
  c.model.image = resnet152_image();
  c.epochs = 30;
  c.batch_size = 64;
  c.groups[ParamGroup::TextEncoder] = {1e-5, 0.07};
  c.groups[ParamGroup::TextHead] = {5e-3, 0.07};
  c.groups[ParamGroup::ImageEncoder] = {1e-7, 0.07};
  c.groups[ParamGroup::ImageHead] = {5e-3, 0.07};
  c.groups[ParamGroup::Classifier] = {5e-3, 0.07};
  c.scheduler = {0.9, 2, Monitor::Auto};
  return c;
}

inline TrainConfig weibo_text_pretrain() {
  TrainConfig c;
  c.task = TaskKind::TextPretrain;
  c.model.text = weibo_text();
  c.model.image = resnet152_image();
  c.epochs = 50;
  c.batch_size = 32;
  c.set_all_groups(5e-3, 0.01);
  c.scheduler = {0.8, 3, Monitor::Auto};
  return c;
}

inline TrainConfig weibo_image_pretrain() {
  TrainConfig c;
  c.task = TaskKind::ImagePretrain;
  c.model.text = weibo_text();
  c.model.image = resnet152_image();
  c.epochs = 30;
  c.batch_size = 64;
  c.set_all_groups(1e-4, 0.01);
  c.scheduler = {0.8, 5, Monitor::Auto};
  return c;
}

inline TrainConfig weibo_combined() {
  TrainConfig c;
  c.task = TaskKind::Combined;
  c.model.text = weibo_text();
  c.model.image = resnet152_image();
  c.epochs = 20;
  c.batch_size = 30;
  c.groups[ParamGroup::TextEncoder] = {5e-3, 0.01};
  c.groups[ParamGroup::TextHead] = {5e-3, 0.01};
  c.groups[ParamGroup::ImageEncoder] = {1e-7, 0.07};
  c.groups[ParamGroup::ImageHead] = {5e-3, 0.07};
  c.groups[ParamGroup::Classifier] = {5e-3, 0.01};
  c.scheduler = {0.9, 2, Monitor::Auto};
  return c;
}

inline TrainConfig train_preset(std::string_view name) {
  if (name == "twitter-text-pretrain") return twitter_text_pretrain();
  if (name == "twitter-image-pretrain") return twitter_image_pretrain();
  if (name == "twitter-combined") return twitter_combined();
  if (name == "weibo-text-pretrain") return weibo_text_pretrain();
  if (name == "weibo-image-pretrain") return weibo_image_pretrain();
  if (name == "weibo-combined") return weibo_combined();
  throw Error(Errc::InvalidConfig, "unknown preset '" + std::string(name) + "'");
}

}  // namespace presets

}  // namespace gramufen
