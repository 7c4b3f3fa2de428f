#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include "gramufen/core/archive.hpp"
#include "gramufen/training/task_model.hpp"

// A checkpoint is an Archive whose metadata holds the task kind, the full
// training config (model dims included) and the vocabulary; its arrays are
// every model parameter and buffer by name.
namespace gramufen {

inline constexpr std::string_view kCheckpointFormat = "gramufen-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct CheckpointInfo {
  TaskKind task = TaskKind::Combined;
  TrainConfig config;
  Vocab vocab;
  json summary;
};

template <class T>
Archive make_checkpoint(TaskModel<T>& model, const TrainConfig& config, const Vocab& vocab, json summary = {}) {
  Archive a;
  a.metadata = {{"format", kCheckpointFormat},
                {"version", kCheckpointVersion},
                {"task", model.kind()},
                {"config", config},
                {"vocab", vocab.tokens()},
                {"summary", summary.is_null() ? json::object() : summary}};
  a.put(flatten(model.params()));
  return a;
}

inline CheckpointInfo read_checkpoint_info(const Archive& a) {
  const auto& m = a.metadata;
  if (!m.is_object() || m.value("format", std::string{}) != kCheckpointFormat)
    throw Error(Errc::CheckpointMismatch, "archive is not a model checkpoint");
  if (m.value("version", 0) != kCheckpointVersion)
    throw Error(Errc::CheckpointMismatch, "unsupported checkpoint version " + m.value("version", json(0)).dump());
  CheckpointInfo info;
  try {
    info.task = m.at("task").get<TaskKind>();
    info.config = m.at("config").get<TrainConfig>();
    info.vocab = Vocab::from_id_order(m.at("vocab").get<std::vector<std::string>>());
    info.summary = m.value("summary", json::object());
  } catch (const json::exception& e) {
    throw Error(Errc::CheckpointMismatch, std::string("checkpoint metadata: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::CheckpointMismatch, std::string("checkpoint metadata: ") + e.what());
  }
  info.config.task = info.task;
  return info;
}

template <class T>
struct LoadedModel {
  CheckpointInfo info;
  std::unique_ptr<TaskModel<T>> model;
};

/// Rebuilds the model a checkpoint describes and fills in its parameters.
/// Names and shapes must agree exactly in both directions.
template <class T>
LoadedModel<T> load_model(const Archive& archive, std::optional<TaskKind> expected = std::nullopt) {
  LoadedModel<T> out;
  out.info = read_checkpoint_info(archive);
  if (expected && *expected != out.info.task)
    throw Error(Errc::CheckpointMismatch, "checkpoint holds a " + std::string(task_name(out.info.task)) +
                                              " model, expected " + std::string(task_name(*expected)));
  std::mt19937_64 rng(0);
  try {
    out.model = make_task_model<T>(out.info.task, out.info.config.model, rng, false);
  } catch (const Error& e) {
    throw Error(Errc::CheckpointMismatch, std::string("checkpoint config: ") + e.what());
  }
  const auto params = flatten(out.model->params());
  std::set<std::string> names;
  for (const auto* p : params) names.insert(p->name);
  for (const auto& [name, _] : archive.arrays)
    if (!names.count(name)) throw Error(Errc::CheckpointMismatch, "checkpoint has unexpected array " + name);
  archive.restore(params);
  return out;
}

template <class T>
LoadedModel<T> load_model(const std::filesystem::path& path, std::optional<TaskKind> expected = std::nullopt) {
  return load_model<T>(Archive::load(path), expected);
}

/// Copies the parameters of one component (all names starting with
/// `prefix`) from a checkpoint into `params`.
template <class T>
void warm_start(const Archive& source, const ParamList<T>& params, const std::string& prefix) {
  ParamList<T> subset;
  for (auto* p : params)
    if (p->name.rfind(prefix, 0) == 0) subset.push_back(p);
  if (subset.empty()) throw Error(Errc::CheckpointMismatch, "model has no parameters under '" + prefix + "'");
  source.restore(subset);
}

}  // namespace gramufen
