#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gramufen/eval/metrics.hpp"
#include "gramufen/training/trainer.hpp"

namespace gramufen {

struct EvaluationResult {
  MetricsReport metrics;
  InferenceResult inference;
};

inline MetricsReport metrics_from_rows(const std::vector<PredictionRow>& rows) {
  std::vector<Label> pred, truth;
  for (const auto& r : rows) {
    pred.push_back(r.predicted);
    truth.push_back(r.truth);
  }
  return compute_metrics(pred, truth);
}

/// Scores already-prepared examples with a loaded model.
template <class T>
EvaluationResult evaluate_examples(TaskModel<T>& model, std::shared_ptr<const std::vector<Example>> examples,
                                   const TrainConfig& config) {
  EvaluationResult r;
  r.inference = run_inference(model, std::move(examples), config);
  r.metrics = metrics_from_rows(r.inference.rows);
  return r;
}

/// Loads a checkpoint and scores `samples` with it. Texts are cleaned and
/// tokenized with the checkpoint's own vocabulary. Nothing is shared
/// between calls.
template <class T>
EvaluationResult evaluate(const Archive& checkpoint, const std::vector<Sample>& samples,
                          const std::filesystem::path& image_root, std::optional<std::size_t> batch_size = {}) {
  auto loaded = load_model<T>(checkpoint);
  auto config = loaded.info.config;
  if (batch_size) config.batch_size = *batch_size;
  std::vector<DropRecord> dropped;
  auto cleaned = clean_samples(samples, &dropped);
  auto examples = std::make_shared<const std::vector<Example>>(
      prepare_examples(cleaned, loaded.info.vocab, image_root, &dropped));
  if (examples->empty()) throw Error(Errc::EmptyBatch, "no usable samples to evaluate");
  auto r = evaluate_examples(*loaded.model, examples, config);
  r.inference.dropped.insert(r.inference.dropped.begin(), dropped.begin(), dropped.end());
  return r;
}

/// Line-oriented dump: header, then `id,true,predicted,p_fake` per sample.
inline void write_predictions(std::ostream& os, const std::vector<PredictionRow>& rows) {
  os << "id,true,predicted,p_fake\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.p_fake);
    os << r.id << ',' << label_name(r.truth) << ',' << label_name(r.predicted) << ',' << buf << '\n';
  }
}

inline std::vector<PredictionRow> read_predictions(std::istream& is) {
  std::vector<PredictionRow> rows;
  std::string line;
  if (!std::getline(is, line) || line.rfind("id,true,predicted,p_fake", 0) != 0)
    throw Error(Errc::ParseError, "prediction dump lacks its header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_on(line, ',');
    if (f.size() != 4) throw Error(Errc::ParseError, "prediction row needs 4 fields: " + line);
    rows.push_back({f[0], parse_label(f[1]), parse_label(f[2]), std::stod(f[3])});
  }
  return rows;
}

}  // namespace gramufen
