#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "gramufen/data/batching.hpp"
#include "gramufen/data/cleaning.hpp"
#include "gramufen/encoders/word_vectors.hpp"
#include "gramufen/training/checkpoint.hpp"
#include "gramufen/training/optim.hpp"

namespace gramufen {

/// Scheduler bookkeeping across epochs. Each group's current rate is its
/// initial rate times factor^firings.
struct TrainState {
  std::size_t epoch = 0;
  PlateauScheduler scheduler{0.9, 2};
  std::map<ParamGroup, double> initial_lr;
  std::map<ParamGroup, double> current_lr;
  // Epoch whose parameters are held as the best snapshot (0 = none yet).
  std::size_t best_epoch = 0;
  double best_monitored = std::numeric_limits<double>::infinity();

  double best_val_loss() const { return scheduler.best(); }
  std::size_t epochs_since_improvement() const { return scheduler.bad_epochs(); }
};

inline TrainState make_train_state(const TrainConfig& config) {
  TrainState s;
  s.scheduler = PlateauScheduler(config.scheduler.factor, config.scheduler.patience);
  for (auto g : kAllGroups) {
    s.initial_lr[g] = config.group(g).lr;
    s.current_lr[g] = config.group(g).lr;
  }
  return s;
}

/// Feeds one monitored validation value to the scheduler and refreshes the
/// group rates. Returns true when the rates were reduced.
inline bool scheduler_step(TrainState& state, double val_loss) {
  const bool fired = state.scheduler.step(val_loss);
  for (auto& [g, lr] : state.current_lr) lr = state.scheduler.lr(state.initial_lr.at(g));
  return fired;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_l_c = 0, train_l_s = 0, train_total = 0, train_accuracy = 0;
  double val_l_c = 0, val_l_s = 0, val_total = 0, val_accuracy = 0;
  std::map<ParamGroup, double> lr;  // rates used during this epoch
  bool lr_reduced = false;          // scheduler fired after this epoch
};

struct StepRecord {
  std::size_t epoch = 0, step = 0;
  double loss = 0, pre_clip_norm = 0, post_clip_norm = 0;
};

struct History {
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;
  std::size_t best_epoch = 0;
  double best_monitored = std::numeric_limits<double>::infinity();
};

inline void to_json(json& j, const EpochRecord& r) {
  json lr = json::object();
  for (const auto& [g, v] : r.lr) lr[std::string(group_name(g))] = v;
  j = json{{"epoch", r.epoch},           {"train_l_c", r.train_l_c},
           {"train_l_s", r.train_l_s},   {"train_total", r.train_total},
           {"train_accuracy", r.train_accuracy}, {"val_l_c", r.val_l_c},
           {"val_l_s", r.val_l_s},       {"val_total", r.val_total},
           {"accuracy", r.val_accuracy}, {"lr", lr},
           {"lr_reduced", r.lr_reduced}};
}

inline void from_json(const json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<std::size_t>();
  r.train_l_c = j.value("train_l_c", 0.0);
  r.train_l_s = j.value("train_l_s", 0.0);
  r.train_total = j.at("train_total").get<double>();
  r.train_accuracy = j.value("train_accuracy", 0.0);
  r.val_l_c = j.value("val_l_c", 0.0);
  r.val_l_s = j.value("val_l_s", 0.0);
  r.val_total = j.at("val_total").get<double>();
  r.val_accuracy = j.value("accuracy", 0.0);
  r.lr_reduced = j.value("lr_reduced", false);
  if (auto it = j.find("lr"); it != j.end())
    for (auto g : kAllGroups)
      if (it->contains(std::string(group_name(g)))) r.lr[g] = it->at(std::string(group_name(g))).get<double>();
}

/// Reads a line-delimited training log back into epoch records.
inline std::vector<EpochRecord> read_epoch_log(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::IoError, "cannot open training log " + path.string());
  std::vector<EpochRecord> out;
  std::size_t n = 0;
  for (std::string line; std::getline(is, line);) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<EpochRecord>());
    } catch (const json::exception& e) {
      throw Error(Errc::ParseError, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

struct PredictionRow {
  std::string id;
  Label truth = Label::Real;
  Label predicted = Label::Real;
  double p_fake = 0;
};

/// Sample-weighted losses over a data set plus per-sample predictions.
struct InferenceResult {
  double l_c = 0, l_s = 0, total = 0, accuracy = 0;
  std::vector<PredictionRow> rows;
  std::vector<DropRecord> dropped;
};

/// Threshold rule: argmax of the two-way softmax, ties going to fake.
inline Label predict_label(double p_fake) { return p_fake >= 0.5 ? Label::Fake : Label::Real; }

template <class T>
BatchOptions batch_options(const TrainConfig& c, const TaskModel<T>& model, bool shuffle, std::uint64_t seed) {
  BatchOptions o;
  o.batch_size = c.batch_size;
  o.window_size = c.window_size;
  o.shuffle = shuffle;
  o.seed = seed;
  o.image_size = c.image_size;
  o.decode_workers = c.decode_workers;
  o.load_images = model.needs_images();
  return o;
}

/// Runs the model in evaluation mode (no dropout, no graph recording).
template <class T>
InferenceResult run_inference(TaskModel<T>& model, std::shared_ptr<const std::vector<Example>> examples,
                              const TrainConfig& config) {
  if (!examples || examples->empty()) throw Error(Errc::EmptyBatch, "no examples to evaluate");
  NoGradGuard no_grad;
  std::mt19937_64 unused(0);
  auto stream = make_batches<T>(std::move(examples), batch_options(config, model, false, 0));
  InferenceResult r;
  double n = 0;
  std::size_t correct = 0;
  while (auto b = stream.next()) {
    auto out = model.forward(*b, false, unused);
    const double w = double(b->size());
    r.l_c += w * double(scalar(out.l_c));
    if (out.l_s) r.l_s += w * double(scalar(out.l_s));
    r.total += w * double(scalar(out.total));
    n += w;
    for (std::size_t i = 0; i < b->size(); ++i) {
      const double p_fake = double(out.probs.value()(i, 1));
      const Label pred = predict_label(p_fake);
      correct += pred == b->labels[i];
      r.rows.push_back({b->ids[i], b->labels[i], pred, p_fake});
    }
  }
  r.dropped = stream.dropped();
  if (n == 0) throw Error(Errc::EmptyBatch, "every example was dropped during evaluation");
  r.l_c /= n;
  r.l_s /= n;
  r.total /= n;
  r.accuracy = double(correct) / n;
  return r;
}

struct TrainData {
  std::shared_ptr<const std::vector<Example>> train;
  std::shared_ptr<const std::vector<Example>> val;
};

struct RunOptions {
  // When set, the per-epoch log (train_log.jsonl) and any diagnostic dump
  // are written here.
  std::optional<std::filesystem::path> out_dir;
  std::ostream* progress = nullptr;
};

struct TrainResult {
  History history;
  Archive checkpoint;
};

namespace detail {

template <class T>
[[noreturn]] void non_finite_abort(const StepOutputs<T>& out, const Batch<T>& batch, const ParamList<T>& params,
                                   std::size_t epoch, std::size_t step, const RunOptions& opts) {
  json dump;
  dump["epoch"] = epoch;
  dump["step"] = step;
  dump["batch_ids"] = batch.ids;
  auto val = [](const Var<T>& v) { return v ? json(double(scalar(v))) : json(nullptr); };
  dump["l_c"] = val(out.l_c);
  dump["l_s"] = val(out.l_s);
  dump["total"] = val(out.total);
  json p = json::object();
  for (const auto* param : params) {
    double sq = 0;
    bool finite = true;
    for (auto v : param->var.value().storage()) {
      sq += double(v) * double(v);
      finite = finite && std::isfinite(double(v));
    }
    p[param->name] = {{"norm", std::sqrt(sq)}, {"finite", finite}};
  }
  dump["parameters"] = p;
  std::string where;
  if (opts.out_dir) {
    std::filesystem::create_directories(*opts.out_dir);
    const auto path = *opts.out_dir / "nonfinite_dump.json";
    std::ofstream(path) << dump.dump(2) << '\n';
    where = "; diagnostics written to " + path.string();
  }
  throw Error(Errc::NonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch) + ", step " +
                                       std::to_string(step) + " (total=" + dump["total"].dump() + ")" + where);
}

inline std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return seed * 0x9E3779B97F4A7C15ULL + epoch;
}

}  // namespace detail

/// The shared optimisation loop: per-step clip and AdamW update, then a
/// validation pass feeding the plateau scheduler. The parameters of the
/// best-monitored epoch are restored at the end.
template <class T>
History fit(TaskModel<T>& model, const TrainData& data, const TrainConfig& config, const RunOptions& opts = {}) {
  config.validate();
  if (!data.train || data.train->empty()) throw Error(Errc::EmptyBatch, "training set is empty");
  if (!data.val || data.val->empty()) throw Error(Errc::EmptyBatch, "validation set is empty");
  if (config.mixed_precision && opts.progress)
    *opts.progress << "warning: mixed_precision has no effect on this CPU build; training in full precision\n";

  const auto groups = model.params();
  const auto params = flatten(groups);
  AdamW<T> optimizer(groups, {config.adam_beta1, config.adam_beta2, config.adam_eps});
  TrainState state = make_train_state(config);
  std::map<ParamGroup, double> decay;
  for (auto g : kAllGroups) decay[g] = config.group(g).weight_decay;

  std::optional<std::ofstream> log;
  if (opts.out_dir) {
    std::filesystem::create_directories(*opts.out_dir);
    log.emplace(*opts.out_dir / "train_log.jsonl");
  }

  std::vector<Tensor<T>> best_snapshot;
  std::mt19937_64 dropout_rng(config.seed + 1);
  History history;
  const bool use_total = config.monitor() == Monitor::Total;
  std::size_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    state.epoch = epoch;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = state.current_lr;
    auto stream = make_batches<T>(data.train, batch_options(config, model, true, detail::epoch_seed(config.seed, epoch)));
    double seen = 0;
    std::size_t correct = 0, step = 0;
    while (auto batch = stream.next()) {
      ++step;
      ++global_step;
      zero_grads(params);
      auto out = model.forward(*batch, true, dropout_rng);
      const double total = double(scalar(out.total));
      if (!std::isfinite(total)) detail::non_finite_abort(out, *batch, params, epoch, step, opts);
      backward(out.total);
      const auto clip = clip_gradients(trainable_grads(params), config.clip_norm);
      history.steps.push_back({epoch, global_step, total, clip.pre_norm, clip.post_norm});
      optimizer.step(state.current_lr, decay);

      const double w = double(batch->size());
      seen += w;
      rec.train_l_c += w * double(scalar(out.l_c));
      if (out.l_s) rec.train_l_s += w * double(scalar(out.l_s));
      rec.train_total += w * total;
      for (std::size_t i = 0; i < batch->size(); ++i)
        correct += predict_label(double(out.probs.value()(i, 1))) == batch->labels[i];
    }
    if (opts.progress)
      for (const auto& d : stream.dropped()) *opts.progress << "DROP " << d.id << ' ' << d.reason << '\n';
    if (seen == 0) throw Error(Errc::EmptyBatch, "every training example was dropped");
    rec.train_l_c /= seen;
    rec.train_l_s /= seen;
    rec.train_total /= seen;
    rec.train_accuracy = double(correct) / seen;

    const auto val = run_inference(model, data.val, config);
    rec.val_l_c = val.l_c;
    rec.val_l_s = val.l_s;
    rec.val_total = val.total;
    rec.val_accuracy = val.accuracy;
    const double monitored = use_total ? val.total : val.l_c;
    if (!std::isfinite(monitored))
      throw Error(Errc::NonFiniteLoss, "validation loss is non-finite at epoch " + std::to_string(epoch));

    if (monitored < state.best_monitored) {
      state.best_monitored = monitored;
      state.best_epoch = epoch;
      best_snapshot.clear();
      for (const auto* p : params) best_snapshot.push_back(p->var.value());
    }
    rec.lr_reduced = scheduler_step(state, monitored);
    history.epochs.push_back(rec);

    if (log) *log << json(rec).dump() << '\n' << std::flush;
    if (opts.progress)
      *opts.progress << "epoch " << epoch << "/" << config.epochs << " train_total=" << rec.train_total
                     << " val_total=" << rec.val_total << " val_acc=" << rec.val_accuracy
                     << (rec.lr_reduced ? " (lr reduced)" : "") << '\n';
  }

  for (std::size_t i = 0; i < params.size(); ++i) params[i]->var.mutable_value() = best_snapshot[i];
  history.best_epoch = state.best_epoch;
  history.best_monitored = state.best_monitored;
  return history;
}

/// Tokenizer vocabulary over the training texts, capped at the configured
/// table size.
inline Vocab build_training_vocab(const std::vector<Sample>& train, const TrainConfig& config) {
  std::vector<std::string> corpus;
  corpus.reserve(train.size());
  for (const auto& s : train) corpus.push_back(s.text);
  auto vocab = build_vocab(corpus, config.min_token_freq);
  vocab.truncate(config.model.text.vocab_size);
  return vocab;
}

namespace detail {

/// Sizes the embedding table to the vocabulary actually in use.
inline TrainConfig with_vocab(TrainConfig config, const Vocab& vocab) {
  if (vocab.size() > config.model.text.vocab_size)
    throw Error(Errc::InvalidConfig, "vocabulary has " + std::to_string(vocab.size()) +
                                         " entries, table allows " + std::to_string(config.model.text.vocab_size));
  config.model.text.vocab_size = vocab.size();
  return config;
}

template <class T>
void load_pretrained_embeddings(TaskModel<T>& model, const TrainConfig& config, const Vocab& vocab,
                                std::mt19937_64& rng, const RunOptions& opts) {
  if (config.word_vectors_path.empty() || !model.text_encoder()) return;
  WordVectorStats stats;
  const auto format = config.word_vectors_format == "binary" ? WordVectorFormat::Binary : WordVectorFormat::Text;
  model.text_encoder()->set_embedding_table(
      load_word_vectors<T>(config.word_vectors_path, format, vocab, config.model.text.embed_dim, rng, &stats));
  if (opts.progress)
    *opts.progress << "word vectors: " << stats.found << " found, " << stats.missing << " drawn at random\n";
}

template <class T>
TrainResult run_task(TaskKind kind, const TrainData& data, const Vocab& vocab, TrainConfig config,
                     const Archive* text_init, const Archive* image_init, const RunOptions& opts) {
  config.task = kind;
  config = with_vocab(std::move(config), vocab);
  config.validate();
  std::mt19937_64 rng(config.seed);
  auto model = make_task_model<T>(kind, config.model, rng);
  auto params = flatten(model->params());
  if (text_init) {
    const auto info = read_checkpoint_info(*text_init);
    if (info.vocab.tokens() != vocab.tokens())
      throw Error(Errc::CheckpointMismatch, "text checkpoint was trained with a different vocabulary");
    warm_start(*text_init, params, "text_encoder.");
  } else {
    load_pretrained_embeddings(*model, config, vocab, rng, opts);
  }
  if (image_init) warm_start(*image_init, params, "image_encoder.");

  TrainResult result;
  result.history = fit(*model, data, config, opts);
  json summary{{"best_epoch", result.history.best_epoch}, {"best_val_loss", result.history.best_monitored}};
  result.checkpoint = make_checkpoint(*model, config, vocab, summary);
  return result;
}

}  // namespace detail

/// Text encoder plus a dense two-class head, trained on text alone.
template <class T>
TrainResult pretrain_text(const TrainData& data, const Vocab& vocab, TrainConfig config, const RunOptions& opts = {}) {
  return detail::run_task<T>(TaskKind::TextPretrain, data, vocab, std::move(config), nullptr, nullptr, opts);
}

/// Image backbone plus a dense two-class head, trained on images alone.
template <class T>
TrainResult pretrain_image(const TrainData& data, const Vocab& vocab, TrainConfig config, const RunOptions& opts = {}) {
  return detail::run_task<T>(TaskKind::ImagePretrain, data, vocab, std::move(config), nullptr, nullptr, opts);
}

/// Full model on total = classification + similarity loss. Encoders may be
/// warm-started from pretraining checkpoints.
template <class T>
TrainResult train_combined(const TrainData& data, const Vocab& vocab, TrainConfig config,
                           const Archive* text_checkpoint = nullptr, const Archive* image_checkpoint = nullptr,
                           const RunOptions& opts = {}) {
  return detail::run_task<T>(TaskKind::Combined, data, vocab, std::move(config), text_checkpoint, image_checkpoint,
                             opts);
}

}  // namespace gramufen
