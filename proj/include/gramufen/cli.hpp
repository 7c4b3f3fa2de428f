#pragma once

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "gramufen/eval/evaluate.hpp"
#include "gramufen/eval/plot.hpp"
#include "gramufen/training/trainer.hpp"

namespace gramufen {

namespace cli_detail {

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string manifest;
  std::string image_root;
  std::string out_dir;
  bool deterministic = false;
};

inline void add_common(CLI::App* cmd, CommonOptions& o, bool manifest_required) {
  cmd->add_option("--config", o.config_path, "JSON config; fields override the preset");
  cmd->add_option("--preset", o.preset, "named training preset");
  cmd->add_option("--seed", o.seed, "random seed");
  auto* m = cmd->add_option("--manifest", o.manifest, "tab-separated dataset manifest");
  if (manifest_required) m->required();
  cmd->add_option("--image-root", o.image_root, "directory image paths are relative to (default: manifest dir)");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_flag("--deterministic", o.deterministic, "decode images on the training thread only");
}

inline TrainConfig resolve_config(const CommonOptions& o, TaskKind task) {
  TrainConfig c;
  if (!o.preset.empty()) c = presets::train_preset(o.preset);
  c.task = task;
  if (!o.config_path.empty()) {
    std::ifstream is(o.config_path);
    if (!is) throw Error(Errc::IoError, "cannot open config " + o.config_path);
    json j;
    try {
      j = json::parse(is);
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidConfig, o.config_path + ": " + e.what());
    }
    merge_json(j, c);
    c.task = task;
  }
  if (o.seed) c.seed = *o.seed;
  if (o.deterministic) {
    c.deterministic = true;
    c.decode_workers = 0;
  }
  c.validate();
  return c;
}

inline std::optional<std::filesystem::path> image_root_of(const CommonOptions& o) {
  if (o.image_root.empty()) return std::nullopt;
  return std::filesystem::path(o.image_root);
}

struct SplitSamples {
  std::vector<Sample> train, val;
};

/// Cleans and deduplicates the manifest, then takes its train and val
/// splits. Without val rows, validation data is carved out of train.
inline SplitSamples training_split(const DatasetManifest& manifest, const TrainConfig& config,
                                   std::vector<DropRecord>& dropped) {
  SplitSamples out;
  for (auto& s : deduplicate(clean_samples(manifest.samples, &dropped))) {
    if (s.split == Split::Train) out.train.push_back(std::move(s));
    else if (s.split == Split::Val) out.val.push_back(std::move(s));
  }
  if (out.val.empty()) std::tie(out.train, out.val) = split_train_val(out.train, config.val_fraction, config.seed);
  return out;
}

inline int run_training(TaskKind task, const CommonOptions& o, const std::string& text_ckpt,
                        const std::string& image_ckpt, std::ostream& out, std::ostream& err) {
  auto config = resolve_config(o, task);
  const std::filesystem::path out_dir = o.out_dir.empty() ? std::filesystem::path("runs") / std::string(task_name(task))
                                                          : std::filesystem::path(o.out_dir);
  std::filesystem::create_directories(out_dir);
  const auto manifest = load_manifest(o.manifest, image_root_of(o));
  std::vector<DropRecord> dropped = manifest.dropped;

  std::optional<Archive> text_init, image_init;
  if (!text_ckpt.empty()) text_init = Archive::load(text_ckpt);
  if (!image_ckpt.empty()) image_init = Archive::load(image_ckpt);

  const auto split = training_split(manifest, config, dropped);
  // A text warm start fixes the vocabulary; otherwise it comes from the
  // cleaned training texts.
  const Vocab vocab = text_init ? read_checkpoint_info(*text_init).vocab : build_training_vocab(split.train, config);
  TrainData data;
  data.train = std::make_shared<const std::vector<Example>>(prepare_examples(split.train, vocab, manifest.image_root, &dropped));
  data.val = std::make_shared<const std::vector<Example>>(prepare_examples(split.val, vocab, manifest.image_root, &dropped));
  {
    std::ofstream drops(out_dir / "drops.log");
    write_drop_log(drops, dropped);
  }
  if (!dropped.empty()) err << dropped.size() << " samples dropped (see " << (out_dir / "drops.log").string() << ")\n";
  err << "train " << data.train->size() << ", val " << data.val->size() << ", vocab "
      << vocab.size() << '\n';

  RunOptions run{out_dir, &err};
  TrainResult result;
  switch (task) {
    case TaskKind::TextPretrain: result = pretrain_text<float>(data, vocab, config, run); break;
    case TaskKind::ImagePretrain: result = pretrain_image<float>(data, vocab, config, run); break;
    case TaskKind::Combined:
      result = train_combined<float>(data, vocab, config, text_init ? &*text_init : nullptr,
                                     image_init ? &*image_init : nullptr, run);
      break;
  }
  const auto ckpt_path = out_dir / "checkpoint.gmf";
  result.checkpoint.save(ckpt_path);
  json hist = json::array();
  for (const auto& e : result.history.epochs) hist.push_back(e);
  std::ofstream(out_dir / "history.json") << hist.dump(2) << '\n';
  {
    std::ofstream steps(out_dir / "steps.csv");
    steps << "epoch,step,loss,pre_clip_norm,post_clip_norm\n";
    for (const auto& s : result.history.steps)
      steps << s.epoch << ',' << s.step << ',' << s.loss << ',' << s.pre_clip_norm << ',' << s.post_clip_norm << '\n';
  }
  plot_curves(result.history.epochs, out_dir);
  out << "best epoch " << result.history.best_epoch << ", validation loss " << result.history.best_monitored << '\n';
  out << "checkpoint: " << ckpt_path.string() << '\n';
  return 0;
}

}  // namespace cli_detail

/// Entry point behind the `gramufen` executable. Returns 0 on success, 1 on
/// a usage error (synopsis on `err`), 2 when the command itself fails.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multimodal fake-news detection: graph text encoder + CNN image encoder", "gramufen"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  cli_detail::CommonOptions pt, pi, tr;
  auto* cmd_pt = app.add_subcommand("pretrain-text", "train the text encoder with a linear classifier");
  cli_detail::add_common(cmd_pt, pt, true);
  auto* cmd_pi = app.add_subcommand("pretrain-image", "train the image encoder with a linear classifier");
  cli_detail::add_common(cmd_pi, pi, true);
  std::string text_ckpt, image_ckpt;
  auto* cmd_tr = app.add_subcommand("train", "train the combined multimodal model");
  cli_detail::add_common(cmd_tr, tr, true);
  cmd_tr->add_option("--text-checkpoint", text_ckpt, "warm-start the text encoder from a pretrain-text checkpoint");
  cmd_tr->add_option("--image-checkpoint", image_ckpt, "warm-start the image encoder from a pretrain-image checkpoint");

  cli_detail::CommonOptions ev;
  std::string ev_ckpt, ev_split = "test";
  std::optional<std::size_t> ev_batch;
  auto* cmd_ev = app.add_subcommand("evaluate", "score a checkpoint on one manifest split");
  cli_detail::add_common(cmd_ev, ev, true);
  cmd_ev->add_option("--checkpoint", ev_ckpt, "checkpoint archive")->required();
  cmd_ev->add_option("--split", ev_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  cmd_ev->add_option("--batch-size", ev_batch, "override the checkpoint's batch size");

  std::string gi_text;
  std::size_t gi_window = 2;
  auto* cmd_gi = app.add_subcommand("graph-inspect", "print the sentence graph of a text");
  cmd_gi->add_option("--text", gi_text, "input text")->required();
  cmd_gi->add_option("--window", gi_window, "context window size")->check(CLI::PositiveNumber);

  std::string pl_log, pl_out = ".";
  auto* cmd_pl = app.add_subcommand("plot", "render learning curves from a training log");
  cmd_pl->add_option("--log", pl_log, "train_log.jsonl from a training run")->required();
  cmd_pl->add_option("--out", pl_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*cmd_pt) return cli_detail::run_training(TaskKind::TextPretrain, pt, "", "", out, err);
    if (*cmd_pi) return cli_detail::run_training(TaskKind::ImagePretrain, pi, "", "", out, err);
    if (*cmd_tr) return cli_detail::run_training(TaskKind::Combined, tr, text_ckpt, image_ckpt, out, err);
    if (*cmd_ev) {
      const auto manifest = load_manifest(ev.manifest, cli_detail::image_root_of(ev));
      const auto samples = manifest.subset(parse_split(ev_split));
      if (samples.empty()) throw Error(Errc::EmptyBatch, "manifest has no '" + ev_split + "' samples");
      const auto result = evaluate<float>(Archive::load(ev_ckpt), samples, manifest.image_root, ev_batch);
      out << format_report(result.metrics);
      if (!ev.out_dir.empty()) {
        std::filesystem::create_directories(ev.out_dir);
        const std::filesystem::path dir(ev.out_dir);
        std::ofstream(dir / "predictions.csv") << [&] {
          std::ostringstream os;
          write_predictions(os, result.inference.rows);
          return os.str();
        }();
        json report = result.metrics;
        report["split"] = ev_split;
        report["loss"] = {{"l_c", result.inference.l_c}, {"l_s", result.inference.l_s}, {"total", result.inference.total}};
        std::ofstream(dir / "report.json") << report.dump(2) << '\n';
        std::ofstream(dir / "report.txt") << format_report(result.metrics);
        std::ofstream drops(dir / "drops.log");
        write_drop_log(drops, manifest.dropped);
        write_drop_log(drops, result.inference.dropped);
      }
      return 0;
    }
    if (*cmd_gi) {
      const auto vocab = build_vocab({gi_text});
      write_graph_dump(out, sentence_to_graph(tokenize(gi_text, vocab), gi_window));
      return 0;
    }
    if (*cmd_pl) {
      const auto files = plot_curves(read_epoch_log(pl_log), pl_out);
      out << files.image.string() << '\n' << files.series.string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace gramufen
