// Acceptance suite: one line per criterion, nonzero exit if any criterion
// fails. Run by ctest as `acceptance`.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "gramufen/data/cleaning.hpp"
#include "gramufen/eval/metrics.hpp"
#include "support/corpora.hpp"
#include "support/helpers.hpp"

using namespace gramufen;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Unattainable, Skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {Verdict::Fail, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const char* tag = "PASS";
  switch (o.verdict) {
    case Verdict::Pass: break;
    case Verdict::Fail: tag = "FAIL"; ++failures; break;
    case Verdict::Unattainable: tag = "UNATTAINABLE"; break;
    case Verdict::Skip: tag = "SKIP"; break;
  }
  std::printf("%-12s %-28s %s (%.2fs)\n", tag, name.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

Outcome check(bool ok, const std::string& detail) { return {ok ? Verdict::Pass : Verdict::Fail, detail}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Var<double> leaf(const oracle::Mat& m) { return Var<double>(from_mat(m)); }

Outcome graph_oracle() {
  std::size_t cases = 0, mismatches = 0;
  for (std::size_t n = 1; n <= 12; ++n)
    for (std::size_t w = 1; w <= 5; ++w) {
      TokenSeq s;
      for (std::size_t i = 0; i < n; ++i) s.ids.push_back(std::int64_t(2 + i));
      const auto g = sentence_to_graph(s, w);
      const std::set<Edge> got(g.edges.begin(), g.edges.end());
      mismatches += got != oracle::window_edges(n, w) || got.size() != g.edges.size();
      ++cases;
    }
  return check(mismatches == 0, std::to_string(cases) + " (length, window) cases, " + std::to_string(mismatches) +
                                    " mismatches");
}

Outcome equation_oracles() {
  constexpr int kInstances = 25;
  constexpr double kTol = 1e-6;
  std::map<std::string, double> worst;
  for (int k = 0; k < kInstances; ++k) {
    std::mt19937_64 rng(1000 + k);
    const std::size_t b = 1 + k % 5, d = 2 + k % 4;
    // global_mean_pool
    std::vector<std::size_t> graph_of;
    for (std::size_t g = 0; g < b; ++g)
      for (std::size_t r = 0; r <= (g + k) % 3; ++r) graph_of.push_back(g);
    const auto nodes = oracle::random_mat(graph_of.size(), d, rng);
    worst["pool"] = std::max(worst["pool"], max_abs_diff(global_mean_pool(leaf(nodes), graph_of, b).value(),
                                                          oracle::mean_pool(nodes, graph_of, b)));
    // projection head
    ProjectionHead<double> head(d + 1, d, rng);
    const auto x = oracle::random_mat(b, d + 1, rng);
    const auto ref_proj = oracle::project(x, to_mat(head.first().weight.var.value()), to_vec(head.first().bias.var.value()),
                                          to_mat(head.second().weight.var.value()), to_vec(head.second().bias.var.value()));
    worst["project"] = std::max(worst["project"], max_abs_diff(project(head, leaf(x)).value(), ref_proj));
    // P, E, similarity loss
    const auto zt = oracle::random_mat(b, d, rng), zi = oracle::random_mat(b, d, rng);
    worst["P"] = std::max(worst["P"], max_abs_diff(similarity_logits(leaf(zt), leaf(zi)).value(), oracle::gram(zt, zi)));
    worst["E"] = std::max(worst["E"], max_abs_diff(expected_matrix(leaf(zt), leaf(zi)).value(), oracle::expected(zt, zi)));
    const auto sim = similarity(leaf(zt), leaf(zi));
    const auto ref_sim = oracle::similarity_loss(zt, zi);
    worst["l_s"] = std::max({worst["l_s"], std::abs(scalar(sim.l_text) - ref_sim.l_text),
                             std::abs(scalar(sim.l_img) - ref_sim.l_img), std::abs(scalar(sim.l_s) - ref_sim.l_s)});
    // classifier and classification loss
    Classifier<double> cls(2 * d, 3, rng);
    const auto z = classify(leaf(zt), leaf(zi), cls).value();
    const auto ref_z = oracle::classify(zt, zi, to_mat(cls.hidden().weight.var.value()), to_vec(cls.hidden().bias.var.value()),
                                        to_vec(cls.hidden_bias().var.value()), to_mat(cls.output().weight.var.value()));
    worst["classify"] = std::max(worst["classify"], max_abs_diff(z, ref_z));
    std::vector<int> labels(b);
    for (auto& l : labels) l = int(rng() % 2);
    worst["l_c"] = std::max(worst["l_c"], std::abs(scalar(classification_loss(leaf(ref_z), labels)) -
                                                   oracle::classification_loss(ref_z, labels)));
  }
  double overall = 0;
  std::string detail;
  for (const auto& [name, err] : worst) {
    overall = std::max(overall, err);
    detail += name + "=" + fmt("%.1e", err) + " ";
  }
  return check(overall < kTol, std::to_string(kInstances) + " instances per equation, max abs error: " + detail);
}

Outcome e_rows() {
  std::mt19937_64 rng(7);
  double worst = 0;
  bool in_range = true;
  for (int k = 0; k < 100; ++k) {
    const std::size_t b = 1 + k % 9, d = 1 + k % 6;
    const auto e = expected_matrix(leaf(oracle::random_mat(b, d, rng, 2.0)), leaf(oracle::random_mat(b, d, rng, 2.0))).value();
    for (std::size_t i = 0; i < b; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < b; ++j) {
        s += e(i, j);
        in_range = in_range && e(i, j) > 0 && e(i, j) <= 1;
      }
      worst = std::max(worst, std::abs(s - 1));
    }
  }
  return check(worst <= 1e-6 && in_range, "100 pairs, max |row sum - 1| = " + fmt("%.1e", worst));
}

// Swapping modalities maps P to P^T but leaves E unchanged (its Gram sum is
// symmetric in the two inputs), so with the row-softmax target and the
// transposed image term the two orders differ by mean(P * (E^T - E)). That
// vanishes only when E is symmetric, so the criterion cannot hold for
// general inputs. The line reports the measured gap and confirms it equals
// the closed form; it does not count as a failure.
Outcome loss_symmetry() {
  std::mt19937_64 rng(11);
  double max_gap = 0, max_formula_err = 0;
  std::size_t within = 0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t b = 2 + k % 5, d = 2 + k % 3;
    const auto zt = oracle::random_mat(b, d, rng), zi = oracle::random_mat(b, d, rng);
    const double fwd = scalar(similarity(leaf(zt), leaf(zi)).l_s);
    const double rev = scalar(similarity(leaf(zi), leaf(zt)).l_s);
    const auto p = oracle::gram(zt, zi), e = oracle::expected(zt, zi);
    double closed = 0;
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = 0; j < b; ++j) closed += p[i][j] * (e[j][i] - e[i][j]);
    closed /= double(b * b);
    max_gap = std::max(max_gap, std::abs(fwd - rev));
    max_formula_err = std::max(max_formula_err, std::abs((fwd - rev) - closed));
    within += std::abs(fwd - rev) <= 1e-6;
  }
  // Orthonormal rows in both modalities give G = I, so E is symmetric while
  // P is not; there the identity does hold.
  oracle::Mat zt_sym(4, oracle::Vec(4, 0.0)), zi_sym(4, oracle::Vec(4, 0.0));
  for (std::size_t i = 0; i < 4; ++i) {
    zt_sym[i][i] = 1.0;
    zi_sym[i][(i + 1) % 4] = i % 2 ? -1.0 : 1.0;
  }
  const double sym_gap = std::abs(scalar(similarity(leaf(zt_sym), leaf(zi_sym)).l_s) -
                                  scalar(similarity(leaf(zi_sym), leaf(zt_sym)).l_s));
  std::string detail = std::to_string(within) + "/20 random pairs within 1e-6; max |gap| " + fmt("%.2e", max_gap) +
                       ", gap matches mean(P*(E^T-E)) to " + fmt("%.1e", max_formula_err) +
                       "; symmetric-E case gap " + fmt("%.1e", sym_gap);
  if (max_formula_err > 1e-9 || sym_gap > 1e-12) return {Verdict::Fail, detail};
  if (within == 20) return {Verdict::Pass, detail};
  return {Verdict::Unattainable, detail};
}

Outcome gradient_check() {
  ModelConfig m;
  m.text.vocab_size = 20;
  m.text.embed_dim = 4;
  m.text.lstm_layers = 1;
  m.text.lstm_hidden_dim = 4;
  m.text.sage_layers = 1;
  m.text.sage_hidden_dim = 4;
  m.text.dropout_rate = 0.0;
  m.text.projection_dim = 4;
  m.image.backbone = Backbone::TinyCnnTest;
  m.image.feature_dim = 4;
  m.image.projection_dim = 4;
  m.classifier.hidden_dim = 4;
  std::mt19937_64 rng(5);
  auto model = make_task_model<double>(TaskKind::Combined, m, rng);
  const auto set = make_synthetic(3, 9, 6);
  std::vector<std::string> texts;
  for (const auto& s : set.samples) texts.push_back(s.text);
  auto vocab = build_vocab(texts);
  vocab.truncate(20);
  BatchOptions opt;
  opt.batch_size = 3;
  opt.image_size = 6;
  auto stream = make_batches<double>(to_examples(set, vocab), opt);
  const auto batch = stream.next();
  if (!batch || batch->size() != 3) return {Verdict::Fail, "could not assemble a batch of 3"};
  const auto params = flatten(model->params());
  const auto r = finite_difference_check(params, [&] { return model->forward(*batch, false, rng).total; });
  return check(r.max_rel_error < 1e-3, std::to_string(r.checked) + " parameters, max relative error " +
                                           fmt("%.2e", r.max_rel_error));
}

struct OverfitRun {
  History history;
  double train_accuracy = 0;
};

OverfitRun overfit_once() {
  const auto set = make_synthetic(32, 21);
  const auto vocab = vocab_of(set);
  TrainData data;
  data.train = to_examples(set, vocab);
  data.val = data.train;  // the criterion is about fitting capacity
  auto cfg = detail::with_vocab(tiny_train_config(vocab.size(), 200, 13), vocab);
  std::mt19937_64 rng(cfg.seed);
  auto model = make_task_model<float>(TaskKind::Combined, cfg.model, rng);
  OverfitRun out;
  out.history = fit(*model, data, cfg);
  out.train_accuracy = run_inference(*model, data.train, cfg).accuracy;
  return out;
}

std::optional<OverfitRun> overfit_cache;
std::optional<OverfitRun> overfit_repeat;

Outcome overfit() {
  overfit_cache = overfit_once();
  overfit_repeat = overfit_once();
  bool same = overfit_cache->history.steps.size() == overfit_repeat->history.steps.size();
  for (std::size_t i = 0; same && i < overfit_cache->history.steps.size(); ++i)
    same = overfit_cache->history.steps[i].loss == overfit_repeat->history.steps[i].loss;
  same = same && overfit_cache->train_accuracy == overfit_repeat->train_accuracy;
  return check(overfit_cache->train_accuracy >= 0.95 && same,
               "32 samples, 200 epochs, train accuracy " + fmt("%.4f", overfit_cache->train_accuracy) +
                   (same ? ", identical rerun" : ", rerun differs"));
}

Outcome clipping() {
  if (!overfit_cache) return {Verdict::Fail, "overfit run unavailable"};
  double worst = 0;
  std::size_t clipped = 0;
  for (const auto& s : overfit_cache->history.steps) {
    worst = std::max(worst, s.post_clip_norm);
    clipped += s.pre_clip_norm > 1.0;
  }
  return check(worst <= 1.0 + 1e-5, std::to_string(overfit_cache->history.steps.size()) + " steps (" +
                                        std::to_string(clipped) + " clipped), max post-clip norm " +
                                        fmt("%.8f", worst));
}

Outcome scheduler_trace() {
  auto cfg = presets::train_preset("twitter-combined");
  auto state = make_train_state(cfg);
  const std::vector<double> losses{1, 1, 1, 1, 1, 1, 1, 0.5, 0.5, 0.5, 0.5};
  const std::vector<std::size_t> expected{4, 7, 11};
  std::vector<std::size_t> fired;
  double lr_err = 0;
  for (std::size_t e = 0; e < losses.size(); ++e) {
    if (scheduler_step(state, losses[e])) fired.push_back(e + 1);
    for (auto g : kAllGroups) {
      const double want = cfg.group(g).lr * std::pow(0.9, double(fired.size()));
      lr_err = std::max(lr_err, std::abs(state.current_lr.at(g) - want));
    }
  }
  std::string got;
  for (auto f : fired) got += (got.empty() ? "" : ",") + std::to_string(f);
  return check(fired == expected && lr_err <= 1e-12,
               "fired after epochs {" + got + "} (expected {4,7,11}), max lr error " + fmt("%.1e", lr_err));
}

Outcome metrics_identity() {
  std::mt19937_64 rng(99);
  double worst_identity = 0, worst_oracle = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 1 + rng() % 50;
    std::vector<int> p(n), y(n);
    std::vector<Label> pl, yl;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = int(rng() % 2);
      y[i] = int(rng() % 2);
      pl.push_back(label_from_index(p[i]));
      yl.push_back(label_from_index(y[i]));
    }
    const auto m = compute_metrics(pl, yl);
    const auto o = oracle::brute_metrics(p, y);
    worst_identity = std::max(worst_identity, std::abs(m.f1_micro - m.accuracy));
    for (auto [a, b] : {std::pair{m.accuracy, o.accuracy}, {m.f1_micro, o.f1_micro}, {m.fake.precision, o.p_fake},
                        {m.fake.recall, o.r_fake}, {m.fake.f1, o.f_fake}, {m.real.precision, o.p_real},
                        {m.real.recall, o.r_real}, {m.real.f1, o.f_real}})
      worst_oracle = std::max(worst_oracle, std::abs(a - b));
  }
  return check(worst_identity <= 1e-12 && worst_oracle <= 1e-12,
               "1000 cases, |f1_micro - accuracy| <= " + fmt("%.1e", worst_identity) + ", oracle deviation " +
                   fmt("%.1e", worst_oracle));
}

Outcome pipeline() {
  std::size_t non_idempotent = 0;
  const auto& corpus = cleaning_corpus();
  for (const auto& raw : corpus) non_idempotent += clean_text(clean_text(raw)) != clean_text(raw);
  const bool example = clean_text("RT @a: Hello http://x.co world") == "hello world";
  const auto deduped = deduplicate(clean_samples(dedup_corpus()));
  const auto ten = numbered_samples(10);
  const auto [tr1, va1] = split_train_val(ten, 0.2, 7);
  const auto [tr2, va2] = split_train_val(ten, 0.2, 7);
  bool same = va1.size() == va2.size();
  for (std::size_t i = 0; same && i < va1.size(); ++i) same = va1[i].id == va2[i].id;
  const bool ok = corpus.size() >= 50 && non_idempotent == 0 && example && deduped.size() == 7 && tr1.size() == 8 &&
                  va1.size() == 2 && same;
  return check(ok, "clean_text idempotent on " + std::to_string(corpus.size() - non_idempotent) + "/" +
                       std::to_string(corpus.size()) + " cases; dedup 10 -> " + std::to_string(deduped.size()) +
                       "; split 10 -> " + std::to_string(tr1.size()) + "/" + std::to_string(va1.size()) +
                       (same ? " (repeatable)" : " (not repeatable)"));
}

Outcome checkpoint_round_trip() {
  const auto sd = synthetic_data(24, 8, 31);
  const auto r = train_combined<float>(sd.data, sd.vocab, tiny_train_config(sd.vocab.size(), 4));
  const auto dir = fs::temp_directory_path() / "gramufen_acceptance";
  fs::create_directories(dir);
  r.checkpoint.save(dir / "checkpoint.gmf");
  auto loaded = load_model<float>(dir / "checkpoint.gmf");
  const double val = run_inference(*loaded.model, sd.data.val, loaded.info.config).total;
  const double diff = std::abs(val - r.history.best_monitored);
  return check(diff <= 1e-6, "validation loss " + fmt("%.9f", r.history.best_monitored) + " -> reloaded " +
                                 fmt("%.9f", val) + " (|diff| " + fmt("%.1e", diff) + ")");
}

}  // namespace

int main() {
  report("graph-construction-oracle", graph_oracle);
  report("equation-oracles", equation_oracles);
  report("e-matrix-normalization", e_rows);
  report("loss-symmetry", loss_symmetry);
  report("gradient-check", gradient_check);
  report("overfit", overfit);
  report("clipping", clipping);
  report("scheduler-trace", scheduler_trace);
  report("metrics-identity-oracle", metrics_identity);
  report("pipeline-properties", pipeline);
  report("checkpoint-round-trip", checkpoint_round_trip);
  report("full-scale-twitter", [] {
    return Outcome{Verdict::Skip, "needs the translated Twitter corpus, pretrained word vectors and GPU-scale "
                                  "training; not part of the default suite"};
  });
  std::printf("%d failing criteria\n", failures);
  return failures == 0 ? 0 : 1;
}
