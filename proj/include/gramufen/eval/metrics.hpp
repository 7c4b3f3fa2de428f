#pragma once

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "gramufen/core/json_fields.hpp"
#include "gramufen/core/label.hpp"

namespace gramufen {

/// Confusion counts with fake as the positive class.
struct ConfusionCounts {
  std::uint64_t tp_fake = 0, fp_fake = 0, fn_fake = 0, tn_fake = 0;
  std::uint64_t total() const { return tp_fake + fp_fake + fn_fake + tn_fake; }
};

struct ClassMetrics {
  double precision = 0, recall = 0, f1 = 0;
  std::uint64_t support = 0;
};

struct MetricsReport {
  ConfusionCounts counts;
  double accuracy = 0;
  double f1_micro = 0;
  ClassMetrics fake, real;
  // One entry per metric cell whose denominator was zero (reported as 0).
  std::vector<std::string> warnings;
};

inline ConfusionCounts confusion(const std::vector<Label>& predictions, const std::vector<Label>& labels) {
  if (predictions.size() != labels.size())
    throw Error(Errc::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                          std::to_string(labels.size()) + " labels");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred_fake = predictions[i] == Label::Fake;
    const bool true_fake = labels[i] == Label::Fake;
    if (pred_fake && true_fake) ++c.tp_fake;
    else if (pred_fake) ++c.fp_fake;
    else if (true_fake) ++c.fn_fake;
    else ++c.tn_fake;
  }
  return c;
}

namespace detail {

inline double safe_ratio(std::uint64_t num, std::uint64_t den, const std::string& cell, std::vector<std::string>& warn) {
  if (den == 0) {
    warn.push_back(cell + ": zero denominator, reported as 0");
    return 0.0;
  }
  return double(num) / double(den);
}

inline double harmonic(double p, double r, const std::string& cell, std::vector<std::string>& warn) {
  if (p + r == 0.0) {
    warn.push_back(cell + ": precision and recall both 0, reported as 0");
    return 0.0;
  }
  return 2.0 * p * r / (p + r);
}

inline ClassMetrics class_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, const std::string& name,
                                  std::vector<std::string>& warn) {
  ClassMetrics m;
  m.precision = safe_ratio(tp, tp + fp, name + " precision", warn);
  m.recall = safe_ratio(tp, tp + fn, name + " recall", warn);
  m.f1 = harmonic(m.precision, m.recall, name + " f1", warn);
  m.support = tp + fn;
  return m;
}

}  // namespace detail

inline MetricsReport metrics_from_counts(const ConfusionCounts& c) {
  if (c.total() == 0) throw Error(Errc::LengthMismatch, "metrics need at least one sample");
  MetricsReport r;
  r.counts = c;
  r.fake = detail::class_metrics(c.tp_fake, c.fp_fake, c.fn_fake, "fake", r.warnings);
  // For the real class the roles swap: tn_fake are its hits, fn_fake its false alarms.
  r.real = detail::class_metrics(c.tn_fake, c.fn_fake, c.fp_fake, "real", r.warnings);
  r.accuracy = double(c.tp_fake + c.tn_fake) / double(c.total());
  const std::uint64_t tp = c.tp_fake + c.tn_fake;
  const std::uint64_t fp = c.fp_fake + c.fn_fake;  // false positives pooled over both classes
  const std::uint64_t fn = c.fn_fake + c.fp_fake;
  const double p = detail::safe_ratio(tp, tp + fp, "micro precision", r.warnings);
  const double rec = detail::safe_ratio(tp, tp + fn, "micro recall", r.warnings);
  r.f1_micro = detail::harmonic(p, rec, "micro f1", r.warnings);
  return r;
}

inline MetricsReport compute_metrics(const std::vector<Label>& predictions, const std::vector<Label>& labels) {
  if (labels.empty()) throw Error(Errc::LengthMismatch, "metrics need at least one sample");
  return metrics_from_counts(confusion(predictions, labels));
}

inline void to_json(json& j, const ClassMetrics& m) {
  j = json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
}

inline void to_json(json& j, const MetricsReport& r) {
  j = json{{"accuracy", r.accuracy},
           {"f1_micro", r.f1_micro},
           {"fake", r.fake},
           {"real", r.real},
           {"confusion",
            {{"tp_fake", r.counts.tp_fake},
             {"fp_fake", r.counts.fp_fake},
             {"fn_fake", r.counts.fn_fake},
             {"tn_fake", r.counts.tn_fake}}},
           {"warnings", r.warnings}};
}

/// Aligned plain-text table.
inline std::string format_report(const MetricsReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(10) << "class" << std::right << std::setw(11) << "precision" << std::setw(9)
     << "recall" << std::setw(10) << "f1-score" << std::setw(9) << "support" << '\n';
  auto row = [&](const char* name, const ClassMetrics& m) {
    os << std::left << std::setw(10) << name << std::right << std::setw(11) << m.precision << std::setw(9) << m.recall
       << std::setw(10) << m.f1 << std::setw(9) << m.support << '\n';
  };
  row("fake", r.fake);
  row("real", r.real);
  os << '\n' << std::left << std::setw(10) << "accuracy" << std::right << std::setw(11) << r.accuracy << '\n';
  os << std::left << std::setw(10) << "f1-micro" << std::right << std::setw(11) << r.f1_micro << '\n';
  for (const auto& w : r.warnings) os << "warning: " << w << '\n';
  return os.str();
}

}  // namespace gramufen
