#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "gramufen/core/error.hpp"
#include "gramufen/training/trainer.hpp"

namespace gramufen {

struct CurveSeries {
  std::string name;
  std::vector<double> values;  // one per epoch, epoch 1 first
};

struct PlotFiles {
  std::filesystem::path image;
  std::filesystem::path series;
};

inline std::vector<CurveSeries> loss_curves(const std::vector<EpochRecord>& epochs) {
  CurveSeries train{"train_loss", {}}, val{"val_loss", {}};
  for (const auto& e : epochs) {
    train.values.push_back(e.train_total);
    val.values.push_back(e.val_total);
  }
  return {train, val};
}

/// Writes `<stem>.png` (one polyline per series over epochs) and
/// `<stem>.csv` with rows `series,epoch,value`.
inline PlotFiles plot_curves(const std::vector<CurveSeries>& curves, const std::filesystem::path& out_dir,
                             const std::string& stem = "loss_curves") {
  std::size_t epochs = 0;
  for (const auto& c : curves) epochs = std::max(epochs, c.values.size());
  if (curves.empty() || epochs == 0) throw Error(Errc::EmptyHistory, "no epochs to plot");
  std::filesystem::create_directories(out_dir);
  PlotFiles files{out_dir / (stem + ".png"), out_dir / (stem + ".csv")};

  {
    std::ofstream csv(files.series);
    if (!csv) throw Error(Errc::IoError, "cannot write " + files.series.string());
    csv << "series,epoch,value\n";
    char buf[32];
    for (const auto& c : curves)
      for (std::size_t e = 0; e < c.values.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%.17g", c.values[e]);
        csv << c.name << ',' << (e + 1) << ',' << buf << '\n';
      }
  }

  double lo = INFINITY, hi = -INFINITY;
  for (const auto& c : curves)
    for (double v : c.values)
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;

  const int width = 800, height = 500, left = 70, right = 20, top = 40, bottom = 50;
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const cv::Point origin(left, height - bottom);
  cv::line(img, origin, {width - right, height - bottom}, cv::Scalar(0, 0, 0), 1);
  cv::line(img, origin, {left, top}, cv::Scalar(0, 0, 0), 1);
  auto to_px = [&](std::size_t e, double v) {
    const double fx = epochs > 1 ? double(e) / double(epochs - 1) : 0.5;
    const double fy = (v - lo) / (hi - lo);
    return cv::Point(left + int(std::lround(fx * (width - left - right))),
                     height - bottom - int(std::lround(fy * (height - top - bottom))));
  };
  char label[64];
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    const auto p = to_px(0, v);
    std::snprintf(label, sizeof label, "%.3g", v);
    cv::putText(img, label, {5, p.y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(60, 60, 60), 1, cv::LINE_AA);
  }
  cv::putText(img, "epoch", {width / 2 - 20, height - 15}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0), 1,
              cv::LINE_AA);
  const cv::Scalar palette[] = {{200, 90, 30}, {40, 120, 230}, {60, 160, 60}, {150, 60, 150}};
  for (std::size_t s = 0; s < curves.size(); ++s) {
    const auto color = palette[s % 4];
    std::vector<cv::Point> pts;
    for (std::size_t e = 0; e < curves[s].values.size(); ++e)
      if (std::isfinite(curves[s].values[e])) pts.push_back(to_px(e, curves[s].values[e]));
    if (pts.size() > 1) cv::polylines(img, pts, false, color, 2, cv::LINE_AA);
    for (const auto& p : pts) cv::circle(img, p, 3, color, cv::FILLED, cv::LINE_AA);
    const cv::Point legend(width - right - 150, top + 18 * int(s));
    cv::line(img, legend, legend + cv::Point(20, 0), color, 2);
    cv::putText(img, curves[s].name, legend + cv::Point(26, 4), cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1,
                cv::LINE_AA);
  }
  if (!cv::imwrite(files.image.string(), img)) throw Error(Errc::IoError, "cannot write " + files.image.string());
  return files;
}

inline PlotFiles plot_curves(const std::vector<EpochRecord>& history, const std::filesystem::path& out_dir,
                             const std::string& stem = "loss_curves") {
  if (history.empty()) throw Error(Errc::EmptyHistory, "history has no epochs");
  return plot_curves(loss_curves(history), out_dir, stem);
}

}  // namespace gramufen
