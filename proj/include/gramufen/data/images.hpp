#pragma once

#include <array>
#include <filesystem>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "gramufen/core/error.hpp"
#include "gramufen/core/tensor.hpp"

namespace gramufen {

inline constexpr std::array<double, 3> kImageMean{0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kImageStd{0.229, 0.224, 0.225};
inline constexpr std::size_t kImageSize = 224;

/// Converts an 8-bit BGR image to a standardized (3, size, size) RGB tensor.
template <class T = float>
Tensor<T> image_to_tensor(const cv::Mat& bgr, std::size_t size = kImageSize) {
  if (bgr.empty() || bgr.type() != CV_8UC3)
    throw Error(Errc::DecodeError, "expected a non-empty 8-bit 3-channel image");
  cv::Mat resized;
  if (static_cast<std::size_t>(bgr.rows) == size && static_cast<std::size_t>(bgr.cols) == size)
    resized = bgr;
  else
    cv::resize(bgr, resized, cv::Size(int(size), int(size)), 0, 0, cv::INTER_LINEAR);
  Tensor<T> out({3, size, size});
  const std::size_t plane = size * size;
  for (std::size_t y = 0; y < size; ++y) {
    const auto* row = resized.ptr<cv::Vec3b>(int(y));
    for (std::size_t x = 0; x < size; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = row[x][2 - c] / 255.0;  // BGR -> RGB
        out[c * plane + y * size + x] = static_cast<T>((v - kImageMean[c]) / kImageStd[c]);
      }
  }
  return out;
}

/// Decodes any format OpenCV reads. Grayscale inputs are replicated to three
/// channels and alpha is discarded.
template <class T = float>
Tensor<T> load_image_file(const std::filesystem::path& path, std::size_t size = kImageSize) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw Error(Errc::DecodeError, "cannot decode image " + path.string());
  return image_to_tensor<T>(img, size);
}

}  // namespace gramufen
