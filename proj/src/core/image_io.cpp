// SPDX-License-Identifier: Apache-2.0

#include "cycpaint/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>


namespace cycpaint {

namespace {

Tensor<float> from_bgr(const cv::Mat& bgr) {
  const int h = bgr.rows, w = bgr.cols;
  Tensor<float> t({1, 3, h, w});
  for (int y = 0; y < h; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) t.at(0, c, y, x) = normalize_u8(row[x][2 - c]);
    }
  }
  return t;
}

cv::Mat decode(const std::string& path) {
  cv::Mat img;
  try {
    img = cv::imread(path, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    fail(ErrorCategory::io, "cannot decode " + path + ": " + e.what());
  }
  if (img.empty()) fail(ErrorCategory::io, "cannot decode image " + path);
  return img;
}

void encode(const std::string& path, const cv::Mat& img, const std::vector<int>& params = {}) {
  bool ok = false;
  try {
    ok = cv::imwrite(path, img, params);
  } catch (const cv::Exception& e) {
    fail(ErrorCategory::io, "cannot write " + path + ": " + e.what());
  }
  if (!ok) fail(ErrorCategory::io, "cannot write " + path);
}

}  // namespace

std::uint8_t quantize_unit(float v) {
  const double u = (static_cast<double>(v) + 1.0) * 127.5;
  return static_cast<std::uint8_t>(std::clamp(std::lround(u), 0L, 255L));
}

Tensor<float> read_image_native(const std::string& path) { return from_bgr(decode(path)); }

Tensor<float> read_image(const std::string& path, int resolution) {
  cv::Mat img = decode(path);
  const int side = std::min(img.rows, img.cols);
  const cv::Rect crop((img.cols - side) / 2, (img.rows - side) / 2, side, side);
  cv::Mat square = img(crop);
  if (side != resolution) {
    cv::Mat resized;
    cv::resize(square, resized, cv::Size(resolution, resolution), 0, 0,
               side > resolution ? cv::INTER_AREA : cv::INTER_LINEAR);
    square = resized;
  }
  return from_bgr(square);
}

void write_image(const std::string& path, const Tensor<float>& batch, int index) {
  const Shape s = batch.shape();
  if (s.c != 3) fail(ErrorCategory::shape_mismatch, "write_image expects 3 channels, got " + s.str());
  cv::Mat img(s.h, s.w, CV_8UC3);
  for (int y = 0; y < s.h; ++y) {
    auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < s.w; ++x) {
      for (int c = 0; c < 3; ++c) row[x][2 - c] = quantize_unit(batch.at(index, c, y, x));
    }
  }
  encode(path, img);
}

BinaryMap read_mask_png(const std::string& path) {
  cv::Mat img;
  try {
    img = cv::imread(path, cv::IMREAD_GRAYSCALE);
  } catch (const cv::Exception& e) {
    fail(ErrorCategory::io, "cannot decode mask " + path + ": " + e.what());
  }
  if (img.empty()) fail(ErrorCategory::io, "cannot decode mask " + path);
  BinaryMap m(img.rows, img.cols);
  for (int y = 0; y < img.rows; ++y) {
    const auto* row = img.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.cols; ++x) m.at(y, x) = row[x] > 127 ? 1 : 0;
  }
  return m;
}

void write_mask_png(const std::string& path, const BinaryMap& mask) {
  cv::Mat img(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y) {
    auto* row = img.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width; ++x) row[x] = mask.at(y, x) ? 255 : 0;
  }
  encode(path, img, {cv::IMWRITE_PNG_BILEVEL, 1});
}

}  // namespace cycpaint
