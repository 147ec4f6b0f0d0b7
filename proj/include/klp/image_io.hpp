#pragma once

#include "klp/core.hpp"
#include "klp/segmentation.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace klp {

/// Decodes PNG / JPEG (anything imdecode accepts) into RGB.
inline RgbImage decode_image(const std::string& bytes) {
  if (bytes.empty()) throw InputError("empty image upload");
  const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<char*>(bytes.data()));
  cv::Mat bgr;
  try {
    bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw InputError(std::string("cannot decode image: ") + e.what());
  }
  if (bgr.empty()) throw InputError("unsupported or corrupt image (expected PNG or JPEG)");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RgbImage img;
  img.width = rgb.cols;
  img.height = rgb.rows;
  img.rgb.resize(static_cast<size_t>(rgb.cols) * rgb.rows * 3);
  for (int y = 0; y < rgb.rows; ++y)
    std::copy(rgb.ptr<std::uint8_t>(y), rgb.ptr<std::uint8_t>(y) + rgb.cols * 3,
              img.rgb.begin() + static_cast<std::ptrdiff_t>(y) * rgb.cols * 3);
  return img;
}

inline std::string encode_png(const cv::Mat& m) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", m, buf)) throw InputError("PNG encoding failed");
  return std::string(buf.begin(), buf.end());
}

inline std::string encode_png(const RgbImage& img) {
  img.validate();
  cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.rgb.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return encode_png(bgr);
}

/// Single-channel PNG, 255 where mask is set.
inline std::string encode_mask_png(const std::vector<std::uint8_t>& mask, int width, int height) {
  if (mask.size() != static_cast<size_t>(width) * height) throw InputError("mask size mismatch");
  cv::Mat m(height, width, CV_8UC1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) m.at<std::uint8_t>(y, x) = mask[static_cast<size_t>(y) * width + x] ? 255 : 0;
  return encode_png(m);
}

/// Inverse of encode_mask_png (any non-zero pixel counts as foreground).
inline std::vector<std::uint8_t> decode_mask_png(const std::string& bytes, int* width, int* height) {
  const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<char*>(bytes.data()));
  const cv::Mat m = cv::imdecode(raw, cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw InputError("cannot decode mask PNG");
  *width = m.cols;
  *height = m.rows;
  std::vector<std::uint8_t> out(static_cast<size_t>(m.cols) * m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) out[static_cast<size_t>(y) * m.cols + x] = m.at<std::uint8_t>(y, x) != 0;
  return out;
}

}  // namespace klp
