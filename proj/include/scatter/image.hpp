/* Copyright 2026 The Scatter STR Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef SCATTER_IMAGE_HPP_
#define SCATTER_IMAGE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "scatter/tensor.hpp"

namespace scatter {

// 8-bit grayscale raster, row major.
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
  std::uint8_t& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
};

GrayImage read_png(const std::string& path);
void write_png(const std::string& path, const GrayImage& img);

GrayImage rotate90_cw(const GrayImage& img);
GrayImage rotate90_ccw(const GrayImage& img);

// Bilinear resample of a single plane, align-corners convention: normalized
// coordinate ±1 maps to the first/last pixel center. The same convention is
// used by the TPS sampler so an identity warp reproduces this resize exactly.
template <typename T>
std::vector<T> resize_bilinear_plane(const std::vector<T>& src, std::size_t h, std::size_t w,
                                     std::size_t oh, std::size_t ow) {
  std::vector<T> out(oh * ow);
  const double sy = oh > 1 ? static_cast<double>(h - 1) / static_cast<double>(oh - 1) : 0.0;
  const double sx = ow > 1 ? static_cast<double>(w - 1) / static_cast<double>(ow - 1) : 0.0;
  for (std::size_t i = 0; i < oh; ++i) {
    double fy = static_cast<double>(i) * sy;
    std::size_t y0 = static_cast<std::size_t>(fy);
    if (y0 >= h - 1) y0 = h > 1 ? h - 2 : 0;
    double wy = fy - static_cast<double>(y0);
    std::size_t y1 = h > 1 ? y0 + 1 : y0;
    for (std::size_t j = 0; j < ow; ++j) {
      double fx = static_cast<double>(j) * sx;
      std::size_t x0 = static_cast<std::size_t>(fx);
      if (x0 >= w - 1) x0 = w > 1 ? w - 2 : 0;
      double wx = fx - static_cast<double>(x0);
      std::size_t x1 = w > 1 ? x0 + 1 : x0;
      double v = (1 - wy) * ((1 - wx) * src[y0 * w + x0] + wx * src[y0 * w + x1]) +
                 wy * ((1 - wx) * src[y1 * w + x0] + wx * src[y1 * w + x1]);
      out[i * ow + j] = static_cast<T>(v);
    }
  }
  return out;
}

GrayImage resize_bilinear(const GrayImage& img, std::size_t oh, std::size_t ow);

// Loads an image into the model input tensor [1 x h x w], resized and
// normalized to [-1, 1].
template <typename T>
Tensor<T> to_input_tensor(const GrayImage& img, std::size_t h, std::size_t w) {
  std::vector<T> plane(img.pixels.size());
  for (std::size_t i = 0; i < plane.size(); ++i)
    plane[i] = static_cast<T>(img.pixels[i] / 127.5 - 1.0);
  std::vector<T> resized = resize_bilinear_plane(plane, img.height, img.width, h, w);
  return Tensor<T>::from({1, h, w}, std::move(resized));
}

}  // namespace scatter

#endif  // SCATTER_IMAGE_HPP_
