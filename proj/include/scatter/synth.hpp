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

// Deterministic synthetic word-image generation: a built-in 5x7 bitmap font
// rendered along a straight or circular-arc baseline, plus the training-time
// augmentation pipeline. Everything is a pure function of (config, seed).

#ifndef SCATTER_SYNTH_HPP_
#define SCATTER_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "scatter/image.hpp"
#include "scatter/rng.hpp"

namespace scatter {

inline constexpr std::uint8_t kBackgroundValue = 16;
inline constexpr std::uint8_t kInkValue = 240;

struct RenderStyle {
  std::size_t scale = 3;    // pixels per font cell
  double curvature = 0.0;   // radians of baseline arc; 0 = straight
  double noise = 0.0;       // Gaussian sigma as a fraction of full scale
};

// Renders a word image; deterministic given (text, style, seed).
GrayImage render_word(const std::string& text, const RenderStyle& style, std::uint64_t seed);

struct GenConfig {
  std::string alphabet = "0123456789abcdefghijklmnopqrstuvwxyz";
  std::size_t len_min = 1;
  std::size_t len_max = 5;
  std::size_t count_train = 1000;
  std::size_t count_val = 200;
  std::size_t count_test = 200;
  double curved_fraction = 0.0;  // curvature = 0 samples are "regular"
  double curvature_min = 0.5;
  double curvature_max = 1.1;
  double noise = 0.02;
  double tall_fraction = 0.0;  // tall samples are 90deg-rotated renders
  std::size_t scale = 3;
  std::uint64_t seed = 1;
  std::string out_dir;
};

struct SampleRecord {
  std::string image_path;  // resolved against the manifest directory
  std::string label;
  std::string category;      // regular | irregular
  std::string orientation;   // wide | tall; derived from image dims at load
};

struct DatasetPaths {
  std::string train_manifest;
  std::string val_manifest;
  std::string test_manifest;
};

// Writes images + per-split TSV manifests (path<TAB>label<TAB>category) under
// cfg.out_dir. Splits use disjoint RNG streams derived from cfg.seed.
DatasetPaths generate_dataset(const GenConfig& cfg);

std::vector<SampleRecord> load_manifest(const std::string& path);

// With probability 0.4 (decided by the seed), random per-axis rescale
// (0.75-1.25, resized back) followed by a mild perspective-style corner warp;
// otherwise returns the input bit-identically. Output size equals input size.
GrayImage augment(const GrayImage& img, std::uint64_t seed);

// FNV-1a over the manifest bytes and every referenced image file, in row
// order. Regeneration from the same GenConfig is hash-stable.
std::uint64_t dataset_hash(const std::string& manifest_path);

}  // namespace scatter

#endif  // SCATTER_SYNTH_HPP_
