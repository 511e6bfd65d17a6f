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

#include "scatter/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "scatter/errors.hpp"
#include "scatter/vocab.hpp"

namespace scatter {

namespace {

// 5x7 bitmap glyphs for 0-9 then a-z, row major, '#' = ink.
constexpr const char* kGlyphs[36][7] = {
    {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "},  // 0
    {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "},  // 1
    {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"},  // 2
    {" ### ", "#   #", "    #", "  ## ", "    #", "#   #", " ### "},  // 3
    {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "},  // 4
    {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "},  // 5
    {" ### ", "#    ", "#    ", "#### ", "#   #", "#   #", " ### "},  // 6
    {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "},  // 7
    {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "},  // 8
    {" ### ", "#   #", "#   #", " ####", "    #", "    #", " ### "},  // 9
    {"     ", "     ", " ### ", "    #", " ####", "#   #", " ####"},  // a
    {"#    ", "#    ", "#### ", "#   #", "#   #", "#   #", "#### "},  // b
    {"     ", "     ", " ####", "#    ", "#    ", "#    ", " ####"},  // c
    {"    #", "    #", " ####", "#   #", "#   #", "#   #", " ####"},  // d
    {"     ", "     ", " ### ", "#   #", "#####", "#    ", " ####"},  // e
    {"  ## ", " #   ", "#### ", " #   ", " #   ", " #   ", " #   "},  // f
    {"     ", " ####", "#   #", "#   #", " ####", "    #", " ### "},  // g
    {"#    ", "#    ", "#### ", "#   #", "#   #", "#   #", "#   #"},  // h
    {"  #  ", "     ", " ##  ", "  #  ", "  #  ", "  #  ", " ### "},  // i
    {"   # ", "     ", "  ## ", "   # ", "   # ", "#  # ", " ##  "},  // j
    {"#    ", "#   #", "#  # ", "###  ", "#  # ", "#   #", "#   #"},  // k
    {" ##  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "},  // l
    {"     ", "     ", "## # ", "# # #", "# # #", "# # #", "# # #"},  // m
    {"     ", "     ", "#### ", "#   #", "#   #", "#   #", "#   #"},  // n
    {"     ", "     ", " ### ", "#   #", "#   #", "#   #", " ### "},  // o
    {"     ", "#### ", "#   #", "#   #", "#### ", "#    ", "#    "},  // p
    {"     ", " ####", "#   #", "#   #", " ####", "    #", "    #"},  // q
    {"     ", "     ", "# ## ", "##   ", "#    ", "#    ", "#    "},  // r
    {"     ", "     ", " ####", "#    ", " ### ", "    #", "#### "},  // s
    {" #   ", " #   ", "#### ", " #   ", " #   ", " #   ", "  ## "},  // t
    {"     ", "     ", "#   #", "#   #", "#   #", "#   #", " ####"},  // u
    {"     ", "     ", "#   #", "#   #", "#   #", " # # ", "  #  "},  // v
    {"     ", "     ", "# # #", "# # #", "# # #", "# # #", " # # "},  // w
    {"     ", "     ", "#   #", " # # ", "  #  ", " # # ", "#   #"},  // x
    {"     ", "#   #", "#   #", " ####", "    #", "#   #", " ### "},  // y
    {"     ", "     ", "#####", "   # ", "  #  ", " #   ", "#####"},  // z
};

int glyph_index(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'z') return 10 + (c - 'a');
  if (c >= 'A' && c <= 'Z') return 10 + (c - 'A');
  return -1;
}

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

void require_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::uint64_t fnv1a(std::uint64_t h, const char* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

GrayImage render_word(const std::string& text, const RenderStyle& style, std::uint64_t seed) {
  if (text.empty()) throw ContractError("render_word: empty text");
  for (char c : text)
    if (glyph_index(c) < 0)
      throw ContractError(std::string("render_word: unsupported glyph '") + c + "'");

  const std::size_t s = std::max<std::size_t>(style.scale, 1);
  const std::size_t margin = 4;
  const std::size_t advance = 6 * s;
  const std::size_t text_w = text.size() * advance - s;
  const std::size_t glyph_h = 7 * s;

  // circular arc: ends drop by the sagitta relative to the arched center
  double sag = 0.0, radius = 0.0, cx = 0.0;
  if (style.curvature > 1e-9 && text.size() > 1) {
    double chord = static_cast<double>(text_w);
    radius = chord / (2.0 * std::sin(style.curvature / 2.0));
    sag = radius * (1.0 - std::cos(style.curvature / 2.0));
    cx = margin + chord / 2.0;
  }

  GrayImage img;
  img.height = glyph_h + static_cast<std::size_t>(std::ceil(sag)) + 2 * margin;
  img.width = std::max(text_w + 2 * margin, img.height + 4);  // keep renders wide
  img.pixels.assign(img.height * img.width, kBackgroundValue);

  for (std::size_t gi = 0; gi < text.size(); ++gi) {
    const char* const* rows = kGlyphs[glyph_index(text[gi])];
    std::size_t x0 = margin + gi * advance;
    double offset = 0.0;
    if (sag > 0.0) {
      double gx = static_cast<double>(x0) + 2.5 * static_cast<double>(s);
      double dx = gx - cx;
      double under = std::max(0.0, radius * radius - dx * dx);
      offset = radius - std::sqrt(under);
    }
    std::size_t y0 = margin + static_cast<std::size_t>(std::lround(offset));
    for (std::size_t r = 0; r < 7; ++r)
      for (std::size_t c = 0; c < 5; ++c) {
        if (rows[r][c] != '#') continue;
        for (std::size_t dy = 0; dy < s; ++dy)
          for (std::size_t dx = 0; dx < s; ++dx) {
            std::size_t y = y0 + r * s + dy;
            std::size_t x = x0 + c * s + dx;
            if (y < img.height && x < img.width) img.at(y, x) = kInkValue;
          }
      }
  }

  if (style.noise > 0.0) {
    Rng rng = Rng::derive(seed, {0xb015e});
    double sigma = style.noise * 255.0;
    for (auto& p : img.pixels)
      p = clamp_u8(static_cast<double>(p) + sigma * rng.normal());
  }
  return img;
}

namespace {

struct SplitSpec {
  const char* name;
  std::uint64_t tag;
  std::size_t count;
};

}  // namespace

DatasetPaths generate_dataset(const GenConfig& cfg) {
  if (cfg.out_dir.empty()) throw ConfigError("generate_dataset: out_dir not set");
  if (cfg.alphabet.empty()) throw ConfigError("generate_dataset: empty alphabet");
  if (cfg.len_min < 1 || cfg.len_max < cfg.len_min)
    throw ConfigError("generate_dataset: invalid length range");
  require_dir(cfg.out_dir);
  require_dir(cfg.out_dir + "/images");

  const SplitSpec splits[3] = {{"train", 1, cfg.count_train},
                               {"val", 2, cfg.count_val},
                               {"test", 3, cfg.count_test}};
  DatasetPaths out;
  for (const auto& split : splits) {
    std::string manifest_path = cfg.out_dir + "/" + split.name + ".tsv";
    std::ofstream manifest(manifest_path, std::ios::binary);
    if (!manifest) throw IoError("cannot write manifest " + manifest_path);
    for (std::size_t i = 0; i < split.count; ++i) {
      Rng rng = Rng::derive(cfg.seed, {split.tag, i});
      std::size_t len = cfg.len_min + rng.index(cfg.len_max - cfg.len_min + 1);
      std::string word;
      for (std::size_t k = 0; k < len; ++k) word += cfg.alphabet[rng.index(cfg.alphabet.size())];
      RenderStyle style;
      style.scale = cfg.scale;
      style.noise = cfg.noise;
      bool curved = rng.uniform() < cfg.curved_fraction;
      if (curved) style.curvature = rng.uniform(cfg.curvature_min, cfg.curvature_max);
      bool tall = rng.uniform() < cfg.tall_fraction;
      GrayImage img = render_word(word, style, rng.next_u64());
      if (tall) img = (rng.uniform() < 0.5) ? rotate90_cw(img) : rotate90_ccw(img);

      std::ostringstream name;
      name << "images/" << split.name << "_" << i << ".png";
      write_png(cfg.out_dir + "/" + name.str(), img);
      manifest << name.str() << "\t" << word << "\t" << (curved ? "irregular" : "regular")
               << "\n";
    }
    if (std::string(split.name) == "train") out.train_manifest = manifest_path;
    if (std::string(split.name) == "val") out.val_manifest = manifest_path;
    if (std::string(split.name) == "test") out.test_manifest = manifest_path;
  }
  return out;
}

std::vector<SampleRecord> load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path);
  std::filesystem::path dir = std::filesystem::path(path).parent_path();
  std::vector<SampleRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw IoError("malformed manifest row at " + path + ":" + std::to_string(line_no));
    SampleRecord rec;
    rec.image_path = (dir / line.substr(0, t1)).string();
    rec.label = line.substr(t1 + 1, t2 - t1 - 1);
    rec.category = line.substr(t2 + 1);
    if (rec.category != "regular" && rec.category != "irregular")
      throw IoError("unknown category '" + rec.category + "' at " + path + ":" +
                    std::to_string(line_no));
    rec.orientation = "wide";
    records.push_back(std::move(rec));
  }
  return records;
}

GrayImage augment(const GrayImage& img, std::uint64_t seed) {
  Rng rng(seed);
  if (rng.uniform() >= 0.4) return img;

  // per-axis rescale and back
  double sx = rng.uniform(0.75, 1.25);
  double sy = rng.uniform(0.75, 1.25);
  std::size_t rh = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(img.height * sy)));
  std::size_t rw = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(img.width * sx)));
  GrayImage back = resize_bilinear(resize_bilinear(img, rh, rw), img.height, img.width);

  // mild perspective-style warp: jittered corner offsets blended bilinearly
  double jx = 0.04 * static_cast<double>(img.width);
  double jy = 0.04 * static_cast<double>(img.height);
  double ox[4], oy[4];
  for (int c = 0; c < 4; ++c) {
    ox[c] = rng.uniform(-jx, jx);
    oy[c] = rng.uniform(-jy, jy);
  }
  GrayImage out;
  out.height = img.height;
  out.width = img.width;
  out.pixels.assign(img.pixels.size(), kBackgroundValue);
  double hm1 = std::max<double>(1.0, static_cast<double>(img.height - 1));
  double wm1 = std::max<double>(1.0, static_cast<double>(img.width - 1));
  for (std::size_t r = 0; r < img.height; ++r) {
    double a = static_cast<double>(r) / hm1;
    for (std::size_t c = 0; c < img.width; ++c) {
      double b = static_cast<double>(c) / wm1;
      double dx = (1 - a) * ((1 - b) * ox[0] + b * ox[1]) + a * ((1 - b) * ox[2] + b * ox[3]);
      double dy = (1 - a) * ((1 - b) * oy[0] + b * oy[1]) + a * ((1 - b) * oy[2] + b * oy[3]);
      double v = static_cast<double>(r) + dy;
      double u = static_cast<double>(c) + dx;
      // border clamp
      v = std::clamp(v, 0.0, hm1);
      u = std::clamp(u, 0.0, wm1);
      std::size_t y0 = static_cast<std::size_t>(v), x0 = static_cast<std::size_t>(u);
      std::size_t y1 = std::min(y0 + 1, img.height - 1), x1 = std::min(x0 + 1, img.width - 1);
      double wy = v - static_cast<double>(y0), wx = u - static_cast<double>(x0);
      double val = (1 - wy) * ((1 - wx) * back.at(y0, x0) + wx * back.at(y0, x1)) +
                   wy * ((1 - wx) * back.at(y1, x0) + wx * back.at(y1, x1));
      out.at(r, c) = clamp_u8(val + 0.5);
    }
  }
  return out;
}

std::uint64_t dataset_hash(const std::string& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + manifest_path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string manifest = ss.str();
  std::uint64_t h = fnv1a(0xcbf29ce484222325ULL, manifest.data(), manifest.size());
  for (const auto& rec : load_manifest(manifest_path)) {
    std::ifstream img(rec.image_path, std::ios::binary);
    if (!img) throw IoError("missing image file " + rec.image_path);
    std::stringstream is;
    is << img.rdbuf();
    std::string bytes = is.str();
    h = fnv1a(h, bytes.data(), bytes.size());
  }
  return h;
}

}  // namespace scatter
