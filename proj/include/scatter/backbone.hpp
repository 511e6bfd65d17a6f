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

// Convolutional feature extraction. The stack collapses image height to 1 so
// the feature map reads as a sequence of N columns; a sigmoid text-attention
// gate then produces the visual sequence V.

#ifndef SCATTER_BACKBONE_HPP_
#define SCATTER_BACKBONE_HPP_

#include <string>
#include <vector>

#include "scatter/params.hpp"
#include "scatter/rng.hpp"
#include "scatter/tensor.hpp"

namespace scatter {

// One step of the backbone plan.
struct BackboneLayer {
  enum class Kind { Conv, Pool, ResPair };
  Kind kind;
  // Conv: out_c, kh, kw, stride, pad. ResPair: out_c (two 3x3 convs + skip,
  // 1x1 projection when channels change). Pool: kh, kw used as window, stride.
  std::size_t out_c = 0;
  std::size_t kh = 3, kw = 3;
  std::size_t sh = 1, sw = 1;
  std::size_t ph = 1, pw = 1;

  static BackboneLayer conv(std::size_t c, std::size_t kh = 3, std::size_t kw = 3,
                            std::size_t sh = 1, std::size_t sw = 1, std::size_t ph = 1,
                            std::size_t pw = 1) {
    return {Kind::Conv, c, kh, kw, sh, sw, ph, pw};
  }
  static BackboneLayer pool(std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw) {
    return {Kind::Pool, 0, kh, kw, sh, sw, 0, 0};
  }
  static BackboneLayer res_pair(std::size_t c) { return {Kind::ResPair, c}; }
};

struct BackbonePlan {
  std::string name;
  std::vector<BackboneLayer> layers;
};

// Desk preset: 7 conv layers (two residual pairs), 64 channels, N = width/4.
inline BackbonePlan desk_backbone_plan() {
  using L = BackboneLayer;
  return {"desk",
          {L::conv(16), L::pool(2, 2, 2, 2), L::conv(32), L::pool(2, 2, 2, 2), L::res_pair(32),
           L::pool(2, 1, 2, 1), L::conv(64), L::pool(2, 1, 2, 1), L::res_pair(64),
           L::pool(2, 1, 2, 1)}};
}

// Full preset: 29 conv layers (1-2-5-3 residual stages, projections not
// counted), 512 output channels.
inline BackbonePlan full_backbone_plan() {
  using L = BackboneLayer;
  BackbonePlan p{"full", {}};
  auto& ls = p.layers;
  ls.push_back(L::conv(32));
  ls.push_back(L::conv(64));
  ls.push_back(L::pool(2, 2, 2, 2));
  ls.push_back(L::res_pair(128));
  ls.push_back(L::conv(128));
  ls.push_back(L::pool(2, 2, 2, 2));
  for (int i = 0; i < 2; ++i) ls.push_back(L::res_pair(256));
  ls.push_back(L::conv(256));
  ls.push_back(L::pool(2, 1, 2, 1));
  for (int i = 0; i < 5; ++i) ls.push_back(L::res_pair(512));
  ls.push_back(L::conv(512));
  ls.push_back(L::pool(2, 1, 2, 1));
  for (int i = 0; i < 3; ++i) ls.push_back(L::res_pair(512));
  ls.push_back(L::conv(512));
  ls.push_back(L::conv(512, 2, 1, 1, 1, 0, 0));
  return p;
}

inline BackbonePlan backbone_plan_for_preset(const std::string& preset) {
  if (preset == "desk") return desk_backbone_plan();
  if (preset == "full") return full_backbone_plan();
  throw ConfigError("unknown backbone preset: " + preset + " (expected desk or full)");
}

template <typename T>
class Backbone {
 public:
  Backbone(const BackbonePlan& plan, std::size_t in_h, std::size_t in_w, ParamRegistry<T>& reg,
           Rng& rng)
      : plan_(plan) {
    // Shape trace doubles as build-time validation.
    std::size_t c = 1, h = in_h, w = in_w;
    std::size_t conv_idx = 0, res_idx = 0;
    for (const auto& l : plan.layers) {
      switch (l.kind) {
        case BackboneLayer::Kind::Conv: {
          ++conv_idx;
          std::string base = "backbone.conv" + std::to_string(conv_idx);
          weights_.push_back(
              reg.create_uniform(base + ".w", {l.out_c, c, l.kh, l.kw}, c * l.kh * l.kw, rng));
          biases_.push_back(reg.create_zeros(base + ".b", {l.out_c}));
          if (l.kh > h + 2 * l.ph || l.kw > w + 2 * l.pw)
            throw ConfigError("backbone " + base + ": kernel exceeds padded input");
          h = (h + 2 * l.ph - l.kh) / l.sh + 1;
          w = (w + 2 * l.pw - l.kw) / l.sw + 1;
          c = l.out_c;
          break;
        }
        case BackboneLayer::Kind::ResPair: {
          ++res_idx;
          std::string base = "backbone.res" + std::to_string(res_idx);
          if (l.out_c != c) {
            proj_w_.push_back(reg.create_uniform(base + ".proj.w", {l.out_c, c, 1, 1}, c, rng));
            proj_b_.push_back(reg.create_zeros(base + ".proj.b", {l.out_c}));
          } else {
            proj_w_.push_back(Tensor<T>());
            proj_b_.push_back(Tensor<T>());
          }
          weights_.push_back(reg.create_uniform(base + ".a.w", {l.out_c, c, 3, 3}, c * 9, rng));
          biases_.push_back(reg.create_zeros(base + ".a.b", {l.out_c}));
          weights_.push_back(
              reg.create_uniform(base + ".b.w", {l.out_c, l.out_c, 3, 3}, l.out_c * 9, rng));
          biases_.push_back(reg.create_zeros(base + ".b.b", {l.out_c}));
          c = l.out_c;
          break;
        }
        case BackboneLayer::Kind::Pool: {
          if (l.kh > h || l.kw > w)
            throw ConfigError("backbone pool window exceeds input at " + std::to_string(h) +
                              "x" + std::to_string(w));
          h = (h - l.kh) / l.sh + 1;
          w = (w - l.kw) / l.sw + 1;
          break;
        }
      }
      if (h == 0 || w == 0)
        throw ConfigError("backbone preset '" + plan.name + "' collapses a " +
                          std::to_string(in_h) + "x" + std::to_string(in_w) +
                          " input to zero extent");
    }
    if (h != 1)
      throw ConfigError("backbone preset '" + plan.name + "' ends with height " +
                        std::to_string(h) + "; the plan must collapse height to 1");
    columns_ = w;
    channels_ = c;
    attn_w_ = reg.create_uniform("backbone.attn.w", {c, c}, c, rng);
    attn_b_ = reg.create_zeros("backbone.attn.b", {c});
  }

  // FeatureMap F as [N x C]: column i of the collapsed map becomes row i.
  Tensor<T> extract(const Tensor<T>& image) const {
    Tensor<T> x = image;
    std::size_t wi = 0, pi = 0;
    for (const auto& l : plan_.layers) {
      switch (l.kind) {
        case BackboneLayer::Kind::Conv:
          x = relu(conv2d(x, weights_[wi], biases_[wi], {l.sh, l.sw}, {l.ph, l.pw}));
          ++wi;
          break;
        case BackboneLayer::Kind::ResPair: {
          Tensor<T> skip = x;
          if (proj_w_[pi].defined())
            skip = conv2d(x, proj_w_[pi], proj_b_[pi], {1, 1}, {0, 0});
          Tensor<T> y = relu(conv2d(x, weights_[wi], biases_[wi], {1, 1}, {1, 1}));
          y = conv2d(y, weights_[wi + 1], biases_[wi + 1], {1, 1}, {1, 1});
          x = relu(add(y, skip));
          wi += 2;
          ++pi;
          break;
        }
        case BackboneLayer::Kind::Pool:
          x = max_pool2d(x, l.kh, l.kw, l.sh, l.sw);
          break;
      }
    }
    return transpose2d(reshape(x, {channels_, columns_}));
  }

  // Sigmoid-gated 1x1 projection: V = gate(F) * F, same shape.
  Tensor<T> text_attention(const Tensor<T>& f) const {
    Tensor<T> gate = sigmoid(add_rowvec(matmul(f, attn_w_), attn_b_));
    return mul(gate, f);
  }

  Tensor<T> forward(const Tensor<T>& image) const { return text_attention(extract(image)); }

  std::size_t columns() const { return columns_; }
  std::size_t channels() const { return channels_; }
  const BackbonePlan& plan() const { return plan_; }

 private:
  BackbonePlan plan_;
  std::size_t columns_ = 0, channels_ = 0;
  std::vector<Tensor<T>> weights_, biases_;   // convs in plan order
  std::vector<Tensor<T>> proj_w_, proj_b_;    // per res pair, undefined if identity skip
  Tensor<T> attn_w_, attn_b_;
};

}  // namespace scatter

#endif  // SCATTER_BACKBONE_HPP_
