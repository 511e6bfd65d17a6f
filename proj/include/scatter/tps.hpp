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

// Thin-plate-spline input normalization: a convolutional localization network
// predicts 2K fiducial points on the input image, a TPS warp fitted between
// those and a canonical rectangle resamples the image to a fixed size.

#ifndef SCATTER_TPS_HPP_
#define SCATTER_TPS_HPP_

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "scatter/params.hpp"
#include "scatter/rng.hpp"
#include "scatter/tensor.hpp"

namespace scatter {

// 2K control points in normalized [-1,1]^2 coordinates, K along the top edge
// then K along the bottom, flattened as x0,y0,x1,y1,...
struct FiducialSet {
  std::vector<double> xy;

  std::size_t count() const { return xy.size() / 2; }

  static FiducialSet from(std::vector<double> coords) {
    if (coords.size() % 2 != 0 || coords.size() < 8)
      throw ContractError("FiducialSet needs 2K points with K >= 2");
    for (auto& v : coords) {
      if (!std::isfinite(v)) throw NumericError("non-finite fiducial coordinate");
      v = std::clamp(v, -1.0, 1.0);
    }
    return FiducialSet{std::move(coords)};
  }
};

// Canonical rectangle fiducials: K points along the top edge and K along the
// bottom, inset by a margin so tanh-squashed predictions can express them.
inline FiducialSet canonical_fiducials(std::size_t k, double margin = 0.1) {
  if (k < 2) throw ContractError("canonical_fiducials: K must be >= 2");
  double e = 1.0 - margin;
  std::vector<double> xy;
  xy.reserve(4 * k);
  for (int edge = 0; edge < 2; ++edge) {
    double y = edge == 0 ? -e : e;
    for (std::size_t i = 0; i < k; ++i) {
      double x = -e + 2.0 * e * static_cast<double>(i) / static_cast<double>(k - 1);
      xy.push_back(x);
      xy.push_back(y);
    }
  }
  return FiducialSet{std::move(xy)};
}

// Radial basis U(r) = r^2 log r^2 with the defined limit U(0) = 0.
inline double tps_rbf(double r2) { return r2 > 0 ? r2 * std::log(r2) : 0.0; }

// Base fiducials plus the factored TPS system: solve_matrix is the inverse of
// the (2K+3)x(2K+3) system matrix [[U, P], [P^T, 0]].
struct TpsKernel {
  FiducialSet base;
  std::size_t n = 0;                 // 2K + 3
  std::vector<double> system;        // n x n
  std::vector<double> solve_matrix;  // n x n inverse
};

// Assembles and inverts the TPS system. Throws NumericError with a pivot
// diagnostic when the base points are degenerate.
TpsKernel build_tps_kernel(const FiducialSet& base);

// H_out x W_out source coordinates in [-1,1]^2, row major, x before y.
struct SamplingGrid {
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  std::vector<double> coords;  // 2 * out_h * out_w
};

// Evaluates the spline fitted through (base -> predicted) at every output
// pixel's canonical location.
SamplingGrid generate_grid(const TpsKernel& kernel, const FiducialSet& predicted,
                           std::size_t out_h, std::size_t out_w);

// The canonical-location feature matrix phi [(out_h*out_w) x (2K+3)]: row g is
// [U(|q_g - base_1|), ..., U(|q_g - base_2K|), 1, x_g, y_g].
std::vector<double> tps_phi(const TpsKernel& kernel, std::size_t out_h, std::size_t out_w);

// Evaluates the fitted spline at a single point.
std::pair<double, double> tps_apply(const TpsKernel& kernel, const FiducialSet& predicted,
                                    double x, double y);

// Differentiable bilinear sampling of image [C x H x W] at grid [G x 2]
// (normalized align-corners coordinates, G = out_h*out_w). Out-of-range
// corner taps read zero. Gradients flow into both image and grid.
template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& image, const Tensor<T>& grid, std::size_t out_h,
                          std::size_t out_w) {
  const Shape& s = image.shape();
  if (s.size() != 3) throw DimensionError("bilinear_sample: image must be [C x H x W]");
  if (grid.shape() != Shape{out_h * out_w, 2})
    throw DimensionError("bilinear_sample: grid " + shape_str(grid.shape()) +
                         " does not match output " + std::to_string(out_h) + "x" +
                         std::to_string(out_w));
  const std::size_t c = s[0], h = s[1], w = s[2], g_count = out_h * out_w;
  const auto& img = image.data();
  const auto& gv = grid.data();
  for (T v : gv)
    if (!std::isfinite(static_cast<double>(v)))
      throw NumericError("bilinear_sample: non-finite grid coordinate");

  const double sx = (static_cast<double>(w) - 1.0) / 2.0;
  const double sy = (static_cast<double>(h) - 1.0) / 2.0;
  std::vector<T> out(c * g_count, T(0));
  for (std::size_t g = 0; g < g_count; ++g) {
    double u = (static_cast<double>(gv[2 * g]) + 1.0) * sx;
    double v = (static_cast<double>(gv[2 * g + 1]) + 1.0) * sy;
    std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(std::floor(u));
    std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(std::floor(v));
    double wx = u - static_cast<double>(x0);
    double wy = v - static_cast<double>(y0);
    const double cw[4] = {(1 - wy) * (1 - wx), (1 - wy) * wx, wy * (1 - wx), wy * wx};
    const std::ptrdiff_t xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const std::ptrdiff_t ys[4] = {y0, y0, y0 + 1, y0 + 1};
    for (std::size_t ci = 0; ci < c; ++ci) {
      double acc = 0;
      for (int t = 0; t < 4; ++t) {
        if (xs[t] < 0 || xs[t] >= static_cast<std::ptrdiff_t>(w) || ys[t] < 0 ||
            ys[t] >= static_cast<std::ptrdiff_t>(h))
          continue;
        acc += cw[t] * static_cast<double>(img[(ci * h + ys[t]) * w + xs[t]]);
      }
      out[ci * g_count + g] = static_cast<T>(acc);
    }
  }
  return custom_op<T>(
      {c, out_h, out_w}, std::move(out), {image, grid},
      [c, h, w, g_count, sx, sy](Node<T>& self) {
        auto& pimg = *self.parents[0];
        auto& pgrid = *self.parents[1];
        for (std::size_t g = 0; g < g_count; ++g) {
          double u = (static_cast<double>(pgrid.value[2 * g]) + 1.0) * sx;
          double v = (static_cast<double>(pgrid.value[2 * g + 1]) + 1.0) * sy;
          std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(std::floor(u));
          std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(std::floor(v));
          double wx = u - static_cast<double>(x0);
          double wy = v - static_cast<double>(y0);
          const std::ptrdiff_t xs[4] = {x0, x0 + 1, x0, x0 + 1};
          const std::ptrdiff_t ys[4] = {y0, y0, y0 + 1, y0 + 1};
          const double cw[4] = {(1 - wy) * (1 - wx), (1 - wy) * wx, wy * (1 - wx), wy * wx};
          // d(weight)/du and d(weight)/dv per corner
          const double dwu[4] = {-(1 - wy), (1 - wy), -wy, wy};
          const double dwv[4] = {-(1 - wx), -wx, (1 - wx), wx};
          double du = 0, dv = 0;
          for (std::size_t ci = 0; ci < c; ++ci) {
            double go = static_cast<double>(self.grad[ci * g_count + g]);
            if (go == 0) continue;
            for (int t = 0; t < 4; ++t) {
              if (xs[t] < 0 || xs[t] >= static_cast<std::ptrdiff_t>(w) || ys[t] < 0 ||
                  ys[t] >= static_cast<std::ptrdiff_t>(h))
                continue;
              std::size_t pidx = (ci * h + ys[t]) * w + xs[t];
              if (pimg.requires_grad) pimg.grad[pidx] += static_cast<T>(go * cw[t]);
              double pix = static_cast<double>(pimg.value[pidx]);
              du += go * dwu[t] * pix;
              dv += go * dwv[t] * pix;
            }
          }
          if (pgrid.requires_grad) {
            pgrid.grad[2 * g] += static_cast<T>(du * sx);
            pgrid.grad[2 * g + 1] += static_cast<T>(dv * sy);
          }
        }
      });
}

// Localization + grid generation + sampling, with all trainable parameters
// registered under the "tps." prefix.
struct TpsConfig {
  std::size_t k = 10;  // fiducials per edge; 2K total
  std::size_t in_h = 32, in_w = 100;
  std::size_t out_h = 32, out_w = 100;
  std::vector<std::size_t> conv_channels = {8, 16, 32, 64};
  std::size_t fc_hidden = 64;
  double margin = 0.1;
};

template <typename T>
class TpsTransform {
 public:
  TpsTransform(const TpsConfig& cfg, ParamRegistry<T>& reg, Rng& rng) : cfg_(cfg) {
    kernel_ = build_tps_kernel(canonical_fiducials(cfg.k, cfg.margin));
    std::vector<double> phi = tps_phi(kernel_, cfg.out_h, cfg.out_w);
    phi_ = Tensor<T>::from({cfg.out_h * cfg.out_w, kernel_.n},
                           std::vector<T>(phi.begin(), phi.end()));
    l_inv_ = Tensor<T>::from({kernel_.n, kernel_.n},
                             std::vector<T>(kernel_.solve_matrix.begin(),
                                            kernel_.solve_matrix.end()));

    std::size_t in_c = 1;
    std::size_t h = cfg.in_h, w = cfg.in_w;
    for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
      std::size_t out_c = cfg.conv_channels[i];
      std::string base = "tps.loc.conv" + std::to_string(i + 1);
      conv_w_.push_back(reg.create_uniform(base + ".w", {out_c, in_c, 3, 3}, in_c * 9, rng));
      conv_b_.push_back(reg.create_zeros(base + ".b", {out_c}));
      in_c = out_c;
      if (i + 1 < cfg.conv_channels.size()) {
        if (h < 2 || w < 2) throw ConfigError("tps localization input too small for pooling");
        h /= 2;
        w /= 2;
      }
    }
    gap_ = Tensor<T>::full({h * w, 1}, static_cast<T>(1.0 / static_cast<double>(h * w)));
    std::size_t feat = in_c;
    fc1_w_ = reg.create_uniform("tps.loc.fc1.w", {feat, cfg.fc_hidden}, feat, rng);
    fc1_b_ = reg.create_zeros("tps.loc.fc1.b", {cfg.fc_hidden});
    // Zero final weights and canonical-rectangle bias: the module starts as a
    // near-identity transform.
    fc2_w_ = reg.create_zeros("tps.loc.fc2.w", {cfg.fc_hidden, 4 * cfg.k});
    std::vector<T> bias(4 * cfg.k);
    for (std::size_t i = 0; i < bias.size(); ++i)
      bias[i] = static_cast<T>(std::atanh(kernel_.base.xy[i]));
    fc2_b_ = reg.create("tps.loc.fc2.b", {4 * cfg.k}, std::move(bias));
  }

  // Predicted fiducials [2K x 2], tanh-squashed into (-1,1).
  Tensor<T> localize(const Tensor<T>& image) const {
    Tensor<T> x = image;
    for (std::size_t i = 0; i < conv_w_.size(); ++i) {
      x = relu(conv2d(x, conv_w_[i], conv_b_[i], {1, 1}, {1, 1}));
      if (i + 1 < conv_w_.size()) x = max_pool2d(x, 2, 2, 2, 2);
    }
    std::size_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    Tensor<T> feat = transpose2d(matmul(reshape(x, {c, hw}), gap_));  // [1 x C]
    Tensor<T> hidden = relu(add_rowvec(matmul(feat, fc1_w_), fc1_b_));
    Tensor<T> raw = tanh_op(add_rowvec(matmul(hidden, fc2_w_), fc2_b_));
    return reshape(raw, {2 * cfg_.k, 2});
  }

  // Differentiable grid from predicted fiducials: pads with the three
  // orthogonality rows, solves via the precomputed inverse, applies phi.
  Tensor<T> grid_from(const Tensor<T>& predicted) const {
    Tensor<T> y = concat<T>({predicted, Tensor<T>::zeros({3, 2})}, 0);
    Tensor<T> mapping = matmul(l_inv_, y);
    return matmul(phi_, mapping);  // [(out_h*out_w) x 2]
  }

  Tensor<T> forward(const Tensor<T>& image) const {
    return bilinear_sample(image, grid_from(localize(image)), cfg_.out_h, cfg_.out_w);
  }

  const TpsKernel& kernel() const { return kernel_; }
  const TpsConfig& config() const { return cfg_; }

 private:
  TpsConfig cfg_;
  TpsKernel kernel_;
  Tensor<T> phi_, l_inv_, gap_;
  std::vector<Tensor<T>> conv_w_, conv_b_;
  Tensor<T> fc1_w_, fc1_b_, fc2_w_, fc2_b_;
};

}  // namespace scatter

#endif  // SCATTER_TPS_HPP_
