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

#include "scatter/tps.hpp"

#include <sstream>

namespace scatter {

namespace {

// Gauss-Jordan inverse with partial pivoting; reports the worst pivot on
// failure so degenerate fiducial layouts are diagnosable.
std::vector<double> invert(std::vector<double> a, std::size_t n) {
  std::vector<double> inv(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0;
  double min_pivot = std::numeric_limits<double>::infinity();
  double max_pivot = 0.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    double pv = a[pivot * n + col];
    if (std::abs(pv) < 1e-12) {
      std::ostringstream os;
      os << "singular TPS system at column " << col << " (pivot " << pv
         << "); fiducials are degenerate (collinear or duplicated)";
      throw NumericError(os.str());
    }
    min_pivot = std::min(min_pivot, std::abs(pv));
    max_pivot = std::max(max_pivot, std::abs(pv));
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a[pivot * n + j], a[col * n + j]);
        std::swap(inv[pivot * n + j], inv[col * n + j]);
      }
    }
    double scale = 1.0 / a[col * n + col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col * n + j] *= scale;
      inv[col * n + j] *= scale;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = a[r * n + col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a[r * n + j] -= f * a[col * n + j];
        inv[r * n + j] -= f * inv[col * n + j];
      }
    }
  }
  if (min_pivot / max_pivot < 1e-14) {
    std::ostringstream os;
    os << "ill-conditioned TPS system (pivot ratio " << min_pivot / max_pivot << ")";
    throw NumericError(os.str());
  }
  return inv;
}

}  // namespace

TpsKernel build_tps_kernel(const FiducialSet& base) {
  std::size_t m = base.count();
  if (m < 4) throw ContractError("build_tps_kernel: need at least 4 fiducials");
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      double dx = base.xy[2 * i] - base.xy[2 * j];
      double dy = base.xy[2 * i + 1] - base.xy[2 * j + 1];
      if (dx * dx + dy * dy < 1e-20)
        throw NumericError("build_tps_kernel: duplicate fiducials at indices " +
                           std::to_string(i) + " and " + std::to_string(j));
    }
  TpsKernel k;
  k.base = base;
  k.n = m + 3;
  k.system.assign(k.n * k.n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double dx = base.xy[2 * i] - base.xy[2 * j];
      double dy = base.xy[2 * i + 1] - base.xy[2 * j + 1];
      k.system[i * k.n + j] = tps_rbf(dx * dx + dy * dy);
    }
    k.system[i * k.n + m] = 1.0;
    k.system[i * k.n + m + 1] = base.xy[2 * i];
    k.system[i * k.n + m + 2] = base.xy[2 * i + 1];
    k.system[m * k.n + i] = 1.0;
    k.system[(m + 1) * k.n + i] = base.xy[2 * i];
    k.system[(m + 2) * k.n + i] = base.xy[2 * i + 1];
  }
  k.solve_matrix = invert(k.system, k.n);
  return k;
}

std::vector<double> tps_phi(const TpsKernel& kernel, std::size_t out_h, std::size_t out_w) {
  std::size_t m = kernel.base.count();
  std::vector<double> phi(out_h * out_w * kernel.n);
  for (std::size_t i = 0; i < out_h; ++i) {
    double y = out_h > 1 ? -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(out_h - 1)
                         : 0.0;
    for (std::size_t j = 0; j < out_w; ++j) {
      double x = out_w > 1
                     ? -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(out_w - 1)
                     : 0.0;
      double* row = &phi[(i * out_w + j) * kernel.n];
      for (std::size_t p = 0; p < m; ++p) {
        double dx = x - kernel.base.xy[2 * p];
        double dy = y - kernel.base.xy[2 * p + 1];
        row[p] = tps_rbf(dx * dx + dy * dy);
      }
      row[m] = 1.0;
      row[m + 1] = x;
      row[m + 2] = y;
    }
  }
  return phi;
}

std::pair<double, double> tps_apply(const TpsKernel& kernel, const FiducialSet& predicted,
                                    double x, double y) {
  std::size_t m = kernel.base.count();
  if (predicted.count() != m) throw DimensionError("tps_apply: fiducial count mismatch");
  std::vector<double> mapping(kernel.n * 2, 0.0);
  for (std::size_t r = 0; r < kernel.n; ++r)
    for (std::size_t c = 0; c < m; ++c) {
      mapping[r * 2] += kernel.solve_matrix[r * kernel.n + c] * predicted.xy[2 * c];
      mapping[r * 2 + 1] += kernel.solve_matrix[r * kernel.n + c] * predicted.xy[2 * c + 1];
    }
  double ox = 0, oy = 0;
  for (std::size_t p = 0; p < m; ++p) {
    double dx = x - kernel.base.xy[2 * p];
    double dy = y - kernel.base.xy[2 * p + 1];
    double u = tps_rbf(dx * dx + dy * dy);
    ox += u * mapping[p * 2];
    oy += u * mapping[p * 2 + 1];
  }
  ox += mapping[m * 2] + mapping[(m + 1) * 2] * x + mapping[(m + 2) * 2] * y;
  oy += mapping[m * 2 + 1] + mapping[(m + 1) * 2 + 1] * x + mapping[(m + 2) * 2 + 1] * y;
  return {ox, oy};
}

SamplingGrid generate_grid(const TpsKernel& kernel, const FiducialSet& predicted,
                           std::size_t out_h, std::size_t out_w) {
  std::size_t m = kernel.base.count();
  if (predicted.count() != m)
    throw DimensionError("generate_grid: predicted has " + std::to_string(predicted.count()) +
                         " fiducials, kernel expects " + std::to_string(m));
  // mapping = solve_matrix * [predicted; 0]
  std::vector<double> mapping(kernel.n * 2, 0.0);
  for (std::size_t r = 0; r < kernel.n; ++r)
    for (std::size_t c = 0; c < m; ++c) {
      mapping[r * 2] += kernel.solve_matrix[r * kernel.n + c] * predicted.xy[2 * c];
      mapping[r * 2 + 1] += kernel.solve_matrix[r * kernel.n + c] * predicted.xy[2 * c + 1];
    }
  std::vector<double> phi = tps_phi(kernel, out_h, out_w);
  SamplingGrid grid;
  grid.out_h = out_h;
  grid.out_w = out_w;
  grid.coords.assign(out_h * out_w * 2, 0.0);
  for (std::size_t g = 0; g < out_h * out_w; ++g)
    for (std::size_t p = 0; p < kernel.n; ++p) {
      grid.coords[2 * g] += phi[g * kernel.n + p] * mapping[p * 2];
      grid.coords[2 * g + 1] += phi[g * kernel.n + p] * mapping[p * 2 + 1];
    }
  return grid;
}

}  // namespace scatter
