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

#ifndef SCATTER_GRAD_CHECK_HPP_
#define SCATTER_GRAD_CHECK_HPP_

#include <cmath>
#include <functional>
#include <vector>

#include "scatter/tensor.hpp"

namespace scatter {

// Central-finite-difference gradient verification.
//
// f must be a deterministic scalar-valued computation rebuilt from the given
// leaf tensors on every call. Returns the max over all input entries of
// |analytic - numeric| / max(1, |numeric|).
template <typename T>
double grad_check(const std::function<Tensor<T>(const std::vector<Tensor<T>>&)>& f,
                  std::vector<Tensor<T>>& inputs, T eps) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  Tensor<T> loss = f(inputs);
  loss.backward();
  std::vector<std::vector<T>> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs) analytic.push_back(in.grad());

  double max_rel = 0;
  NoGradGuard ng;  // FD probes need values only
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& buf = inputs[t].data();
    for (std::size_t i = 0; i < buf.size(); ++i) {
      T saved = buf[i];
      buf[i] = saved + eps;
      double up = static_cast<double>(f(inputs).item());
      buf[i] = saved - eps;
      double dn = static_cast<double>(f(inputs).item());
      buf[i] = saved;
      double numeric = (up - dn) / (2.0 * static_cast<double>(eps));
      double rel = std::abs(static_cast<double>(analytic[t][i]) - numeric) /
                   std::max(1.0, std::abs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace scatter

#endif  // SCATTER_GRAD_CHECK_HPP_
