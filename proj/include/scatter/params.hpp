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

#ifndef SCATTER_PARAMS_HPP_
#define SCATTER_PARAMS_HPP_

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "scatter/rng.hpp"
#include "scatter/tensor.hpp"

namespace scatter {

// A named trainable tensor. Names are dotted paths whose prefix encodes
// module ownership, e.g. "decoder2.attn.feature_proj".
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
};

// Ordered parameter registry; registration order is the canonical checkpoint
// order. Names are unique within one model.
template <typename T>
class ParamRegistry {
 public:
  Tensor<T> create(const std::string& name, Shape shape, std::vector<T> values) {
    if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
    Tensor<T> t = Tensor<T>::from(std::move(shape), std::move(values));
    t.set_requires_grad(true);
    index_[name] = params_.size();
    params_.push_back({name, t});
    return t;
  }

  Tensor<T> create_zeros(const std::string& name, Shape shape) {
    return create(name, shape, std::vector<T>(shape_numel(shape), T(0)));
  }

  // Uniform(-bound, bound) init with bound = 1/sqrt(fan_in).
  Tensor<T> create_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<T> v(shape_numel(shape));
    for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
    return create(name, std::move(shape), std::move(v));
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Parameter<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return params_[it->second];
  }

  const Parameter<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return params_[it->second];
  }

  std::vector<Parameter<T>>& all() { return params_; }
  const std::vector<Parameter<T>>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.numel();
    return n;
  }

  void zero_grads() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

 private:
  std::vector<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace scatter

#endif  // SCATTER_PARAMS_HPP_
