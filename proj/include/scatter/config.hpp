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

#ifndef SCATTER_CONFIG_HPP_
#define SCATTER_CONFIG_HPP_

#include <json.hpp>

#include "scatter/model.hpp"
#include "scatter/synth.hpp"

namespace scatter {

nlohmann::json scatter_config_to_json(const ScatterConfig& cfg);
ScatterConfig scatter_config_from_json(const nlohmann::json& j);

GenConfig gen_config_from_json(const nlohmann::json& j);

// Training-run configuration (CLI `train --config`).
struct TrainConfig {
  ScatterConfig model;
  struct Source {
    std::string manifest;
    double weight = 1.0;
  };
  std::vector<Source> train_sources;
  std::string val_manifest;
  bool augment = true;
  std::size_t batch_size = 32;
  std::size_t max_steps = 1000;
  std::size_t val_interval = 100;
  std::size_t log_interval = 10;
  double early_stop_val_acc = 2.0;  // > 1 disables early stopping
  double early_stop_loss_ratio = 0.0;  // stop when loss < ratio * initial; 0 disables
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  double rho = 0.95;
  double eps = 1e-6;
  std::string checkpoint_out;
  std::string metrics_out;
};

TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json load_json_file(const std::string& path);

}  // namespace scatter

#endif  // SCATTER_CONFIG_HPP_
