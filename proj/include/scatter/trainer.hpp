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

// Optimization loop: AdaDelta with global-norm gradient clipping,
// validation-based model selection, JSON-lines metrics.

#ifndef SCATTER_TRAINER_HPP_
#define SCATTER_TRAINER_HPP_

#include <optional>
#include <string>
#include <vector>

#include "scatter/config.hpp"
#include "scatter/model.hpp"
#include "scatter/params.hpp"

namespace scatter {

// AdaDelta accumulators, aligned with the parameter registry order.
struct AdaDeltaState {
  double rho = 0.95;
  double eps = 1e-6;
  std::vector<std::vector<float>> eg2;   // E[g^2]
  std::vector<std::vector<float>> edx2;  // E[dx^2]

  static AdaDeltaState init(const ParamRegistry<float>& params, double rho = 0.95,
                            double eps = 1e-6);
};

// Global-norm clipping: if ||g||_2 > max_norm, every gradient is scaled by
// max_norm/||g||. Returns the pre-clip norm. NaN gradients abort with the
// parameter name.
double clip_gradients(ParamRegistry<float>& params, double max_norm = 5.0);

// E[g2] <- rho E[g2] + (1-rho) g2; dx = -(sqrt(E[dx2]+eps)/sqrt(E[g2]+eps)) g;
// E[dx2] <- rho E[dx2] + (1-rho) dx2; x <- x + dx.
void adadelta_step(ParamRegistry<float>& params, AdaDeltaState& state);

struct TrainResult {
  std::size_t steps_run = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double best_val_acc = -1.0;
  std::string checkpoint_path;
  std::vector<double> loss_history;  // per logged step
};

// Runs the full loop; resume_from continues bit-identically from a saved
// training checkpoint given the same config.
TrainResult train(const TrainConfig& cfg, const std::string& resume_from = "");

}  // namespace scatter

#endif  // SCATTER_TRAINER_HPP_
