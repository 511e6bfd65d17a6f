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

// Checkpoint format: magic "SCTR1\n", an 8-byte little-endian header length,
// a JSON header (config, build kind, vocab order, parameter manifest with
// name/dtype/shape, optional optimizer manifest, training metadata), then the
// raw little-endian f32 buffers in manifest order.

#ifndef SCATTER_CHECKPOINT_HPP_
#define SCATTER_CHECKPOINT_HPP_

#include <memory>
#include <optional>
#include <string>

#include "scatter/model.hpp"
#include "scatter/trainer.hpp"

namespace scatter {

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::size_t step = 0;
  double best_val_acc = -1.0;
  std::uint64_t dataset_hash = 0;
};

void save_checkpoint(const ScatterModel<float>& model, const AdaDeltaState* optim,
                     const TrainingMeta& meta, const std::string& path);

struct LoadedCheckpoint {
  std::unique_ptr<ScatterModel<float>> model;
  std::optional<AdaDeltaState> optim;
  TrainingMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace scatter

#endif  // SCATTER_CHECKPOINT_HPP_
