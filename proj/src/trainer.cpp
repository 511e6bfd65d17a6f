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

#include "scatter/trainer.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

#include "scatter/checkpoint.hpp"
#include "scatter/eval.hpp"
#include "scatter/image.hpp"
#include "scatter/rng.hpp"
#include "scatter/synth.hpp"

namespace scatter {

using nlohmann::json;

AdaDeltaState AdaDeltaState::init(const ParamRegistry<float>& params, double rho, double eps) {
  AdaDeltaState st;
  st.rho = rho;
  st.eps = eps;
  for (const auto& p : params.all()) {
    st.eg2.emplace_back(p.tensor.numel(), 0.0f);
    st.edx2.emplace_back(p.tensor.numel(), 0.0f);
  }
  return st;
}

double clip_gradients(ParamRegistry<float>& params, double max_norm) {
  double sq = 0;
  for (const auto& p : params.all()) {
    for (float g : p.tensor.grad()) {
      if (std::isnan(g)) throw TrainError("NaN gradient in parameter " + p.name);
      sq += static_cast<double>(g) * static_cast<double>(g);
    }
  }
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    float s = static_cast<float>(max_norm / norm);
    for (auto& p : params.all())
      for (float& g : p.tensor.grad()) g *= s;
  }
  return norm;
}

void adadelta_step(ParamRegistry<float>& params, AdaDeltaState& state) {
  const double rho = state.rho, eps = state.eps;
  auto& all = params.all();
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto& x = all[i].tensor.data();
    auto& g = all[i].tensor.grad();
    auto& eg2 = state.eg2[i];
    auto& edx2 = state.edx2[i];
    for (std::size_t k = 0; k < x.size(); ++k) {
      double gk = g[k];
      double e2 = rho * eg2[k] + (1 - rho) * gk * gk;
      double dx = -(std::sqrt(static_cast<double>(edx2[k]) + eps) / std::sqrt(e2 + eps)) * gk;
      eg2[k] = static_cast<float>(e2);
      edx2[k] = static_cast<float>(rho * edx2[k] + (1 - rho) * dx * dx);
      x[k] = static_cast<float>(x[k] + dx);
    }
  }
}

namespace {

struct LoadedSample {
  GrayImage image;
  std::string label;
};

struct SourceData {
  std::vector<LoadedSample> samples;
  double weight = 1.0;
};

std::vector<LoadedSample> load_samples(const std::string& manifest) {
  std::vector<LoadedSample> out;
  for (const auto& rec : load_manifest(manifest))
    out.push_back({read_png(rec.image_path), rec.label});
  return out;
}

// Sample position p of the shuffled single-source stream: concatenated
// per-epoch permutations, each drawn from its own derived stream.
std::size_t stream_index(std::uint64_t seed, std::size_t n, std::size_t p,
                         std::vector<std::size_t>& perm_cache, std::size_t& cached_epoch) {
  std::size_t epoch = p / n;
  if (perm_cache.empty() || cached_epoch != epoch) {
    perm_cache.resize(n);
    for (std::size_t i = 0; i < n; ++i) perm_cache[i] = i;
    Rng rng = Rng::derive(seed, {0xE70C, epoch});
    for (std::size_t i = n; i > 1; --i) std::swap(perm_cache[i - 1], perm_cache[rng.index(i)]);
    cached_epoch = epoch;
  }
  return perm_cache[p % n];
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::string& resume_from) {
  std::vector<SourceData> sources;
  std::size_t total_train = 0;
  double weight_sum = 0;
  for (const auto& s : cfg.train_sources) {
    SourceData sd;
    sd.samples = load_samples(s.manifest);
    sd.weight = s.weight;
    if (sd.samples.empty()) throw ConfigError("empty training manifest: " + s.manifest);
    total_train += sd.samples.size();
    weight_sum += s.weight;
    sources.push_back(std::move(sd));
  }
  if (total_train == 0) throw ConfigError("no training samples");
  std::vector<SampleRecord> val_records;
  if (!cfg.val_manifest.empty()) val_records = load_manifest(cfg.val_manifest);
  std::uint64_t data_hash = dataset_hash(cfg.train_sources[0].manifest);

  std::unique_ptr<ScatterModel<float>> model;
  AdaDeltaState optim;
  std::size_t start_step = 0;
  double best_val = -1.0;
  if (!resume_from.empty()) {
    LoadedCheckpoint ck = load_checkpoint(resume_from);
    if (ck.model->build() != ScatterBuild::Train)
      throw ConfigError("resume checkpoint is not a training build");
    model = std::move(ck.model);
    optim = ck.optim ? std::move(*ck.optim)
                     : AdaDeltaState::init(model->params(), cfg.rho, cfg.eps);
    start_step = ck.meta.step;
    best_val = ck.meta.best_val_acc;
  } else {
    ScatterConfig mc = cfg.model;
    model = std::make_unique<ScatterModel<float>>(mc, ScatterBuild::Train, cfg.seed);
    optim = AdaDeltaState::init(model->params(), cfg.rho, cfg.eps);
  }

  std::ofstream metrics;
  if (!cfg.metrics_out.empty()) {
    metrics.open(cfg.metrics_out, start_step ? std::ios::app : std::ios::trunc);
    if (!metrics) throw IoError("cannot write metrics log " + cfg.metrics_out);
  }
  auto log_json = [&](const json& j) {
    if (metrics.is_open()) metrics << j.dump() << "\n" << std::flush;
  };

  TrainResult result;
  result.best_val_acc = best_val;
  std::vector<std::size_t> perm_cache;
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::size_t steps_per_epoch = (total_train + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<bool> coverage(model->params().size(), false);
  bool coverage_reported = start_step > 0;

  auto run_validation = [&](std::size_t step) {
    if (val_records.empty()) return;
    EvalOptions opts;
    EvalReport rep = evaluate(*model, val_records, opts);
    if (rep.accuracy > result.best_val_acc) {
      result.best_val_acc = rep.accuracy;
      if (!cfg.checkpoint_out.empty()) {
        TrainingMeta meta{cfg.seed, step, result.best_val_acc, data_hash};
        save_checkpoint(*model, &optim, meta, cfg.checkpoint_out);
        result.checkpoint_path = cfg.checkpoint_out;
      }
    }
    log_json({{"step", step}, {"val_acc", rep.accuracy}, {"best_val_acc", result.best_val_acc}});
  };

  for (std::size_t step = start_step + 1; step <= cfg.max_steps; ++step) {
    // assemble the batch deterministically from (seed, step)
    std::vector<std::pair<Tensor<float>, std::string>> batch;
    batch.reserve(cfg.batch_size);
    for (std::size_t slot = 0; slot < cfg.batch_size; ++slot) {
      const LoadedSample* sample = nullptr;
      if (sources.size() == 1) {
        std::size_t p = (step - 1) * cfg.batch_size + slot;
        sample = &sources[0].samples[stream_index(cfg.seed, sources[0].samples.size(), p,
                                                  perm_cache, cached_epoch)];
      } else {
        Rng rng = Rng::derive(cfg.seed, {0x5A3B, step, slot});
        double pickw = rng.uniform() * weight_sum;
        std::size_t si = 0;
        for (; si + 1 < sources.size(); ++si) {
          if (pickw < sources[si].weight) break;
          pickw -= sources[si].weight;
        }
        sample = &sources[si].samples[rng.index(sources[si].samples.size())];
      }
      GrayImage img = sample->image;
      if (cfg.augment) {
        Rng arng = Rng::derive(cfg.seed, {0xA6A6, step, slot});
        img = augment(img, arng.next_u64());
      }
      batch.emplace_back(
          to_input_tensor<float>(img, model->config().in_h, model->config().in_w),
          sample->label);
    }

    model->params().zero_grads();
    TrainForward<float> fwd = model->forward_train(batch, /*with_grads=*/true);
    if (fwd.skipped)
      std::cerr << "warning: step " << step << " skipped " << fwd.skipped
                << " CTC-infeasible sample(s)\n";
    if (!std::isfinite(fwd.total))
      throw TrainError("training diverged at step " + std::to_string(step) +
                       " (loss=" + std::to_string(fwd.total) + ")");
    double grad_norm = clip_gradients(model->params(), cfg.clip_norm);

    if (!coverage_reported) {
      auto& all = model->params().all();
      for (std::size_t i = 0; i < all.size(); ++i) {
        if (coverage[i]) continue;
        for (float g : all[i].tensor.grad())
          if (g != 0.0f) {
            coverage[i] = true;
            break;
          }
      }
      if (step - start_step >= steps_per_epoch) {
        std::vector<std::string> missing;
        for (std::size_t i = 0; i < all.size(); ++i)
          if (!coverage[i]) missing.push_back(all[i].name);
        if (!missing.empty()) {
          std::cerr << "warning: parameters with no nonzero gradient in the first epoch:";
          for (const auto& m : missing) std::cerr << " " << m;
          std::cerr << "\n";
        }
        log_json({{"step", step}, {"coverage_missing", missing}});
        coverage_reported = true;
      }
    }

    adadelta_step(model->params(), optim);

    if (result.loss_history.empty()) result.initial_loss = fwd.total;
    result.loss_history.push_back(fwd.total);
    result.final_loss = fwd.total;
    result.steps_run = step;

    if (cfg.log_interval && step % cfg.log_interval == 0)
      log_json({{"step", step},
                {"l_total", fwd.total},
                {"l_ctc", fwd.ctc},
                {"l_attn", fwd.attn},
                {"grad_norm", grad_norm},
                {"skipped", fwd.skipped}});

    if (cfg.val_interval && step % cfg.val_interval == 0) {
      run_validation(step);
      if (result.best_val_acc >= cfg.early_stop_val_acc) break;
    }
    if (cfg.early_stop_loss_ratio > 0 && result.initial_loss > 0 &&
        fwd.total < cfg.early_stop_loss_ratio * result.initial_loss)
      break;
  }

  // final validation pass so the best checkpoint reflects the last state too
  if (!val_records.empty() && cfg.val_interval && result.steps_run % cfg.val_interval != 0)
    run_validation(result.steps_run);

  if (result.checkpoint_path.empty() && !cfg.checkpoint_out.empty()) {
    TrainingMeta meta{cfg.seed, result.steps_run, result.best_val_acc, data_hash};
    save_checkpoint(*model, &optim, meta, cfg.checkpoint_out);
    result.checkpoint_path = cfg.checkpoint_out;
  }
  return result;
}

}  // namespace scatter
