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

// Evaluation metrics and analyses: word accuracy under the 36-class protocol,
// per-decoder intermediate accuracies, oracle voting, latency scaling.

#ifndef SCATTER_EVAL_HPP_
#define SCATTER_EVAL_HPP_

#include <string>
#include <vector>

#include "scatter/model.hpp"
#include "scatter/synth.hpp"

namespace scatter {

// Lowercases and strips non-alphanumeric codepoints; both sides of every
// word-accuracy comparison run through this.
std::string normalize_for_match(const std::string& s);

double word_accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& gts);

// Fraction of samples where ANY decoder's prediction matches.
double oracle_accuracy(const std::vector<std::vector<std::string>>& per_sample_decoder_preds,
                       const std::vector<std::string>& gts);

struct SampleEval {
  std::string gt;
  std::string category;     // regular | irregular
  std::string orientation;  // wide | tall
  std::vector<std::string> decoder_preds;  // analysis mode: one per decoder
  std::string chosen;
  double confidence = 0.0;
  bool rotated_source = false;
};

struct EvalReport {
  std::size_t count = 0;
  double accuracy = 0.0;
  double accuracy_regular = 0.0;
  double accuracy_irregular = 0.0;
  std::size_t count_regular = 0;
  std::size_t count_irregular = 0;
  std::vector<double> per_decoder;  // analysis mode
  double oracle = -1.0;             // analysis mode
  std::vector<SampleEval> samples;
  // normalization audit across the run (Eq. 4 / Eq. 7)
  double max_alpha_sum_err = 0.0;
  double max_dist_sum_err = 0.0;
};

struct EvalOptions {
  bool analysis = false;   // decode every retained decoder
  bool rotate = false;     // apply the tall-image rotation heuristic
  std::size_t threads = 0; // 0 = hardware default
};

EvalReport evaluate(const ScatterModel<float>& model, const std::vector<SampleRecord>& records,
                    const EvalOptions& opts = {});

// Per-decoder greedy accuracies on an analysis-capable build.
std::vector<double> intermediate_accuracies(const ScatterModel<float>& model,
                                            const std::vector<SampleRecord>& records);

struct LatencyReport {
  std::vector<std::size_t> block_counts;
  std::vector<double> mean_ms;
  double per_block_ms = 0.0;  // slope of the linear fit
  double intercept_ms = 0.0;
  double r2 = 0.0;
};

// Wall-clock per-image inference latency for each pruned block count,
// single-threaded, with warmup iterations excluded.
LatencyReport benchmark_latency(const ScatterModel<float>& model,
                                const std::vector<std::size_t>& block_counts,
                                std::size_t iters = 100, std::size_t warmup = 10);

// TSV sample dump: gt, per-decoder predictions, chosen prediction, confidence.
void dump_samples_tsv(const EvalReport& report, const std::string& path);

}  // namespace scatter

#endif  // SCATTER_EVAL_HPP_
