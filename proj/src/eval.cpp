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

#include "scatter/eval.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

namespace scatter {

std::string normalize_for_match(const std::string& s) {
  std::string out;
  for (char ch : s) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    if ((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z')) out += static_cast<char>(c);
  }
  return out;
}

double word_accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& gts) {
  if (preds.size() != gts.size())
    throw ContractError("word_accuracy: " + std::to_string(preds.size()) + " predictions vs " +
                        std::to_string(gts.size()) + " ground truths");
  if (preds.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (normalize_for_match(preds[i]) == normalize_for_match(gts[i])) ++correct;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double oracle_accuracy(const std::vector<std::vector<std::string>>& per_sample_decoder_preds,
                       const std::vector<std::string>& gts) {
  if (per_sample_decoder_preds.size() != gts.size())
    throw ContractError("oracle_accuracy: prediction rows do not match ground truths");
  if (gts.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    std::string gt = normalize_for_match(gts[i]);
    for (const auto& p : per_sample_decoder_preds[i])
      if (normalize_for_match(p) == gt) {
        ++correct;
        break;
      }
  }
  return static_cast<double>(correct) / static_cast<double>(gts.size());
}

namespace {

// Worst |sum - 1| over attention rows and step distributions of one decode.
void audit_normalization(const DecoderOutput<float>& out, double& alpha_err, double& dist_err) {
  for (const auto& a : out.alphas) {
    double s = 0;
    for (float v : a.data()) s += static_cast<double>(v);
    alpha_err = std::max(alpha_err, std::abs(s - 1.0));
  }
  for (const auto& p : out.step_probs) {
    double s = 0;
    for (float v : p.data()) s += static_cast<double>(v);
    dist_err = std::max(dist_err, std::abs(s - 1.0));
  }
}

}  // namespace

EvalReport evaluate(const ScatterModel<float>& model, const std::vector<SampleRecord>& records,
                    const EvalOptions& opts) {
  if (opts.analysis && model.build() == ScatterBuild::Inference && model.config().blocks > 1)
    throw ContractError(
        "analysis evaluation needs a train or analysis checkpoint; this inference checkpoint "
        "dropped the intermediate decoders");

  EvalReport report;
  report.count = records.size();
  report.samples.resize(records.size());
  std::size_t n_threads = opts.threads ? opts.threads
                                       : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, records.size() ? records.size() : std::size_t{1});

  std::atomic<std::size_t> next{0};
  std::vector<double> alpha_errs(n_threads, 0.0), dist_errs(n_threads, 0.0);
  auto worker = [&](std::size_t tid) {
    NoGradGuard ng;
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= records.size()) break;
      const auto& rec = records[i];
      SampleEval& se = report.samples[i];
      se.gt = rec.label;
      se.category = rec.category;
      GrayImage img = read_png(rec.image_path);
      se.orientation = img.height > img.width ? "tall" : "wide";
      if (opts.analysis) {
        auto outs = model.analysis_infer(model_input(model, img));
        double best_conf = -1;
        for (auto& o : outs) {
          audit_normalization(o, alpha_errs[tid], dist_errs[tid]);
          se.decoder_preds.push_back(o.predicted_text);
          if (o.confidence > best_conf) best_conf = o.confidence;
        }
        se.chosen = outs.back().predicted_text;  // final decoder is the model's prediction
        se.confidence = outs.back().confidence;
      } else if (opts.rotate) {
        Prediction p = infer_with_rotation(model, img);
        se.chosen = p.text;
        se.confidence = p.confidence;
        se.rotated_source = p.source != "original";
      } else {
        auto out = model.forward_infer_full(model_input(model, img));
        audit_normalization(out, alpha_errs[tid], dist_errs[tid]);
        se.chosen = out.predicted_text;
        se.confidence = out.confidence;
      }
    }
  };
  if (n_threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }
  for (std::size_t t = 0; t < n_threads; ++t) {
    report.max_alpha_sum_err = std::max(report.max_alpha_sum_err, alpha_errs[t]);
    report.max_dist_sum_err = std::max(report.max_dist_sum_err, dist_errs[t]);
  }

  std::size_t correct = 0, correct_reg = 0, correct_irr = 0;
  for (const auto& se : report.samples) {
    bool ok = normalize_for_match(se.chosen) == normalize_for_match(se.gt);
    correct += ok;
    if (se.category == "irregular") {
      ++report.count_irregular;
      correct_irr += ok;
    } else {
      ++report.count_regular;
      correct_reg += ok;
    }
  }
  if (report.count) report.accuracy = static_cast<double>(correct) / report.count;
  if (report.count_regular)
    report.accuracy_regular = static_cast<double>(correct_reg) / report.count_regular;
  if (report.count_irregular)
    report.accuracy_irregular = static_cast<double>(correct_irr) / report.count_irregular;

  if (opts.analysis) {
    std::size_t b = model.config().blocks;
    report.per_decoder.assign(b, 0.0);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> gts;
    for (const auto& se : report.samples) {
      rows.push_back(se.decoder_preds);
      gts.push_back(se.gt);
      for (std::size_t j = 0; j < b; ++j)
        report.per_decoder[j] +=
            normalize_for_match(se.decoder_preds[j]) == normalize_for_match(se.gt) ? 1.0 : 0.0;
    }
    for (auto& a : report.per_decoder) a /= report.count ? report.count : 1;
    report.oracle = oracle_accuracy(rows, gts);
  }
  return report;
}

std::vector<double> intermediate_accuracies(const ScatterModel<float>& model,
                                            const std::vector<SampleRecord>& records) {
  EvalOptions opts;
  opts.analysis = true;
  return evaluate(model, records, opts).per_decoder;
}

LatencyReport benchmark_latency(const ScatterModel<float>& model,
                                const std::vector<std::size_t>& block_counts, std::size_t iters,
                                std::size_t warmup) {
  LatencyReport report;
  report.block_counts = block_counts;
  // fixed synthetic probe image
  RenderStyle style;
  style.scale = 3;
  GrayImage probe = render_word("bench", style, 7);
  for (std::size_t k : block_counts) {
    auto pruned = prune(model, k);
    NoGradGuard ng;
    Tensor<float> input = model_input(*pruned, probe);
    for (std::size_t i = 0; i < warmup; ++i) (void)pruned->forward_infer_full(input);
    auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < iters; ++i) (void)pruned->forward_infer_full(input);
    auto t1 = std::chrono::steady_clock::now();
    double total_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    report.mean_ms.push_back(total_ms / static_cast<double>(iters));
  }
  // least-squares line over (k, ms)
  std::size_t n = block_counts.size();
  if (n >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double x = static_cast<double>(block_counts[i]);
      sx += x;
      sy += report.mean_ms[i];
      sxx += x * x;
      sxy += x * report.mean_ms[i];
    }
    double denom = n * sxx - sx * sx;
    report.per_block_ms = (n * sxy - sx * sy) / denom;
    report.intercept_ms = (sy - report.per_block_ms * sx) / n;
    double ss_res = 0, ss_tot = 0, mean_y = sy / n;
    for (std::size_t i = 0; i < n; ++i) {
      double fit = report.intercept_ms + report.per_block_ms * static_cast<double>(block_counts[i]);
      ss_res += (report.mean_ms[i] - fit) * (report.mean_ms[i] - fit);
      ss_tot += (report.mean_ms[i] - mean_y) * (report.mean_ms[i] - mean_y);
    }
    report.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  }
  return report;
}

void dump_samples_tsv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write sample dump " + path);
  out << "gt\tchosen\tconfidence\tcategory\tdecoder_preds\n";
  for (const auto& se : report.samples) {
    out << se.gt << "\t" << se.chosen << "\t" << se.confidence << "\t" << se.category << "\t";
    for (std::size_t j = 0; j < se.decoder_preds.size(); ++j)
      out << (j ? "|" : "") << se.decoder_preds[j];
    out << "\n";
  }
}

}  // namespace scatter
