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

// Visual feature refinement: intermediate CTC supervision over the visual
// sequence. The loss marginalizes over all frame-to-label alignments via the
// collapse mapping B (drop adjacent repeats, then blanks) with a log-space
// forward recursion; ctc_brute_force enumerates paths directly and serves as
// the oracle.

#ifndef SCATTER_CTC_HPP_
#define SCATTER_CTC_HPP_

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "scatter/params.hpp"
#include "scatter/rng.hpp"
#include "scatter/tensor.hpp"
#include "scatter/vocab.hpp"

namespace scatter {

namespace detail {

inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace detail

// Number of adjacent duplicate pairs; a target is CTC-feasible over N frames
// iff N >= L + dup_pairs.
inline std::size_t ctc_min_frames(const std::vector<std::size_t>& target) {
  std::size_t dups = 0;
  for (std::size_t i = 0; i + 1 < target.size(); ++i)
    if (target[i] == target[i + 1]) ++dups;
  return target.size() + dups;
}

// -log p(target | logits) over logits [N x classes] with the given blank
// index, computed by the log-space forward recursion over the
// blank-interleaved extended target. The gradient is the standard
// alpha-beta closed form. Internal math runs in double for any T.
template <typename T>
Tensor<T> ctc_loss(const Tensor<T>& logits, const std::vector<std::size_t>& target,
                   std::size_t blank) {
  const Shape& s = logits.shape();
  if (s.size() != 2) throw DimensionError("ctc_loss: logits must be [N x classes]");
  const std::size_t n = s[0], cls = s[1];
  if (blank >= cls) throw ContractError("ctc_loss: blank index out of range");
  for (std::size_t id : target) {
    if (id >= cls) throw ContractError("ctc_loss: target id out of range");
    if (id == blank) throw ContractError("ctc_loss: target contains blank");
  }
  if (ctc_min_frames(target) > n)
    throw ContractError("ctc_loss: infeasible target, N=" + std::to_string(n) +
                        " frames cannot emit L=" + std::to_string(target.size()) +
                        " labels (needs " + std::to_string(ctc_min_frames(target)) + ")");

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  // log softmax per frame, double precision
  std::vector<double> lp(n * cls);
  for (std::size_t t = 0; t < n; ++t) {
    double mx = static_cast<double>(logits.data()[t * cls]);
    for (std::size_t k = 1; k < cls; ++k)
      mx = std::max(mx, static_cast<double>(logits.data()[t * cls + k]));
    double denom = 0;
    for (std::size_t k = 0; k < cls; ++k)
      denom += std::exp(static_cast<double>(logits.data()[t * cls + k]) - mx);
    double log_denom = std::log(denom) + mx;
    for (std::size_t k = 0; k < cls; ++k)
      lp[t * cls + k] = static_cast<double>(logits.data()[t * cls + k]) - log_denom;
  }

  // extended target: blank-interleaved
  const std::size_t se = 2 * target.size() + 1;
  std::vector<std::size_t> ext(se, blank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];

  auto allow_skip = [&](std::size_t sidx) {
    return sidx >= 2 && ext[sidx] != blank && ext[sidx] != ext[sidx - 2];
  };

  std::vector<double> alpha(n * se, kNegInf);
  alpha[0] = lp[ext[0]];
  if (se > 1) alpha[1] = lp[ext[1]];
  for (std::size_t t = 1; t < n; ++t)
    for (std::size_t sidx = 0; sidx < se; ++sidx) {
      double acc = alpha[(t - 1) * se + sidx];
      if (sidx >= 1) acc = detail::log_add(acc, alpha[(t - 1) * se + sidx - 1]);
      if (allow_skip(sidx)) acc = detail::log_add(acc, alpha[(t - 1) * se + sidx - 2]);
      alpha[t * se + sidx] = acc + lp[t * cls + ext[sidx]];
    }
  double log_p = alpha[(n - 1) * se + se - 1];
  if (se > 1) log_p = detail::log_add(log_p, alpha[(n - 1) * se + se - 2]);

  double loss = -log_p;

  return custom_op<T>(
      {}, {static_cast<T>(loss)}, {logits},
      [n, cls, se, blank, ext, lp = std::move(lp), alpha = std::move(alpha),
       log_p](Node<T>& self) {
        constexpr double ninf = -std::numeric_limits<double>::infinity();
        // beta recursion, symmetric convention (emission included both sides)
        std::vector<double> beta(n * se, ninf);
        beta[(n - 1) * se + se - 1] = lp[(n - 1) * cls + ext[se - 1]];
        if (se > 1) beta[(n - 1) * se + se - 2] = lp[(n - 1) * cls + ext[se - 2]];
        auto allow_skip = [&](std::size_t sidx) {
          return sidx + 2 < se && ext[sidx + 2] != blank && ext[sidx + 2] != ext[sidx];
        };
        for (std::size_t ti = n - 1; ti-- > 0;)
          for (std::size_t sidx = 0; sidx < se; ++sidx) {
            double acc = beta[(ti + 1) * se + sidx];
            if (sidx + 1 < se) acc = detail::log_add(acc, beta[(ti + 1) * se + sidx + 1]);
            if (allow_skip(sidx)) acc = detail::log_add(acc, beta[(ti + 1) * se + sidx + 2]);
            beta[ti * se + sidx] = acc + lp[ti * cls + ext[sidx]];
          }
        // dL/d logit_t,k = y_t,k - exp(lse_{s: ext[s]=k}(alpha+beta) - log_p - lp_t,k)
        auto& p = *self.parents[0];
        T up = self.grad[0];
        for (std::size_t t = 0; t < n; ++t) {
          std::vector<double> occ(cls, ninf);
          for (std::size_t sidx = 0; sidx < se; ++sidx)
            occ[ext[sidx]] =
                detail::log_add(occ[ext[sidx]], alpha[t * se + sidx] + beta[t * se + sidx]);
          for (std::size_t k = 0; k < cls; ++k) {
            double y = std::exp(lp[t * cls + k]);
            double sub = occ[k] == ninf ? 0.0 : std::exp(occ[k] - log_p - lp[t * cls + k]);
            p.grad[t * cls + k] += static_cast<T>((y - sub) * static_cast<double>(up));
          }
        }
      });
}

// Exact path enumeration oracle: sums softmax path products over all
// classes^N paths whose collapse equals the target. Independent of the
// forward-recursion implementation above. f64 only.
inline double ctc_brute_force(const std::vector<double>& logits, std::size_t n, std::size_t cls,
                              const std::vector<std::size_t>& target, std::size_t blank) {
  if (n > 8 || cls > 5)
    throw ContractError("ctc_brute_force: guard exceeded (N <= 8, classes <= 5)");
  if (logits.size() != n * cls) throw DimensionError("ctc_brute_force: bad logits size");
  // per-frame probabilities, straight normalization
  std::vector<double> prob(n * cls);
  for (std::size_t t = 0; t < n; ++t) {
    double denom = 0;
    for (std::size_t k = 0; k < cls; ++k) denom += std::exp(logits[t * cls + k]);
    for (std::size_t k = 0; k < cls; ++k) prob[t * cls + k] = std::exp(logits[t * cls + k]) / denom;
  }
  std::vector<std::size_t> path(n, 0);
  double total = 0;
  while (true) {
    // collapse: drop adjacent repeats, then blanks
    std::vector<std::size_t> collapsed;
    for (std::size_t t = 0; t < n; ++t) {
      if (t > 0 && path[t] == path[t - 1]) continue;
      if (path[t] != blank) collapsed.push_back(path[t]);
    }
    if (collapsed == target) {
      double pp = 1;
      for (std::size_t t = 0; t < n; ++t) pp *= prob[t * cls + path[t]];
      total += pp;
    }
    // next path in lexicographic order
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++path[pos] < cls) break;
      path[pos] = 0;
      if (pos == 0) return total > 0 ? -std::log(total) : std::numeric_limits<double>::infinity();
    }
    if (pos == 0 && path[0] == 0) break;  // wrapped fully
  }
  return total > 0 ? -std::log(total) : std::numeric_limits<double>::infinity();
}

// Greedy decode: per-column argmax (ties toward the lower index), then B.
template <typename T>
std::string ctc_greedy_decode(const Tensor<T>& logits, const CharVocab& vocab) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[1] != vocab.size())
    throw DimensionError("ctc_greedy_decode: logits " + shape_str(s) + " vs vocab size " +
                         std::to_string(vocab.size()));
  std::vector<std::size_t> path(s[0]);
  for (std::size_t t = 0; t < s[0]; ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < s[1]; ++k)
      if (logits.data()[t * s[1] + k] > logits.data()[t * s[1] + best]) best = k;
    path[t] = best;
  }
  return collapse_ctc(path, vocab);
}

// Training-only CTC head: shared per-column affine projection C -> classes.
template <typename T>
class CtcHead {
 public:
  CtcHead(std::size_t in_channels, const CharVocab& vocab, ParamRegistry<T>& reg, Rng& rng)
      : vocab_(vocab) {
    w_ = reg.create_uniform("ctc.proj.w", {in_channels, vocab.size()}, in_channels, rng);
    b_ = reg.create_zeros("ctc.proj.b", {vocab.size()});
  }

  // CtcLogits [N x classes].
  Tensor<T> project_logits(const Tensor<T>& v) const {
    return add_rowvec(matmul(v, w_), b_);
  }

  Tensor<T> loss(const Tensor<T>& logits, const LabelEncoding& target) const {
    if (target.mode != VocabMode::Ctc) throw ContractError("ctc loss needs ctc-mode labels");
    return ctc_loss(logits, target.ids, vocab_.blank_id());
  }

  const CharVocab& vocab() const { return vocab_; }

 private:
  CharVocab vocab_;
  Tensor<T> w_, b_;
};

}  // namespace scatter

#endif  // SCATTER_CTC_HPP_
