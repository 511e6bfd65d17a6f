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

// Two-step attention selective decoder. Step one gates the concatenated
// features D with a sigmoid map computed by a fully connected layer. Step two
// is glimpse-based attentional decoding with an LSTM cell:
//
//   e_{t,i}   = w^T tanh(W s_{t-1} + V d'_i + b)
//   alpha_t   = softmax(e_t)
//   g_t       = sum_i alpha_{t,i} d'_i
//   (x_t,s_t) = LSTM(s_{t-1}, (g_t, onehot(y_{t-1})))
//   p(y_t)    = softmax(W_o x_t + b_o)

#ifndef SCATTER_DECODER_HPP_
#define SCATTER_DECODER_HPP_

#include <string>
#include <vector>

#include "scatter/lstm.hpp"
#include "scatter/params.hpp"
#include "scatter/rng.hpp"
#include "scatter/tensor.hpp"
#include "scatter/vocab.hpp"

namespace scatter {

enum class DecodeMode { TeacherForcing, Greedy };

// Per-sequence decode result. Graph tensors are kept per step so losses and
// normalization checks can be built on top of them.
template <typename T>
struct DecoderOutput {
  std::vector<Tensor<T>> step_logits;  // [1 x V] pre-softmax
  std::vector<Tensor<T>> step_probs;   // [1 x V]
  std::vector<Tensor<T>> alphas;       // [N x 1] attention per step
  std::vector<std::size_t> predicted_ids;
  std::string predicted_text;
  double confidence = 0.0;  // mean chosen-symbol probability incl. the [S] step

  std::size_t steps() const { return step_logits.size(); }

  // T x V probability matrix snapshot.
  std::vector<std::vector<double>> distributions() const {
    std::vector<std::vector<double>> out;
    out.reserve(step_probs.size());
    for (const auto& p : step_probs)
      out.emplace_back(p.data().begin(), p.data().end());
    return out;
  }

  // T x N attention map snapshot.
  std::vector<std::vector<double>> attention_maps() const {
    std::vector<std::vector<double>> out;
    out.reserve(alphas.size());
    for (const auto& a : alphas) out.emplace_back(a.data().begin(), a.data().end());
    return out;
  }
};

template <typename T>
class SelectiveDecoder {
 public:
  SelectiveDecoder(const std::string& prefix, std::size_t d_channels, std::size_t hidden,
                   std::size_t attn_dim, const CharVocab& vocab, ParamRegistry<T>& reg,
                   Rng& rng)
      : vocab_(vocab), channels_(d_channels), hidden_(hidden) {
    gate_w_ = reg.create_uniform(prefix + ".gate.w", {d_channels, d_channels}, d_channels, rng);
    gate_b_ = reg.create_zeros(prefix + ".gate.b", {d_channels});
    feature_proj_ =
        reg.create_uniform(prefix + ".attn.feature_proj", {d_channels, attn_dim}, d_channels, rng);
    state_proj_ = reg.create_uniform(prefix + ".attn.state_proj", {hidden, attn_dim}, hidden, rng);
    attn_b_ = reg.create_zeros(prefix + ".attn.b", {attn_dim});
    score_w_ = reg.create_uniform(prefix + ".attn.score", {attn_dim, 1}, attn_dim, rng);
    cell_ = LstmCellParams<T>::create(prefix + ".cell", d_channels + vocab.size(), hidden, reg,
                                      rng);
    out_w_ = reg.create_uniform(prefix + ".out.w", {hidden, vocab.size()}, hidden, rng);
    out_b_ = reg.create_zeros(prefix + ".out.b", {vocab.size()});
  }

  // First attention step: D' = sigmoid(FC(D)) * D, same shape as D.
  Tensor<T> feature_gate(const Tensor<T>& d) const {
    Tensor<T> map = sigmoid(add_rowvec(matmul(d, gate_w_), gate_b_));
    return mul(map, d);
  }

  // Second-step attention for one timestep. vd is the precomputed
  // feature_proj applied to D' (done once per sequence).
  std::pair<Tensor<T>, Tensor<T>> attention_step(const Tensor<T>& state_hidden,
                                                 const Tensor<T>& d_prime,
                                                 const Tensor<T>& vd) const {
    Tensor<T> ws = add_rowvec(matmul(state_hidden, state_proj_), attn_b_);  // [1 x A]
    Tensor<T> scores = matmul(tanh_op(add_rowvec(vd, reshape(ws, {ws.numel()}))), score_w_);
    Tensor<T> alpha = softmax(scores, 0);                       // [N x 1]
    Tensor<T> glimpse = matmul(transpose2d(alpha), d_prime);    // [1 x C]
    return {alpha, glimpse};
  }

  // Recurrent decode step; returns (logits [1 x V], new state).
  std::pair<Tensor<T>, LstmState<T>> decode_step(const LstmState<T>& state,
                                                 const Tensor<T>& glimpse,
                                                 std::size_t y_prev) const {
    if (y_prev >= vocab_.size()) throw ContractError("decode_step: symbol id out of range");
    Tensor<T> onehot = Tensor<T>::zeros({1, vocab_.size()});
    onehot.data()[y_prev] = T(1);
    Tensor<T> cell_in = concat<T>({glimpse, onehot}, 1);
    LstmState<T> next = lstm_cell_step(cell_in, state, cell_);
    Tensor<T> logits = add_rowvec(matmul(next.hidden, out_w_), out_b_);
    return {logits, next};
  }

  // Full sequence decode over D. Teacher forcing feeds the ground-truth
  // previous symbol and runs exactly targets.size() steps; greedy feeds its
  // own argmax and stops at [S] or after max_len steps.
  DecoderOutput<T> decode_sequence(const Tensor<T>& d, DecodeMode mode,
                                   const std::vector<std::size_t>& targets,
                                   std::size_t max_len) const {
    if (mode == DecodeMode::TeacherForcing) {
      if (targets.empty() || targets.back() != vocab_.stop_id())
        throw ContractError("teacher forcing requires targets terminated by [S]");
    }
    Tensor<T> d_prime = feature_gate(d);
    Tensor<T> vd = matmul(d_prime, feature_proj_);
    LstmState<T> state = LstmState<T>::zeros(hidden_);
    DecoderOutput<T> out;
    std::size_t y_prev = vocab_.go_id();
    std::size_t steps = mode == DecodeMode::TeacherForcing ? targets.size() : max_len;
    double conf_acc = 0;
    for (std::size_t t = 0; t < steps; ++t) {
      auto [alpha, glimpse] = attention_step(state.hidden, d_prime, vd);
      auto [logits, next] = decode_step(state, glimpse, y_prev);
      state = next;
      Tensor<T> probs = softmax(logits, 1);
      std::size_t chosen = 0;
      for (std::size_t k = 1; k < vocab_.size(); ++k)
        if (probs.data()[k] > probs.data()[chosen]) chosen = k;
      conf_acc += static_cast<double>(probs.data()[chosen]);
      out.alphas.push_back(alpha);
      out.step_logits.push_back(logits);
      out.step_probs.push_back(probs);
      out.predicted_ids.push_back(chosen);
      if (mode == DecodeMode::TeacherForcing) {
        y_prev = targets[t];
      } else {
        if (chosen == vocab_.stop_id()) break;
        y_prev = chosen;
      }
    }
    out.confidence = out.steps() ? conf_acc / static_cast<double>(out.steps()) : 0.0;
    out.predicted_text = decode_ids(out.predicted_ids, vocab_);
    return out;
  }

  // Mean over steps of -log p(target_t), including the [S] step. Built from
  // logits via shift-stabilized logsumexp so teacher forcing never hits a
  // zero-probability log.
  Tensor<T> attn_loss(const DecoderOutput<T>& output,
                      const std::vector<std::size_t>& targets) const {
    if (output.steps() != targets.size())
      throw ContractError("attn_loss: " + std::to_string(output.steps()) + " steps vs " +
                          std::to_string(targets.size()) + " targets");
    Tensor<T> total = Tensor<T>::scalar(T(0));
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (targets[t] >= vocab_.size()) throw ContractError("attn_loss: target id out of range");
      Tensor<T> nll = sub(logsumexp(output.step_logits[t]), pick(output.step_logits[t], targets[t]));
      total = add(total, nll);
    }
    return scale(total, 1.0 / static_cast<double>(targets.size()));
  }

  const CharVocab& vocab() const { return vocab_; }
  std::size_t channels() const { return channels_; }

 private:
  CharVocab vocab_;
  std::size_t channels_, hidden_;
  Tensor<T> gate_w_, gate_b_;
  Tensor<T> feature_proj_, state_proj_, attn_b_, score_w_;
  LstmCellParams<T> cell_;
  Tensor<T> out_w_, out_b_;
};

}  // namespace scatter

#endif  // SCATTER_DECODER_HPP_
