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

// Selective-Contextual Refinement encoder: stacked two-layer BiLSTM blocks.
// Block 1 consumes the visual sequence V; block j > 1 consumes H_{j-1}. The
// concatenation D_j = (V, H_j) exists only for the decoders; V itself is
// never updated by any block.

#ifndef SCATTER_LSTM_HPP_
#define SCATTER_LSTM_HPP_

#include <string>
#include <vector>

#include "scatter/params.hpp"
#include "scatter/rng.hpp"
#include "scatter/tensor.hpp"

namespace scatter {

// Gate order in the fused weight matrices: input, forget, cell, output.
template <typename T>
struct LstmCellParams {
  Tensor<T> w_x;  // [in x 4h]
  Tensor<T> w_h;  // [h x 4h]
  Tensor<T> b;    // [4h]
  std::size_t hidden = 0;

  static LstmCellParams create(const std::string& prefix, std::size_t in, std::size_t hidden,
                               ParamRegistry<T>& reg, Rng& rng) {
    LstmCellParams p;
    p.hidden = hidden;
    p.w_x = reg.create_uniform(prefix + ".w_x", {in, 4 * hidden}, hidden, rng);
    p.w_h = reg.create_uniform(prefix + ".w_h", {hidden, 4 * hidden}, hidden, rng);
    // Forget-gate bias starts at 1 so early cell state carries through.
    std::vector<T> b(4 * hidden, T(0));
    for (std::size_t i = hidden; i < 2 * hidden; ++i) b[i] = T(1);
    p.b = reg.create(prefix + ".b", {4 * hidden}, std::move(b));
    return p;
  }
};

template <typename T>
struct LstmState {
  Tensor<T> hidden;  // [1 x h]
  Tensor<T> cell;    // [1 x h]

  static LstmState zeros(std::size_t h) {
    return {Tensor<T>::zeros({1, h}), Tensor<T>::zeros({1, h})};
  }
};

// Applies the gating nonlinearities to pre-activations [1 x 4h].
template <typename T>
LstmState<T> lstm_apply_gates(const Tensor<T>& gates, const Tensor<T>& c_prev,
                              std::size_t hidden) {
  Tensor<T> i = sigmoid(slice(gates, 1, 0, hidden));
  Tensor<T> f = sigmoid(slice(gates, 1, hidden, hidden));
  Tensor<T> g = tanh_op(slice(gates, 1, 2 * hidden, hidden));
  Tensor<T> o = sigmoid(slice(gates, 1, 3 * hidden, hidden));
  Tensor<T> c = add(mul(f, c_prev), mul(i, g));
  return {mul(o, tanh_op(c)), c};
}

// One LSTM step: x [1 x in], standard input/forget/cell/output gating.
template <typename T>
LstmState<T> lstm_cell_step(const Tensor<T>& x, const LstmState<T>& state,
                            const LstmCellParams<T>& p) {
  Tensor<T> gates =
      add_rowvec(add(matmul(x, p.w_x), matmul(state.hidden, p.w_h)), p.b);
  return lstm_apply_gates(gates, state.cell, p.hidden);
}

// One direction over a sequence with the input projection batched across all
// timesteps. Returns the per-step hidden states in sequence order.
template <typename T>
std::vector<Tensor<T>> lstm_direction(const Tensor<T>& seq, const LstmCellParams<T>& p,
                                      bool reverse) {
  std::size_t n = seq.dim(0);
  Tensor<T> xproj = add_rowvec(matmul(seq, p.w_x), p.b);  // [N x 4h]
  LstmState<T> state = LstmState<T>::zeros(p.hidden);
  std::vector<Tensor<T>> states(n);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t t = reverse ? n - 1 - step : step;
    Tensor<T> gates = add(slice(xproj, 0, t, 1), matmul(state.hidden, p.w_h));
    state = lstm_apply_gates(gates, state.cell, p.hidden);
    states[t] = state.hidden;
  }
  return states;
}

// Bidirectional layer: [N x d_in] -> [N x 2h], forward half first.
template <typename T>
Tensor<T> bilstm_layer(const Tensor<T>& seq, const LstmCellParams<T>& fwd,
                       const LstmCellParams<T>& bwd) {
  if (seq.shape().size() != 2)
    throw DimensionError("bilstm_layer: expected [N x d], got " + shape_str(seq.shape()));
  auto f = lstm_direction(seq, fwd, false);
  auto b = lstm_direction(seq, bwd, true);
  Tensor<T> fcat = concat(f, 0);
  Tensor<T> bcat = concat(b, 0);
  return concat<T>({fcat, bcat}, 1);
}

// One Selective-Contextual Refinement encoder: two stacked BiLSTM layers with
// per-block parameters (no sharing across blocks).
template <typename T>
class ScrEncoder {
 public:
  ScrEncoder(std::size_t block_index, std::size_t in_channels, std::size_t hidden,
             ParamRegistry<T>& reg, Rng& rng)
      : hidden_(hidden) {
    std::string base = "block" + std::to_string(block_index);
    l1_fwd_ = LstmCellParams<T>::create(base + ".l1.fwd", in_channels, hidden, reg, rng);
    l1_bwd_ = LstmCellParams<T>::create(base + ".l1.bwd", in_channels, hidden, reg, rng);
    l2_fwd_ = LstmCellParams<T>::create(base + ".l2.fwd", 2 * hidden, hidden, reg, rng);
    l2_bwd_ = LstmCellParams<T>::create(base + ".l2.bwd", 2 * hidden, hidden, reg, rng);
  }

  // ContextSeq H_j [N x 2h].
  Tensor<T> encode(const Tensor<T>& input_seq) const {
    return bilstm_layer(bilstm_layer(input_seq, l1_fwd_, l1_bwd_), l2_fwd_, l2_bwd_);
  }

  std::size_t hidden() const { return hidden_; }
  std::size_t out_channels() const { return 2 * hidden_; }

 private:
  std::size_t hidden_;
  LstmCellParams<T> l1_fwd_, l1_bwd_, l2_fwd_, l2_bwd_;
};

// D_j = (V, H_j): channel-wise concatenation, visual channels first.
template <typename T>
Tensor<T> concat_features(const Tensor<T>& v, const Tensor<T>& h) {
  if (v.dim(0) != h.dim(0))
    throw DimensionError("concat_features: length mismatch " + shape_str(v.shape()) + " vs " +
                         shape_str(h.shape()));
  return concat<T>({v, h}, 1);
}

}  // namespace scatter

#endif  // SCATTER_LSTM_HPP_
