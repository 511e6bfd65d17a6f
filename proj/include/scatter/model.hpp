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

// Full network assembly: TPS -> backbone -> text attention -> (training-only
// CTC branch) -> b Selective-Contextual Refinement blocks, each with its own
// selective decoder during training. The joint objective is
// L = lambda_CTC * L_CTC + sum_j lambda_j * L_Attn_j. Inference keeps the
// BiLSTM stacks of all blocks but only the final selective decoder.

#ifndef SCATTER_MODEL_HPP_
#define SCATTER_MODEL_HPP_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scatter/backbone.hpp"
#include "scatter/ctc.hpp"
#include "scatter/decoder.hpp"
#include "scatter/image.hpp"
#include "scatter/lstm.hpp"
#include "scatter/params.hpp"
#include "scatter/tps.hpp"
#include "scatter/vocab.hpp"

namespace scatter {

struct ScatterConfig {
  std::string backbone_preset = "desk";
  BackbonePlan backbone_plan = desk_backbone_plan();
  std::size_t blocks = 2;
  std::size_t block_hidden = 64;    // per direction
  std::size_t decoder_hidden = 64;
  std::size_t attn_dim = 64;
  double lambda_ctc = 0.1;
  std::vector<double> lambda_attn;  // per block; filled with 1.0 when empty
  std::size_t max_len = 25;
  std::size_t in_h = 32, in_w = 100;
  TpsConfig tps;

  void validate() {
    if (blocks < 1) throw ConfigError("blocks.count must be >= 1");
    if (lambda_attn.empty()) lambda_attn.assign(blocks, 1.0);
    if (lambda_attn.size() != blocks)
      throw ConfigError("lambda_attn must have one weight per block");
    if (lambda_ctc < 0) throw ConfigError("lambda_ctc must be >= 0");
    for (double l : lambda_attn)
      if (l < 0) throw ConfigError("lambda_attn weights must be >= 0");
    if (in_h == 0 || in_w == 0) throw ConfigError("input size must be positive");
    tps.in_h = tps.out_h = in_h;
    tps.in_w = tps.out_w = in_w;
  }
};

enum class ScatterBuild { Train, Analysis, Inference };

inline std::string build_name(ScatterBuild b) {
  switch (b) {
    case ScatterBuild::Train: return "train";
    case ScatterBuild::Analysis: return "analysis";
    case ScatterBuild::Inference: return "inference";
  }
  return "?";
}

inline ScatterBuild build_from_name(const std::string& s) {
  if (s == "train") return ScatterBuild::Train;
  if (s == "analysis") return ScatterBuild::Analysis;
  if (s == "inference") return ScatterBuild::Inference;
  throw ConfigError("unknown build kind: " + s);
}

struct Prediction {
  std::string text;
  double confidence = 0.0;
  std::string source = "original";  // original | cw | ccw
  std::vector<std::string> per_decoder_texts;  // analysis builds only
};

template <typename T>
struct TrainForward {
  double total = 0;                 // batch mean of Eq. 8
  double ctc = 0;                   // batch mean of L_CTC
  std::vector<double> attn;         // batch mean of each L_Attn_j
  std::size_t used = 0;
  std::size_t skipped = 0;          // CTC-infeasible samples
  std::vector<double> sample_totals;
};

template <typename T>
class ScatterModel {
 public:
  ScatterModel(ScatterConfig cfg, ScatterBuild build, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        build_(build),
        seed_(seed),
        ctc_vocab_(CharVocab::build(VocabMode::Ctc)),
        attn_vocab_(CharVocab::build(VocabMode::Attn)) {
    cfg_.validate();
    {
      Rng rng = Rng::derive(seed, {1});
      tps_ = std::make_unique<TpsTransform<T>>(cfg_.tps, params_, rng);
    }
    {
      Rng rng = Rng::derive(seed, {2});
      backbone_ =
          std::make_unique<Backbone<T>>(cfg_.backbone_plan, cfg_.in_h, cfg_.in_w, params_, rng);
    }
    if (build == ScatterBuild::Train) {
      Rng rng = Rng::derive(seed, {3});
      ctc_head_ = std::make_unique<CtcHead<T>>(backbone_->channels(), ctc_vocab_, params_, rng);
    }
    std::size_t in_ch = backbone_->channels();
    std::size_t d_channels = backbone_->channels() + 2 * cfg_.block_hidden;
    for (std::size_t j = 1; j <= cfg_.blocks; ++j) {
      Rng brng = Rng::derive(seed, {10 + j});
      blocks_.push_back(
          std::make_unique<ScrEncoder<T>>(j, in_ch, cfg_.block_hidden, params_, brng));
      in_ch = 2 * cfg_.block_hidden;
      bool keep_decoder = build != ScatterBuild::Inference || j == cfg_.blocks;
      if (keep_decoder) {
        Rng drng = Rng::derive(seed, {100 + j});
        decoders_[j] = std::make_unique<SelectiveDecoder<T>>(
            "decoder" + std::to_string(j), d_channels, cfg_.decoder_hidden, cfg_.attn_dim,
            attn_vocab_, params_, drng);
      }
    }
  }

  // TPS -> backbone -> text attention. VisualSeq V [N x C].
  Tensor<T> visual_sequence(const Tensor<T>& image) const {
    return backbone_->forward(tps_->forward(image));
  }

  // Contextual chain H_1..H_upto; block j > 1 consumes H_{j-1}.
  std::vector<Tensor<T>> context_chain(const Tensor<T>& v, std::size_t upto) const {
    std::vector<Tensor<T>> hs;
    Tensor<T> cur = v;
    for (std::size_t j = 1; j <= upto; ++j) {
      cur = blocks_[j - 1]->encode(cur);
      hs.push_back(cur);
    }
    return hs;
  }

  // Single-sample Eq. 8 graph. Component values (double) are written to the
  // out parameters when non-null.
  Tensor<T> sample_loss(const Tensor<T>& image, const std::string& label, double* ctc_out,
                        std::vector<double>* attn_out) const {
    if (build_ != ScatterBuild::Train)
      throw ContractError("sample_loss requires a training build");
    LabelEncoding ctc_labels = encode_label(label, ctc_vocab_);
    LabelEncoding attn_labels = encode_label(label, attn_vocab_);
    Tensor<T> v = visual_sequence(image);
    Tensor<T> ctc_loss_t = ctc_head_->loss(ctc_head_->project_logits(v), ctc_labels);
    if (ctc_out) *ctc_out = static_cast<double>(ctc_loss_t.item());
    Tensor<T> total = scale(ctc_loss_t, cfg_.lambda_ctc);
    auto hs = context_chain(v, cfg_.blocks);
    for (std::size_t j = 1; j <= cfg_.blocks; ++j) {
      Tensor<T> d = concat_features(v, hs[j - 1]);
      auto out = decoders_.at(j)->decode_sequence(d, DecodeMode::TeacherForcing,
                                                  attn_labels.ids, cfg_.max_len);
      Tensor<T> lj = decoders_.at(j)->attn_loss(out, attn_labels.ids);
      if (attn_out) attn_out->push_back(static_cast<double>(lj.item()));
      total = add(total, scale(lj, cfg_.lambda_attn[j - 1]));
    }
    return total;
  }

  // Batch objective. With gradients enabled each sample's scaled loss is
  // backpropagated immediately so only one sample graph is alive at a time;
  // gradients accumulate additively across the batch.
  TrainForward<T> forward_train(const std::vector<std::pair<Tensor<T>, std::string>>& batch,
                                bool with_grads) {
    if (build_ != ScatterBuild::Train)
      throw ContractError("forward_train requires a training build");
    TrainForward<T> r;
    r.attn.assign(cfg_.blocks, 0.0);
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      LabelEncoding enc = encode_label(batch[i].second, ctc_vocab_);
      if (ctc_min_frames(enc.ids) > backbone_->columns()) {
        ++r.skipped;
      } else {
        usable.push_back(i);
      }
    }
    if (usable.empty()) return r;
    double inv = 1.0 / static_cast<double>(usable.size());
    for (std::size_t i : usable) {
      double ctc_v = 0;
      std::vector<double> attn_v;
      if (with_grads) {
        Tensor<T> loss = sample_loss(batch[i].first, batch[i].second, &ctc_v, &attn_v);
        scale(loss, inv).backward();
        r.sample_totals.push_back(static_cast<double>(loss.item()));
      } else {
        NoGradGuard ng;
        Tensor<T> loss = sample_loss(batch[i].first, batch[i].second, &ctc_v, &attn_v);
        r.sample_totals.push_back(static_cast<double>(loss.item()));
      }
      r.ctc += ctc_v * inv;
      for (std::size_t j = 0; j < cfg_.blocks; ++j) r.attn[j] += attn_v[j] * inv;
      r.total += r.sample_totals.back() * inv;
    }
    r.used = usable.size();
    return r;
  }

  // Greedy inference through the final (or only) selective decoder. V reaches
  // the decoder via the skip connection around all BiLSTM blocks.
  DecoderOutput<T> forward_infer_full(const Tensor<T>& image) const {
    Tensor<T> v = visual_sequence(image);
    auto hs = context_chain(v, cfg_.blocks);
    Tensor<T> d = concat_features(v, hs.back());
    return decoders_.at(cfg_.blocks)
        ->decode_sequence(d, DecodeMode::Greedy, {}, cfg_.max_len);
  }

  Prediction forward_infer(const Tensor<T>& image) const {
    auto out = forward_infer_full(image);
    Prediction p;
    p.text = out.predicted_text;
    p.confidence = out.confidence;
    return p;
  }

  // Greedy decode of every retained decoder j over its own D_j.
  std::vector<DecoderOutput<T>> analysis_infer(const Tensor<T>& image) const {
    if (build_ == ScatterBuild::Inference && cfg_.blocks > 1)
      throw ContractError(
          "analysis requires a train or analysis build; this checkpoint only retains the final "
          "decoder");
    Tensor<T> v = visual_sequence(image);
    auto hs = context_chain(v, cfg_.blocks);
    std::vector<DecoderOutput<T>> outs;
    for (std::size_t j = 1; j <= cfg_.blocks; ++j) {
      Tensor<T> d = concat_features(v, hs[j - 1]);
      outs.push_back(
          decoders_.at(j)->decode_sequence(d, DecodeMode::Greedy, {}, cfg_.max_len));
    }
    return outs;
  }

  const ScatterConfig& config() const { return cfg_; }
  ScatterBuild build() const { return build_; }
  std::uint64_t seed() const { return seed_; }
  ParamRegistry<T>& params() { return params_; }
  const ParamRegistry<T>& params() const { return params_; }
  const CharVocab& ctc_vocab() const { return ctc_vocab_; }
  const CharVocab& attn_vocab() const { return attn_vocab_; }
  const Backbone<T>& backbone() const { return *backbone_; }
  const TpsTransform<T>& tps() const { return *tps_; }
  const CtcHead<T>& ctc_head() const { return *ctc_head_; }
  const SelectiveDecoder<T>& decoder(std::size_t j) const { return *decoders_.at(j); }
  bool has_decoder(std::size_t j) const { return decoders_.count(j) != 0; }

 private:
  ScatterConfig cfg_;
  ScatterBuild build_;
  std::uint64_t seed_;
  CharVocab ctc_vocab_, attn_vocab_;
  ParamRegistry<T> params_;
  std::unique_ptr<TpsTransform<T>> tps_;
  std::unique_ptr<Backbone<T>> backbone_;
  std::unique_ptr<CtcHead<T>> ctc_head_;
  std::vector<std::unique_ptr<ScrEncoder<T>>> blocks_;
  std::map<std::size_t, std::unique_ptr<SelectiveDecoder<T>>> decoders_;
};

// Retains TPS, backbone, blocks 1..k and block k's selective decoder; the
// result is a valid inference build whose outputs are bit-identical to the
// source model's decoder-k outputs.
template <typename T>
std::unique_ptr<ScatterModel<T>> prune(const ScatterModel<T>& model, std::size_t k) {
  if (k < 1 || k > model.config().blocks)
    throw ContractError("prune: k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(model.config().blocks) + "]");
  if (!model.has_decoder(k))
    throw ContractError("prune: decoder " + std::to_string(k) +
                        " absent from this build (already pruned?)");
  ScatterConfig cfg = model.config();
  cfg.blocks = k;
  cfg.lambda_attn.assign(k, 1.0);
  auto pruned =
      std::make_unique<ScatterModel<T>>(std::move(cfg), ScatterBuild::Inference, model.seed());
  for (auto& p : pruned->params().all()) {
    const auto& src = model.params().at(p.name);
    if (src.tensor.shape() != p.tensor.shape())
      throw ContractError("prune: shape mismatch for " + p.name);
    p.tensor.data() = src.tensor.data();
  }
  return pruned;
}

// Input pipeline shared by training and inference: resize to the configured
// size, normalize to [-1, 1].
template <typename T>
Tensor<T> model_input(const ScatterModel<T>& model, const GrayImage& img) {
  return to_input_tensor<T>(img, model.config().in_h, model.config().in_w);
}

template <typename T>
Prediction infer_image(const ScatterModel<T>& model, const GrayImage& img) {
  return model.forward_infer(model_input(model, img));
}

// Rotation heuristic: images taller than wide are recognized alongside their
// 90-degree rotations and the highest-confidence reading wins.
template <typename T>
Prediction infer_with_rotation(const ScatterModel<T>& model, const GrayImage& img) {
  if (img.height <= img.width) return infer_image(model, img);
  Prediction best = infer_image(model, img);
  best.source = "original";
  Prediction cw = infer_image(model, rotate90_cw(img));
  cw.source = "cw";
  Prediction ccw = infer_image(model, rotate90_ccw(img));
  ccw.source = "ccw";
  if (cw.confidence > best.confidence) best = cw;
  if (ccw.confidence > best.confidence) best = ccw;
  return best;
}

}  // namespace scatter

#endif  // SCATTER_MODEL_HPP_
