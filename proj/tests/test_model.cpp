#include <doctest.h>

#include <cmath>

#include "scatter/model.hpp"
#include "test_util.hpp"

using namespace scatter;
using namespace scatter::testutil;

TEST_CASE("loss composition follows the weighted objective") {
  auto cfg = micro_config(2);
  ScatterModel<double> model(cfg, ScatterBuild::Train, 11);
  auto img = random_input<double>(3);

  double ctc = 0;
  std::vector<double> attn;
  NoGradGuard ng;
  double total = model.sample_loss(img, "ab1", &ctc, &attn).item();
  CHECK(attn.size() == 2);
  CHECK(total == doctest::Approx(0.1 * ctc + attn[0] + attn[1]).epsilon(1e-9));

  // all lambda_attn = 0 reduces to the CTC term
  auto cfg0 = micro_config(2);
  cfg0.lambda_attn = {0.0, 0.0};
  ScatterModel<double> model0(cfg0, ScatterBuild::Train, 11);
  double ctc0 = 0;
  std::vector<double> attn0;
  double total0 = model0.sample_loss(img, "ab1", &ctc0, &attn0).item();
  CHECK(total0 == doctest::Approx(0.1 * ctc0).epsilon(1e-9));

  // doubling lambda_ctc adds exactly 0.1 * L_ctc under fixed forward values
  auto cfg2 = micro_config(2);
  cfg2.lambda_ctc = 0.2;
  ScatterModel<double> model2(cfg2, ScatterBuild::Train, 11);
  double ctc2 = 0;
  std::vector<double> attn2;
  double total2 = model2.sample_loss(img, "ab1", &ctc2, &attn2).item();
  CHECK(ctc2 == doctest::Approx(ctc).epsilon(1e-12));  // same parameters, same forward
  CHECK(total2 - total == doctest::Approx(0.1 * ctc).epsilon(1e-9));

  // single block has a single attention term
  ScatterModel<double> model1(micro_config(1), ScatterBuild::Train, 11);
  std::vector<double> attn1;
  model1.sample_loss(img, "ab1", nullptr, &attn1);
  CHECK(attn1.size() == 1);
}

TEST_CASE("batch forward averages per-sample objectives") {
  auto cfg = micro_config(1);
  ScatterModel<float> model(cfg, ScatterBuild::Train, 5);
  std::vector<std::pair<Tensor<float>, std::string>> batch;
  for (std::uint64_t s = 0; s < 3; ++s) batch.emplace_back(random_input<float>(s), "ab");
  auto fwd = model.forward_train(batch, /*with_grads=*/false);
  CHECK(fwd.used == 3);
  CHECK(fwd.skipped == 0);
  double expect = 0;
  for (double v : fwd.sample_totals) expect += v / 3.0;
  CHECK(fwd.total == doctest::Approx(expect).epsilon(1e-9));
  CHECK(fwd.total == doctest::Approx(0.1 * fwd.ctc + fwd.attn[0]).epsilon(1e-5));

  // an infeasible label (needs more frames than N=8) is skipped with a count
  batch.emplace_back(random_input<float>(9), "aaaaaaaa");  // L=8 + 7 dups > 8
  auto fwd2 = model.forward_train(batch, false);
  CHECK(fwd2.used == 3);
  CHECK(fwd2.skipped == 1);
}

TEST_CASE("inference equals the training build's final decoder") {
  auto cfg = micro_config(2);
  ScatterModel<float> train_build(cfg, ScatterBuild::Train, 21);
  auto img = random_input<float>(7);
  NoGradGuard ng;
  auto analysis = train_build.analysis_infer(img);
  auto infer = train_build.forward_infer_full(img);
  CHECK(analysis.size() == 2);
  CHECK(infer.predicted_text == analysis[1].predicted_text);
  REQUIRE(infer.steps() == analysis[1].steps());
  for (std::size_t t = 0; t < infer.steps(); ++t)
    CHECK(infer.step_probs[t].data() == analysis[1].step_probs[t].data());  // exact bits

  // repeated calls are deterministic
  auto again = train_build.forward_infer(img);
  CHECK(again.text == infer.predicted_text);
  CHECK(again.confidence >= 0.0);
  CHECK(again.confidence <= 1.0);
}

TEST_CASE("pruning keeps decoder-k outputs bit-identical") {
  auto cfg = micro_config(3);
  ScatterModel<float> model(cfg, ScatterBuild::Train, 31);
  auto img = random_input<float>(13);
  NoGradGuard ng;
  auto analysis = model.analysis_infer(img);

  for (std::size_t k = 1; k <= 3; ++k) {
    auto pruned = prune(model, k);
    CHECK(pruned->build() == ScatterBuild::Inference);
    CHECK(pruned->config().blocks == k);
    auto out = pruned->forward_infer_full(img);
    CHECK(out.predicted_text == analysis[k - 1].predicted_text);
    REQUIRE(out.steps() == analysis[k - 1].steps());
    for (std::size_t t = 0; t < out.steps(); ++t)
      CHECK(out.step_probs[t].data() == analysis[k - 1].step_probs[t].data());
    if (k < 3) CHECK(pruned->params().total_elements() < model.params().total_elements());
  }

  CHECK_THROWS_AS(prune(model, 0), ContractError);
  CHECK_THROWS_AS(prune(model, 4), ContractError);
  // a pruned model cannot be pruned deeper: its earlier decoders are gone
  auto p2 = prune(model, 2);
  CHECK_THROWS_AS(prune(*p2, 1), ContractError);
}

TEST_CASE("backpropagating one intermediate loss leaves later blocks untouched") {
  auto cfg = micro_config(2);
  ScatterModel<double> model(cfg, ScatterBuild::Train, 41);
  // nudge the zero-initialized TPS output layer so localization gets gradient
  for (auto& v : model.params().at("tps.loc.fc2.w").tensor.data()) v = 0.01;
  auto img = random_input<double>(17);

  model.params().zero_grads();
  auto labels = encode_label("ab", model.attn_vocab());
  Tensor<double> v = model.visual_sequence(img);
  auto hs = model.context_chain(v, 1);
  Tensor<double> d = concat_features(v, hs[0]);
  auto out = model.decoder(1).decode_sequence(d, DecodeMode::TeacherForcing, labels.ids, 8);
  model.decoder(1).attn_loss(out, labels.ids).backward();

  auto grad_norm = [&](const std::string& name) {
    double s = 0;
    for (double g : model.params().at(name).tensor.grad()) s += g * g;
    return s;
  };
  CHECK(grad_norm("block1.l1.fwd.w_x") > 0.0);
  CHECK(grad_norm("backbone.conv1.w") > 0.0);
  CHECK(grad_norm("tps.loc.fc2.b") > 0.0);
  CHECK(grad_norm("decoder1.out.w") > 0.0);
  CHECK(grad_norm("block2.l1.fwd.w_x") == 0.0);
  CHECK(grad_norm("decoder2.out.w") == 0.0);
  CHECK(grad_norm("ctc.proj.w") == 0.0);
}

TEST_CASE("build duality: the inference build is a value-subset of training") {
  auto cfg = micro_config(2);
  ScatterModel<float> train_build(cfg, ScatterBuild::Train, 51);
  ScatterModel<float> infer_build(cfg, ScatterBuild::Inference, 51);
  for (const auto& p : infer_build.params().all()) {
    const auto& src = train_build.params().at(p.name);
    CHECK(src.tensor.data() == p.tensor.data());
  }
  CHECK(train_build.params().size() > infer_build.params().size());
  // training extras are exactly the CTC projection and decoder 1
  for (const auto& p : train_build.params().all()) {
    if (!infer_build.params().contains(p.name)) {
      bool extra = p.name.rfind("ctc.", 0) == 0 || p.name.rfind("decoder1.", 0) == 0;
      CHECK(extra);
    }
  }
}

TEST_CASE("rotation heuristic gates on aspect ratio") {
  auto cfg = micro_config(1);
  ScatterModel<float> model(cfg, ScatterBuild::Train, 61);
  GrayImage wide;
  wide.height = 10;
  wide.width = 30;
  wide.pixels.assign(300, 40);
  auto p = infer_with_rotation(model, wide);
  CHECK(p.source == "original");

  GrayImage tall = rotate90_cw(wide);
  CHECK(tall.height == 30);
  auto pt = infer_with_rotation(model, tall);
  CHECK((pt.source == "original" || pt.source == "cw" || pt.source == "ccw"));
  CHECK(pt.confidence >= 0.0);
  CHECK(pt.confidence <= 1.0);
}

TEST_CASE("configuration errors surface at build time") {
  auto bad = micro_config(1);
  bad.blocks = 0;
  CHECK_THROWS_AS(ScatterModel<float>(bad, ScatterBuild::Train, 1), ConfigError);

  auto collapse = micro_config(1);
  collapse.in_w = 2;  // width collapses to zero in the pooling chain
  collapse.tps.conv_channels = {4};
  CHECK_THROWS_AS(ScatterModel<float>(collapse, ScatterBuild::Train, 1), ConfigError);

  auto badl = micro_config(2);
  badl.lambda_attn = {1.0};
  CHECK_THROWS_AS(ScatterModel<float>(badl, ScatterBuild::Train, 1), ConfigError);
}

TEST_CASE("full preset exposes 512 channels and desk 25 columns") {
  // structural contract only; parameters are heavy so run once each
  ScatterConfig full;
  full.backbone_preset = "full";
  full.backbone_plan = full_backbone_plan();
  full.block_hidden = 8;  // keep the recurrent side tiny
  full.decoder_hidden = 8;
  full.attn_dim = 8;
  ScatterModel<float> fm(full, ScatterBuild::Inference, 1);
  CHECK(fm.backbone().channels() == 512);
  CHECK(fm.backbone().columns() == 25);
  std::size_t convs = 0;
  for (const auto& l : full_backbone_plan().layers) {
    if (l.kind == BackboneLayer::Kind::Conv) convs += 1;
    if (l.kind == BackboneLayer::Kind::ResPair) convs += 2;
  }
  CHECK(convs == 29);

  ScatterConfig desk;
  desk.backbone_plan = desk_backbone_plan();
  ScatterModel<float> dm(desk, ScatterBuild::Inference, 1);
  CHECK(dm.backbone().channels() == 64);
  CHECK(dm.backbone().columns() == 25);
  std::size_t dconvs = 0;
  for (const auto& l : desk_backbone_plan().layers) {
    if (l.kind == BackboneLayer::Kind::Conv) dconvs += 1;
    if (l.kind == BackboneLayer::Kind::ResPair) dconvs += 2;
  }
  CHECK(dconvs == 7);
}

TEST_CASE("backbone text attention gates stay in (0,1) and V keeps shape") {
  auto cfg = micro_config(1);
  ScatterModel<double> model(cfg, ScatterBuild::Train, 71);
  auto img = random_input<double>(19);
  NoGradGuard ng;
  auto f = model.backbone().extract(model.tps().forward(img));
  CHECK(f.shape() == Shape{8, 8});
  auto v = model.backbone().text_attention(f);
  CHECK(v.shape() == f.shape());
  // the gate shrinks magnitudes, never flips signs
  for (std::size_t i = 0; i < v.numel(); ++i) {
    CHECK(std::abs(v.data()[i]) <= std::abs(f.data()[i]) + 1e-12);
    CHECK(v.data()[i] * f.data()[i] >= 0.0);
  }
  // two forwards agree exactly
  auto f2 = model.backbone().extract(model.tps().forward(img));
  CHECK(f.data() == f2.data());

  // saturated gate: all-ones map passes F through, all-zeros blanks it
  auto& ab = model.params().at("backbone.attn.b").tensor;
  auto& aw = model.params().at("backbone.attn.w").tensor;
  for (auto& x : aw.data()) x = 0;
  for (auto& x : ab.data()) x = 40.0;
  auto v_open = model.backbone().text_attention(f);
  for (std::size_t i = 0; i < f.numel(); ++i)
    CHECK(v_open.data()[i] == doctest::Approx(f.data()[i]).epsilon(1e-9));
  for (auto& x : ab.data()) x = -40.0;
  auto v_closed = model.backbone().text_attention(f);
  for (std::size_t i = 0; i < f.numel(); ++i)
    CHECK(std::abs(v_closed.data()[i]) < 1e-12);
}
