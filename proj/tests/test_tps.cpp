#include <doctest.h>

#include <cmath>

#include "scatter/grad_check.hpp"
#include "scatter/image.hpp"
#include "scatter/rng.hpp"
#include "scatter/tps.hpp"

using namespace scatter;

namespace {

FiducialSet jittered(const FiducialSet& base, Rng& rng, double amp) {
  std::vector<double> xy = base.xy;
  for (auto& v : xy) v += rng.uniform(-amp, amp);
  return FiducialSet::from(std::move(xy));
}

Tensor<double> random_image(std::size_t c, std::size_t h, std::size_t w, Rng& rng) {
  std::vector<double> v(c * h * w);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return Tensor<double>::from({c, h, w}, std::move(v));
}

}  // namespace

TEST_CASE("radial basis limits") {
  CHECK(tps_rbf(0.0) == 0.0);
  CHECK(tps_rbf(1.0) == 0.0);  // r = 1: log 1 = 0
  CHECK(tps_rbf(4.0) == doctest::Approx(4.0 * std::log(4.0)));
}

TEST_CASE("default configuration predicts 20 fiducials") {
  auto f = canonical_fiducials(10);
  CHECK(f.count() == 20);
  for (double v : f.xy) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("kernel inverse multiplies back to identity") {
  auto kernel = build_tps_kernel(canonical_fiducials(10));
  std::size_t n = kernel.n;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0;
      for (std::size_t p = 0; p < n; ++p)
        acc += kernel.solve_matrix[i * n + p] * kernel.system[p * n + j];
      CHECK(std::abs(acc - (i == j ? 1.0 : 0.0)) < 1e-6);
    }
}

TEST_CASE("degenerate fiducials raise a numeric error") {
  std::vector<double> xy = canonical_fiducials(3).xy;
  xy[2] = xy[0];
  xy[3] = xy[1];  // duplicate point
  CHECK_THROWS_AS(build_tps_kernel(FiducialSet{xy}), NumericError);
}

TEST_CASE("identity mapping when predicted equals base") {
  auto kernel = build_tps_kernel(canonical_fiducials(10));
  auto grid = generate_grid(kernel, kernel.base, 8, 20);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 20; ++j) {
      double x = -1.0 + 2.0 * j / 19.0;
      double y = -1.0 + 2.0 * i / 7.0;
      CHECK(std::abs(grid.coords[2 * (i * 20 + j)] - x) < 1e-5);
      CHECK(std::abs(grid.coords[2 * (i * 20 + j) + 1] - y) < 1e-5);
    }
}

TEST_CASE("pure translation is absorbed by the affine part") {
  auto kernel = build_tps_kernel(canonical_fiducials(10));
  std::vector<double> shifted = kernel.base.xy;
  for (std::size_t i = 0; i < shifted.size(); i += 2) shifted[i] += 0.1;
  auto grid0 = generate_grid(kernel, kernel.base, 6, 12);
  auto grid1 = generate_grid(kernel, FiducialSet{shifted}, 6, 12);
  for (std::size_t g = 0; g < 6 * 12; ++g) {
    CHECK(std::abs(grid1.coords[2 * g] - grid0.coords[2 * g] - 0.1) < 1e-5);
    CHECK(std::abs(grid1.coords[2 * g + 1] - grid0.coords[2 * g + 1]) < 1e-5);
  }
}

TEST_CASE("grids stay finite for random fiducials") {
  auto kernel = build_tps_kernel(canonical_fiducials(10));
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    auto pred = jittered(kernel.base, rng, 0.08);
    auto grid = generate_grid(kernel, pred, 4, 10);
    for (double v : grid.coords) CHECK(std::isfinite(v));
  }
}

TEST_CASE("interpolation passes exactly through control points") {
  auto kernel = build_tps_kernel(canonical_fiducials(10));
  Rng rng(7);
  auto pred = jittered(kernel.base, rng, 0.08);
  for (std::size_t i = 0; i < kernel.base.count(); ++i) {
    auto [ox, oy] = tps_apply(kernel, pred, kernel.base.xy[2 * i], kernel.base.xy[2 * i + 1]);
    CHECK(std::abs(ox - pred.xy[2 * i]) < 1e-5);
    CHECK(std::abs(oy - pred.xy[2 * i + 1]) < 1e-5);
  }
}

TEST_CASE("bilinear_sample identity grid reproduces bilinear resize") {
  Rng rng(21);
  auto img = random_image(1, 6, 11, rng);

  // same-size identity: output equals input
  std::size_t oh = 6, ow = 11;
  std::vector<double> coords;
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      coords.push_back(-1.0 + 2.0 * j / (ow - 1.0));
      coords.push_back(-1.0 + 2.0 * i / (oh - 1.0));
    }
  auto out = bilinear_sample(img, Tensor<double>::from({oh * ow, 2}, coords), oh, ow);
  for (std::size_t i = 0; i < img.numel(); ++i)
    CHECK(std::abs(out.data()[i] - img.data()[i]) < 1e-12);

  // resize identity: matches resize_bilinear_plane
  std::size_t rh = 4, rw = 7;
  std::vector<double> rcoords;
  for (std::size_t i = 0; i < rh; ++i)
    for (std::size_t j = 0; j < rw; ++j) {
      rcoords.push_back(-1.0 + 2.0 * j / (rw - 1.0));
      rcoords.push_back(-1.0 + 2.0 * i / (rh - 1.0));
    }
  auto rout = bilinear_sample(img, Tensor<double>::from({rh * rw, 2}, rcoords), rh, rw);
  auto expect = resize_bilinear_plane(img.data(), 6, 11, rh, rw);
  for (std::size_t i = 0; i < expect.size(); ++i)
    CHECK(std::abs(rout.data()[i] - expect[i]) < 1e-5);
}

TEST_CASE("bilinear_sample constant image stays constant in the interior") {
  auto img = Tensor<double>::full({1, 5, 5}, 0.7);
  std::vector<double> coords = {-0.3, -0.1, 0.2, 0.4, 0.0, 0.0, 0.45, -0.45};
  auto out = bilinear_sample(img, Tensor<double>::from({4, 2}, coords), 2, 2);
  for (double v : out.data()) CHECK(v == doctest::Approx(0.7));
}

TEST_CASE("bilinear_sample out-of-range coordinates read zero") {
  auto img = Tensor<double>::full({1, 4, 4}, 1.0);
  std::vector<double> coords = {-5.0, 0.0, 0.0, 5.0, 5.0, 5.0};
  auto out = bilinear_sample(img, Tensor<double>::from({3, 2}, coords), 1, 3);
  for (double v : out.data()) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("bilinear_sample gradients match finite differences") {
  Rng rng(22);
  auto img = random_image(2, 5, 6, rng);
  // keep probes away from lattice points so the FD window stays one-sided
  std::vector<double> coords;
  for (int g = 0; g < 6; ++g) {
    coords.push_back(rng.uniform(-0.85, 0.85) + 0.013);
    coords.push_back(rng.uniform(-0.85, 0.85) + 0.017);
  }
  auto grid = Tensor<double>::from({6, 2}, coords);
  std::vector<Tensor<double>> inputs = {img, grid};
  double err = grad_check<double>(
      [](const std::vector<Tensor<double>>& in) {
        auto s = bilinear_sample(in[0], in[1], 2, 3);
        return sum(mul(s, s));
      },
      inputs, 1e-6);
  CHECK(err < 1e-5);
}

TEST_CASE("tps module starts as a near-identity and is differentiable") {
  TpsConfig cfg;
  cfg.k = 4;
  cfg.in_h = 16;
  cfg.in_w = 32;
  cfg.out_h = 16;
  cfg.out_w = 32;
  cfg.conv_channels = {4, 8};
  cfg.fc_hidden = 8;
  ParamRegistry<double> reg;
  Rng rng(5);
  TpsTransform<double> tps(cfg, reg, rng);

  Rng img_rng(9);
  auto img = random_image(1, 16, 32, img_rng);

  // initialized localization predicts the canonical fiducials
  auto fid = tps.localize(img);
  CHECK(fid.shape() == Shape{8, 2});
  for (std::size_t i = 0; i < fid.numel(); ++i) {
    CHECK(std::abs(fid.data()[i] - tps.kernel().base.xy[i]) < 1e-9);
    CHECK(fid.data()[i] >= -1.0);
    CHECK(fid.data()[i] <= 1.0);
  }

  // whole transform equals a bilinear resize (identity here: same size)
  auto out = tps.forward(img);
  for (std::size_t i = 0; i < img.numel(); ++i)
    CHECK(std::abs(out.data()[i] - img.data()[i]) < 1e-5);

  // gradient flows into localization parameters on a non-degenerate sample;
  // the zero-initialized final layer blocks the chain at exact init, so nudge
  // it the way one optimizer step would
  auto& fc2w = reg.at("tps.loc.fc2.w").tensor;
  Rng nudge(3);
  for (auto& v : fc2w.data()) v = nudge.uniform(-0.05, 0.05);
  for (auto& p : reg.all()) p.tensor.zero_grad();
  auto out2 = tps.forward(img);
  auto loss = mean(mul(out2, out2));
  loss.backward();
  double conv1_norm = 0;
  for (double g : reg.at("tps.loc.conv1.w").tensor.grad()) conv1_norm += g * g;
  CHECK(conv1_norm > 0.0);
  double fid_grad = 0;
  for (double g : reg.at("tps.loc.fc2.b").tensor.grad()) fid_grad += g * g;
  CHECK(fid_grad > 0.0);
}
