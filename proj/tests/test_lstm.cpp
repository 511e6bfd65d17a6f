#include <doctest.h>

#include <cmath>

#include "scatter/grad_check.hpp"
#include "scatter/lstm.hpp"
#include "scatter/rng.hpp"

using namespace scatter;

namespace {

LstmCellParams<double> make_params(std::size_t in, std::size_t hidden, ParamRegistry<double>& reg,
                                   Rng& rng, const std::string& name) {
  return LstmCellParams<double>::create(name, in, hidden, reg, rng);
}

Tensor<double> rand_seq(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<double> v(n * d);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return Tensor<double>::from({n, d}, std::move(v));
}

}  // namespace

TEST_CASE("zero parameters keep the hidden state at zero") {
  ParamRegistry<double> reg;
  Rng rng(41);
  auto p = make_params(3, 4, reg, rng, "z");
  for (auto& prm : reg.all())
    for (auto& v : prm.tensor.data()) v = 0;
  auto state = LstmState<double>::zeros(4);
  auto x = Tensor<double>::from({1, 3}, {0.5, -0.2, 0.9});
  for (int t = 0; t < 3; ++t) state = lstm_cell_step(x, state, p);
  for (double h : state.hidden.data()) CHECK(h == doctest::Approx(0.0));
}

TEST_CASE("saturated forget gate carries the cell through") {
  ParamRegistry<double> reg;
  Rng rng(42);
  auto p = make_params(2, 3, reg, rng, "carry");
  for (auto& prm : reg.all())
    for (auto& v : prm.tensor.data()) v = 0;
  // forget bias 20, everything else zero
  for (std::size_t i = 3; i < 6; ++i) p.b.data()[i] = 20.0;
  LstmState<double> state{Tensor<double>::zeros({1, 3}),
                          Tensor<double>::from({1, 3}, {0.7, -0.3, 0.5})};
  auto x = Tensor<double>::zeros({1, 2});
  auto before = state.cell.data();
  state = lstm_cell_step(x, state, p);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(std::abs(state.cell.data()[i] - before[i]) < 1e-6);
}

TEST_CASE("gradient through three chained steps matches finite differences") {
  ParamRegistry<double> reg;
  Rng rng(43);
  auto p = make_params(2, 3, reg, rng, "chain");
  auto x0 = rand_seq(1, 2, rng);
  auto x1 = rand_seq(1, 2, rng);
  auto x2 = rand_seq(1, 2, rng);
  std::vector<Tensor<double>> inputs = {p.w_x, p.w_h, p.b, x0, x1, x2};
  double err = grad_check<double>(
      [&p](const std::vector<Tensor<double>>& in) {
        auto state = LstmState<double>::zeros(3);
        state = lstm_cell_step(in[3], state, p);
        state = lstm_cell_step(in[4], state, p);
        state = lstm_cell_step(in[5], state, p);
        return sum(mul(state.hidden, state.cell));
      },
      inputs, 1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("bilstm output length equals input length, N=1 sees one frame") {
  ParamRegistry<double> reg;
  Rng rng(44);
  auto f = make_params(3, 4, reg, rng, "bf");
  auto b = make_params(3, 4, reg, rng, "bb");
  auto seq1 = rand_seq(1, 3, rng);
  auto out1 = bilstm_layer(seq1, f, b);
  CHECK(out1.shape() == Shape{1, 8});
  // with tied weights both directions see the same single input
  auto tied = bilstm_layer(seq1, f, f);
  for (std::size_t c = 0; c < 4; ++c)
    CHECK(tied.data()[c] == doctest::Approx(tied.data()[4 + c]));

  auto seq = rand_seq(5, 3, rng);
  CHECK(bilstm_layer(seq, f, b).shape() == Shape{5, 8});
}

TEST_CASE("reversing the input swaps the directional halves under tied weights") {
  ParamRegistry<double> reg;
  Rng rng(45);
  auto p = make_params(3, 4, reg, rng, "sym");
  std::size_t n = 6;
  auto seq = rand_seq(n, 3, rng);
  std::vector<double> rev(n * 3);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < 3; ++c) rev[t * 3 + c] = seq.data()[(n - 1 - t) * 3 + c];
  auto out = bilstm_layer(seq, p, p);
  auto rout = bilstm_layer(Tensor<double>::from({n, 3}, rev), p, p);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < 4; ++c) {
      // forward half of reversed == reversed backward half of original
      CHECK(rout.data()[t * 8 + c] == doctest::Approx(out.data()[(n - 1 - t) * 8 + 4 + c]));
    }
}

TEST_CASE("scr encoder shape, determinism, and per-block parameters") {
  ParamRegistry<double> reg;
  Rng rng1 = Rng::derive(7, {1});
  Rng rng2 = Rng::derive(7, {2});
  ScrEncoder<double> block1(1, 6, 4, reg, rng1);
  ScrEncoder<double> block2(2, 8, 4, reg, rng2);
  Rng rng(46);
  auto v = rand_seq(5, 6, rng);
  auto h1 = block1.encode(v);
  CHECK(h1.shape() == Shape{5, 8});
  auto h1b = block1.encode(v);
  CHECK(h1.data() == h1b.data());  // deterministic
  auto h2 = block2.encode(h1);
  CHECK(h2.shape() == Shape{5, 8});
  // independent parameters: block2 on the same input differs from block1
  auto h2_same_input = block2.encode(concat<double>({v, rand_seq(5, 2, rng)}, 1));
  CHECK(h2_same_input.data() != h1.data());
  // 2 blocks -> 4 bilstm layers -> 8 directional cells
  CHECK(reg.size() == 8 * 3);
}

TEST_CASE("concat_features keeps V bitwise in the leading channels") {
  Rng rng(47);
  auto v = rand_seq(5, 6, rng);
  auto h = rand_seq(5, 8, rng);
  auto d = concat_features(v, h);
  CHECK(d.shape() == Shape{5, 14});
  auto v_before = v.data();
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 6; ++c) {
      CHECK(d.data()[i * 14 + c] == v.data()[i * 6 + c]);  // exact bits
    }
  CHECK(v.data() == v_before);  // V unmodified
  CHECK_THROWS_AS(concat_features(v, rand_seq(4, 8, rng)), DimensionError);
}
