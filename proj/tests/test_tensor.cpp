#include <doctest.h>

#include <cmath>
#include <vector>

#include "scatter/grad_check.hpp"
#include "scatter/rng.hpp"
#include "scatter/tensor.hpp"

using namespace scatter;

namespace {

Tensor<double> rand_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<double>::from(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("matmul basics") {
  auto eye = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
  auto a = Tensor<double>::from({2, 2}, {3.5, -1, 2, 7});
  auto r = matmul(eye, a);
  for (std::size_t i = 0; i < 4; ++i) CHECK(r.data()[i] == doctest::Approx(a.data()[i]));

  auto m = Tensor<double>::from({2, 2}, {1, 2, 3, 4});
  auto v = Tensor<double>::from({2, 1}, {1, 1});
  auto mv = matmul(m, v);
  CHECK(mv.data()[0] == doctest::Approx(3));
  CHECK(mv.data()[1] == doctest::Approx(7));

  CHECK_THROWS_WITH_AS(matmul(m, Tensor<double>::from({3, 1}, {1, 1, 1})),
                       doctest::Contains("[2x2]"), DimensionError);
}

TEST_CASE("matmul gradient matches finite differences") {
  Rng rng(11);
  auto a = rand_tensor({3, 4}, rng);
  auto b = rand_tensor({4, 2}, rng);
  std::vector<Tensor<double>> inputs = {a, b};
  double err = grad_check<double>(
      [](const std::vector<Tensor<double>>& in) { return sum(matmul(in[0], in[1])); }, inputs,
      1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("conv2d identity and hand cases") {
  auto img = Tensor<double>::from({1, 2, 3}, {1, 2, 3, 4, 5, 6});
  auto k1 = Tensor<double>::from({1, 1, 1, 1}, {1.0});
  auto out = conv2d(img, k1, {1, 1}, {0, 0});
  CHECK(out.shape() == Shape{1, 2, 3});
  for (std::size_t i = 0; i < 6; ++i) CHECK(out.data()[i] == doctest::Approx(img.data()[i]));

  auto ones_img = Tensor<double>::full({1, 3, 3}, 1.0);
  auto ones_k = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  auto nine = conv2d(ones_img, ones_k, {1, 1}, {0, 0});
  CHECK(nine.shape() == Shape{1, 1, 1});
  CHECK(nine.data()[0] == doctest::Approx(9.0));

  CHECK_THROWS_AS(conv2d(ones_img, Tensor<double>::full({1, 1, 5, 5}, 1.0), {1, 1}, {0, 0}),
                  DimensionError);
}

TEST_CASE("conv2d gradient wrt kernels and input") {
  Rng rng(12);
  auto img = rand_tensor({2, 5, 6}, rng);
  auto k = rand_tensor({3, 2, 3, 3}, rng);
  auto b = rand_tensor({3}, rng);
  std::vector<Tensor<double>> inputs = {img, k, b};
  double err = grad_check<double>(
      [](const std::vector<Tensor<double>>& in) {
        return sum(conv2d(in[0], in[1], in[2], {2, 1}, {1, 1}));
      },
      inputs, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("softmax values") {
  auto s = softmax(Tensor<double>::from({2}, {0, 0}), 0);
  CHECK(s.data()[0] == doctest::Approx(0.5));
  CHECK(s.data()[1] == doctest::Approx(0.5));

  auto big = softmax(Tensor<double>::from({2}, {1000, 1000}), 0);
  CHECK(big.data()[0] == doctest::Approx(0.5));
  CHECK(std::isfinite(big.data()[0]));

  auto ln3 = softmax(Tensor<double>::from({2}, {0, std::log(3.0)}), 0);
  CHECK(ln3.data()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(ln3.data()[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one for any finite input") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 1 + rng.index(6), c = 1 + rng.index(9);
    auto x = rand_tensor({n, c}, rng, -40.0, 40.0);
    auto s = softmax(x, 1);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0;
      for (std::size_t j = 0; j < c; ++j) acc += s.data()[i * c + j];
      CHECK(std::abs(acc - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("elementwise values and grads") {
  CHECK(tanh_op(Tensor<double>::scalar(0)).item() == doctest::Approx(0));
  CHECK(sigmoid(Tensor<double>::scalar(0)).item() == doctest::Approx(0.5));

  std::vector<Tensor<double>> in = {Tensor<double>::scalar(0.3)};
  double err = grad_check<double>(
      [](const std::vector<Tensor<double>>& x) { return tanh_op(x[0]); }, in, 1e-5);
  CHECK(err < 1e-8);

  auto a = Tensor<double>::from({3}, {1, 2, 3});
  CHECK_THROWS_AS(add(a, Tensor<double>::from({2}, {1, 2})), DimensionError);
  CHECK_THROWS_AS(log_op(Tensor<double>::scalar(-1.0)), std::domain_error);

  // scalar broadcast
  auto sb = mul(a, Tensor<double>::scalar(2.0));
  CHECK(sb.data()[2] == doctest::Approx(6.0));
}

TEST_CASE("backward accumulates and seeds correctly") {
  auto x = Tensor<double>::from({3}, {1, 2, 3});
  x.set_requires_grad(true);
  auto loss = sum(scale(x, 2.0));
  loss.backward();
  for (double g : x.grad()) CHECK(g == doctest::Approx(2.0));

  auto y = Tensor<double>::from({2}, {1, 1});
  y.set_requires_grad(true);
  auto loss2 = sum(add(y, y));
  loss2.backward();
  for (double g : y.grad()) CHECK(g == doctest::Approx(2.0));

  CHECK_THROWS_AS(add(y, y).backward(), ContractError);  // non-scalar
}

TEST_CASE("backward is deterministic bit for bit") {
  Rng rng(14);
  auto run = [&](Tensor<double>& a, Tensor<double>& b) {
    a.zero_grad();
    b.zero_grad();
    auto h = tanh_op(matmul(a, b));
    auto loss = mean(mul(h, h));
    loss.backward();
    return std::make_pair(a.grad(), b.grad());
  };
  auto a = rand_tensor({4, 5}, rng);
  auto b = rand_tensor({5, 3}, rng);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  auto r1 = run(a, b);
  auto r2 = run(a, b);
  CHECK(r1.first == r2.first);  // exact equality
  CHECK(r1.second == r2.second);
}

TEST_CASE("grad_check closed-form cases") {
  std::vector<Tensor<double>> in = {Tensor<double>::from({2}, {1, 2})};
  double err = grad_check<double>(
      [](const std::vector<Tensor<double>>& x) { return sum(mul(x[0], x[0])); }, in, 1e-5);
  CHECK(err < 1e-9);

  // softmax-cross-entropy micro case
  std::vector<Tensor<double>> in2 = {Tensor<double>::from({4}, {0.2, -0.4, 0.9, 0.1})};
  double err2 = grad_check<double>(
      [](const std::vector<Tensor<double>>& x) {
        return neg(log_op(pick(softmax(x[0], 0), 2)));
      },
      in2, 1e-5);
  CHECK(err2 < 1e-7);
}

TEST_CASE("grad_check flags a corrupted gradient rule") {
  // A custom op computing tanh with a deliberately wrong backward.
  auto buggy_tanh = [](const Tensor<double>& x) {
    std::vector<double> v(x.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(x.data()[i]);
    std::vector<double> saved = v;
    return custom_op<double>(x.shape(), std::move(v), {x},
                             [saved](Node<double>& self) {
                               auto& p = *self.parents[0];
                               for (std::size_t i = 0; i < self.grad.size(); ++i)
                                 p.grad[i] += 1.25 * (1 - saved[i] * saved[i]) * self.grad[i];
                             });
  };
  std::vector<Tensor<double>> in = {Tensor<double>::from({2}, {0.4, -0.7})};
  double err = grad_check<double>(
      [&](const std::vector<Tensor<double>>& x) { return sum(buggy_tanh(x[0])); }, in, 1e-5);
  CHECK(err > 1e-2);
}

TEST_CASE("every primitive passes randomized finite-difference checks") {
  // 20 seeds across the whole op table at f64.
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed * 977);
    std::size_t n = 2 + rng.index(3), m = 2 + rng.index(3), k = 2 + rng.index(3);

    {
      std::vector<Tensor<double>> in = {rand_tensor({n, m}, rng), rand_tensor({m, k}, rng)};
      CHECK(grad_check<double>(
                [](const std::vector<Tensor<double>>& x) {
                  return sum(tanh_op(matmul(x[0], x[1])));
                },
                in, 1e-5) < 1e-6);
    }
    {
      std::vector<Tensor<double>> in = {rand_tensor({n, m}, rng), rand_tensor({n, m}, rng)};
      CHECK(grad_check<double>(
                [](const std::vector<Tensor<double>>& x) {
                  auto s = sub(sigmoid(x[0]), mul(x[0], x[1]));
                  return mean(mul(s, add(s, x[1])));
                },
                in, 1e-5) < 1e-6);
    }
    {
      // relu away from the kink
      auto a = rand_tensor({n, m}, rng);
      for (auto& v : a.data())
        if (std::abs(v) < 1e-2) v = 0.5;
      std::vector<Tensor<double>> in = {a};
      CHECK(grad_check<double>(
                [](const std::vector<Tensor<double>>& x) { return sum(relu(x[0])); }, in,
                1e-5) < 1e-6);
    }
    {
      std::vector<Tensor<double>> in = {rand_tensor({n, m}, rng, 0.1, 2.0)};
      CHECK(grad_check<double>(
                [](const std::vector<Tensor<double>>& x) {
                  return sum(log_op(exp_op(scale(x[0], 0.5))));
                },
                in, 1e-5) < 1e-6);
    }
    {
      std::vector<Tensor<double>> in = {rand_tensor({n, m}, rng)};
      CHECK(grad_check<double>(
                [](const std::vector<Tensor<double>>& x) {
                  return sum(mul(softmax(x[0], 1), x[0]));
                },
                in, 1e-5) < 1e-6);
    }
    {
      // pooling with distinct values so the argmax is stable under eps
      auto a = rand_tensor({2, 4, 6}, rng);
      for (std::size_t i = 0; i < a.numel(); ++i) a.data()[i] += 1e-3 * static_cast<double>(i);
      std::vector<Tensor<double>> in = {a};
      CHECK(grad_check<double>(
                [](const std::vector<Tensor<double>>& x) {
                  return sum(max_pool2d(x[0], 2, 2, 2, 1));
                },
                in, 1e-6) < 1e-6);
    }
    {
      std::vector<Tensor<double>> in = {rand_tensor({2, 4, 5}, rng),
                                        rand_tensor({3, 2, 2, 3}, rng)};
      CHECK(grad_check<double>(
                [](const std::vector<Tensor<double>>& x) {
                  return mean(conv2d(x[0], x[1], {1, 2}, {1, 0}));
                },
                in, 1e-5) < 1e-6);
    }
    {
      std::vector<Tensor<double>> in = {rand_tensor({n, m}, rng), rand_tensor({n, k}, rng),
                                        rand_tensor({m + k}, rng)};
      CHECK(grad_check<double>(
                [](const std::vector<Tensor<double>>& x) {
                  auto cat = concat<double>({x[0], x[1]}, 1);
                  auto br = add_rowvec(cat, x[2]);
                  return sum(slice(transpose2d(br), 0, 1, 2));
                },
                in, 1e-5) < 1e-6);
    }
    {
      std::vector<Tensor<double>> in = {rand_tensor({n * m}, rng)};
      CHECK(grad_check<double>(
                [n, m](const std::vector<Tensor<double>>& x) {
                  return pick(reshape(x[0], {n, m}), 1);
                },
                in, 1e-5) < 1e-6);
    }
    {
      std::vector<Tensor<double>> in = {rand_tensor({m}, rng, -3, 3)};
      CHECK(grad_check<double>(
                [](const std::vector<Tensor<double>>& x) { return logsumexp(x[0]); }, in,
                1e-5) < 1e-6);
    }
  }
}

TEST_CASE("elementwise dispatch covers the op table") {
  auto a = Tensor<double>::from({2}, {0.25, 0.5});
  auto b = Tensor<double>::from({2}, {2.0, 4.0});
  CHECK(elementwise(EwOp::Add, a, b).data()[1] == doctest::Approx(4.5));
  CHECK(elementwise(EwOp::Sub, b, a).data()[0] == doctest::Approx(1.75));
  CHECK(elementwise(EwOp::Mul, a, b).data()[1] == doctest::Approx(2.0));
  CHECK(elementwise(EwOp::Tanh, a).data()[0] == doctest::Approx(std::tanh(0.25)));
  CHECK(elementwise(EwOp::Sigmoid, a).data()[0] == doctest::Approx(1 / (1 + std::exp(-0.25))));
  CHECK(elementwise(EwOp::Relu, Tensor<double>::from({2}, {-1.0, 3.0})).data()[0] == 0.0);
  CHECK(elementwise(EwOp::Log, b).data()[0] == doctest::Approx(std::log(2.0)));
  CHECK(elementwise(EwOp::Exp, a).data()[1] == doctest::Approx(std::exp(0.5)));
}

TEST_CASE("no-grad mode records nothing") {
  auto x = Tensor<double>::from({2}, {1, 2});
  x.set_requires_grad(true);
  Tensor<double> y;
  {
    NoGradGuard ng;
    y = sum(mul(x, x));
  }
  CHECK_FALSE(y.requires_grad());
  CHECK_THROWS_AS(y.backward(), ContractError);
}
