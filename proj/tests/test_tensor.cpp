#include <doctest.h>

#include <random>

#include "antispoof/ops.hpp"
#include "antispoof/tensor.hpp"

using namespace antispoof;

TEST_CASE("tensor construction") {
  Tensor<double> t({2, 2}, {1, 2, 3, 4});
  CHECK(t.shape() == Shape{2, 2});
  CHECK(t.size() == 4);
  CHECK(t.data()[3] == 4.0);

  Tensor<double> z({1}, {0});
  CHECK(z.item() == 0.0);

  CHECK_THROWS_AS(Tensor<double>({2}, {1, 2, 3}), TensorError);
  CHECK_THROWS_AS(Tensor<double>({0}, {}), TensorError);
}

TEST_CASE("backward basics") {
  // d(sum(x*x))/dx = 2x
  Tensor<double> x({1}, {3.0}, true);
  backward(sum(mul(x, x)));
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));

  // relu inactive region: gradient 0
  Tensor<double> y({1}, {-1.0}, true);
  backward(sum(clamp_min(y, 0.0)));
  CHECK(y.grad()[0] == 0.0);

  // sigmoid'(0) = 0.25
  Tensor<double> z({1}, {0.0}, true);
  backward(sum(sigmoid(z)));
  CHECK(z.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("backward requires a scalar root") {
  Tensor<double> x({2}, {1.0, 2.0}, true);
  Tensor<double> y = mul(x, x);
  CHECK_THROWS_AS(backward(y), TensorError);
}

TEST_CASE("gradients accumulate over multiple paths") {
  // f = sum(x) + sum(x) -> grad 2 everywhere
  Tensor<double> x({3}, {1.0, 2.0, 3.0}, true);
  backward(add(sum(x), sum(x)));
  for (double g : x.grad()) CHECK(g == 2.0);
}

TEST_CASE("scalar ops and clamp subgradients") {
  Tensor<double> x({3}, {-1.0, 0.5, 2.0}, true);
  Tensor<double> y = clamp(x, 0.0, 1.0);
  CHECK(y.data() == std::vector<double>{0.0, 0.5, 1.0});
  backward(sum(y));
  // clamp gradient: 1 inside [lo, hi] inclusive, 0 outside
  CHECK(x.grad() == std::vector<double>{0.0, 1.0, 0.0});

  CHECK(clamp(Tensor<double>::scalar(2.0), 0.01, 0.99).item() == doctest::Approx(0.99));
}

TEST_CASE("max ties route gradient to the first maximal index") {
  Tensor<double> x({3}, {2.0, 2.0, 1.0}, true);
  backward(max_op(x));
  CHECK(x.grad() == std::vector<double>{1.0, 0.0, 0.0});
}

TEST_CASE("matmul shapes and values") {
  Tensor<double> a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor<double> b({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor<double> c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 2});
  CHECK(c.data() == std::vector<double>{58, 64, 139, 154});
  CHECK_THROWS_AS(matmul(a, a), TensorError);
}

TEST_CASE("log and div domain errors") {
  CHECK_THROWS_AS(log_op(Tensor<double>::scalar(0.0)), TensorError);
  CHECK_THROWS_AS(div(Tensor<double>::scalar(1.0), Tensor<double>::scalar(0.0)), TensorError);
}

TEST_CASE("conv2d shape formula and a hand-computed value") {
  // Table-1 style first conv: 1x60xL -> 16x18xL with 9x9, stride (3,1), pad (0,4)
  std::size_t L = 32;
  Tensor<double> x = Tensor<double>::full({1, 60, L}, 1.0);
  Tensor<double> w = Tensor<double>::full({16, 1, 9, 9}, 0.0);
  Tensor<double> y = conv2d(x, w, ConvAttrs{3, 1, 0, 4});
  CHECK(y.shape() == Shape{16, 18, L});

  // 1x1 input, 1x1 kernel: plain multiply plus bias
  Tensor<double> xs({1, 1, 1}, {3.0});
  Tensor<double> ws({1, 1, 1, 1}, {2.0});
  Tensor<double> bs({1}, {0.5});
  CHECK(conv2d(xs, ws, bs, ConvAttrs{}).data()[0] == doctest::Approx(6.5));
}

TEST_CASE("determinism: identical inputs give bit-identical op outputs") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(64);
  for (auto& x : v) x = d(rng);
  Tensor<double> a({8, 8}, v);
  Tensor<double> b({8, 8}, v);
  Tensor<double> ya = softmax(matmul(a, a));
  Tensor<double> yb = softmax(matmul(b, b));
  CHECK(ya.data() == yb.data());
}
