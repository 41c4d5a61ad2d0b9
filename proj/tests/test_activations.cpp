#include <doctest.h>

#include <random>

#include "antispoof/activations.hpp"
#include "antispoof/gradcheck.hpp"

using namespace antispoof;

TEST_CASE("activation_init carries the documented initial parameters") {
  auto lk = activation_init<double>(ActKind::leaky_relu);
  CHECK(lk.gamma == doctest::Approx(0.2));
  auto rr = activation_init<double>(ActKind::rrelu);
  CHECK(rr.rrelu_l == doctest::Approx(0.125));
  CHECK(rr.rrelu_u == doctest::Approx(0.333));
  auto pr = activation_init<double>(ActKind::prelu);
  CHECK(pr.xi.data()[0] == doctest::Approx(0.25));
  auto el = activation_init<double>(ActKind::elu);
  CHECK(el.elu_r == doctest::Approx(1.0));
  auto ar = activation_init<double>(ActKind::arelu);
  CHECK(ar.alpha.item() == doctest::Approx(0.9));
  CHECK(ar.beta.item() == doctest::Approx(2.0));
  CHECK_THROWS_AS(activation_init<double>(ActKind::ensemble), TensorError);
}

TEST_CASE("scalar evaluations of each kind") {
  Tensor<double> alpha = Tensor<double>::scalar(0.5);
  Tensor<double> beta0 = Tensor<double>::scalar(0.0);

  // AReLU: x=0 -> 0; beta=0, x=2 -> (1+sigmoid(0))*2 = 3
  CHECK(arelu(Tensor<double>::scalar(0.0), alpha, beta0).item() == 0.0);
  CHECK(arelu(Tensor<double>::scalar(2.0), alpha, beta0).item() == doctest::Approx(3.0));
  // alpha=2 clamps to 0.99: x=-1 -> -0.99
  CHECK(arelu(Tensor<double>::scalar(-1.0), Tensor<double>::scalar(2.0), beta0).item() ==
        doctest::Approx(-0.99));

  CHECK(leaky_relu(Tensor<double>::scalar(-2.0), 0.2).item() == doctest::Approx(-0.4));
  CHECK(elu(Tensor<double>::scalar(-1.0), 1.0).item() ==
        doctest::Approx(std::exp(-1.0) - 1.0));
  CHECK(prelu(Tensor<double>::scalar(-4.0), Tensor<double>::scalar(0.25)).item() ==
        doctest::Approx(-1.0));
  CHECK(rrelu(Tensor<double>::scalar(-1.0), 0.125, 0.333, Mode::eval, nullptr).item() ==
        doctest::Approx(-0.229));
}

TEST_CASE("rrelu train mode needs an rng; empirical mean slope matches (l+u)/2") {
  CHECK_THROWS_AS(rrelu(Tensor<double>::scalar(-1.0), 0.125, 0.333, Mode::train, nullptr),
                  TensorError);

  std::mt19937_64 rng(99);
  const std::size_t n = 100000;
  Tensor<double> x = Tensor<double>::full({n}, -1.0);
  Tensor<double> y = rrelu(x, 0.125, 0.333, Mode::train, &rng);
  double mean = 0.0;
  for (double v : y.data()) mean += v;
  mean /= static_cast<double>(n);
  CHECK(mean == doctest::Approx(-0.229).epsilon(0.01));
}

TEST_CASE("AReLU decomposition into ReLU + ELSA") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  Tensor<double> alpha = Tensor<double>::scalar(0.9);
  Tensor<double> beta = Tensor<double>::scalar(2.0);
  double ca = std::clamp(alpha.item(), kAreluClampLo, kAreluClampHi);
  double sb = 1.0 / (1.0 + std::exp(-beta.item()));
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> v(1000);
    for (auto& x : v) x = d(rng);
    Tensor<double> x({v.size()}, v);
    Tensor<double> y = arelu(x, alpha, beta);
    for (std::size_t i = 0; i < v.size(); ++i) {
      double relu_part = v[i] > 0.0 ? v[i] : 0.0;
      double elsa = v[i] < 0.0 ? ca * v[i] : sb * v[i];
      CHECK(y.data()[i] == doctest::Approx(relu_part + elsa).epsilon(1e-12));
    }
  }
}

TEST_CASE("positive homogeneity per half-line (ELU is the exception)") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> d(0.2, 3.0);
  auto apply = [&](ActKind kind, const Tensor<double>& x) {
    auto spec = activation_init<double>(kind);
    return activation_forward(spec, x, Mode::eval);
  };
  for (int rep = 0; rep < 20; ++rep) {
    double c = d(rng);
    std::vector<double> v = {-2.0, -0.7, 0.3, 1.9};
    Tensor<double> x({4}, v);
    std::vector<double> scaled = v;
    for (auto& s : scaled) s *= c;
    Tensor<double> cx({4}, scaled);
    for (ActKind k :
         {ActKind::relu, ActKind::leaky_relu, ActKind::rrelu, ActKind::prelu, ActKind::arelu}) {
      Tensor<double> y1 = apply(k, cx);
      Tensor<double> y2 = apply(k, x);
      for (std::size_t i = 0; i < 4; ++i)
        CHECK(y1.data()[i] == doctest::Approx(c * y2.data()[i]).epsilon(1e-12));
    }
    // ELU violates homogeneity on the negative side
    Tensor<double> e1 = apply(ActKind::elu, cx);
    Tensor<double> e2 = apply(ActKind::elu, x);
    bool violated = false;
    for (std::size_t i = 0; i < 4; ++i)
      if (std::abs(e1.data()[i] - c * e2.data()[i]) > 1e-9) violated = true;
    CHECK(violated);
  }
}

TEST_CASE("AReLU parameter gradients match their closed forms") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  std::vector<double> v(64);
  for (auto& x : v) x = d(rng);
  Tensor<double> x({64}, v);

  // d/dbeta = sigmoid'(beta) * sum_{x>=0} x; d/dalpha = sum_{x<0} x inside the band
  Tensor<double> alpha({1}, {0.5}, true);
  Tensor<double> beta({1}, {0.3}, true);
  backward(sum(arelu(x, alpha, beta)));
  double sb = 1.0 / (1.0 + std::exp(-0.3));
  double pos = 0.0, neg = 0.0;
  for (double xv : v) (xv >= 0.0 ? pos : neg) += xv;
  CHECK(beta.grad()[0] == doctest::Approx(sb * (1.0 - sb) * pos).epsilon(1e-12));
  CHECK(alpha.grad()[0] == doctest::Approx(neg).epsilon(1e-12));

  // alpha outside the clamp band: zero gradient
  Tensor<double> alpha_out({1}, {1.5}, true);
  Tensor<double> beta2({1}, {0.3}, true);
  backward(sum(arelu(x, alpha_out, beta2)));
  CHECK(alpha_out.grad()[0] == 0.0);

  // cross-check via finite differences at interior parameters
  auto fa = [&](const Tensor<double>& a) { return sum(arelu(x, a, Tensor<double>::scalar(0.3))); };
  CHECK(grad_check(fa, Tensor<double>::scalar(0.5)).pass);
  auto fb = [&](const Tensor<double>& b) { return sum(arelu(x, Tensor<double>::scalar(0.5), b)); };
  CHECK(grad_check(fb, Tensor<double>::scalar(0.3)).pass);
}

TEST_CASE("ensemble summation") {
  Tensor<double> x({2}, {-1.0, 2.0});
  auto single = make_ensemble<double>({ActKind::relu});
  Tensor<double> y1 = ensemble_forward(single, x, Mode::eval);
  CHECK(y1.data() == std::vector<double>{0.0, 2.0});

  auto twice = make_ensemble<double>({ActKind::relu, ActKind::relu});
  Tensor<double> y2 = ensemble_forward(twice, Tensor<double>::scalar(1.0), Mode::eval);
  CHECK(y2.item() == 2.0);

  // relu + arelu(beta=0): x=2 -> 2 + 3 = 5
  auto mixed = make_ensemble<double>({ActKind::relu, ActKind::arelu});
  mixed.members[1].beta = Tensor<double>::scalar(0.0);
  Tensor<double> y3 = ensemble_forward(mixed, Tensor<double>::scalar(2.0), Mode::eval);
  CHECK(y3.item() == doctest::Approx(5.0));

  CHECK_THROWS_AS(make_ensemble<double>({}), TensorError);
  CHECK_THROWS_AS(make_ensemble<double>({ActKind::ensemble}), TensorError);
}

TEST_CASE("monotonicity of every kind at initial parameters") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> d(-4.0, 4.0);
  for (ActKind k : {ActKind::relu, ActKind::leaky_relu, ActKind::rrelu, ActKind::elu,
                    ActKind::prelu, ActKind::arelu}) {
    auto spec = activation_init<double>(k);
    std::vector<double> v(200);
    for (auto& x : v) x = d(rng);
    std::sort(v.begin(), v.end());
    Tensor<double> x({v.size()}, v);
    Tensor<double> y = activation_forward(spec, x, Mode::eval);
    for (std::size_t i = 1; i < v.size(); ++i) {
      INFO(act_kind_name(k), " at index ", i);
      CHECK(y.data()[i] >= y.data()[i - 1]);
    }
  }
}

TEST_CASE("per-channel prelu layout checks") {
  auto spec = activation_init<double>(ActKind::prelu, 3);
  CHECK(spec.xi.size() == 3);
  spec.xi.data() = {0.1, 0.2, 0.3};
  Tensor<double> x = Tensor<double>::full({3, 1, 2}, -1.0);
  Tensor<double> y = prelu(x, spec.xi);
  CHECK(y.data() == std::vector<double>{-0.1, -0.1, -0.2, -0.2, -0.3, -0.3});
  Tensor<double> bad = Tensor<double>::full({4, 1, 2}, -1.0);
  CHECK_THROWS_AS(prelu(bad, spec.xi), TensorError);
}
