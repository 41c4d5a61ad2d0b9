#pragma once

// Finite-difference verification of every differentiable building block, in
// 64-bit with kink-avoiding inputs. Used by the `gradcheck` CLI subcommand and
// the acceptance suite.

#include <random>
#include <string>
#include <vector>

#include "antispoof/activations.hpp"
#include "antispoof/gradcheck.hpp"
#include "antispoof/loss.hpp"
#include "antispoof/model.hpp"
#include "antispoof/ops.hpp"

namespace antispoof {

struct GradSuiteEntry {
  std::string name;
  GradCheckReport report;
};

struct GradSuiteResult {
  std::vector<GradSuiteEntry> entries;
  bool all_pass() const {
    for (const auto& e : entries)
      if (!e.report.pass) return false;
    return !entries.empty();
  }
};

namespace detail {

// random values bounded away from 0 (the shared kink of the ReLU family)
inline Tensor<double> kink_avoiding(Shape shape, std::mt19937_64& rng, double lo = 0.1,
                                    double hi = 2.0) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = (sign(rng) ? 1.0 : -1.0) * mag(rng);
  return Tensor<double>(std::move(shape), std::move(v));
}

inline Tensor<double> positive_random(Shape shape, std::mt19937_64& rng, double lo = 0.2,
                                      double hi = 2.0) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = mag(rng);
  return Tensor<double>(std::move(shape), std::move(v));
}

}  // namespace detail

inline GradSuiteResult run_gradient_suite(double step = 1e-6, double tol = 1e-5,
                                          std::uint64_t seed = 7) {
  GradSuiteResult result;
  std::mt19937_64 rng(seed);

  auto check = [&](const std::string& name,
                   const std::function<Tensor<double>(const Tensor<double>&)>& fn,
                   const Tensor<double>& input) {
    result.entries.push_back({name, grad_check(fn, input, step, tol)});
  };

  // random positive weights keep the probe scalar sensitive to every element
  auto weighted_sum = [&](const Tensor<double>& y, const Tensor<double>& w) {
    return sum(mul(y, w));
  };

  // --- activations at their initial parameters -----------------------------
  {
    Tensor<double> x = detail::kink_avoiding({64}, rng);
    Tensor<double> w = detail::positive_random({64}, rng);
    check("relu", [&](const Tensor<double>& t) { return weighted_sum(relu(t), w); }, x);
    check("leaky_relu",
          [&](const Tensor<double>& t) { return weighted_sum(leaky_relu(t, 0.2), w); }, x);
    check("elu", [&](const Tensor<double>& t) { return weighted_sum(elu(t, 1.0), w); }, x);

    Tensor<double> xi = Tensor<double>::scalar(0.25);
    check("prelu.x", [&](const Tensor<double>& t) { return weighted_sum(prelu(t, xi), w); }, x);
    check("prelu.xi",
          [&](const Tensor<double>& t) { return weighted_sum(prelu(x, t), w); },
          Tensor<double>::scalar(0.25));

    check("rrelu.train",
          [&](const Tensor<double>& t) {
            std::mt19937_64 frozen(1234);  // same slopes on every evaluation
            return weighted_sum(rrelu(t, 0.125, 0.333, Mode::train, &frozen), w);
          },
          x);
    check("rrelu.eval",
          [&](const Tensor<double>& t) {
            return weighted_sum(rrelu(t, 0.125, 0.333, Mode::eval, nullptr), w);
          },
          x);

    Tensor<double> alpha = Tensor<double>::scalar(0.9);
    Tensor<double> beta = Tensor<double>::scalar(2.0);
    check("arelu.x",
          [&](const Tensor<double>& t) { return weighted_sum(arelu(t, alpha, beta), w); }, x);
    check("arelu.alpha",
          [&](const Tensor<double>& t) { return weighted_sum(arelu(x, t, beta), w); },
          Tensor<double>::scalar(0.9));
    check("arelu.beta",
          [&](const Tensor<double>& t) { return weighted_sum(arelu(x, alpha, t), w); },
          Tensor<double>::scalar(2.0));

    auto ens = make_ensemble<double>(
        {ActKind::relu, ActKind::arelu, ActKind::prelu, ActKind::leaky_relu, ActKind::elu});
    check("ensemble.x",
          [&](const Tensor<double>& t) {
            return weighted_sum(activation_forward(ens, t, Mode::eval), w);
          },
          x);
  }

  // --- conv2d --------------------------------------------------------------
  {
    Tensor<double> x = detail::kink_avoiding({2, 3, 6, 7}, rng);
    Tensor<double> k = detail::kink_avoiding({4, 3, 3, 3}, rng, 0.05, 0.5);
    Tensor<double> b = detail::kink_avoiding({4}, rng, 0.05, 0.5);
    ConvAttrs attrs{2, 1, 1, 1};
    Tensor<double> w = detail::positive_random({2 * 4 * 3 * 7}, rng);
    auto probe = [&](const Tensor<double>& xi, const Tensor<double>& ki,
                     const Tensor<double>& bi) {
      Tensor<double> y = conv2d(xi, ki, bi, attrs);
      return sum(mul(reshape(y, {y.size()}), w));
    };
    check("conv2d.x", [&](const Tensor<double>& t) { return probe(t, k, b); }, x);
    check("conv2d.w", [&](const Tensor<double>& t) { return probe(x, t, b); }, k);
    check("conv2d.b", [&](const Tensor<double>& t) { return probe(x, k, t); }, b);
  }

  // --- batch norm (train mode, batch statistics) ---------------------------
  {
    Tensor<double> x = detail::kink_avoiding({3, 2, 4, 5}, rng);
    Tensor<double> gamma = detail::positive_random({2}, rng, 0.5, 1.5);
    Tensor<double> beta = detail::kink_avoiding({2}, rng, 0.05, 0.3);
    Tensor<double> w = detail::positive_random({3 * 2 * 4 * 5}, rng);
    auto probe = [&](const Tensor<double>& xi, const Tensor<double>& g,
                     const Tensor<double>& bt) {
      std::vector<double> rm(2, 0.0), rv(2, 1.0);
      Tensor<double> y = batch_norm2d(xi, g, bt, rm, rv, 1e-5, 0.1, true);
      return sum(mul(reshape(y, {y.size()}), w));
    };
    check("batchnorm.x", [&](const Tensor<double>& t) { return probe(t, gamma, beta); }, x);
    check("batchnorm.gamma", [&](const Tensor<double>& t) { return probe(x, t, beta); }, gamma);
    check("batchnorm.beta", [&](const Tensor<double>& t) { return probe(x, gamma, t); }, beta);
  }

  // --- squeeze-and-excitation ----------------------------------------------
  {
    std::mt19937_64 init(11);
    auto fc1 = LinearLayer<double>::create(4, 2, init);
    auto fc2 = LinearLayer<double>::create(2, 4, init);
    Tensor<double> x = detail::kink_avoiding({2, 4, 3, 5}, rng);
    Tensor<double> w = detail::positive_random({2 * 4 * 3 * 5}, rng);
    auto probe = [&](const Tensor<double>& xi) {
      Tensor<double> y = se_block(xi, fc1, fc2);
      return sum(mul(reshape(y, {y.size()}), w));
    };
    check("se_block.x", probe, x);
    check("se_block.fc1w",
          [&](const Tensor<double>& t) {
            LinearLayer<double> f1{t, fc1.b};
            Tensor<double> y = se_block(x, f1, fc2);
            return sum(mul(reshape(y, {y.size()}), w));
          },
          fc1.w.detach());
    check("se_block.fc2w",
          [&](const Tensor<double>& t) {
            LinearLayer<double> f2{t, fc2.b};
            Tensor<double> y = se_block(x, fc1, f2);
            return sum(mul(reshape(y, {y.size()}), w));
          },
          fc2.w.detach());
  }

  // --- attentive statistics pooling ----------------------------------------
  {
    std::mt19937_64 init(12);
    auto pool = AttentivePooling<double>::create(5, 3, 1e-9, init);
    Tensor<double> frames = detail::kink_avoiding({5, 7}, rng);
    Tensor<double> w = detail::positive_random({10}, rng);
    check("attentive_pool.frames",
          [&](const Tensor<double>& t) { return sum(mul(pool.forward(t), w)); }, frames);
    check("attentive_pool.w",
          [&](const Tensor<double>& t) {
            AttentivePooling<double> p = pool;
            p.w = t;
            return sum(mul(p.forward(frames), w));
          },
          pool.w.detach());
    check("attentive_pool.v",
          [&](const Tensor<double>& t) {
            AttentivePooling<double> p = pool;
            p.v = t;
            return sum(mul(p.forward(frames), w));
          },
          pool.v.detach());
  }

  // --- one-class softmax ---------------------------------------------------
  {
    Tensor<double> emb = detail::kink_avoiding({6, 8}, rng);
    Tensor<double> w0 = detail::kink_avoiding({8}, rng);
    std::vector<int> labels = {0, 1, 0, 1, 0, 1};
    OcsParams<double> p;
    // moderate scale keeps softplus unsaturated: at k = 20 the true gradient of
    // a well-classified sample (~1e-11) sinks below finite-difference noise
    p.k = 2.0;
    check("ocs_loss.embeddings",
          [&](const Tensor<double>& t) { return ocs_loss(t, w0, labels, p); }, emb);
    check("ocs_loss.w0", [&](const Tensor<double>& t) { return ocs_loss(emb, t, labels, p); },
          w0);
  }

  // --- elementwise / core ops ----------------------------------------------
  {
    Tensor<double> x = detail::kink_avoiding({32}, rng);
    Tensor<double> xp = detail::positive_random({32}, rng);
    Tensor<double> w = detail::positive_random({32}, rng);
    check("sigmoid", [&](const Tensor<double>& t) { return weighted_sum(sigmoid(t), w); }, x);
    check("tanh", [&](const Tensor<double>& t) { return weighted_sum(tanh_op(t), w); }, x);
    check("exp", [&](const Tensor<double>& t) { return weighted_sum(exp_op(t), w); }, x);
    check("log", [&](const Tensor<double>& t) { return weighted_sum(log_op(t), w); }, xp);
    check("sqrt", [&](const Tensor<double>& t) { return weighted_sum(sqrt_op(t), w); }, xp);
    check("softplus", [&](const Tensor<double>& t) { return weighted_sum(softplus(t), w); }, x);
    check("clamp.interior",
          [&](const Tensor<double>& t) { return weighted_sum(clamp(t, -10.0, 10.0), w); }, x);
    check("div", [&](const Tensor<double>& t) { return weighted_sum(div(x, t), w); }, xp);

    Tensor<double> a = detail::kink_avoiding({4, 5}, rng);
    Tensor<double> b = detail::kink_avoiding({5, 3}, rng);
    Tensor<double> wm = detail::positive_random({12}, rng);
    check("matmul.a",
          [&](const Tensor<double>& t) {
            return sum(mul(reshape(matmul(t, b), {12}), wm));
          },
          a);
    check("matmul.b",
          [&](const Tensor<double>& t) {
            return sum(mul(reshape(matmul(a, t), {12}), wm));
          },
          b);
    check("softmax",
          [&](const Tensor<double>& t) { return sum(mul(softmax(t), w)); },
          detail::kink_avoiding({32}, rng));
  }

  return result;
}

}  // namespace antispoof
