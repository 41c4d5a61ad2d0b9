#pragma once

// ReLU-family activations: ReLU, LeakyReLU, RReLU, ELU, PReLU, AReLU, and the
// summation ensemble. AReLU splits into ReLU plus an element-wise sign-based
// attention residue with learnable alpha (negative-side scale, clamped to
// [0.01, 0.99] in the forward pass) and beta (positive-side gain through a
// sigmoid). Parameters are stored unconstrained; gradients are zero where the
// clamp fires.

#include <random>
#include <string>
#include <vector>

#include "antispoof/ops.hpp"
#include "antispoof/tensor.hpp"

namespace antispoof {

enum class ActKind { relu, leaky_relu, rrelu, elu, prelu, arelu, ensemble };

enum class Mode { train, eval };

inline const char* act_kind_name(ActKind k) {
  switch (k) {
    case ActKind::relu: return "relu";
    case ActKind::leaky_relu: return "leaky_relu";
    case ActKind::rrelu: return "rrelu";
    case ActKind::elu: return "elu";
    case ActKind::prelu: return "prelu";
    case ActKind::arelu: return "arelu";
    case ActKind::ensemble: return "ensemble";
  }
  return "?";
}

inline ActKind act_kind_from_name(const std::string& s) {
  for (ActKind k : {ActKind::relu, ActKind::leaky_relu, ActKind::rrelu, ActKind::elu,
                    ActKind::prelu, ActKind::arelu, ActKind::ensemble})
    if (s == act_kind_name(k)) return k;
  throw TensorError("unknown activation kind: " + s);
}

constexpr double kAreluClampLo = 0.01;
constexpr double kAreluClampHi = 0.99;

template <class T>
struct ActivationSpec {
  ActKind kind = ActKind::relu;
  Tensor<T> alpha;  // arelu, learnable scalar
  Tensor<T> beta;   // arelu, learnable scalar
  T gamma = T(0.2);           // leaky_relu, fixed
  T elu_r = T(1.0);           // elu, fixed
  Tensor<T> xi;               // prelu, learnable; one value or one per channel
  T rrelu_l = T(0.125);       // rrelu, fixed bounds
  T rrelu_u = T(0.333);
  std::vector<ActivationSpec> members;  // ensemble only

  std::vector<std::pair<std::string, Tensor<T>>> named_parameters(const std::string& prefix) {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    switch (kind) {
      case ActKind::arelu:
        out.emplace_back(prefix + ".alpha", alpha);
        out.emplace_back(prefix + ".beta", beta);
        break;
      case ActKind::prelu:
        out.emplace_back(prefix + ".xi", xi);
        break;
      case ActKind::ensemble:
        for (std::size_t i = 0; i < members.size(); ++i) {
          auto sub = members[i].named_parameters(prefix + "." + std::to_string(i) + "_" +
                                                 act_kind_name(members[i].kind));
          out.insert(out.end(), sub.begin(), sub.end());
        }
        break;
      default:
        break;
    }
    return out;
  }
};

// Initial values: xi=0.25, gamma=0.2, r=1.0, l=0.125, u=0.333; AReLU starts at
// alpha=0.9, beta=2.0. PReLU gets one xi per channel when channels > 1.
template <class T>
ActivationSpec<T> activation_init(ActKind kind, std::size_t channels = 1) {
  if (kind == ActKind::ensemble)
    throw TensorError("activation_init: use make_ensemble for ensembles");
  ActivationSpec<T> spec;
  spec.kind = kind;
  if (kind == ActKind::arelu) {
    spec.alpha = Tensor<T>::scalar(T(0.9), true);
    spec.beta = Tensor<T>::scalar(T(2.0), true);
  }
  if (kind == ActKind::prelu) spec.xi = Tensor<T>::full({channels}, T(0.25), true);
  return spec;
}

template <class T>
ActivationSpec<T> make_ensemble(const std::vector<ActKind>& kinds, std::size_t channels = 1) {
  if (kinds.empty()) throw TensorError("make_ensemble: empty member list");
  ActivationSpec<T> spec;
  spec.kind = ActKind::ensemble;
  for (ActKind k : kinds) {
    if (k == ActKind::ensemble) throw TensorError("make_ensemble: nested ensemble");
    spec.members.push_back(activation_init<T>(k, channels));
  }
  return spec;
}

// ---------------------------------------------------------------------------
// fused activation ops

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  // subgradient at 0 is 0
  return detail::unary_op(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T gamma) {
  return detail::unary_op(
      x, [gamma](T v) { return v > T(0) ? v : gamma * v; },
      [gamma](T v, T) { return v > T(0) ? T(1) : gamma; });
}

template <class T>
Tensor<T> elu(const Tensor<T>& x, T r) {
  return detail::unary_op(
      x, [r](T v) { return v > T(0) ? v : r * (std::exp(v) - T(1)); },
      [r](T v, T) { return v > T(0) ? T(1) : r * std::exp(v); });
}

// PReLU with a shared xi (size 1) or one xi per channel. Per-channel requires
// x in NxCxHxW or CxHxW layout.
template <class T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& xi) {
  std::size_t nxi = xi.size();
  std::size_t plane = 1, nchan = 1;
  if (nxi > 1) {
    if (x.rank() == 4 && x.shape()[1] == nxi) {
      nchan = nxi;
      plane = x.shape()[2] * x.shape()[3];
    } else if (x.rank() == 3 && x.shape()[0] == nxi) {
      nchan = nxi;
      plane = x.shape()[1] * x.shape()[2];
    } else {
      throw TensorError("prelu: per-channel xi does not match input layout");
    }
  }
  std::size_t groups = x.size() / (nchan * plane);
  std::vector<T> out(x.size());
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t c = 0; c < nchan; ++c) {
      T s = xi.data()[nxi == 1 ? 0 : c];
      const T* in = x.data().data() + (g * nchan + c) * plane;
      T* o = out.data() + (g * nchan + c) * plane;
      for (std::size_t j = 0; j < plane; ++j) o[j] = in[j] > T(0) ? in[j] : s * in[j];
    }
  auto xn = x.node(), pn = xi.node();
  return detail::make_op<T>(
      x.shape(), std::move(out), {xn, pn},
      [xn, pn, groups, nchan, plane, nxi](TensorNode<T>& self) {
        for (std::size_t g = 0; g < groups; ++g)
          for (std::size_t c = 0; c < nchan; ++c) {
            std::size_t base = (g * nchan + c) * plane;
            T s = pn->value[nxi == 1 ? 0 : c];
            if (xn->requires_grad) {
              xn->ensure_grad();
              for (std::size_t j = 0; j < plane; ++j) {
                T v = xn->value[base + j];
                xn->grad[base + j] += self.grad[base + j] * (v > T(0) ? T(1) : s);
              }
            }
            if (pn->requires_grad) {
              pn->ensure_grad();
              T acc = T(0);
              for (std::size_t j = 0; j < plane; ++j) {
                T v = xn->value[base + j];
                if (v <= T(0)) acc += self.grad[base + j] * v;
              }
              pn->grad[nxi == 1 ? 0 : c] += acc;
            }
          }
      });
}

// RReLU: per-element slope drawn from unif(l, u) in train mode, the fixed
// mean (l+u)/2 in eval mode.
template <class T>
Tensor<T> rrelu(const Tensor<T>& x, T l, T u, Mode mode, std::mt19937_64* rng) {
  if (!(T(0) < l && l < u)) throw TensorError("rrelu: requires 0 < l < u");
  if (mode == Mode::train && rng == nullptr)
    throw TensorError("rrelu: train mode requires an rng");
  std::vector<T> slopes(x.size());
  if (mode == Mode::train) {
    std::uniform_real_distribution<T> dist(l, u);
    for (auto& s : slopes) s = dist(*rng);
  } else {
    T m = (l + u) / T(2);
    for (auto& s : slopes) s = m;
  }
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    T v = x.data()[i];
    out[i] = v > T(0) ? v : slopes[i] * v;
  }
  auto xn = x.node();
  return detail::make_op<T>(x.shape(), std::move(out), {xn},
                            [xn, slopes = std::move(slopes)](TensorNode<T>& self) {
                              xn->ensure_grad();
                              for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                T v = xn->value[i];
                                xn->grad[i] += self.grad[i] * (v > T(0) ? T(1) : slopes[i]);
                              }
                            });
}

// AReLU: clamp(alpha)*x on the negative side, (1+sigmoid(beta))*x on the
// non-negative side. alpha receives gradient only while inside the clamp band.
template <class T>
Tensor<T> arelu(const Tensor<T>& x, const Tensor<T>& alpha, const Tensor<T>& beta) {
  if (alpha.size() != 1 || beta.size() != 1)
    throw TensorError("arelu: alpha and beta must be scalars");
  T a = alpha.data()[0];
  T ca = std::min(std::max(a, T(kAreluClampLo)), T(kAreluClampHi));
  T b = beta.data()[0];
  T sb = b >= T(0) ? T(1) / (T(1) + std::exp(-b)) : std::exp(b) / (T(1) + std::exp(b));
  T pos_scale = T(1) + sb;
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    T v = x.data()[i];
    out[i] = v < T(0) ? ca * v : pos_scale * v;
  }
  auto xn = x.node(), an = alpha.node(), bn = beta.node();
  bool alpha_active = (a >= T(kAreluClampLo) && a <= T(kAreluClampHi));
  return detail::make_op<T>(
      x.shape(), std::move(out), {xn, an, bn},
      [xn, an, bn, ca, sb, pos_scale, alpha_active](TensorNode<T>& self) {
        T dneg = T(0), dpos = T(0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          T v = xn->value[i];
          if (v < T(0))
            dneg += self.grad[i] * v;
          else
            dpos += self.grad[i] * v;
        }
        if (xn->requires_grad) {
          xn->ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i)
            xn->grad[i] += self.grad[i] * (xn->value[i] < T(0) ? ca : pos_scale);
        }
        if (an->requires_grad) {
          an->ensure_grad();
          if (alpha_active) an->grad[0] += dneg;
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          bn->grad[0] += dpos * sb * (T(1) - sb);
        }
      });
}

// ---------------------------------------------------------------------------
// dispatch

template <class T>
Tensor<T> activation_forward(const ActivationSpec<T>& spec, const Tensor<T>& x, Mode mode,
                             std::mt19937_64* rng = nullptr) {
  switch (spec.kind) {
    case ActKind::relu: return relu(x);
    case ActKind::leaky_relu: return leaky_relu(x, spec.gamma);
    case ActKind::elu: return elu(x, spec.elu_r);
    case ActKind::prelu: return prelu(x, spec.xi);
    case ActKind::rrelu: return rrelu(x, spec.rrelu_l, spec.rrelu_u, mode, rng);
    case ActKind::arelu: return arelu(x, spec.alpha, spec.beta);
    case ActKind::ensemble: {
      if (spec.members.empty()) throw TensorError("ensemble: no members");
      Tensor<T> acc = activation_forward(spec.members[0], x, mode, rng);
      for (std::size_t i = 1; i < spec.members.size(); ++i)
        acc = add(acc, activation_forward(spec.members[i], x, mode, rng));
      return acc;
    }
  }
  throw TensorError("activation_forward: bad kind");
}

template <class T>
Tensor<T> ensemble_forward(const ActivationSpec<T>& spec, const Tensor<T>& x, Mode mode,
                           std::mt19937_64* rng = nullptr) {
  if (spec.kind != ActKind::ensemble) throw TensorError("ensemble_forward: not an ensemble");
  return activation_forward(spec, x, mode, rng);
}

}  // namespace antispoof
