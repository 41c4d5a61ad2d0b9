#pragma once

// Differentiable operations over Tensor. Shapes are checked up front; the
// backward closures implement the subgradient conventions documented next to
// each kinked op (clamp: 1 inside the band, 0 outside; max: first maximal
// index wins).

#include <cmath>
#include <limits>

#include "antispoof/tensor.hpp"

namespace antispoof {

namespace detail {

template <class T>
void accumulate(std::shared_ptr<TensorNode<T>>& n, std::size_t i, T v) {
  n->grad[i] += v;
}

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw TensorError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise binary

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op<T>(a.shape(), std::move(out), {an, bn}, [an, bn](TensorNode<T>& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
    }
  });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op<T>(a.shape(), std::move(out), {an, bn}, [an, bn](TensorNode<T>& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
    }
  });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op<T>(a.shape(), std::move(out), {an, bn}, [an, bn](TensorNode<T>& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        an->grad[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        bn->grad[i] += self.grad[i] * an->value[i];
    }
  });
}

template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape(a, b, "div");
  for (std::size_t i = 0; i < b.size(); ++i)
    if (b.data()[i] == T(0)) throw TensorError("div: division by zero");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] / b.data()[i];
  auto an = a.node(), bn = b.node();
  return detail::make_op<T>(a.shape(), std::move(out), {an, bn}, [an, bn](TensorNode<T>& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        an->grad[i] += self.grad[i] / bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        bn->grad[i] -= self.grad[i] * an->value[i] / (bn->value[i] * bn->value[i]);
    }
  });
}

// ---------------------------------------------------------------------------
// scalar attrs

template <class T>
Tensor<T> scalar_mul(const Tensor<T>& a, T c) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
  auto an = a.node();
  return detail::make_op<T>(a.shape(), std::move(out), {an}, [an, c](TensorNode<T>& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * c;
  });
}

template <class T>
Tensor<T> scalar_add(const Tensor<T>& a, T c) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c;
  auto an = a.node();
  return detail::make_op<T>(a.shape(), std::move(out), {an}, [an](TensorNode<T>& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  });
}

// x scaled by a one-element tensor (gradient flows to both).
template <class T>
Tensor<T> scale_by_scalar(const Tensor<T>& x, const Tensor<T>& s) {
  if (s.size() != 1) throw TensorError("scale_by_scalar: scale must be a scalar tensor");
  T c = s.data()[0];
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * c;
  auto xn = x.node(), sn = s.node();
  return detail::make_op<T>(x.shape(), std::move(out), {xn, sn}, [xn, sn, c](TensorNode<T>& self) {
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i] * c;
    }
    if (sn->requires_grad) {
      sn->ensure_grad();
      T acc = T(0);
      for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * xn->value[i];
      sn->grad[0] += acc;
    }
  });
}

// ---------------------------------------------------------------------------
// elementwise unary

namespace detail {

template <class T, class Fwd, class Dfn>
Tensor<T> unary_op(const Tensor<T>& x, Fwd fwd, Dfn dval) {
  // dval maps (input, output) -> local derivative
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x.data()[i]);
  auto xn = x.node();
  std::vector<T> saved = out;
  return detail::make_op<T>(
      x.shape(), std::move(out), {xn},
      [xn, dval, saved = std::move(saved)](TensorNode<T>& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          xn->grad[i] += self.grad[i] * dval(xn->value[i], saved[i]);
      });
}

}  // namespace detail

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary_op(
      x,
      [](T v) {
        return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> tanh_op(const Tensor<T>& x) {
  return detail::unary_op(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> exp_op(const Tensor<T>& x) {
  return detail::unary_op(
      x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> log_op(const Tensor<T>& x) {
  for (T v : x.data())
    if (!(v > T(0))) throw TensorError("log: domain error (input <= 0)");
  return detail::unary_op(
      x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <class T>
Tensor<T> sqrt_op(const Tensor<T>& x) {
  for (T v : x.data())
    if (v < T(0)) throw TensorError("sqrt: domain error (input < 0)");
  return detail::unary_op(
      x, [](T v) { return std::sqrt(v); },
      [](T, T y) { return y > T(0) ? T(1) / (T(2) * y) : T(0); });
}

// log(1+e^x), stable form; derivative is sigmoid(x)
template <class T>
Tensor<T> softplus(const Tensor<T>& x) {
  return detail::unary_op(
      x,
      [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); },
      [](T v, T) {
        return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
      });
}

template <class T>
Tensor<T> neg(const Tensor<T>& x) {
  return scalar_mul(x, T(-1));
}

// clamp to [lo, hi]; subgradient 1 for lo <= x <= hi, 0 where the clamp fires
template <class T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  if (!(lo < hi)) throw TensorError("clamp: lo must be < hi");
  return detail::unary_op(
      x, [lo, hi](T v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <class T>
Tensor<T> clamp_min(const Tensor<T>& x, T lo) {
  return detail::unary_op(
      x, [lo](T v) { return std::max(v, lo); },
      [lo](T v, T) { return v >= lo ? T(1) : T(0); });
}

// ---------------------------------------------------------------------------
// reductions

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  auto xn = x.node();
  return detail::make_op<T>({1}, {acc}, {xn}, [xn](TensorNode<T>& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += self.grad[0];
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  T inv = T(1) / static_cast<T>(x.size());
  auto xn = x.node();
  return detail::make_op<T>({1}, {acc * inv}, {xn}, [xn, inv](TensorNode<T>& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += self.grad[0] * inv;
  });
}

// max over all elements; ties route the gradient to the first maximal index
template <class T>
Tensor<T> max_op(const Tensor<T>& x) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x.data()[i] > x.data()[arg]) arg = i;
  auto xn = x.node();
  return detail::make_op<T>({1}, {x.data()[arg]}, {xn}, [xn, arg](TensorNode<T>& self) {
    xn->ensure_grad();
    xn->grad[arg] += self.grad[0];
  });
}

// sum along axis 1 of an NxD matrix -> N-vector
template <class T>
Tensor<T> row_sum(const Tensor<T>& x) {
  if (x.rank() != 2) throw TensorError("row_sum: expects a 2-d tensor");
  std::size_t n = x.shape()[0], d = x.shape()[1];
  std::vector<T> out(n, T(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i] += x.data()[i * d + j];
  auto xn = x.node();
  return detail::make_op<T>({n}, std::move(out), {xn}, [xn, n, d](TensorNode<T>& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) xn->grad[i * d + j] += self.grad[i];
  });
}

// ---------------------------------------------------------------------------
// softmax over the last axis (1-d vector or rows of a 2-d matrix)

template <class T>
Tensor<T> softmax(const Tensor<T>& x) {
  if (x.rank() > 2) throw TensorError("softmax: expects rank 1 or 2");
  std::size_t rows = x.rank() == 2 ? x.shape()[0] : 1;
  std::size_t cols = x.rank() == 2 ? x.shape()[1] : x.shape()[0];
  std::vector<T> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data().data() + r * cols;
    T* o = out.data() + r * cols;
    T mx = in[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
    T z = T(0);
    for (std::size_t j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < cols; ++j) o[j] /= z;
  }
  auto xn = x.node();
  std::vector<T> saved = out;
  return detail::make_op<T>(
      x.shape(), std::move(out), {xn},
      [xn, rows, cols, saved = std::move(saved)](TensorNode<T>& self) {
        xn->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          const T* y = saved.data() + r * cols;
          const T* dy = self.grad.data() + r * cols;
          T dot = T(0);
          for (std::size_t j = 0; j < cols; ++j) dot += dy[j] * y[j];
          for (std::size_t j = 0; j < cols; ++j)
            xn->grad[r * cols + j] += y[j] * (dy[j] - dot);
        }
      });
}

// ---------------------------------------------------------------------------
// shape ops

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size())
    throw TensorError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  auto xn = x.node();
  std::vector<T> out = x.data();
  return detail::make_op<T>(std::move(shape), std::move(out), {xn}, [xn](TensorNode<T>& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
  });
}

// concatenate along axis 0; trailing dimensions must agree
template <class T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != b.rank()) throw TensorError("concat: rank mismatch");
  for (std::size_t i = 1; i < a.rank(); ++i)
    if (a.shape()[i] != b.shape()[i]) throw TensorError("concat: trailing dims differ");
  Shape shape = a.shape();
  shape[0] += b.shape()[0];
  std::vector<T> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  auto an = a.node(), bn = b.node();
  std::size_t na = a.size();
  return detail::make_op<T>(std::move(shape), std::move(out), {an, bn},
                            [an, bn, na](TensorNode<T>& self) {
                              if (an->requires_grad) {
                                an->ensure_grad();
                                for (std::size_t i = 0; i < na; ++i) an->grad[i] += self.grad[i];
                              }
                              if (bn->requires_grad) {
                                bn->ensure_grad();
                                for (std::size_t i = na; i < self.grad.size(); ++i)
                                  bn->grad[i - na] += self.grad[i];
                              }
                            });
}

// zero padding of the last two axes (works for rank 2, 3 or 4)
template <class T>
Tensor<T> pad2d(const Tensor<T>& x, std::size_t ph, std::size_t pw) {
  if (x.rank() < 2) throw TensorError("pad2d: expects rank >= 2");
  Shape shape = x.shape();
  std::size_t h = shape[shape.size() - 2], w = shape[shape.size() - 1];
  std::size_t planes = x.size() / (h * w);
  std::size_t oh = h + 2 * ph, ow = w + 2 * pw;
  shape[shape.size() - 2] = oh;
  shape[shape.size() - 1] = ow;
  std::vector<T> out(planes * oh * ow, T(0));
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        out[(p * oh + i + ph) * ow + j + pw] = x.data()[(p * h + i) * w + j];
  auto xn = x.node();
  return detail::make_op<T>(std::move(shape), std::move(out), {xn},
                            [xn, planes, h, w, oh, ow, ph, pw](TensorNode<T>& self) {
                              xn->ensure_grad();
                              for (std::size_t p = 0; p < planes; ++p)
                                for (std::size_t i = 0; i < h; ++i)
                                  for (std::size_t j = 0; j < w; ++j)
                                    xn->grad[(p * h + i) * w + j] +=
                                        self.grad[(p * oh + i + ph) * ow + j + pw];
                            });
}

// ---------------------------------------------------------------------------
// matmul

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) throw TensorError("matmul: expects 2-d tensors");
  std::size_t m = a.shape()[0], k = a.shape()[1];
  if (b.shape()[0] != k)
    throw TensorError("matmul: inner dims " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  std::size_t n = b.shape()[1];
  std::vector<T> out(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      T av = a.data()[i * k + p];
      const T* brow = b.data().data() + p * n;
      T* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  auto an = a.node(), bn = b.node();
  return detail::make_op<T>({m, n}, std::move(out), {an, bn},
                            [an, bn, m, k, n](TensorNode<T>& self) {
                              if (an->requires_grad) {
                                an->ensure_grad();
                                // dA = dC * B^T
                                for (std::size_t i = 0; i < m; ++i)
                                  for (std::size_t p = 0; p < k; ++p) {
                                    T acc = T(0);
                                    const T* drow = self.grad.data() + i * n;
                                    const T* brow = bn->value.data() + p * n;
                                    for (std::size_t j = 0; j < n; ++j) acc += drow[j] * brow[j];
                                    an->grad[i * k + p] += acc;
                                  }
                              }
                              if (bn->requires_grad) {
                                bn->ensure_grad();
                                // dB = A^T * dC
                                for (std::size_t i = 0; i < m; ++i)
                                  for (std::size_t p = 0; p < k; ++p) {
                                    T av = an->value[i * k + p];
                                    const T* drow = self.grad.data() + i * n;
                                    T* brow = bn->grad.data() + p * n;
                                    for (std::size_t j = 0; j < n; ++j) brow[j] += av * drow[j];
                                  }
                              }
                            });
}

// X (NxD) + row vector b (D), broadcast over rows
template <class T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& b) {
  if (x.rank() != 2 || b.rank() != 1 || b.shape()[0] != x.shape()[1])
    throw TensorError("add_rowvec: X must be NxD and b D");
  std::size_t n = x.shape()[0], d = x.shape()[1];
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x.data()[i * d + j] + b.data()[j];
  auto xn = x.node(), bn = b.node();
  return detail::make_op<T>(x.shape(), std::move(out), {xn, bn},
                            [xn, bn, n, d](TensorNode<T>& self) {
                              if (xn->requires_grad) {
                                xn->ensure_grad();
                                for (std::size_t i = 0; i < self.grad.size(); ++i)
                                  xn->grad[i] += self.grad[i];
                              }
                              if (bn->requires_grad) {
                                bn->ensure_grad();
                                for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t j = 0; j < d; ++j)
                                    bn->grad[j] += self.grad[i * d + j];
                              }
                            });
}

// X (CxT) + column vector b (C), broadcast over columns
template <class T>
Tensor<T> add_colvec(const Tensor<T>& x, const Tensor<T>& b) {
  if (x.rank() != 2 || b.rank() != 1 || b.shape()[0] != x.shape()[0])
    throw TensorError("add_colvec: X must be CxT and b C");
  std::size_t c = x.shape()[0], t = x.shape()[1];
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < t; ++j) out[i * t + j] = x.data()[i * t + j] + b.data()[i];
  auto xn = x.node(), bn = b.node();
  return detail::make_op<T>(x.shape(), std::move(out), {xn, bn},
                            [xn, bn, c, t](TensorNode<T>& self) {
                              if (xn->requires_grad) {
                                xn->ensure_grad();
                                for (std::size_t i = 0; i < self.grad.size(); ++i)
                                  xn->grad[i] += self.grad[i];
                              }
                              if (bn->requires_grad) {
                                bn->ensure_grad();
                                for (std::size_t i = 0; i < c; ++i)
                                  for (std::size_t j = 0; j < t; ++j)
                                    bn->grad[i] += self.grad[i * t + j];
                              }
                            });
}

// ---------------------------------------------------------------------------
// batch helpers (NCHW layouts)

namespace detail {

template <class T>
void require_4d(const Tensor<T>& x, const char* op) {
  if (x.rank() != 4) throw TensorError(std::string(op) + ": expects NxCxHxW");
}

}  // namespace detail

// per-channel spatial average: NxCxHxW -> NxC
template <class T>
Tensor<T> channel_mean(const Tensor<T>& x) {
  detail::require_4d(x, "channel_mean");
  std::size_t n = x.shape()[0], c = x.shape()[1], hw = x.shape()[2] * x.shape()[3];
  std::vector<T> out(n * c, T(0));
  for (std::size_t i = 0; i < n * c; ++i) {
    const T* p = x.data().data() + i * hw;
    T acc = T(0);
    for (std::size_t j = 0; j < hw; ++j) acc += p[j];
    out[i] = acc / static_cast<T>(hw);
  }
  auto xn = x.node();
  return detail::make_op<T>({n, c}, std::move(out), {xn}, [xn, n, c, hw](TensorNode<T>& self) {
    xn->ensure_grad();
    T inv = T(1) / static_cast<T>(hw);
    for (std::size_t i = 0; i < n * c; ++i) {
      T g = self.grad[i] * inv;
      T* p = xn->grad.data() + i * hw;
      for (std::size_t j = 0; j < hw; ++j) p[j] += g;
    }
  });
}

// x (NxCxHxW) scaled per channel by gates g (NxC)
template <class T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& g) {
  detail::require_4d(x, "scale_channels");
  if (g.rank() != 2 || g.shape()[0] != x.shape()[0] || g.shape()[1] != x.shape()[1])
    throw TensorError("scale_channels: gate must be NxC");
  std::size_t n = x.shape()[0], c = x.shape()[1], hw = x.shape()[2] * x.shape()[3];
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < n * c; ++i) {
    T gv = g.data()[i];
    const T* p = x.data().data() + i * hw;
    T* o = out.data() + i * hw;
    for (std::size_t j = 0; j < hw; ++j) o[j] = p[j] * gv;
  }
  auto xn = x.node(), gn = g.node();
  return detail::make_op<T>(x.shape(), std::move(out), {xn, gn},
                            [xn, gn, n, c, hw](TensorNode<T>& self) {
                              for (std::size_t i = 0; i < n * c; ++i) {
                                const T* dy = self.grad.data() + i * hw;
                                if (xn->requires_grad) {
                                  xn->ensure_grad();
                                  T gv = gn->value[i];
                                  T* dx = xn->grad.data() + i * hw;
                                  for (std::size_t j = 0; j < hw; ++j) dx[j] += dy[j] * gv;
                                }
                                if (gn->requires_grad) {
                                  gn->ensure_grad();
                                  const T* xv = xn->value.data() + i * hw;
                                  T acc = T(0);
                                  for (std::size_t j = 0; j < hw; ++j) acc += dy[j] * xv[j];
                                  gn->grad[i] += acc;
                                }
                              }
                            });
}

// slice one sample out of a batch: NxCxHxW -> CxHxW
template <class T>
Tensor<T> select_batch(const Tensor<T>& x, std::size_t idx) {
  detail::require_4d(x, "select_batch");
  std::size_t n = x.shape()[0];
  if (idx >= n) throw TensorError("select_batch: index out of range");
  std::size_t stride = x.size() / n;
  Shape shape(x.shape().begin() + 1, x.shape().end());
  std::vector<T> out(x.data().begin() + idx * stride, x.data().begin() + (idx + 1) * stride);
  auto xn = x.node();
  return detail::make_op<T>(std::move(shape), std::move(out), {xn},
                            [xn, idx, stride](TensorNode<T>& self) {
                              xn->ensure_grad();
                              for (std::size_t i = 0; i < stride; ++i)
                                xn->grad[idx * stride + i] += self.grad[i];
                            });
}

// stack N vectors of length D into an NxD matrix
template <class T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows) {
  if (rows.empty()) throw TensorError("stack_rows: empty input");
  std::size_t d = rows[0].size();
  for (const auto& r : rows)
    if (r.size() != d) throw TensorError("stack_rows: length mismatch");
  std::size_t n = rows.size();
  std::vector<T> out;
  out.reserve(n * d);
  std::vector<std::shared_ptr<TensorNode<T>>> parents;
  parents.reserve(n);
  for (const auto& r : rows) {
    out.insert(out.end(), r.data().begin(), r.data().end());
    parents.push_back(r.node());
  }
  auto saved_parents = parents;
  return detail::make_op<T>({n, d}, std::move(out), std::move(parents),
                            [saved_parents, d](TensorNode<T>& self) {
                              for (std::size_t i = 0; i < saved_parents.size(); ++i) {
                                auto& p = saved_parents[i];
                                if (!p->requires_grad) continue;
                                p->ensure_grad();
                                for (std::size_t j = 0; j < d; ++j)
                                  p->grad[j] += self.grad[i * d + j];
                              }
                            });
}

// ---------------------------------------------------------------------------
// conv2d: x NxCinxHxW (or CinxHxW), w CoutxCinxKhxKw, optional bias Cout.
// Output dims follow floor((in - k + 2*pad)/stride) + 1. Direct convolution.

struct ConvAttrs {
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 0, pad_w = 0;
};

template <class T>
Tensor<T> conv2d(const Tensor<T>& x_in, const Tensor<T>& w, const Tensor<T>* bias,
                 ConvAttrs attrs) {
  bool batched = x_in.rank() == 4;
  if (!batched && x_in.rank() != 3) throw TensorError("conv2d: input must be CxHxW or NxCxHxW");
  Tensor<T> x = batched ? x_in : reshape(x_in, Shape{1, x_in.shape()[0], x_in.shape()[1],
                                                     x_in.shape()[2]});
  if (w.rank() != 4) throw TensorError("conv2d: kernel must be CoutxCinxKhxKw");
  std::size_t n = x.shape()[0], cin = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
  std::size_t cout = w.shape()[0], kcin = w.shape()[1], kh = w.shape()[2], kw = w.shape()[3];
  if (kcin != cin)
    throw TensorError("conv2d: channel mismatch, input " + std::to_string(cin) + " kernel " +
                      std::to_string(kcin));
  if (bias && (bias->rank() != 1 || bias->shape()[0] != cout))
    throw TensorError("conv2d: bias must have Cout elements");
  std::size_t sh = attrs.stride_h, sw = attrs.stride_w, ph = attrs.pad_h, pw = attrs.pad_w;
  if (h + 2 * ph < kh || wd + 2 * pw < kw) throw TensorError("conv2d: kernel larger than input");
  std::size_t oh = (h + 2 * ph - kh) / sh + 1;
  std::size_t ow = (wd + 2 * pw - kw) / sw + 1;

  std::vector<T> out(n * cout * oh * ow, T(0));
  if (bias) {
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t co = 0; co < cout; ++co) {
        T bv = bias->data()[co];
        T* o = out.data() + (b * cout + co) * oh * ow;
        for (std::size_t i = 0; i < oh * ow; ++i) o[i] = bv;
      }
  }
  const T* xd = x.data().data();
  const T* wdt = w.data().data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t co = 0; co < cout; ++co) {
      T* oplane = out.data() + (b * cout + co) * oh * ow;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const T* xplane = xd + (b * cin + ci) * h * wd;
        const T* kplane = wdt + (co * cin + ci) * kh * kw;
        for (std::size_t ki = 0; ki < kh; ++ki)
          for (std::size_t kj = 0; kj < kw; ++kj) {
            T kv = kplane[ki * kw + kj];
            if (kv == T(0)) continue;
            for (std::size_t oi = 0; oi < oh; ++oi) {
              std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oi * sh + ki) -
                                  static_cast<std::ptrdiff_t>(ph);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
              const T* xrow = xplane + ih * wd;
              T* orow = oplane + oi * ow;
              for (std::size_t oj = 0; oj < ow; ++oj) {
                std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(oj * sw + kj) -
                                    static_cast<std::ptrdiff_t>(pw);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(wd)) continue;
                orow[oj] += kv * xrow[iw];
              }
            }
          }
      }
    }

  auto xn = x.node();
  auto wn = w.node();
  std::shared_ptr<TensorNode<T>> bn = bias ? bias->node() : nullptr;
  std::vector<std::shared_ptr<TensorNode<T>>> parents{xn, wn};
  if (bn) parents.push_back(bn);
  Shape oshape = batched ? Shape{n, cout, oh, ow} : Shape{cout, oh, ow};
  return detail::make_op<T>(
      std::move(oshape), std::move(out), std::move(parents),
      [xn, wn, bn, n, cin, h, wd, cout, kh, kw, sh, sw, ph, pw, oh, ow](TensorNode<T>& self) {
        const T* dy = self.grad.data();
        if (bn && bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t co = 0; co < cout; ++co) {
              const T* dplane = dy + (b * cout + co) * oh * ow;
              T acc = T(0);
              for (std::size_t i = 0; i < oh * ow; ++i) acc += dplane[i];
              bn->grad[co] += acc;
            }
        }
        bool need_dx = xn->requires_grad;
        bool need_dw = wn->requires_grad;
        if (need_dx) xn->ensure_grad();
        if (need_dw) wn->ensure_grad();
        if (!need_dx && !need_dw) return;
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t co = 0; co < cout; ++co) {
            const T* dplane = dy + (b * cout + co) * oh * ow;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              const T* xplane = xn->value.data() + (b * cin + ci) * h * wd;
              T* dxplane = need_dx ? xn->grad.data() + (b * cin + ci) * h * wd : nullptr;
              const T* kplane = wn->value.data() + (co * cin + ci) * kh * kw;
              T* dkplane = need_dw ? wn->grad.data() + (co * cin + ci) * kh * kw : nullptr;
              for (std::size_t ki = 0; ki < kh; ++ki)
                for (std::size_t kj = 0; kj < kw; ++kj) {
                  T kv = kplane[ki * kw + kj];
                  T dkacc = T(0);
                  for (std::size_t oi = 0; oi < oh; ++oi) {
                    std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oi * sh + ki) -
                                        static_cast<std::ptrdiff_t>(ph);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
                    const T* drow = dplane + oi * ow;
                    const T* xrow = xplane + ih * wd;
                    T* dxrow = need_dx ? dxplane + ih * wd : nullptr;
                    for (std::size_t oj = 0; oj < ow; ++oj) {
                      std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(oj * sw + kj) -
                                          static_cast<std::ptrdiff_t>(pw);
                      if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(wd)) continue;
                      T d = drow[oj];
                      if (need_dx) dxrow[iw] += d * kv;
                      if (need_dw) dkacc += d * xrow[iw];
                    }
                  }
                  if (need_dw) dkplane[ki * kw + kj] += dkacc;
                }
            }
          }
      });
}

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, ConvAttrs attrs) {
  return conv2d(x, w, &bias, attrs);
}

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, ConvAttrs attrs) {
  return conv2d(x, w, static_cast<const Tensor<T>*>(nullptr), attrs);
}

}  // namespace antispoof
