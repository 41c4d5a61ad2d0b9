#pragma once

// One-class softmax objective. Label 0 is bona fide (target class), label 1 is
// spoof. Per sample: softplus(k * (m_y - cos(w0, omega)) * (-1)^y), averaged
// over the batch. The loss is the positive mean of softplus terms; embeddings
// and w0 are direction-normalized inside the graph so gradients reach both.

#include <vector>

#include "antispoof/ops.hpp"
#include "antispoof/tensor.hpp"

namespace antispoof {

template <class T>
struct OcsParams {
  T k = T(20);
  T m0 = T(0.9);  // target-class margin
  T m1 = T(0.2);  // non-target margin
};

// cosine similarities between each embedding row and w0, on the graph
template <class T>
Tensor<T> ocs_cosines(const Tensor<T>& embeddings, const Tensor<T>& w0) {
  if (embeddings.rank() != 2) throw TensorError("ocs: embeddings must be NxD");
  std::size_t d = embeddings.shape()[1];
  if (w0.rank() != 1 || w0.shape()[0] != d) throw TensorError("ocs: w0 must be length D");
  for (T v : w0.data())
    if (v != v) throw TensorError("ocs: NaN in w0");
  Tensor<T> w0_norm = sqrt_op(sum(mul(w0, w0)));
  if (w0_norm.item() == T(0)) throw TensorError("ocs: zero-norm w0");
  Tensor<T> row_norms = sqrt_op(row_sum(mul(embeddings, embeddings)));
  for (T v : row_norms.data())
    if (v == T(0)) throw TensorError("ocs: zero-norm embedding row");
  Tensor<T> dots = reshape(matmul(embeddings, reshape(w0, Shape{d, 1})),
                           Shape{embeddings.shape()[0]});
  return div(dots, scale_by_scalar(row_norms, w0_norm));
}

template <class T>
Tensor<T> ocs_loss(const Tensor<T>& embeddings, const Tensor<T>& w0,
                   const std::vector<int>& labels, const OcsParams<T>& p) {
  std::size_t n = embeddings.shape()[0];
  if (labels.size() != n) throw TensorError("ocs: label count mismatch");
  Tensor<T> cos = ocs_cosines(embeddings, w0);
  std::vector<T> margins(n), signs(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw TensorError("ocs: labels must be 0 or 1");
    margins[i] = labels[i] == 0 ? p.m0 : p.m1;
    signs[i] = labels[i] == 0 ? T(1) : T(-1);
  }
  Tensor<T> margin_t(Shape{n}, std::move(margins));
  Tensor<T> sign_t(Shape{n}, std::move(signs));
  Tensor<T> arg = scalar_mul(mul(sign_t, sub(margin_t, cos)), p.k);
  return mean(softplus(arg));
}

}  // namespace antispoof
