#pragma once

// Finite-difference gradient checking. Central differences in 64-bit; a
// coordinate whose two one-sided slopes disagree is sitting on a kink and is
// reported as skipped rather than failed.

#include <cstddef>
#include <functional>
#include <vector>

#include "antispoof/tensor.hpp"

namespace antispoof {

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  std::size_t worst_index = 0;
  std::vector<std::size_t> skipped;  // coordinates flagged as kinks
  std::size_t checked = 0;
};

inline GradCheckReport grad_check(
    const std::function<Tensor<double>(const Tensor<double>&)>& fn, const Tensor<double>& input,
    double step = 1e-6, double tol = 1e-5) {
  Tensor<double> x(input.shape(), input.data(), true);
  Tensor<double> y = fn(x);
  if (y.size() != 1) throw TensorError("grad_check: fn must return a scalar");
  backward(y);
  std::vector<double> analytic = x.grad();

  auto eval = [&](const std::vector<double>& values) {
    Tensor<double> probe(input.shape(), values, false);
    Tensor<double> out = fn(probe);
    if (out.size() != 1) throw TensorError("grad_check: fn must return a scalar");
    return out.item();
  };

  GradCheckReport report;
  std::vector<double> values = input.data();
  double f0 = eval(values);
  for (std::size_t i = 0; i < values.size(); ++i) {
    double keep = values[i];
    values[i] = keep + step;
    double fp = eval(values);
    values[i] = keep - step;
    double fm = eval(values);
    values[i] = keep;

    double slope_plus = (fp - f0) / step;
    double slope_minus = (f0 - fm) / step;
    double kink_gap = std::abs(slope_plus - slope_minus) /
                      std::max({1.0, std::abs(slope_plus), std::abs(slope_minus)});
    if (kink_gap > 1e-3) {
      report.skipped.push_back(i);
      continue;
    }

    double numeric = (fp - fm) / (2.0 * step);
    double a = analytic[i];
    double rel = std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric));
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_index = i;
    }
    ++report.checked;
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace antispoof
