#pragma once

// ADAM with bias-corrected moments, plus the stepped exponential learning
// rate schedule lr0 * rate^floor(epoch / interval).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "antispoof/tensor.hpp"

namespace antispoof {

struct OptimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T>
struct AdamConfig {
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
};

template <class T>
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Tensor<T>>> params, AdamConfig<T> cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].second.size(), T(0));
      v_[i].assign(params_[i].second.size(), T(0));
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

  std::int64_t step_count() const { return t_; }

  // One update at the given learning rate. A NaN gradient aborts the step
  // before any parameter is touched.
  void step(T lr) {
    for (auto& [name, p] : params_)
      for (T g : p.grad())
        if (!std::isfinite(double(g)))
          throw OptimError("adam: non-finite gradient in parameter '" + name + "'");
    ++t_;
    T bc1 = T(1) - static_cast<T>(std::pow(double(cfg_.beta1), double(t_)));
    T bc2 = T(1) - static_cast<T>(std::pow(double(cfg_.beta2), double(t_)));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i].second;
      auto& grad = p.grad();
      auto& data = p.data();
      for (std::size_t j = 0; j < data.size(); ++j) {
        T g = grad[j];
        m_[i][j] = cfg_.beta1 * m_[i][j] + (T(1) - cfg_.beta1) * g;
        v_[i][j] = cfg_.beta2 * v_[i][j] + (T(1) - cfg_.beta2) * g * g;
        T mhat = m_[i][j] / bc1;
        T vhat = v_[i][j] / bc2;
        data[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> params_;
  AdamConfig<T> cfg_;
  std::vector<std::vector<T>> m_, v_;
  std::int64_t t_ = 0;
};

inline double lr_at(std::size_t epoch, double lr0, double decay_rate,
                    std::size_t decay_interval) {
  if (decay_interval == 0) throw OptimError("lr_at: decay interval must be positive");
  return lr0 * std::pow(decay_rate, static_cast<double>(epoch / decay_interval));
}

}  // namespace antispoof
