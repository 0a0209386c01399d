#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "omnilab/numcore/graph.hpp"

namespace omnilab::num {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// AdamW with bias-corrected moments. Weight decay is decoupled and applied
/// to the parameter before the adaptive step:
///   p <- p * (1 - lr * wd)
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
template <class T>
class BasicAdamW {
 public:
  explicit BasicAdamW(AdamWConfig cfg = {}) : cfg_(cfg) {
    if (!(cfg_.lr >= 0.0)) throw std::invalid_argument("AdamW: lr must be >= 0");
  }

  /// Updates every parameter in `params` from its `grad`.
  void step(BasicParameterSet<T>& params) {
    if (first_.empty()) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        first_.emplace_back(params[i].value.shape());
        second_.emplace_back(params[i].value.shape());
      }
    }
    if (first_.size() != params.size()) {
      throw ShapeError("adamw", "parameter count changed between steps");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].grad.shape() != first_[i].shape() ||
          params[i].value.shape() != first_[i].shape()) {
        throw ShapeError("adamw", "shape mismatch for parameter " + params[i].name);
      }
    }
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(steps_));
    const T decay = T(1.0 - cfg_.lr * cfg_.weight_decay);
    const T b1 = T(cfg_.beta1), b2 = T(cfg_.beta2);
    const T step_size = T(cfg_.lr / bc1);
    const T inv_bc2 = T(1.0 / bc2);
    const T eps = T(cfg_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params[i].value.data();
      auto g = params[i].grad.data();
      auto m = first_[i].data();
      auto v = second_[i].data();
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = b1 * m[j] + (T(1) - b1) * g[j];
        v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
        p[j] *= decay;
        p[j] -= step_size * m[j] / (std::sqrt(v[j] * inv_bc2) + eps);
      }
    }
  }

  std::int64_t steps() const noexcept { return steps_; }
  const AdamWConfig& config() const noexcept { return cfg_; }
  const BasicTensor<T>& first_moment(std::size_t i) const { return first_.at(i); }
  const BasicTensor<T>& second_moment(std::size_t i) const { return second_.at(i); }

 private:
  AdamWConfig cfg_;
  std::int64_t steps_ = 0;
  std::vector<BasicTensor<T>> first_;
  std::vector<BasicTensor<T>> second_;
};

using AdamW = BasicAdamW<float>;

}  // namespace omnilab::num
