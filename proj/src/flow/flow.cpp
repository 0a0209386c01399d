#include "omnilab/flow/flow.hpp"

#include <stdexcept>
#include <string>

namespace omnilab::flow {

namespace {

void require_same_shape(const num::Tensor& a, const num::Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw num::ShapeError(what, num::shape_str(a.shape()) + " vs " +
                                    num::shape_str(b.shape()));
  }
}

double mean_squared_difference(const num::Tensor& a, const num::Tensor& b) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    acc += d * d;
  }
  return acc / double(a.size());
}

}  // namespace

FlowExample make_flow_example(num::Tensor x0, num::Tensor eps, float t) {
  require_same_shape(x0, eps, "make_flow_example");
  if (!(t >= 0.0f && t <= 1.0f)) {
    throw std::invalid_argument("make_flow_example: t must lie in [0, 1]");
  }
  FlowExample ex;
  ex.x_t = num::Tensor(x0.shape());
  ex.v_target = num::Tensor(x0.shape());
  const float keep = 1.0f - t;
  for (std::int64_t i = 0; i < x0.size(); ++i) {
    ex.x_t[i] = keep * x0[i] + t * eps[i];
    ex.v_target[i] = eps[i] - x0[i];
  }
  ex.x0 = std::move(x0);
  ex.eps = std::move(eps);
  ex.t = t;
  return ex;
}

FlowExample make_training_example(const num::Tensor& x0, num::SeededStream& rng) {
  if (!x0.all_finite()) throw std::invalid_argument("make_training_example: x0 not finite");
  num::Tensor eps(x0.shape());
  for (auto& v : eps.data()) v = static_cast<float>(rng.normal());
  const auto t = static_cast<float>(rng.uniform());
  return make_flow_example(x0, std::move(eps), t);
}

double flow_loss(const num::Tensor& v_pred, const num::Tensor& v_target) {
  require_same_shape(v_pred, v_target, "flow_loss");
  return mean_squared_difference(v_pred, v_target);
}

double direct_loss(const num::Tensor& prediction, const num::Tensor& target) {
  require_same_shape(prediction, target, "direct_loss");
  return mean_squared_difference(prediction, target);
}

num::Tensor euler_sample(const VelocityFn& velocity, num::Tensor x1, int steps) {
  if (steps < 1) throw std::invalid_argument("euler_sample: steps must be >= 1");
  num::Tensor x = std::move(x1);
  const float dt = 1.0f / static_cast<float>(steps);
  for (int i = 0; i < steps; ++i) {
    const float t = 1.0f - static_cast<float>(i) / static_cast<float>(steps);
    const num::Tensor v = velocity(x, t);
    require_same_shape(v, x, "euler_sample");
    for (std::int64_t j = 0; j < x.size(); ++j) x[j] -= dt * v[j];
    if (!x.all_finite()) {
      throw num::NumericError("euler step " + std::to_string(i),
                              "non-finite sampler state");
    }
  }
  return x;
}

}  // namespace omnilab::flow
