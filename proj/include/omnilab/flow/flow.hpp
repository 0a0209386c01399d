#pragma once

#include <functional>

#include "omnilab/numcore/rng.hpp"
#include "omnilab/numcore/tensor.hpp"

namespace omnilab::flow {

/// Rectified-flow training pair on the straight path between data (t = 0)
/// and noise (t = 1):
///   x_t = (1 - t) * x0 + t * eps,   v_target = eps - x0.
struct FlowExample {
  num::Tensor x0;
  num::Tensor eps;
  float t = 0.0f;
  num::Tensor x_t;
  num::Tensor v_target;
};

/// Builds the interpolant and velocity for given x0, eps and t.
FlowExample make_flow_example(num::Tensor x0, num::Tensor eps, float t);

/// Draws eps ~ N(0, I) and t ~ U[0, 1] from `rng` (eps first, then t).
FlowExample make_training_example(const num::Tensor& x0, num::SeededStream& rng);

/// Mean squared error on velocities.
double flow_loss(const num::Tensor& v_pred, const num::Tensor& v_target);

/// Mean squared pixel error for direct reconstruction.
double direct_loss(const num::Tensor& prediction, const num::Tensor& target);

/// Velocity field v(x, t).
using VelocityFn = std::function<num::Tensor(const num::Tensor& x, float t)>;

/// Integrates dx/dt = v from t = 1 down to t = 0 in `steps` uniform Euler
/// steps, starting from `x1`. Throws NumericError naming the step index if
/// the state becomes non-finite.
num::Tensor euler_sample(const VelocityFn& velocity, num::Tensor x1, int steps);

}  // namespace omnilab::flow
