#pragma once

#include <cstdint>
#include <span>

#include "omnilab/decoder/model.hpp"
#include "omnilab/flow/flow.hpp"

namespace omnilab::flow {

/// Velocity field of a flow-mode model conditioned on "reproduce image k"
/// of `inputs`. The returned function takes and yields [H, W, C] images;
/// `model` and `inputs` must outlive it.
VelocityFn model_velocity(decoder::Model& model, int k, std::span<const num::Tensor> inputs);

/// Starts from N(0, I) noise drawn from `seed` and takes `steps` Euler
/// steps from t = 1 to t = 0. Returns the image [H, W, C].
num::Tensor sample(decoder::Model& model, int k, std::span<const num::Tensor> inputs,
                   int steps, std::uint64_t seed);

}  // namespace omnilab::flow
