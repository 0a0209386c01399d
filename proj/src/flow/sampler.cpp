#include "omnilab/flow/sampler.hpp"

#include <stdexcept>

#include "omnilab/decoder/decoder.hpp"

namespace omnilab::flow {

VelocityFn model_velocity(decoder::Model& model, int k, std::span<const num::Tensor> inputs) {
  if (!model.config().timestep_conditioning) {
    throw std::invalid_argument("sampling needs a flow-mode (timestep-conditioned) model");
  }
  return [&model, k, inputs](const num::Tensor& x, float t) {
    const auto& cfg = model.config();
    num::Graph graph;
    graph.set_grad_enabled(false);
    auto m = decoder::bind(graph, model);
    auto condition = decoder::encode_instruction(m, k);
    decoder::OutputSpec<float> out{x};
    auto seq = decoder::assemble_sequence<float>(m, condition, inputs, out);
    auto v = decoder::forward(m, seq, std::optional<float>(t));
    return decoder::depatchify(v.value(), cfg.image_height, cfg.image_width, cfg.channels,
                               cfg.patch);
  };
}

num::Tensor sample(decoder::Model& model, int k, std::span<const num::Tensor> inputs,
                   int steps, std::uint64_t seed) {
  const auto& cfg = model.config();
  num::SeededStream rng(seed);
  num::Tensor x1(num::Shape{cfg.image_height, cfg.image_width, cfg.channels});
  for (auto& v : x1.data()) v = static_cast<float>(rng.normal());
  return euler_sample(model_velocity(model, k, inputs), std::move(x1), steps);
}

}  // namespace omnilab::flow
