#include <doctest.h>

#include <cmath>
#include <limits>

#include "checks.hpp"
#include "omnilab/flow/flow.hpp"
#include "omnilab/flow/sampler.hpp"

using namespace omnilab;

namespace {

num::Tensor seeded(num::Shape s, std::uint64_t seed) {
  num::SeededStream rng(seed);
  num::Tensor t(std::move(s));
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

decoder::ModelConfig tiny_flow_config() {
  decoder::ModelConfig c;
  c.dim = 16;
  c.heads = 2;
  c.layers = 1;
  c.image_height = 4;
  c.image_width = 4;
  c.timestep_conditioning = true;
  return c;
}

}  // namespace

TEST_CASE("interpolant endpoints") {
  const auto x0 = seeded({2, 2, 3}, 1), eps = seeded({2, 2, 3}, 2);
  CHECK(flow::make_flow_example(x0, eps, 0.0f).x_t == x0);
  CHECK(flow::make_flow_example(x0, eps, 1.0f).x_t == eps);
  CHECK_THROWS(flow::make_flow_example(x0, eps, 1.5f));
  CHECK_THROWS(flow::make_flow_example(x0, seeded({3}, 2), 0.5f));
}

TEST_CASE("flow example invariants hold exactly over 10^4 draws") {
  const auto r = checks::flow_property_suite(10000, 3);
  CHECK(r.draws == 10000);
  CHECK(r.invariant_violations == 0);
  // One Euler step along the exact velocity recovers x0 to float rounding.
  CHECK(r.max_one_step_ulps <= 2.0);
}

TEST_CASE("training examples use eps then t from the stream") {
  const auto x0 = seeded({4}, 5);
  num::SeededStream a(9), b(9);
  const auto ex = flow::make_training_example(x0, a);
  for (int i = 0; i < 4; ++i) CHECK(ex.eps[i] == static_cast<float>(b.normal()));
  CHECK(ex.t == static_cast<float>(b.uniform()));
}

TEST_CASE("flow_loss and direct_loss") {
  const auto v = seeded({3, 5}, 4);
  CHECK(flow::flow_loss(v, v) == 0.0);
  num::Tensor shifted = v;
  for (auto& x : shifted.data()) x += 1.0f;
  CHECK(flow::flow_loss(shifted, v) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(flow::direct_loss(num::Tensor({4, 4, 3}, 0.5f), num::Tensor({4, 4, 3})) == 0.25);

  const auto w = seeded({3, 5}, 6);
  double acc = 0.0;
  for (std::int64_t i = 0; i < v.size(); ++i) acc += std::pow(double(v[i]) - double(w[i]), 2);
  CHECK(std::abs(flow::flow_loss(v, w) - acc / double(v.size())) < 1e-6);
  CHECK(flow::flow_loss(v, w) >= 0.0);
  CHECK_THROWS_AS(flow::flow_loss(v, seeded({5, 3}, 1)), num::ShapeError);
}

TEST_CASE("euler sampler") {
  const auto x1 = seeded({6}, 7);
  SUBCASE("zero field leaves the state alone") {
    auto zero = [](const num::Tensor& x, float) { return num::Tensor(x.shape()); };
    CHECK(flow::euler_sample(zero, x1, 8) == x1);
  }
  SUBCASE("visits t = 1, 1 - 1/N, ...") {
    std::vector<float> ts;
    auto record = [&](const num::Tensor& x, float t) {
      ts.push_back(t);
      return num::Tensor(x.shape());
    };
    flow::euler_sample(record, x1, 4);
    CHECK(ts == std::vector<float>{1.0f, 0.75f, 0.5f, 0.25f});
  }
  SUBCASE("steps must be positive") {
    auto zero = [](const num::Tensor& x, float) { return num::Tensor(x.shape()); };
    CHECK_THROWS(flow::euler_sample(zero, x1, 0));
  }
  SUBCASE("non-finite state names the step") {
    auto blow = [](const num::Tensor& x, float t) {
      return num::Tensor(x.shape(), t < 0.6f ? std::numeric_limits<float>::infinity() : 0.0f);
    };
    try {
      flow::euler_sample(blow, x1, 4);
      FAIL("expected NumericError");
    } catch (const num::NumericError& e) {
      CHECK(std::string(e.what()).find("euler step 2") != std::string::npos);
    }
  }
}

TEST_CASE("model sampling is deterministic for a fixed seed") {
  decoder::Model model(tiny_flow_config(), 3);
  std::vector<num::Tensor> inputs{num::Tensor({4, 4, 3}, 0.2f), num::Tensor({4, 4, 3}, 0.7f)};
  const auto a = flow::sample(model, 2, inputs, 4, 11);
  const auto b = flow::sample(model, 2, inputs, 4, 11);
  const auto c = flow::sample(model, 2, inputs, 4, 12);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.shape() == num::Shape{4, 4, 3});
}

TEST_CASE("sampling needs a flow-mode model") {
  auto c = tiny_flow_config();
  c.timestep_conditioning = false;
  decoder::Model model(c, 3);
  std::vector<num::Tensor> inputs{num::Tensor({4, 4, 3})};
  CHECK_THROWS_AS(flow::sample(model, 1, inputs, 2, 1), std::invalid_argument);
}
