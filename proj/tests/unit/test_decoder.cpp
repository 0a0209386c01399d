#include <doctest.h>

#include <set>
#include <sstream>

#include "omnilab/decoder/checkpoint.hpp"
#include "omnilab/decoder/decoder.hpp"
#include "omnilab/numcore/ops.hpp"

using namespace omnilab;
using decoder::Model;
using decoder::ModelConfig;

namespace {

std::vector<num::Tensor> images(const ModelConfig& c, int n, std::uint64_t seed) {
  num::SeededStream rng(seed);
  std::vector<num::Tensor> out;
  for (int i = 0; i < n; ++i) {
    num::Tensor t({c.image_height, c.image_width, c.channels});
    for (auto& v : t.data()) v = static_cast<float>(rng.uniform());
    out.push_back(std::move(t));
  }
  return out;
}

ModelConfig small_config() {
  ModelConfig c;
  c.dim = 32;
  c.heads = 2;
  c.layers = 2;
  c.image_height = 8;
  c.image_width = 8;
  return c;
}

void randomise(Model& m, std::uint64_t seed) {
  num::SeededStream rng(seed);
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    for (auto& v : m.params()[i].value.data()) v += static_cast<float>(rng.normal(0.0, 0.1));
  }
}

}  // namespace

TEST_CASE("sequence of condition, three images and target has 260 tokens") {
  ModelConfig c;
  Model model(c, 1);
  num::Graph g;
  auto m = decoder::bind(g, model);
  const auto in = images(c, 3, 2);
  auto seq = decoder::assemble_sequence<float>(m, decoder::encode_instruction(m, 2), in, {});
  CHECK(seq.token_count() == 4 + 3 * 64 + 64);
  CHECK(seq.positions.size() == 260);
  CHECK(seq.layout.size() == 5);
  CHECK(seq.output_range().size() == 64);

  std::set<std::int64_t> ids;
  for (const auto& r : seq.ranges) ids.insert(seq.positions[std::size_t(r.begin)].instance);
  CHECK(ids.size() == seq.layout.size());

  auto pred = decoder::forward(m, seq);
  CHECK(pred.shape() == num::Shape{64, 12});
}

TEST_CASE("assembly and forward are deterministic") {
  const auto c = small_config();
  auto run = [&] {
    Model model(c, 5);
    randomise(model, 6);
    num::Graph g;
    auto m = decoder::bind(g, model);
    const auto in = images(c, 2, 7);
    auto seq = decoder::assemble_sequence<float>(m, decoder::encode_instruction(m, 1), in, {});
    return std::pair{seq.tokens.value(), decoder::forward(m, seq).value()};
  };
  CHECK(run() == run());
}

TEST_CASE("condition length may vary without a new model") {
  const auto c = small_config();
  Model model(c, 5);
  num::Graph g;
  auto m = decoder::bind(g, model);
  const auto in = images(c, 2, 7);
  for (int len : {1, 3, 9}) {
    auto cond = g.constant(num::Tensor({len, c.dim}, 0.1f));
    auto seq = decoder::assemble_sequence<float>(m, cond, in, {});
    CHECK(seq.token_count() == len + 3 * c.tokens_per_image());
    CHECK(decoder::forward(m, seq).shape() == num::Shape{c.tokens_per_image(), c.patch_dim()});
  }
}

TEST_CASE("refiner is the identity at initialisation") {
  const auto c = small_config();
  Model model(c, 3);
  num::Graph g;
  auto m = decoder::bind(g, model);
  auto seq = decoder::assemble_sequence<float>(m, decoder::encode_instruction(m, 1),
                                               images(c, 2, 4), {});
  auto refined = decoder::refine_conditions(m, seq);
  CHECK(refined.tokens.shape() == seq.tokens.shape());
  CHECK(refined.tokens.value() == seq.tokens.value());
}

TEST_CASE("initial prediction with zeroed placeholders is the head bias") {
  const auto c = small_config();
  Model model(c, 3);
  model.params().at("output.query").value.fill(0.0f);
  auto& bias = model.params().at("head.b").value;
  for (std::int64_t i = 0; i < bias.size(); ++i) bias[i] = 0.01f * float(i);
  num::Graph g;
  auto m = decoder::bind(g, model);
  auto seq = decoder::assemble_sequence<float>(m, decoder::encode_instruction(m, 1),
                                               images(c, 3, 4), {});
  const auto pred = decoder::forward(m, seq).value();
  for (std::int64_t t = 0; t < pred.dim(0); ++t) {
    for (std::int64_t j = 0; j < pred.dim(1); ++j) CHECK(pred[t * pred.dim(1) + j] == bias[j]);
  }
}

TEST_CASE("gradients reach every refiner parameter") {
  const auto c = small_config();
  Model model(c, 8);
  randomise(model, 9);
  num::Graph g;
  auto m = decoder::bind(g, model);
  const auto in = images(c, 2, 10);
  auto seq = decoder::assemble_sequence<float>(m, decoder::encode_instruction(m, 2), in, {});
  auto loss = num::mse(decoder::forward(m, seq), g.constant(decoder::patchify(in[1], c.patch)));
  model.params().zero_grad();
  g.backward(loss);
  int checked = 0;
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const auto& p = model.params()[i];
    if (p.name.rfind("refiner.", 0) != 0) continue;
    double norm = 0.0;
    for (float v : p.grad.data()) norm += std::abs(v);
    INFO(p.name);
    CHECK(norm > 0.0);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("one block stack shared by every token; schemes differ only by the index table") {
  ModelConfig c = small_config();
  std::int64_t base = -1;
  for (auto s : {rope::Scheme::omni_rope, rope::Scheme::lumina_accum, rope::Scheme::qwen_accum}) {
    c.rope.scheme = s;
    c.rope.use_image_index_embedding = false;
    Model m(c, 1);
    CHECK(m.layout().core.size() == std::size_t(c.layers));
    CHECK(m.layout().refiner.size() == 2);
    if (base < 0) base = m.params().element_count();
    CHECK(m.params().element_count() == base);
    c.rope.use_image_index_embedding = true;
    Model mi(c, 1);
    CHECK(mi.params().element_count() == base + (c.max_image_index + 1) * c.dim);
  }
}

TEST_CASE("mode and time must agree") {
  auto c = small_config();
  Model direct(c, 1);
  c.timestep_conditioning = true;
  Model flow(c, 1);
  const auto in = images(c, 2, 3);
  num::Graph g;
  auto md = decoder::bind(g, direct);
  auto seq = decoder::assemble_sequence<float>(md, decoder::encode_instruction(md, 1), in, {});
  CHECK_THROWS_AS(decoder::forward(md, seq, std::optional<float>(0.5f)), std::invalid_argument);
  auto mf = decoder::bind(g, flow);
  CHECK_THROWS(decoder::assemble_sequence<float>(mf, decoder::encode_instruction(mf, 1), in, {}));
  decoder::OutputSpec<float> out{in[0]};
  auto fseq = decoder::assemble_sequence<float>(mf, decoder::encode_instruction(mf, 1), in, out);
  CHECK_THROWS_AS(decoder::forward(mf, fseq), std::invalid_argument);
  CHECK(decoder::forward(mf, fseq, std::optional<float>(0.3f)).shape() ==
        num::Shape{c.tokens_per_image(), c.patch_dim()});
}

TEST_CASE("patch mismatch is reported") {
  const auto c = small_config();
  Model model(c, 1);
  num::Graph g;
  auto m = decoder::bind(g, model);
  std::vector<num::Tensor> bad{num::Tensor({6, 8, 3})};
  CHECK_THROWS_AS(
      decoder::assemble_sequence<float>(m, decoder::encode_instruction(m, 1), bad, {}),
      num::ShapeError);
  CHECK_THROWS_AS(decoder::patchify(num::Tensor({5, 4, 3}), 2), num::ShapeError);
}

TEST_CASE("patchify and depatchify are inverse") {
  const auto img = images(small_config(), 1, 11)[0];
  const auto p = decoder::patchify(img, 2);
  CHECK(p.shape() == num::Shape{16, 12});
  CHECK(p[0 * 12 + 3] == img[1 * 3 + 0]);  // (py 0, px 1, c 0)
  CHECK(decoder::depatchify(p, 8, 8, 3, 2) == img);
}

TEST_CASE("model config validation") {
  ModelConfig c;
  c.heads = 3;
  CHECK_THROWS(c.validate());
  c = ModelConfig{};
  c.patch = 3;
  CHECK_THROWS(c.validate());
}

TEST_CASE("checkpoint round trip") {
  auto c = small_config();
  c.timestep_conditioning = true;
  c.rope.use_image_index_embedding = true;
  Model model(c, 21);
  randomise(model, 22);
  std::stringstream buf;
  decoder::save_checkpoint(buf, model);
  const std::string bytes = buf.str();
  std::istringstream in(bytes);
  const Model loaded = decoder::load_checkpoint(in);
  REQUIRE(loaded.params().size() == model.params().size());
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    CHECK(loaded.params()[i].name == model.params()[i].name);
    CHECK(loaded.params()[i].value == model.params()[i].value);
  }
  CHECK(loaded.config().timestep_conditioning);
  CHECK(loaded.config().rope.use_image_index_embedding);

  std::istringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(decoder::load_checkpoint(truncated), decoder::CheckpointError);
  std::string corrupt = bytes;
  corrupt[0] = 'X';
  std::istringstream bad_magic(corrupt);
  CHECK_THROWS_AS(decoder::load_checkpoint(bad_magic), decoder::CheckpointError);
}
