#include <doctest.h>

#include <cmath>

#include "checks.hpp"
#include "omnilab/numcore/ops.hpp"
#include "omnilab/rope/rope.hpp"

using namespace omnilab;
using rope::PosId3;
using rope::Segment;

namespace {

const rope::Layout kExample{Segment::text(2), Segment::image(1, 2, 2), Segment::image(2, 2, 2)};

std::vector<PosId3> positions(rope::Scheme s) {
  rope::SchemeConfig cfg;
  cfg.scheme = s;
  return rope::assign_positions(kExample, cfg);
}

std::vector<PosId3> image_grid(std::int64_t inst, std::int64_t dh, std::int64_t dw) {
  std::vector<PosId3> out;
  for (std::int64_t h = 0; h < 2; ++h) {
    for (std::int64_t w = 0; w < 2; ++w) out.push_back({inst, h + dh, w + dw});
  }
  return out;
}

std::vector<PosId3> concat(std::initializer_list<std::vector<PosId3>> parts) {
  std::vector<PosId3> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

TEST_CASE("omni_rope positions restart (h, w) at every image") {
  CHECK(positions(rope::Scheme::omni_rope) ==
        concat({{{0, 0, 0}, {1, 1, 1}}, image_grid(2, 0, 0), image_grid(3, 0, 0)}));
}

TEST_CASE("lumina_accum positions accumulate diagonally") {
  CHECK(positions(rope::Scheme::lumina_accum) ==
        concat({{{0, 0, 0}, {0, 1, 1}}, image_grid(0, 2, 2), image_grid(0, 4, 4)}));
}

TEST_CASE("qwen_accum positions share one running offset") {
  CHECK(positions(rope::Scheme::qwen_accum) ==
        concat({{{0, 0, 0}, {1, 1, 1}}, image_grid(2, 2, 2), image_grid(4, 4, 4)}));
}

TEST_CASE("text-only layouts reduce to 1D positions") {
  for (auto s : {rope::Scheme::omni_rope, rope::Scheme::lumina_accum, rope::Scheme::qwen_accum}) {
    rope::SchemeConfig cfg;
    cfg.scheme = s;
    const auto p = rope::assign_positions(rope::Layout{Segment::text(5)}, cfg);
    for (std::int64_t t = 0; t < 5; ++t) {
      CHECK(p[std::size_t(t)].row == t);
      CHECK(p[std::size_t(t)].col == t);
    }
  }
}

TEST_CASE("assign_positions is deterministic and validates layouts") {
  rope::SchemeConfig cfg;
  CHECK(rope::assign_positions(kExample, cfg) == rope::assign_positions(kExample, cfg));
  CHECK_THROWS_AS(rope::assign_positions(rope::Layout{}, cfg), rope::LayoutError);
  CHECK_THROWS_AS(rope::assign_positions(rope::Layout{Segment::text(0)}, cfg), rope::LayoutError);
  CHECK_THROWS_AS(
      rope::assign_positions(rope::Layout{Segment::image(1, 2, 2), Segment::image(1, 2, 2)}, cfg),
      rope::LayoutError);
  CHECK_THROWS_AS(rope::assign_positions(
                      rope::Layout{Segment::image(1, 2, 2, rope::Role::output),
                                   Segment::image(2, 2, 2, rope::Role::output)},
                      cfg),
                  rope::LayoutError);
}

TEST_CASE("scheme names round-trip") {
  for (auto s : {rope::Scheme::omni_rope, rope::Scheme::lumina_accum, rope::Scheme::qwen_accum}) {
    CHECK(rope::parse_scheme(rope::scheme_name(s)) == s);
  }
  CHECK_FALSE(rope::parse_scheme("bogus").has_value());
  CHECK(rope::valid_scheme_names().find("qwen_accum") != std::string::npos);
}

TEST_CASE("default channel split") {
  rope::SchemeConfig cfg;
  const auto c = rope::channel_split(32, cfg);
  CHECK(c.instance == 8);
  CHECK(c.row == 12);
  CHECK(c.col == 12);
  CHECK_THROWS(rope::channel_split(4, cfg));
  CHECK_THROWS(rope::channel_split(7, cfg));
}

TEST_CASE("rotation angles follow theta^(-2j/d) per axis") {
  rope::SchemeConfig cfg;
  const int hd = 16;  // instance 4, row 6, col 6
  const PosId3 p{3, 5, 7};
  const auto a = rope::rotation_angles(p, hd, cfg);
  REQUIRE(a.size() == 8);
  CHECK(a[0] == doctest::Approx(3.0));
  CHECK(a[1] == doctest::Approx(3.0 * std::pow(10000.0, -2.0 / 4)));
  CHECK(a[2] == doctest::Approx(5.0));
  CHECK(a[3] == doctest::Approx(5.0 * std::pow(10000.0, -2.0 / 6)));
  CHECK(a[4] == doctest::Approx(5.0 * std::pow(10000.0, -4.0 / 6)));
  CHECK(a[5] == doctest::Approx(7.0));
  CHECK(a[7] == doctest::Approx(7.0 * std::pow(10000.0, -4.0 / 6)));
}

TEST_CASE("apply_rotary rejects dimension mismatches") {
  rope::SchemeConfig cfg;
  std::vector<float> v(10);
  const PosId3 p[] = {{0, 0, 0}};
  CHECK_THROWS(rope::apply_rotary(v, p, 16, cfg));
}

TEST_CASE("rotary property suite over 120 cases") {
  const auto r = checks::rope_property_suite(120, 31);
  CHECK(r.cases >= 100);
  CHECK(r.identity_failures == 0);
  CHECK(r.max_norm_error < 1e-5);
  CHECK(r.max_translation_error < 1e-4);
  CHECK(r.spatial_mismatches == 0);
  CHECK(r.operator_mismatches == 0);
}

TEST_CASE("baselines break the cross-image spatial correspondence") {
  rope::SchemeConfig cfg;
  cfg.scheme = rope::Scheme::qwen_accum;
  const auto p = rope::assign_positions(kExample, cfg);
  CHECK(p[2].row != p[6].row);
}

TEST_CASE("image index embedding") {
  rope::SchemeConfig cfg;
  num::Tensor tokens({10, 3}, 1.0f);
  num::Tensor table({3, 3});
  for (std::int64_t i = 0; i < table.size(); ++i) table[i] = float(i + 1);

  SUBCASE("disabled flag is a no-op") {
    CHECK(rope::image_index_embedding(tokens, kExample, table, cfg) == tokens);
  }
  cfg.use_image_index_embedding = true;
  SUBCASE("zero table is a no-op") {
    CHECK(rope::image_index_embedding(tokens, kExample, num::Tensor({3, 3}), cfg) == tokens);
  }
  SUBCASE("difference between images is the table row difference") {
    const auto out = rope::image_index_embedding(tokens, kExample, table, cfg);
    for (int c = 0; c < 3; ++c) {
      CHECK(out[0 * 3 + c] == 1.0f);  // text untouched
      CHECK(out[2 * 3 + c] - out[6 * 3 + c] == table[1 * 3 + c] - table[2 * 3 + c]);
    }
  }
  SUBCASE("index beyond the table is an error") {
    CHECK_THROWS_AS(rope::image_index_embedding(tokens, kExample, num::Tensor({2, 3}), cfg),
                    std::out_of_range);
  }
}
