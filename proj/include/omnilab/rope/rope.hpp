#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "omnilab/numcore/ops.hpp"

namespace omnilab::rope {

/// Positional encoding scheme.
///  - omni_rope:    image k tokens get (d_k, h, w); d_k is a per-image
///                  instance id, spatial coordinates restart at (0, 0).
///  - lumina_accum: (0, h + acc_h, w + acc_w) with diagonal accumulation.
///  - qwen_accum:   (d, h + d, w + d) with d advanced by each segment's span.
enum class Scheme { omni_rope, lumina_accum, qwen_accum };

std::string_view scheme_name(Scheme s) noexcept;
std::optional<Scheme> parse_scheme(std::string_view name) noexcept;
/// "omni_rope, lumina_accum, qwen_accum" for diagnostics.
std::string valid_scheme_names();

class LayoutError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PosId3 {
  std::int64_t instance = 0;
  std::int64_t row = 0;
  std::int64_t col = 0;

  friend bool operator==(const PosId3&, const PosId3&) = default;
};

enum class Role { input, output };

struct Segment {
  enum class Kind { text, image };

  Kind kind = Kind::text;
  std::int64_t length = 0;  // text only
  int index = 0;            // image only; 1-based image index k
  std::int64_t height = 0;  // image grid, in tokens
  std::int64_t width = 0;
  Role role = Role::input;

  static Segment text(std::int64_t length) {
    Segment s;
    s.length = length;
    return s;
  }
  static Segment image(int index, std::int64_t height, std::int64_t width,
                       Role role = Role::input) {
    Segment s;
    s.kind = Kind::image;
    s.index = index;
    s.height = height;
    s.width = width;
    s.role = role;
    return s;
  }

  bool is_image() const noexcept { return kind == Kind::image; }
  std::int64_t token_count() const noexcept {
    return is_image() ? height * width : length;
  }
};

using Layout = std::vector<Segment>;

/// Throws LayoutError if the layout is empty, has a non-positive extent,
/// repeats an image index or has more than one output segment.
void validate_layout(std::span<const Segment> layout);
std::int64_t token_count(std::span<const Segment> layout);

struct SchemeConfig {
  Scheme scheme = Scheme::omni_rope;
  bool use_image_index_embedding = false;
  /// Fractions of the head dimension given to the instance/row/col axes.
  std::array<double, 3> axis_split{0.25, 0.375, 0.375};
  double theta = 10000.0;
};

/// Rotary channels per axis; each is even and they sum to the head dim.
struct AxisChannels {
  int instance = 0;
  int row = 0;
  int col = 0;
  int total() const noexcept { return instance + row + col; }
};

/// Instance and row counts are the split fractions times `head_dim`,
/// rounded to the nearest even number; col takes the remainder. Throws
/// std::invalid_argument if the result is not a valid even split.
AxisChannels channel_split(int head_dim, const SchemeConfig& cfg);

/// One PosId3 per token, in layout order.
std::vector<PosId3> assign_positions(std::span<const Segment> layout,
                                     const SchemeConfig& cfg);

/// cos/sin of the rotation angle for every (token, channel pair), each
/// [tokens, head_dim / 2]. Pair j of an axis group with d_a channels turns
/// by theta^(-2j/d_a) * component.
template <class T>
struct BasicRotaryTables {
  std::shared_ptr<const num::BasicTensor<T>> cos;
  std::shared_ptr<const num::BasicTensor<T>> sin;
};
using RotaryTables = BasicRotaryTables<float>;

/// Angles (radians) for each pair, computed in double.
std::vector<double> rotation_angles(const PosId3& pos, int head_dim,
                                    const SchemeConfig& cfg);

template <class T>
BasicRotaryTables<T> make_rotary_tables(std::span<const PosId3> positions,
                                        int head_dim, const SchemeConfig& cfg) {
  const auto n = static_cast<std::int64_t>(positions.size());
  const std::int64_t half = head_dim / 2;
  auto c = std::make_shared<num::BasicTensor<T>>(num::Shape{n, half});
  auto s = std::make_shared<num::BasicTensor<T>>(num::Shape{n, half});
  for (std::int64_t t = 0; t < n; ++t) {
    const auto angles =
        rotation_angles(positions[static_cast<std::size_t>(t)], head_dim, cfg);
    for (std::int64_t j = 0; j < half; ++j) {
      (*c)[t * half + j] = T(std::cos(angles[static_cast<std::size_t>(j)]));
      (*s)[t * half + j] = T(std::sin(angles[static_cast<std::size_t>(j)]));
    }
  }
  return {std::move(c), std::move(s)};
}

/// Rotates `vectors` (tokens x head_dim, row-major) in place.
void apply_rotary(std::span<float> vectors, std::span<const PosId3> positions,
                  int head_dim, const SchemeConfig& cfg);

/// Differentiable rotary on [..., tokens, head_dim].
template <class T>
num::BasicVar<T> apply_rotary(num::BasicVar<T> x,
                              const BasicRotaryTables<T>& tables) {
  return num::rotate_pairs(x, tables.cos, tables.sin);
}

/// Adds table[k] to every token of image k when the config enables the
/// index embedding; otherwise returns `tokens` as is. `tokens` is
/// [n_tokens, dim] laid out as `layout`; `table` is [rows, dim]. Text
/// tokens are untouched. Throws std::out_of_range when an image index has
/// no table row.
template <class T>
num::BasicVar<T> image_index_embedding(num::BasicVar<T> tokens,
                                       std::span<const Segment> layout,
                                       num::BasicVar<T> table,
                                       const SchemeConfig& cfg);

num::Tensor image_index_embedding(const num::Tensor& tokens,
                                  std::span<const Segment> layout,
                                  const num::Tensor& table,
                                  const SchemeConfig& cfg);

}  // namespace omnilab::rope
