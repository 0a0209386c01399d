#include "omnilab/rope/rope.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace omnilab::rope {

std::string_view scheme_name(Scheme s) noexcept {
  switch (s) {
    case Scheme::omni_rope:
      return "omni_rope";
    case Scheme::lumina_accum:
      return "lumina_accum";
    case Scheme::qwen_accum:
      return "qwen_accum";
  }
  return "unknown";
}

std::optional<Scheme> parse_scheme(std::string_view name) noexcept {
  for (Scheme s : {Scheme::omni_rope, Scheme::lumina_accum, Scheme::qwen_accum}) {
    if (scheme_name(s) == name) return s;
  }
  return std::nullopt;
}

std::string valid_scheme_names() { return "omni_rope, lumina_accum, qwen_accum"; }

void validate_layout(std::span<const Segment> layout) {
  if (layout.empty()) throw LayoutError("layout is empty");
  std::set<int> seen;
  int outputs = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Segment& s = layout[i];
    const std::string where = "segment " + std::to_string(i) + ": ";
    if (s.is_image()) {
      if (s.height < 1 || s.width < 1) {
        throw LayoutError(where + "image grid must be at least 1x1");
      }
      if (s.index < 0) throw LayoutError(where + "negative image index");
      if (!seen.insert(s.index).second) {
        throw LayoutError(where + "duplicate image index " + std::to_string(s.index));
      }
      if (s.role == Role::output && ++outputs > 1) {
        throw LayoutError(where + "more than one output segment");
      }
    } else if (s.length < 1) {
      throw LayoutError(where + "text length must be at least 1");
    }
  }
}

std::int64_t token_count(std::span<const Segment> layout) {
  std::int64_t n = 0;
  for (const auto& s : layout) n += s.token_count();
  return n;
}

AxisChannels channel_split(int head_dim, const SchemeConfig& cfg) {
  const auto& f = cfg.axis_split;
  if (head_dim <= 0 || head_dim % 2 != 0) {
    throw std::invalid_argument("head dimension must be positive and even, got " +
                                std::to_string(head_dim));
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9 || f[0] < 0 || f[1] < 0 || f[2] < 0) {
    throw std::invalid_argument("axis split fractions must be >= 0 and sum to 1");
  }
  auto even = [](double x) { return 2 * static_cast<int>(std::lround(x / 2.0)); };
  AxisChannels c;
  c.instance = even(f[0] * head_dim);
  c.row = even(f[1] * head_dim);
  c.col = head_dim - c.instance - c.row;
  if (c.instance < 2 || c.row < 2 || c.col < 2) {
    throw std::invalid_argument(
        "head dimension " + std::to_string(head_dim) +
        " too small for the axis split (each axis needs >= 2 channels)");
  }
  return c;
}

std::vector<PosId3> assign_positions(std::span<const Segment> layout,
                                     const SchemeConfig& cfg) {
  validate_layout(layout);
  std::vector<PosId3> out;
  out.reserve(static_cast<std::size_t>(token_count(layout)));
  // Running offsets: omni/qwen use `offset` for the instance axis (qwen
  // also adds it to row/col); lumina accumulates row and col separately.
  std::int64_t offset = 0;
  std::int64_t acc_h = 0;
  std::int64_t acc_w = 0;
  for (const Segment& s : layout) {
    if (!s.is_image()) {
      for (std::int64_t t = 0; t < s.length; ++t) {
        switch (cfg.scheme) {
          case Scheme::omni_rope:
          case Scheme::qwen_accum:
            out.push_back({offset + t, offset + t, offset + t});
            break;
          case Scheme::lumina_accum:
            out.push_back({0, acc_h + t, acc_w + t});
            break;
        }
      }
      offset += s.length;
      acc_h += s.length;
      acc_w += s.length;
      continue;
    }
    for (std::int64_t h = 0; h < s.height; ++h) {
      for (std::int64_t w = 0; w < s.width; ++w) {
        switch (cfg.scheme) {
          case Scheme::omni_rope:
            out.push_back({offset, h, w});
            break;
          case Scheme::qwen_accum:
            out.push_back({offset, h + offset, w + offset});
            break;
          case Scheme::lumina_accum:
            out.push_back({0, h + acc_h, w + acc_w});
            break;
        }
      }
    }
    switch (cfg.scheme) {
      case Scheme::omni_rope:
        offset += 1;
        break;
      case Scheme::qwen_accum:
        offset += std::max(s.height, s.width);
        break;
      case Scheme::lumina_accum:
        break;
    }
    acc_h += s.height;
    acc_w += s.width;
  }
  return out;
}

std::vector<double> rotation_angles(const PosId3& pos, int head_dim,
                                    const SchemeConfig& cfg) {
  const AxisChannels ch = channel_split(head_dim, cfg);
  std::vector<double> angles;
  angles.reserve(static_cast<std::size_t>(head_dim / 2));
  auto group = [&](int channels, std::int64_t component) {
    for (int j = 0; j < channels / 2; ++j) {
      const double freq = std::pow(cfg.theta, -2.0 * j / channels);
      angles.push_back(freq * static_cast<double>(component));
    }
  };
  group(ch.instance, pos.instance);
  group(ch.row, pos.row);
  group(ch.col, pos.col);
  return angles;
}

void apply_rotary(std::span<float> vectors, std::span<const PosId3> positions,
                  int head_dim, const SchemeConfig& cfg) {
  if (head_dim <= 0 ||
      vectors.size() != positions.size() * static_cast<std::size_t>(head_dim)) {
    throw std::invalid_argument(
        "apply_rotary: " + std::to_string(vectors.size()) +
        " values do not match " + std::to_string(positions.size()) +
        " tokens of head dim " + std::to_string(head_dim));
  }
  const auto tables = make_rotary_tables<float>(positions, head_dim, cfg);
  const std::size_t half = static_cast<std::size_t>(head_dim / 2);
  for (std::size_t t = 0; t < positions.size(); ++t) {
    float* v = vectors.data() + t * static_cast<std::size_t>(head_dim);
    const float* c = tables.cos->ptr() + t * half;
    const float* s = tables.sin->ptr() + t * half;
    for (std::size_t i = 0; i < half; ++i) {
      const float x0 = v[2 * i], x1 = v[2 * i + 1];
      v[2 * i] = x0 * c[i] - x1 * s[i];
      v[2 * i + 1] = x0 * s[i] + x1 * c[i];
    }
  }
}

namespace {

/// Table row per token, or -1 for text tokens.
std::vector<std::int64_t> token_rows(std::span<const Segment> layout,
                                     std::int64_t table_rows) {
  std::vector<std::int64_t> rows;
  for (const Segment& s : layout) {
    if (s.is_image() && (s.index < 0 || s.index >= table_rows)) {
      throw std::out_of_range("image index " + std::to_string(s.index) +
                              " outside index-embedding table of " +
                              std::to_string(table_rows) + " rows");
    }
    rows.insert(rows.end(), static_cast<std::size_t>(s.token_count()),
                s.is_image() ? s.index : -1);
  }
  return rows;
}

void check_tokens(const num::Shape& tokens, const num::Shape& table,
                  std::span<const Segment> layout) {
  if (tokens.size() != 2 || table.size() != 2 || tokens[1] != table[1] ||
      tokens[0] != token_count(layout)) {
    throw num::ShapeError("image_index_embedding",
                          "tokens " + num::shape_str(tokens) + ", table " +
                              num::shape_str(table) + ", layout of " +
                              std::to_string(token_count(layout)) + " tokens");
  }
}

}  // namespace

template <class T>
num::BasicVar<T> image_index_embedding(num::BasicVar<T> tokens,
                                       std::span<const Segment> layout,
                                       num::BasicVar<T> table,
                                       const SchemeConfig& cfg) {
  if (!cfg.use_image_index_embedding) return tokens;
  check_tokens(tokens.shape(), table.shape(), layout);
  auto rows = token_rows(layout, table.dim(0));
  const std::int64_t dim = tokens.dim(1);
  num::BasicTensor<T> out = tokens.value();
  const T* tab = table.value().ptr();
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t] < 0) continue;
    T* dst = out.ptr() + static_cast<std::int64_t>(t) * dim;
    const T* src = tab + rows[t] * dim;
    for (std::int64_t j = 0; j < dim; ++j) dst[j] += src[j];
  }
  auto& g = *tokens.graph;
  const int ix = tokens.id, it = table.id;
  return g.record(
      "image_index_embedding", {ix, it}, std::move(out),
      [ix, it, dim, rows = std::move(rows)](num::BasicGraph<T>& gr, int self) {
        const T* dy = gr.grad_of(self).ptr();
        if (gr.requires_grad(ix)) {
          auto d = gr.accum_grad(ix).data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
        }
        if (gr.requires_grad(it)) {
          T* dt = gr.accum_grad(it).ptr();
          for (std::size_t t = 0; t < rows.size(); ++t) {
            if (rows[t] < 0) continue;
            const T* src = dy + static_cast<std::int64_t>(t) * dim;
            T* dst = dt + rows[t] * dim;
            for (std::int64_t j = 0; j < dim; ++j) dst[j] += src[j];
          }
        }
      });
}

template num::BasicVar<float> image_index_embedding(num::BasicVar<float>,
                                                    std::span<const Segment>,
                                                    num::BasicVar<float>,
                                                    const SchemeConfig&);
template num::BasicVar<double> image_index_embedding(num::BasicVar<double>,
                                                     std::span<const Segment>,
                                                     num::BasicVar<double>,
                                                     const SchemeConfig&);

num::Tensor image_index_embedding(const num::Tensor& tokens,
                                  std::span<const Segment> layout,
                                  const num::Tensor& table,
                                  const SchemeConfig& cfg) {
  if (!cfg.use_image_index_embedding) return tokens;
  check_tokens(tokens.shape(), table.shape(), layout);
  const auto rows = token_rows(layout, table.dim(0));
  const std::int64_t dim = tokens.dim(1);
  num::Tensor out = tokens;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t] < 0) continue;
    for (std::int64_t j = 0; j < dim; ++j) {
      out[static_cast<std::int64_t>(t) * dim + j] += table[rows[t] * dim + j];
    }
  }
  return out;
}

}  // namespace omnilab::rope
