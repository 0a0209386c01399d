#include "omnilab/decoder/decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace omnilab::decoder {

using num::BasicTensor;
using num::BasicVar;
using num::Shape;

template <class T>
BasicTensor<T> patchify(const BasicTensor<T>& image, int patch) {
  if (image.rank() != 3 || patch <= 0 || image.dim(0) % patch != 0 ||
      image.dim(1) % patch != 0) {
    throw num::ShapeError("patchify", "image " + num::shape_str(image.shape()) +
                                          " not divisible into " +
                                          std::to_string(patch) + "x" +
                                          std::to_string(patch) + " patches");
  }
  const std::int64_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
  const std::int64_t gh = H / patch, gw = W / patch, pd = patch * patch * C;
  BasicTensor<T> out(Shape{gh * gw, pd});
  for (std::int64_t gy = 0; gy < gh; ++gy) {
    for (std::int64_t gx = 0; gx < gw; ++gx) {
      T* dst = out.ptr() + (gy * gw + gx) * pd;
      for (std::int64_t py = 0; py < patch; ++py) {
        for (std::int64_t px = 0; px < patch; ++px) {
          const T* src = image.ptr() + ((gy * patch + py) * W + gx * patch + px) * C;
          for (std::int64_t c = 0; c < C; ++c) *dst++ = src[c];
        }
      }
    }
  }
  return out;
}

template <class T>
BasicTensor<T> depatchify(const BasicTensor<T>& patches, int height, int width,
                          int channels, int patch) {
  const std::int64_t gh = height / patch, gw = width / patch;
  const std::int64_t pd = std::int64_t(patch) * patch * channels;
  if (patch <= 0 || height % patch != 0 || width % patch != 0 ||
      patches.shape() != Shape{gh * gw, pd}) {
    throw num::ShapeError("depatchify", "patches " + num::shape_str(patches.shape()) +
                                            " do not tile a " + std::to_string(height) +
                                            "x" + std::to_string(width) + " image");
  }
  BasicTensor<T> out(Shape{height, width, channels});
  for (std::int64_t gy = 0; gy < gh; ++gy) {
    for (std::int64_t gx = 0; gx < gw; ++gx) {
      const T* src = patches.ptr() + (gy * gw + gx) * pd;
      for (std::int64_t py = 0; py < patch; ++py) {
        for (std::int64_t px = 0; px < patch; ++px) {
          T* dst = out.ptr() + ((gy * patch + py) * width + gx * patch + px) * channels;
          for (std::int64_t c = 0; c < channels; ++c) dst[c] = *src++;
        }
      }
    }
  }
  return out;
}

template <class T>
BoundModel<T> bind(num::BasicGraph<T>& g, BasicModel<T>& model) {
  auto& P = model.params();
  const auto& L = model.layout();
  auto v = [&](std::size_t i) { return g.param(P[i]); };
  auto opt = [&](const std::optional<std::size_t>& i) -> std::optional<BasicVar<T>> {
    if (!i) return std::nullopt;
    return v(*i);
  };
  auto block = [&](const BlockParams& b) {
    typename BoundModel<T>::Block out{v(b.norm1),  v(b.qkv),    v(b.out_w),  v(b.out_b),
                                      v(b.gate_attn), v(b.norm2), v(b.mlp_w1), v(b.mlp_b1),
                                      v(b.mlp_w2), v(b.mlp_b2), v(b.gate_mlp), opt(b.mod_w),
                                      opt(b.mod_b)};
    return out;
  };
  BoundModel<T> m;
  m.cfg = &model.config();
  m.graph = &g;
  m.instr_task = v(L.instr_task);
  m.instr_index = v(L.instr_index);
  m.patch_w = v(L.patch_w);
  m.patch_b = v(L.patch_b);
  m.output_query = opt(L.output_query);
  m.index_table = opt(L.index_table);
  m.time_w1 = opt(L.time_w1);
  m.time_b1 = opt(L.time_b1);
  m.time_w2 = opt(L.time_w2);
  m.time_b2 = opt(L.time_b2);
  for (const auto& b : L.refiner) m.refiner.push_back(block(b));
  for (const auto& b : L.core) m.core.push_back(block(b));
  m.final_norm = v(L.final_norm);
  m.final_mod_w = opt(L.final_mod_w);
  m.final_mod_b = opt(L.final_mod_b);
  m.head_w = v(L.head_w);
  m.head_b = v(L.head_b);
  return m;
}

template <class T>
BasicVar<T> encode_instruction(const BoundModel<T>& m, int k) {
  auto index = num::embedding(m.instr_index, {std::int64_t(k)});
  return m.instr_task + num::reshape(index, {m.cfg->dim});
}

template <class T>
BasicTokenSequence<T> assemble_sequence(const BoundModel<T>& m, BasicVar<T> condition,
                                        std::span<const BasicTensor<T>> inputs,
                                        const OutputSpec<T>& target) {
  const ModelConfig& cfg = *m.cfg;
  auto& g = *m.graph;
  if (condition.value().rank() != 2 || condition.dim(1) != cfg.dim) {
    throw num::ShapeError("assemble_sequence", "condition must be [length, " +
                                                   std::to_string(cfg.dim) + "], got " +
                                                   num::shape_str(condition.shape()));
  }
  if (inputs.empty()) throw std::invalid_argument("assemble_sequence: no input images");
  const int n = static_cast<int>(inputs.size());
  if (n + 1 > cfg.max_image_index) {
    throw std::invalid_argument("assemble_sequence: " + std::to_string(n) +
                                " inputs plus output exceed max_image_index " +
                                std::to_string(cfg.max_image_index));
  }
  const Shape image_shape{cfg.image_height, cfg.image_width, cfg.channels};
  auto embed_image = [&](const BasicTensor<T>& img, std::size_t i) {
    if (img.shape() != image_shape) {
      throw num::ShapeError("assemble_sequence",
                            "image " + std::to_string(i) + " has shape " +
                                num::shape_str(img.shape()) + ", expected " +
                                num::shape_str(image_shape) + " (patch " +
                                std::to_string(cfg.patch) + ")");
    }
    return num::matmul(g.constant(patchify(img, cfg.patch)), m.patch_w) + m.patch_b;
  };

  BasicTokenSequence<T> seq;
  const std::int64_t gh = cfg.grid_height(), gw = cfg.grid_width();
  seq.layout.push_back(rope::Segment::text(condition.dim(0)));
  std::vector<BasicVar<T>> parts{condition};
  for (int i = 0; i < n; ++i) {
    seq.layout.push_back(rope::Segment::image(i + 1, gh, gw));
    parts.push_back(embed_image(inputs[static_cast<std::size_t>(i)], std::size_t(i)));
  }
  seq.layout.push_back(rope::Segment::image(n + 1, gh, gw, rope::Role::output));
  seq.output_segment = seq.layout.size() - 1;
  if (target.noisy_latent) {
    if (!cfg.timestep_conditioning) {
      throw std::invalid_argument("assemble_sequence: noisy latent given to a direct-mode model");
    }
    parts.push_back(embed_image(*target.noisy_latent, std::size_t(n)));
  } else {
    if (!m.output_query) {
      throw std::invalid_argument("assemble_sequence: flow-mode model needs a noisy latent");
    }
    auto zeros = g.constant(BasicTensor<T>(Shape{gh * gw, cfg.dim}));
    parts.push_back(zeros + *m.output_query);
  }
  rope::validate_layout(seq.layout);
  seq.tokens = num::concat_rows(parts);
  if (m.index_table) {
    seq.tokens = rope::image_index_embedding(seq.tokens, seq.layout, *m.index_table, cfg.rope);
  }
  seq.positions = rope::assign_positions(seq.layout, cfg.rope);
  std::int64_t off = 0;
  for (const auto& s : seq.layout) {
    seq.ranges.push_back({off, off + s.token_count()});
    off += s.token_count();
  }
  return seq;
}

namespace {

template <class T>
struct Modulation {
  std::optional<BasicVar<T>> shift1, scale1, gate1, shift2, scale2, gate2;
};

template <class T>
std::vector<BasicVar<T>> split_chunks(BasicVar<T> m, int chunks, std::int64_t dim) {
  auto rows = num::reshape(m, {chunks, dim});
  std::vector<BasicVar<T>> out;
  for (int i = 0; i < chunks; ++i) {
    out.push_back(num::reshape(num::slice_rows(rows, i, i + 1), {dim}));
  }
  return out;
}

/// silu(c) for the timestep embedding c, shape [1, dim].
template <class T>
std::optional<BasicVar<T>> time_condition(const BoundModel<T>& m, std::optional<T> t) {
  const ModelConfig& cfg = *m.cfg;
  if (cfg.timestep_conditioning != t.has_value()) {
    throw std::invalid_argument(cfg.timestep_conditioning
                                    ? "flow-mode forward requires a time value"
                                    : "direct-mode forward takes no time value");
  }
  if (!t) return std::nullopt;
  const int F = cfg.time_frequencies;
  BasicTensor<T> emb(Shape{1, 2 * F});
  for (int i = 0; i < F; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / F);
    const double arg = 1000.0 * double(*t) * freq;
    emb[i] = T(std::cos(arg));
    emb[F + i] = T(std::sin(arg));
  }
  auto h = num::silu(num::matmul(m.graph->constant(std::move(emb)), *m.time_w1) + *m.time_b1);
  auto c = num::matmul(h, *m.time_w2) + *m.time_b2;
  return num::silu(c);
}

template <class T>
BasicVar<T> modulate(BasicVar<T> h, const std::optional<BasicVar<T>>& shift,
                     const std::optional<BasicVar<T>>& scale) {
  if (!shift) return h;
  return h + h * *scale + *shift;
}

template <class T>
BasicVar<T> attention(const typename BoundModel<T>::Block& b, BasicVar<T> h,
                      const rope::BasicRotaryTables<T>& rt, const ModelConfig& cfg) {
  const std::int64_t tokens = h.dim(0);
  const std::int64_t heads = cfg.heads, hd = cfg.head_dim();
  auto qkv = num::matmul(h, b.qkv);
  qkv = num::permute(num::reshape(qkv, {tokens, 3, heads, hd}), {1, 2, 0, 3});
  auto part = [&](int i) {
    return num::reshape(num::slice_rows(qkv, i, i + 1), {heads, tokens, hd});
  };
  auto q = rope::apply_rotary(num::scale(part(0), T(1.0 / std::sqrt(double(hd)))), rt);
  auto k = rope::apply_rotary(part(1), rt);
  auto v = part(2);
  auto probs = num::softmax(num::matmul(q, k, /*transpose_b=*/true));
  auto o = num::permute(num::matmul(probs, v), {1, 0, 2});
  return num::matmul(num::reshape(o, {tokens, cfg.dim}), b.out_w) + b.out_b;
}

template <class T>
BasicVar<T> block_forward(const typename BoundModel<T>::Block& b, BasicVar<T> x,
                          const rope::BasicRotaryTables<T>& rt,
                          const std::optional<BasicVar<T>>& cond, const ModelConfig& cfg) {
  Modulation<T> mod;
  if (cond) {
    auto chunks = split_chunks(num::matmul(*cond, *b.mod_w) + *b.mod_b, 6, cfg.dim);
    mod = {chunks[0], chunks[1], chunks[2], chunks[3], chunks[4], chunks[5]};
  }
  auto h = modulate(num::rms_norm(x) * b.norm1, mod.shift1, mod.scale1);
  auto gate = mod.gate1 ? b.gate_attn + *mod.gate1 : b.gate_attn;
  x = x + attention<T>(b, h, rt, cfg) * gate;

  h = modulate(num::rms_norm(x) * b.norm2, mod.shift2, mod.scale2);
  auto u = num::matmul(h, b.mlp_w1) + b.mlp_b1;
  u = cfg.activation == Activation::silu ? num::silu(u) : num::gelu(u);
  auto mlp = num::matmul(u, b.mlp_w2) + b.mlp_b2;
  gate = mod.gate2 ? b.gate_mlp + *mod.gate2 : b.gate_mlp;
  return x + mlp * gate;
}

template <class T>
BasicVar<T> run_blocks(const std::vector<typename BoundModel<T>::Block>& blocks,
                       const char* stack, BasicVar<T> x,
                       std::span<const rope::PosId3> positions,
                       const std::optional<BasicVar<T>>& cond, const ModelConfig& cfg) {
  const auto rt = rope::make_rotary_tables<T>(positions, cfg.head_dim(), cfg.rope);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    try {
      x = block_forward<T>(blocks[i], x, rt, cond, cfg);
    } catch (const num::NumericError& e) {
      throw num::NumericError(std::string(stack) + "." + std::to_string(i), e.what());
    }
  }
  return x;
}

template <class T>
BasicTokenSequence<T> refine_impl(const BoundModel<T>& m, const BasicTokenSequence<T>& seq,
                                  const std::optional<BasicVar<T>>& cond) {
  if (seq.output_segment + 1 != seq.layout.size()) {
    throw std::invalid_argument("refine_conditions: output segment must be last");
  }
  const std::int64_t split = seq.output_range().begin;
  auto head = num::slice_rows(seq.tokens, 0, split);
  auto tail = num::slice_rows(seq.tokens, split, seq.token_count());
  head = run_blocks<T>(m.refiner, "refiner", head,
                       std::span(seq.positions).first(static_cast<std::size_t>(split)), cond,
                       *m.cfg);
  BasicTokenSequence<T> out = seq;
  out.tokens = num::concat_rows(std::vector<BasicVar<T>>{head, tail});
  return out;
}

}  // namespace

template <class T>
BasicTokenSequence<T> refine_conditions(const BoundModel<T>& m, const BasicTokenSequence<T>& seq,
                                        std::optional<T> t) {
  return refine_impl(m, seq, time_condition(m, t));
}

template <class T>
BasicVar<T> forward(const BoundModel<T>& m, const BasicTokenSequence<T>& seq,
                    std::optional<T> t) {
  const ModelConfig& cfg = *m.cfg;
  const auto cond = time_condition(m, t);
  auto refined = refine_impl(m, seq, cond);
  auto x = run_blocks<T>(m.core, "core", refined.tokens, seq.positions, cond, cfg);
  const TokenRange out = seq.output_range();
  auto h = num::rms_norm(num::slice_rows(x, out.begin, out.end)) * m.final_norm;
  if (cond) {
    auto fm = split_chunks(num::matmul(*cond, *m.final_mod_w) + *m.final_mod_b, 2, cfg.dim);
    h = modulate(h, std::optional(fm[0]), std::optional(fm[1]));
  }
  try {
    return num::matmul(h, m.head_w) + m.head_b;
  } catch (const num::NumericError& e) {
    throw num::NumericError("head", e.what());
  }
}

#define OMNILAB_INSTANTIATE(T)                                                          \
  template BasicTensor<T> patchify(const BasicTensor<T>&, int);                         \
  template BasicTensor<T> depatchify(const BasicTensor<T>&, int, int, int, int);        \
  template BoundModel<T> bind(num::BasicGraph<T>&, BasicModel<T>&);                     \
  template BasicVar<T> encode_instruction(const BoundModel<T>&, int);                   \
  template BasicTokenSequence<T> assemble_sequence(const BoundModel<T>&, BasicVar<T>,   \
                                                   std::span<const BasicTensor<T>>,     \
                                                   const OutputSpec<T>&);               \
  template BasicTokenSequence<T> refine_conditions(const BoundModel<T>&,                \
                                                   const BasicTokenSequence<T>&,        \
                                                   std::optional<T>);                   \
  template BasicVar<T> forward(const BoundModel<T>&, const BasicTokenSequence<T>&,      \
                               std::optional<T>);

OMNILAB_INSTANTIATE(float)
OMNILAB_INSTANTIATE(double)

#undef OMNILAB_INSTANTIATE

}  // namespace omnilab::decoder
