#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "omnilab/decoder/model.hpp"
#include "omnilab/numcore/ops.hpp"

namespace omnilab::decoder {

/// [H, W, C] image -> [(H/p)*(W/p), p*p*C] patch rows. Patches are ordered
/// row-major over the grid; inside a patch the order is (py, px, c).
template <class T>
num::BasicTensor<T> patchify(const num::BasicTensor<T>& image, int patch);

/// Inverse of patchify.
template <class T>
num::BasicTensor<T> depatchify(const num::BasicTensor<T>& patches, int height,
                               int width, int channels, int patch);

/// Graph variables for every parameter of a model, bound once per graph so
/// that all sequences evaluated in that graph share them.
template <class T>
struct BoundModel {
  using Var = num::BasicVar<T>;
  struct Block {
    Var norm1, qkv, out_w, out_b, gate_attn;
    Var norm2, mlp_w1, mlp_b1, mlp_w2, mlp_b2, gate_mlp;
    std::optional<Var> mod_w, mod_b;
  };

  const ModelConfig* cfg = nullptr;
  num::BasicGraph<T>* graph = nullptr;
  Var instr_task, instr_index, patch_w, patch_b;
  std::optional<Var> output_query, index_table;
  std::optional<Var> time_w1, time_b1, time_w2, time_b2;
  std::vector<Block> refiner, core;
  Var final_norm;
  std::optional<Var> final_mod_w, final_mod_b;
  Var head_w, head_b;
};

template <class T>
BoundModel<T> bind(num::BasicGraph<T>& graph, BasicModel<T>& model);

struct TokenRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;
  std::int64_t size() const noexcept { return end - begin; }
};

/// Token embeddings plus their positional and segment bookkeeping.
template <class T>
struct BasicTokenSequence {
  num::BasicVar<T> tokens;  // [count, dim]
  std::vector<rope::PosId3> positions;
  rope::Layout layout;
  std::vector<TokenRange> ranges;  // one per layout segment
  std::size_t output_segment = 0;

  std::int64_t token_count() const { return tokens.dim(0); }
  TokenRange output_range() const { return ranges.at(output_segment); }
};

/// What the output segment holds: learned query placeholders (direct
/// mode) or the embedded noisy latent image x_t (flow mode).
template <class T>
struct OutputSpec {
  std::optional<num::BasicTensor<T>> noisy_latent;  // [H, W, C]
};

/// Stand-in for the VLM hidden states of the instruction "reproduce image
/// k": task_table[j] + index_table[k] for j < condition_length.
template <class T>
num::BasicVar<T> encode_instruction(const BoundModel<T>& m, int k);

/// [condition text][input image 1..n][output image n+1]. Input images are
/// [H, W, C] with pixels in [0, 1]. Positions come from
/// rope::assign_positions under the model's scheme; the optional
/// image-index embedding is added to every image segment.
template <class T>
BasicTokenSequence<T> assemble_sequence(const BoundModel<T>& m,
                                        num::BasicVar<T> condition,
                                        std::span<const num::BasicTensor<T>> inputs,
                                        const OutputSpec<T>& target);

/// Two refiner blocks over the condition and input-image tokens (jointly);
/// output-segment tokens pass through unchanged.
template <class T>
BasicTokenSequence<T> refine_conditions(const BoundModel<T>& m,
                                        const BasicTokenSequence<T>& seq,
                                        std::optional<T> t = std::nullopt);

/// Refiner, core blocks and output head. Returns [output tokens, p*p*C]:
/// pixels in direct mode, velocity in flow mode. `t` must be present iff
/// the model is timestep-conditioned.
template <class T>
num::BasicVar<T> forward(const BoundModel<T>& m, const BasicTokenSequence<T>& seq,
                         std::optional<T> t = std::nullopt);

using TokenSequence = BasicTokenSequence<float>;

}  // namespace omnilab::decoder
