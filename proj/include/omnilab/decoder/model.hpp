#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "omnilab/numcore/graph.hpp"
#include "omnilab/numcore/rng.hpp"
#include "omnilab/rope/rope.hpp"

namespace omnilab::decoder {

enum class Activation { silu, gelu };

/// Architecture of the toy decoder. Serialised verbatim into checkpoints.
struct ModelConfig {
  int dim = 128;
  int heads = 4;
  int layers = 4;
  int refiner_layers = 2;
  int mlp_ratio = 2;
  int patch = 2;
  int channels = 3;
  int image_height = 16;
  int image_width = 16;
  /// Largest image index that may appear in a layout (inputs plus the
  /// output image). Index tables have max_image_index + 1 rows.
  int max_image_index = 5;
  int condition_length = 4;
  /// Flow mode: timestep-conditioned, output tokens carry noisy latents.
  /// Direct mode: no timestep, output tokens are learned placeholders.
  bool timestep_conditioning = false;
  int time_frequencies = 32;
  Activation activation = Activation::silu;
  rope::SchemeConfig rope;

  int head_dim() const { return dim / heads; }
  int grid_height() const { return image_height / patch; }
  int grid_width() const { return image_width / patch; }
  int patch_dim() const { return patch * patch * channels; }
  int tokens_per_image() const { return grid_height() * grid_width(); }

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void to_json(nlohmann::json& j, const rope::SchemeConfig& c);

/// Missing keys keep their defaults; unknown keys and bad values throw
/// ConfigError with the field path prefixed by `path`.
ModelConfig parse_model_config(const nlohmann::json& j, std::string_view path = {});
rope::SchemeConfig parse_scheme_config(const nlohmann::json& j, std::string_view path = {});

/// Indices into the parameter set for one transformer block.
struct BlockParams {
  std::size_t norm1, qkv, out_w, out_b, gate_attn;
  std::size_t norm2, mlp_w1, mlp_b1, mlp_w2, mlp_b2, gate_mlp;
  std::optional<std::size_t> mod_w, mod_b;
};

/// Parameters of the decoder, declared in a fixed order (checkpoint order).
/// The refiner and the core stack use the same block layout; there is a
/// single core stack shared by every token regardless of modality.
template <class T>
class BasicModel {
 public:
  /// Declares every parameter with its initial value drawn from `seed`.
  /// Residual gates, modulation projections and the image-index table
  /// start at zero.
  BasicModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return cfg_; }
  num::BasicParameterSet<T>& params() noexcept { return params_; }
  const num::BasicParameterSet<T>& params() const noexcept { return params_; }

  struct Layout {
    std::size_t instr_task, instr_index, patch_w, patch_b;
    std::optional<std::size_t> output_query;
    std::optional<std::size_t> index_table;
    std::optional<std::size_t> time_w1, time_b1, time_w2, time_b2;
    std::vector<BlockParams> refiner;
    std::vector<BlockParams> core;
    std::size_t final_norm;
    std::optional<std::size_t> final_mod_w, final_mod_b;
    std::size_t head_w, head_b;
  };
  const Layout& layout() const noexcept { return layout_; }

  /// Same architecture, parameters converted to U.
  template <class U>
  BasicModel<U> cast() const {
    BasicModel<U> out(cfg_, 0);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.params()[i].value = params_[i].value.template cast<U>();
    }
    return out;
  }

 private:
  ModelConfig cfg_;
  num::BasicParameterSet<T> params_;
  Layout layout_;
};

using Model = BasicModel<float>;

}  // namespace omnilab::decoder
