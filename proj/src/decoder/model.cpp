#include "omnilab/decoder/model.hpp"

#include <cmath>

#include "omnilab/config.hpp"

namespace omnilab::decoder {

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("model config: " + what);
  };
  require(dim > 0 && heads > 0 && layers > 0, "dim, heads and layers must be positive");
  require(dim % heads == 0, "dim must be divisible by heads");
  require(refiner_layers == 2, "the condition refiner has exactly 2 layers");
  require(mlp_ratio > 0, "mlp_ratio must be positive");
  require(patch > 0 && channels > 0, "patch and channels must be positive");
  require(image_height > 0 && image_width > 0, "image size must be positive");
  require(image_height % patch == 0 && image_width % patch == 0,
          "patch size must divide image height and width");
  require(max_image_index >= 1, "max_image_index must be >= 1");
  require(condition_length >= 1, "condition_length must be >= 1");
  require(time_frequencies > 0, "time_frequencies must be positive");
  rope::channel_split(head_dim(), rope);
}

void to_json(nlohmann::json& j, const rope::SchemeConfig& c) {
  j = nlohmann::json{{"scheme", std::string(rope::scheme_name(c.scheme))},
                     {"use_image_index_embedding", c.use_image_index_embedding},
                     {"axis_split", c.axis_split},
                     {"theta", c.theta}};
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  nlohmann::json rope_json;
  to_json(rope_json, c.rope);
  j = nlohmann::json{{"dim", c.dim},
                     {"heads", c.heads},
                     {"layers", c.layers},
                     {"refiner_layers", c.refiner_layers},
                     {"mlp_ratio", c.mlp_ratio},
                     {"patch", c.patch},
                     {"channels", c.channels},
                     {"image_height", c.image_height},
                     {"image_width", c.image_width},
                     {"max_image_index", c.max_image_index},
                     {"condition_length", c.condition_length},
                     {"timestep_conditioning", c.timestep_conditioning},
                     {"time_frequencies", c.time_frequencies},
                     {"activation", c.activation == Activation::silu ? "silu" : "gelu"},
                     {"rope", rope_json}};
}

rope::SchemeConfig parse_scheme_config(const nlohmann::json& j, std::string_view path) {
  reject_unknown_keys(j, {"scheme", "use_image_index_embedding", "axis_split", "theta"},
                      path);
  rope::SchemeConfig c;
  std::string scheme(rope::scheme_name(c.scheme));
  read_field(j, "scheme", scheme, path);
  auto parsed = rope::parse_scheme(scheme);
  if (!parsed) {
    throw ConfigError(join_path(path, "scheme"), "unknown scheme '" + scheme +
                                                     "'; valid: " +
                                                     rope::valid_scheme_names());
  }
  c.scheme = *parsed;
  read_field(j, "use_image_index_embedding", c.use_image_index_embedding, path);
  read_field(j, "axis_split", c.axis_split, path);
  read_field(j, "theta", c.theta, path);
  const auto& f = c.axis_split;
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9 || f[0] < 0 || f[1] < 0 || f[2] < 0) {
    throw ConfigError(join_path(path, "axis_split"),
                      "fractions must be non-negative and sum to 1");
  }
  if (!(c.theta > 1.0)) throw ConfigError(join_path(path, "theta"), "must be > 1");
  return c;
}

ModelConfig parse_model_config(const nlohmann::json& j, std::string_view path) {
  reject_unknown_keys(j,
                      {"dim", "heads", "layers", "refiner_layers", "mlp_ratio", "patch",
                       "channels", "image_height", "image_width", "max_image_index",
                       "condition_length", "timestep_conditioning", "time_frequencies",
                       "activation", "rope"},
                      path);
  ModelConfig c;
  read_field(j, "dim", c.dim, path);
  read_field(j, "heads", c.heads, path);
  read_field(j, "layers", c.layers, path);
  read_field(j, "refiner_layers", c.refiner_layers, path);
  read_field(j, "mlp_ratio", c.mlp_ratio, path);
  read_field(j, "patch", c.patch, path);
  read_field(j, "channels", c.channels, path);
  read_field(j, "image_height", c.image_height, path);
  read_field(j, "image_width", c.image_width, path);
  read_field(j, "max_image_index", c.max_image_index, path);
  read_field(j, "condition_length", c.condition_length, path);
  read_field(j, "timestep_conditioning", c.timestep_conditioning, path);
  read_field(j, "time_frequencies", c.time_frequencies, path);
  if (j.contains("activation")) {
    std::string act;
    read_field(j, "activation", act, path);
    if (act == "silu") c.activation = Activation::silu;
    else if (act == "gelu") c.activation = Activation::gelu;
    else throw ConfigError(join_path(path, "activation"), "expected 'silu' or 'gelu'");
  }
  if (j.contains("rope")) c.rope = parse_scheme_config(j["rope"], join_path(path, "rope"));
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(path.empty() ? "model" : path), e.what());
  }
  return c;
}

namespace {

template <class T>
num::BasicTensor<T> normal_tensor(num::Shape shape, double stddev, num::SeededStream& rng) {
  num::BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = T(rng.normal() * stddev);
  return t;
}

}  // namespace

template <class T>
BasicModel<T>::BasicModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  num::SeededStream rng(seed);
  const std::int64_t d = cfg_.dim;
  const std::int64_t hidden = d * cfg_.mlp_ratio;
  const std::int64_t pd = cfg_.patch_dim();
  const std::int64_t table_rows = cfg_.max_image_index + 1;
  const bool flow = cfg_.timestep_conditioning;

  auto add = [&](const std::string& name, num::BasicTensor<T> v) {
    params_.add(name, std::move(v));
    return params_.size() - 1;
  };
  auto weight = [&](const std::string& name, std::int64_t in, std::int64_t out) {
    return add(name, normal_tensor<T>({in, out}, 1.0 / std::sqrt(double(in)), rng));
  };
  auto zeros = [&](const std::string& name, num::Shape s) {
    return add(name, num::BasicTensor<T>(std::move(s), T(0)));
  };
  auto ones = [&](const std::string& name, std::int64_t n) {
    return add(name, num::BasicTensor<T>({n}, T(1)));
  };

  layout_.instr_task = add("instr.task", normal_tensor<T>({cfg_.condition_length, d}, 1.0, rng));
  layout_.instr_index = add("instr.index", normal_tensor<T>({table_rows, d}, 1.0, rng));
  layout_.patch_w = weight("patch_embed.w", pd, d);
  layout_.patch_b = zeros("patch_embed.b", {d});
  if (!flow) {
    layout_.output_query = add("output.query", normal_tensor<T>({d}, 1.0, rng));
  }
  if (cfg_.rope.use_image_index_embedding) {
    layout_.index_table = zeros("image_index.table", {table_rows, d});
  }
  if (flow) {
    const std::int64_t tf = 2 * cfg_.time_frequencies;
    layout_.time_w1 = weight("time.w1", tf, d);
    layout_.time_b1 = zeros("time.b1", {d});
    layout_.time_w2 = weight("time.w2", d, d);
    layout_.time_b2 = zeros("time.b2", {d});
  }
  auto block = [&](const std::string& prefix) {
    BlockParams b{};
    b.norm1 = ones(prefix + ".norm1", d);
    b.qkv = weight(prefix + ".attn.qkv", d, 3 * d);
    b.out_w = weight(prefix + ".attn.out.w", d, d);
    b.out_b = zeros(prefix + ".attn.out.b", {d});
    b.gate_attn = zeros(prefix + ".gate_attn", {d});
    b.norm2 = ones(prefix + ".norm2", d);
    b.mlp_w1 = weight(prefix + ".mlp.w1", d, hidden);
    b.mlp_b1 = zeros(prefix + ".mlp.b1", {hidden});
    b.mlp_w2 = weight(prefix + ".mlp.w2", hidden, d);
    b.mlp_b2 = zeros(prefix + ".mlp.b2", {d});
    b.gate_mlp = zeros(prefix + ".gate_mlp", {d});
    if (flow) {
      b.mod_w = zeros(prefix + ".mod.w", {d, 6 * d});
      b.mod_b = zeros(prefix + ".mod.b", {6 * d});
    }
    return b;
  };
  for (int i = 0; i < cfg_.refiner_layers; ++i) {
    layout_.refiner.push_back(block("refiner." + std::to_string(i)));
  }
  for (int i = 0; i < cfg_.layers; ++i) {
    layout_.core.push_back(block("core." + std::to_string(i)));
  }
  layout_.final_norm = ones("final.norm", d);
  if (flow) {
    layout_.final_mod_w = zeros("final.mod.w", {d, 2 * d});
    layout_.final_mod_b = zeros("final.mod.b", {2 * d});
  }
  layout_.head_w = weight("head.w", d, pd);
  layout_.head_b = zeros("head.b", {pd});
}

template class BasicModel<float>;
template class BasicModel<double>;

}  // namespace omnilab::decoder
