#include "omnilab/decoder/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace omnilab::decoder {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr std::array<char, 8> kMagic{'O', 'M', 'N', 'I', 'L', 'A', 'B', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class V>
void put(std::ostream& out, V v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class V>
V get(std::istream& in, const char* what) {
  V v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  return v;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Model& model) {
  nlohmann::json header;
  to_json(header["model"], model.config());
  std::vector<std::string> names;
  for (std::size_t i = 0; i < model.params().size(); ++i) names.push_back(model.params()[i].name);
  header["params"] = names;
  const std::string text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (std::size_t i = 0; i < model.params().size(); ++i) {
    const auto& v = model.params()[i].value;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v.rank()));
    for (auto d : v.shape()) put<std::int64_t>(out, d);
    out.write(reinterpret_cast<const char*>(v.ptr()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
  }
  if (!out) throw CheckpointError("checkpoint write failed");
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  save_checkpoint(out, model);
}

Model load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto n = get<std::uint64_t>(in, "header length");
  if (n > (1u << 24)) throw CheckpointError("checkpoint header too large");
  std::string text(n, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(n))) {
    throw CheckpointError("checkpoint truncated in header");
  }
  nlohmann::json header;
  ModelConfig cfg;
  std::vector<std::string> names;
  try {
    header = nlohmann::json::parse(text);
    cfg = parse_model_config(header.at("model"), "model");
    names = header.at("params").get<std::vector<std::string>>();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  Model model(cfg, 0);
  if (names.size() != model.params().size()) {
    throw CheckpointError("checkpoint lists " + std::to_string(names.size()) +
                          " parameters, model has " + std::to_string(model.params().size()));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto& p = model.params()[i];
    if (p.name != names[i]) {
      throw CheckpointError("parameter " + std::to_string(i) + " is '" + names[i] +
                            "', expected '" + p.name + "'");
    }
    const auto rank = get<std::uint32_t>(in, "rank");
    num::Shape shape;
    for (std::uint32_t r = 0; r < rank && r < 16; ++r) shape.push_back(get<std::int64_t>(in, "dim"));
    if (shape != p.value.shape()) {
      throw CheckpointError("parameter '" + p.name + "' has shape " + num::shape_str(shape) +
                            ", expected " + num::shape_str(p.value.shape()));
    }
    if (!in.read(reinterpret_cast<char*>(p.value.ptr()),
                 static_cast<std::streamsize>(p.value.size() * sizeof(float)))) {
      throw CheckpointError("checkpoint truncated in parameter '" + p.name + "'");
    }
  }
  return model;
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace omnilab::decoder
