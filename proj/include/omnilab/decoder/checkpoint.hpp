#pragma once

#include <filesystem>
#include <istream>
#include <ostream>

#include "omnilab/decoder/model.hpp"

namespace omnilab::decoder {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary layout, little-endian:
///   "OMNILAB\0" | u32 version (1) | u64 n | n bytes of JSON header
///   then per parameter, in the header's order:
///   u32 rank | rank x i64 dims | product(dims) x float32
/// The header holds {"model": ModelConfig, "params": [names]}.
void save_checkpoint(std::ostream& out, const Model& model);
void save_checkpoint(const std::filesystem::path& path, const Model& model);

/// Rebuilds the model from the stored config and overwrites every
/// parameter; throws CheckpointError on any mismatch or truncation.
Model load_checkpoint(std::istream& in);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace omnilab::decoder
