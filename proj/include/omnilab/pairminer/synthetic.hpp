#pragma once

#include <cstdint>
#include <vector>

#include "omnilab/numcore/rng.hpp"
#include "omnilab/pairminer/image.hpp"

// Seeded synthetic videos and image pairs with known ground truth.
namespace omnilab::pairminer::synth {

/// Mosaic of square cells with random colors.
RgbImage mosaic(int width, int height, int cell, num::SeededStream& rng);

/// Copy of `img` moved by (dx, dy) with wrap-around.
RgbImage circular_shift(const RgbImage& img, int dx, int dy);

/// Adds uniform integer noise in [-amplitude, amplitude], clamped to 0..255.
RgbImage add_noise(const RgbImage& img, int amplitude, num::SeededStream& rng);

struct Video {
  std::vector<RgbImage> frames;
  std::vector<std::size_t> cuts;  // true scene starts, excluding 0
};

/// Scenes of `min_len`..`max_len` frames, each a distinct mosaic with
/// light per-frame noise; consecutive scenes are joined by hard cuts.
Video hard_cut_video(int scenes, int min_len, int max_len, int width, int height,
                     num::SeededStream& rng);

/// Grey ramp from 0 to 255 over `frames` frames (no cuts).
Video fade_video(int frames, int width, int height);

/// One fine-grained mosaic, every frame translated by a fresh random
/// offset in [-amplitude, amplitude]^2 around the base (no cuts).
Video jitter_video(int frames, int amplitude, int width, int height, num::SeededStream& rng);

struct LabeledPair {
  RgbImage a;
  RgbImage b;
  bool consistent = false;  // ground truth
};

/// Two windows of a wider mosaic, `shift` pixels apart horizontally.
LabeledPair pan_pair(int width, int height, int shift, int cell, num::SeededStream& rng);

/// `img` with `blocks` whole grid blocks repainted in random solid colors.
LabeledPair local_edit_pair(int width, int height, int grid, int blocks, int cell,
                            num::SeededStream& rng);

/// Alternating pans (shift of one to three blocks, inconsistent) and local
/// edits (at most 10% of blocks, consistent).
std::vector<LabeledPair> viewpoint_corpus(int cases, int width, int height, int grid,
                                          num::SeededStream& rng);

}  // namespace omnilab::pairminer::synth
