#include "omnilab/pairminer/synthetic.hpp"

#include <algorithm>
#include <stdexcept>

namespace omnilab::pairminer::synth {

namespace {

std::uint8_t random_byte(num::SeededStream& rng) {
  return static_cast<std::uint8_t>(rng.uniform_int(0, 255));
}

}  // namespace

RgbImage mosaic(int width, int height, int cell, num::SeededStream& rng) {
  if (cell < 1) throw std::invalid_argument("mosaic: cell must be >= 1");
  RgbImage img(width, height);
  const int cols = (width + cell - 1) / cell;
  const int rows = (height + cell - 1) / cell;
  std::vector<std::uint8_t> colors(std::size_t(cols) * rows * 3);
  for (auto& c : colors) c = random_byte(rng);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto* c = colors.data() + (std::size_t(y / cell) * cols + x / cell) * 3;
      std::copy(c, c + 3, img.at(x, y));
    }
  }
  return img;
}

RgbImage circular_shift(const RgbImage& img, int dx, int dy) {
  RgbImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    const int sy = ((y - dy) % img.height + img.height) % img.height;
    for (int x = 0; x < img.width; ++x) {
      const int sx = ((x - dx) % img.width + img.width) % img.width;
      std::copy(img.at(sx, sy), img.at(sx, sy) + 3, out.at(x, y));
    }
  }
  return out;
}

RgbImage add_noise(const RgbImage& img, int amplitude, num::SeededStream& rng) {
  RgbImage out = img;
  for (auto& v : out.pixels) {
    const auto n = rng.uniform_int(-amplitude, amplitude);
    v = static_cast<std::uint8_t>(std::clamp<std::int64_t>(v + n, 0, 255));
  }
  return out;
}

Video hard_cut_video(int scenes, int min_len, int max_len, int width, int height,
                     num::SeededStream& rng) {
  if (scenes < 1 || min_len < 1 || max_len < min_len) {
    throw std::invalid_argument("hard_cut_video: bad scene counts");
  }
  Video v;
  for (int s = 0; s < scenes; ++s) {
    if (s > 0) v.cuts.push_back(v.frames.size());
    const auto len = rng.uniform_int(min_len, max_len);
    const int cell = static_cast<int>(rng.uniform_int(2, 6));
    const RgbImage base = mosaic(width, height, cell, rng);
    for (std::int64_t f = 0; f < len; ++f) v.frames.push_back(add_noise(base, 3, rng));
  }
  return v;
}

Video fade_video(int frames, int width, int height) {
  if (frames < 2) throw std::invalid_argument("fade_video: need >= 2 frames");
  Video v;
  for (int f = 0; f < frames; ++f) {
    const double level = 255.0 * f / (frames - 1);
    v.frames.emplace_back(width, height, static_cast<std::uint8_t>(level + 0.5));
  }
  return v;
}

Video jitter_video(int frames, int amplitude, int width, int height, num::SeededStream& rng) {
  const RgbImage base = mosaic(width, height, 1, rng);
  Video v;
  for (int f = 0; f < frames; ++f) {
    const auto dx = static_cast<int>(rng.uniform_int(-amplitude, amplitude));
    const auto dy = static_cast<int>(rng.uniform_int(-amplitude, amplitude));
    v.frames.push_back(circular_shift(base, dx, dy));
  }
  return v;
}

LabeledPair pan_pair(int width, int height, int shift, int cell, num::SeededStream& rng) {
  if (shift < 0) throw std::invalid_argument("pan_pair: shift must be >= 0");
  const RgbImage world = mosaic(width + shift, height, cell, rng);
  LabeledPair p{RgbImage(width, height), RgbImage(width, height), shift == 0};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::copy(world.at(x, y), world.at(x, y) + 3, p.a.at(x, y));
      std::copy(world.at(x + shift, y), world.at(x + shift, y) + 3, p.b.at(x, y));
    }
  }
  return p;
}

LabeledPair local_edit_pair(int width, int height, int grid, int blocks, int cell,
                            num::SeededStream& rng) {
  if (blocks < 0 || blocks > grid * grid) {
    throw std::invalid_argument("local_edit_pair: bad block count");
  }
  LabeledPair p;
  p.a = mosaic(width, height, cell, rng);
  p.b = p.a;
  p.consistent = true;
  std::vector<int> order(std::size_t(grid * grid));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  // Partial Fisher-Yates to choose distinct blocks.
  for (int k = 0; k < blocks; ++k) {
    const auto pick = rng.uniform_int(k, grid * grid - 1);
    std::swap(order[std::size_t(k)], order[std::size_t(pick)]);
    const int bx = order[std::size_t(k)] % grid, by = order[std::size_t(k)] / grid;
    const int bw = width / grid, bh = height / grid;
    const int x1 = bx + 1 == grid ? width : (bx + 1) * bw;
    const int y1 = by + 1 == grid ? height : (by + 1) * bh;
    const std::uint8_t color[3] = {random_byte(rng), random_byte(rng), random_byte(rng)};
    for (int y = by * bh; y < y1; ++y) {
      for (int x = bx * bw; x < x1; ++x) std::copy(color, color + 3, p.b.at(x, y));
    }
  }
  return p;
}

std::vector<LabeledPair> viewpoint_corpus(int cases, int width, int height, int grid,
                                          num::SeededStream& rng) {
  std::vector<LabeledPair> out;
  const int block_w = width / grid;
  const int max_edit = grid * grid / 10;
  for (int c = 0; c < cases; ++c) {
    const int cell = std::max(1, block_w / 2);
    if (c % 2 == 0) {
      const auto shift = rng.uniform_int(block_w, 3 * block_w);
      out.push_back(pan_pair(width, height, static_cast<int>(shift), cell, rng));
    } else {
      const auto blocks = rng.uniform_int(0, max_edit);
      out.push_back(local_edit_pair(width, height, grid, static_cast<int>(blocks), cell, rng));
    }
  }
  return out;
}

}  // namespace omnilab::pairminer::synth
