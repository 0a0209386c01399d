#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace omnilab::pairminer {

/// 8-bit RGB image, interleaved, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 0);

  std::uint8_t* at(int x, int y) { return pixels.data() + (std::size_t(y) * width + x) * 3; }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (std::size_t(y) * width + x) * 3;
  }
  std::size_t pixel_count() const noexcept { return std::size_t(width) * height; }
  bool same_size(const RgbImage& o) const noexcept {
    return width == o.width && height == o.height;
  }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

class ImageFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary PPM (P6), maxval 255, '#' comments allowed in the header.
RgbImage read_ppm(std::istream& in);
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(std::ostream& out, const RgbImage& img);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

/// Frames of a directory: every *.ppm whose stem is a decimal number,
/// ordered by that number. Throws if two files share a number or the
/// directory holds no frames.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);
std::vector<RgbImage> load_frames(const std::filesystem::path& dir);

/// Writes frames as 000000.ppm, 000001.ppm, ...
void save_frames(const std::filesystem::path& dir, const std::vector<RgbImage>& frames);

}  // namespace omnilab::pairminer
