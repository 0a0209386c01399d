#include "omnilab/pairminer/image.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

namespace omnilab::pairminer {

RgbImage::RgbImage(int w, int h, std::uint8_t fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw std::invalid_argument("image dimensions must be positive");
  pixels.assign(std::size_t(w) * h * 3, fill);
}

namespace {

void skip_space_and_comments(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (c != EOF && std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

int read_header_int(std::istream& in, const char* what) {
  skip_space_and_comments(in);
  long long v = 0;
  if (!(in >> v) || v <= 0 || v > (1 << 24)) {
    throw ImageFormatError(std::string("ppm: bad ") + what);
  }
  return static_cast<int>(v);
}

}  // namespace

RgbImage read_ppm(std::istream& in) {
  char magic[2] = {};
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '6') {
    throw ImageFormatError("ppm: expected P6 magic");
  }
  const int w = read_header_int(in, "width");
  const int h = read_header_int(in, "height");
  const int maxval = read_header_int(in, "maxval");
  if (maxval != 255) throw ImageFormatError("ppm: only maxval 255 is supported");
  if (!std::isspace(in.get())) throw ImageFormatError("ppm: missing header terminator");
  RgbImage img(w, h);
  if (!in.read(reinterpret_cast<char*>(img.pixels.data()),
               static_cast<std::streamsize>(img.pixels.size()))) {
    throw ImageFormatError("ppm: truncated pixel data");
  }
  return img;
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_ppm(in);
  } catch (const ImageFormatError& e) {
    throw ImageFormatError(path.string() + ": " + e.what());
  }
}

void write_ppm(std::ostream& out, const RgbImage& img) {
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_ppm(out, img);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("not a directory: " + dir.string());
  }
  std::map<unsigned long long, std::filesystem::path> numbered;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (!entry.is_regular_file() || p.extension() != ".ppm") continue;
    const std::string stem = p.stem().string();
    if (stem.empty() || stem.size() > 18 ||
        !std::all_of(stem.begin(), stem.end(), [](unsigned char c) { return std::isdigit(c); })) {
      continue;
    }
    const auto n = std::stoull(stem);
    if (!numbered.emplace(n, p).second) {
      throw std::runtime_error("duplicate frame number " + std::to_string(n) + " in " +
                               dir.string());
    }
  }
  if (numbered.empty()) throw std::runtime_error("no numbered .ppm frames in " + dir.string());
  std::vector<std::filesystem::path> out;
  for (auto& [n, p] : numbered) out.push_back(p);
  return out;
}

std::vector<RgbImage> load_frames(const std::filesystem::path& dir) {
  std::vector<RgbImage> frames;
  for (const auto& p : list_frames(dir)) frames.push_back(read_ppm(p));
  return frames;
}

void save_frames(const std::filesystem::path& dir, const std::vector<RgbImage>& frames) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.ppm", i);
    write_ppm(dir / name, frames[i]);
  }
}

}  // namespace omnilab::pairminer
