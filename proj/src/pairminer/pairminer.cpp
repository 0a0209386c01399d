#include "omnilab/pairminer/pairminer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "omnilab/config.hpp"

namespace omnilab::pairminer {

void MinerConfig::validate() const {
  auto fail = [](const char* field, const char* what) { throw ConfigError(field, what); };
  if (!(scene.t_rgb >= 0.0)) fail("scene.t_rgb", "must be >= 0");
  if (scene.window < 1) fail("scene.window", "must be >= 1");
  if (!(scene.alpha >= 0.0)) fail("scene.alpha", "must be >= 0");
  if (scene.min_scene_length < 1) fail("scene.min_scene_length", "must be >= 1");
  if (block.grid < 1) fail("block.grid", "must be >= 1");
  if (block.bins < 1 || block.bins > 256) fail("block.bins", "must lie in [1, 256]");
  if (!(block.tau_block >= 0.0 && block.tau_block <= 1.0)) {
    fail("block.tau_block", "must lie in [0, 1]");
  }
  if (!(block.tau_frame >= 0.0 && block.tau_frame <= 1.0)) {
    fail("block.tau_frame", "must lie in [0, 1]");
  }
  if (!(band.lo <= band.hi)) fail("band", "need lo <= hi");
  if (band.max_gap < 0) fail("band.max_gap", "must be >= 0");
}

nlohmann::json to_json(const MinerConfig& c) {
  return {{"scene",
           {{"t_rgb", c.scene.t_rgb},
            {"window", c.scene.window},
            {"alpha", c.scene.alpha},
            {"min_scene_length", c.scene.min_scene_length}}},
          {"block",
           {{"grid", c.block.grid},
            {"bins", c.block.bins},
            {"tau_block", c.block.tau_block},
            {"tau_frame", c.block.tau_frame}}},
          {"band", {{"lo", c.band.lo}, {"hi", c.band.hi}, {"max_gap", c.band.max_gap}}}};
}

MinerConfig parse_miner_config(const nlohmann::json& j) {
  reject_unknown_keys(j, {"scene", "block", "band"}, "");
  MinerConfig c;
  if (auto it = j.find("scene"); it != j.end()) {
    reject_unknown_keys(*it, {"t_rgb", "window", "alpha", "min_scene_length"}, "scene");
    read_field(*it, "t_rgb", c.scene.t_rgb, "scene");
    read_field(*it, "window", c.scene.window, "scene");
    read_field(*it, "alpha", c.scene.alpha, "scene");
    read_field(*it, "min_scene_length", c.scene.min_scene_length, "scene");
  }
  if (auto it = j.find("block"); it != j.end()) {
    reject_unknown_keys(*it, {"grid", "bins", "tau_block", "tau_frame"}, "block");
    read_field(*it, "grid", c.block.grid, "block");
    read_field(*it, "bins", c.block.bins, "block");
    read_field(*it, "tau_block", c.block.tau_block, "block");
    read_field(*it, "tau_frame", c.block.tau_frame, "block");
  }
  if (auto it = j.find("band"); it != j.end()) {
    reject_unknown_keys(*it, {"lo", "hi", "max_gap"}, "band");
    read_field(*it, "lo", c.band.lo, "band");
    read_field(*it, "hi", c.band.hi, "band");
    read_field(*it, "max_gap", c.band.max_gap, "band");
  }
  c.validate();
  return c;
}

Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double c = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? c / mx : 0.0;
  if (c > 0.0) {
    double h;
    if (mx == r) h = std::fmod((g - b) / c, 6.0);
    else if (mx == g) h = (b - r) / c + 2.0;
    else h = (r - g) / c + 4.0;
    h *= 60.0;
    if (h < 0.0) h += 360.0;
    out.h = h >= 360.0 ? h - 360.0 : h;
  }
  return out;
}

double hsv_distance(const Hsv& a, const Hsv& b) {
  double dh = std::abs(a.h - b.h);
  dh = std::min(dh, 360.0 - dh);
  return (dh / 180.0 + std::abs(a.s - b.s) + std::abs(a.v - b.v)) / 3.0;
}

namespace {

void check_same_size(const RgbImage& a, const RgbImage& b, const char* who) {
  if (!a.same_size(b)) {
    throw std::invalid_argument(std::string(who) + ": image sizes differ (" +
                                std::to_string(a.width) + "x" + std::to_string(a.height) +
                                " vs " + std::to_string(b.width) + "x" +
                                std::to_string(b.height) + ")");
  }
  if (a.pixels.empty()) throw std::invalid_argument(std::string(who) + ": empty image");
}

}  // namespace

double rgb_mean_abs_diff(const RgbImage& a, const RgbImage& b) {
  check_same_size(a, b, "rgb_mean_abs_diff");
  std::uint64_t acc = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    acc += static_cast<std::uint64_t>(std::abs(int(a.pixels[i]) - int(b.pixels[i])));
  }
  return double(acc) / double(a.pixels.size());
}

double hsv_mean_diff(const RgbImage& a, const RgbImage& b) {
  check_same_size(a, b, "hsv_mean_diff");
  double acc = 0.0;
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    const auto* pa = a.pixels.data() + 3 * p;
    const auto* pb = b.pixels.data() + 3 * p;
    acc += hsv_distance(rgb_to_hsv(pa[0], pa[1], pa[2]), rgb_to_hsv(pb[0], pb[1], pb[2]));
  }
  return acc / double(a.pixel_count());
}

FrameStats compute_frame_stats(std::span<const RgbImage> frames, int window) {
  if (frames.size() < 2) throw std::invalid_argument("compute_frame_stats: need >= 2 frames");
  if (window < 1) throw std::invalid_argument("compute_frame_stats: window must be >= 1");
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (!frames[i].same_size(frames[0])) {
      throw std::invalid_argument("compute_frame_stats: frame " + std::to_string(i) +
                                  " differs in size from frame 0");
    }
  }
  FrameStats st;
  st.window = window;
  for (const auto& f : frames) {
    std::array<std::uint64_t, 3> sum{};
    for (std::size_t p = 0; p < f.pixel_count(); ++p) {
      for (int c = 0; c < 3; ++c) sum[c] += f.pixels[3 * p + c];
    }
    st.mean_rgb.push_back({double(sum[0]) / f.pixel_count(), double(sum[1]) / f.pixel_count(),
                           double(sum[2]) / f.pixel_count()});
  }
  for (std::size_t i = 1; i < frames.size(); ++i) {
    st.rgb_diff.push_back(rgb_mean_abs_diff(frames[i - 1], frames[i]));
    st.hsv_diff.push_back(hsv_mean_diff(frames[i - 1], frames[i]));
  }
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t k = 0; k < st.hsv_diff.size(); ++k) {
    // Entry k belongs to frame k + 1.
    if (k + 1 < w) {
      st.hsv_rolling.push_back(std::nullopt);
      continue;
    }
    double acc = 0.0;
    for (std::size_t m = k + 1 - w; m <= k; ++m) acc += st.hsv_diff[m];
    st.hsv_rolling.push_back(acc / double(w));
  }
  return st;
}

std::vector<SceneCut> detect_scene_cuts(const FrameStats& stats, const SceneParams& p) {
  std::vector<SceneCut> cuts;
  const std::size_t n = stats.frame_count();
  const auto min_len = static_cast<std::size_t>(std::max(1, p.min_scene_length));
  std::size_t last = 0;
  double running = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t k = i - 1;
    running += stats.hsv_diff[k];
    const double rolling = stats.hsv_rolling[k] ? *stats.hsv_rolling[k] : running / double(i);
    const double rgb = stats.rgb_diff[k];
    const double hsv = stats.hsv_diff[k];
    if (!(rgb > p.t_rgb && hsv > p.alpha * rolling)) continue;
    if (i - last < min_len || n - i < min_len) continue;
    cuts.push_back({i, rgb, hsv});
    last = i;
  }
  return cuts;
}

std::vector<Scene> scenes_from_cuts(std::span<const SceneCut> cuts, std::size_t frame_count) {
  std::vector<Scene> scenes;
  std::size_t start = 0;
  for (const auto& c : cuts) {
    if (c.frame <= start || c.frame >= frame_count) {
      throw std::invalid_argument("scenes_from_cuts: cuts must be increasing and inside the video");
    }
    scenes.push_back({start, c.frame});
    start = c.frame;
  }
  if (frame_count > start) scenes.push_back({start, frame_count});
  return scenes;
}

namespace {

/// Bounds of block b along an axis of `extent` pixels split `grid` ways.
std::pair<int, int> block_span(int b, int grid, int extent) {
  const int size = extent / grid;
  const int begin = b * size;
  const int end = b + 1 == grid ? extent : begin + size;
  return {begin, end};
}

}  // namespace

double block_similarity(const RgbImage& a, const RgbImage& b, const BlockParams& p) {
  check_same_size(a, b, "block_similarity");
  if (p.grid < 1 || p.bins < 1 || p.bins > 256) {
    throw std::invalid_argument("block_similarity: need grid >= 1 and bins in [1, 256]");
  }
  if (p.grid > a.width || p.grid > a.height) {
    throw std::invalid_argument("block_similarity: grid " + std::to_string(p.grid) +
                                " exceeds image size " + std::to_string(a.width) + "x" +
                                std::to_string(a.height));
  }
  const auto bins = static_cast<std::size_t>(p.bins);
  std::vector<std::uint32_t> ha(3 * bins), hb(3 * bins);
  int similar = 0;
  for (int by = 0; by < p.grid; ++by) {
    const auto [y0, y1] = block_span(by, p.grid, a.height);
    for (int bx = 0; bx < p.grid; ++bx) {
      const auto [x0, x1] = block_span(bx, p.grid, a.width);
      std::fill(ha.begin(), ha.end(), 0u);
      std::fill(hb.begin(), hb.end(), 0u);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const auto* pa = a.at(x, y);
          const auto* pb = b.at(x, y);
          for (std::size_t c = 0; c < 3; ++c) {
            ++ha[c * bins + pa[c] * bins / 256];
            ++hb[c * bins + pb[c] * bins / 256];
          }
        }
      }
      // Intersection of normalised histograms, averaged over channels:
      // sum(min(count)) / (3 * pixels), exact in integers up to the final
      // division.
      std::uint64_t inter = 0;
      for (std::size_t k = 0; k < ha.size(); ++k) inter += std::min(ha[k], hb[k]);
      const double pixels = double(y1 - y0) * double(x1 - x0);
      if (double(inter) / (3.0 * pixels) >= p.tau_block) ++similar;
    }
  }
  return double(similar) / double(p.grid * p.grid);
}

bool viewpoint_consistent(const RgbImage& a, const RgbImage& b, const BlockParams& p) {
  return block_similarity(a, b, p) >= p.tau_frame;
}

MissingScoreError::MissingScoreError(std::size_t i, std::size_t j)
    : std::runtime_error("missing difference score for pair (" + std::to_string(i) + ", " +
                         std::to_string(j) + ")"),
      pair_(i, j) {}

void ScoreTable::set(std::size_t i, std::size_t j, double score) {
  if (i == j) throw std::invalid_argument("score pair needs two distinct frames");
  if (i > j) std::swap(i, j);
  scores_[{i, j}] = score;
}

std::optional<double> ScoreTable::find(std::size_t i, std::size_t j) const {
  if (i > j) std::swap(i, j);
  auto it = scores_.find({i, j});
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

double ScoreTable::at(std::size_t i, std::size_t j) const {
  auto s = find(i, j);
  if (!s) throw MissingScoreError(std::min(i, j), std::max(i, j));
  return *s;
}

ScoreTable read_score_file(std::istream& in) {
  ScoreTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    long long i = 0, j = 0;
    double score = 0.0;
    if (!(ls >> i)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw std::runtime_error("score file line " + std::to_string(lineno) + ": expected 'i j score'");
    }
    std::string rest;
    if (!(ls >> j >> score) || (ls >> rest) || i < 0 || j < 0 || i == j ||
        !std::isfinite(score)) {
      throw std::runtime_error("score file line " + std::to_string(lineno) +
                               ": expected 'i j score' with distinct non-negative frames");
    }
    if (table.find(std::size_t(i), std::size_t(j))) {
      throw std::runtime_error("score file line " + std::to_string(lineno) + ": pair (" +
                               std::to_string(i) + ", " + std::to_string(j) + ") listed twice");
    }
    table.set(std::size_t(i), std::size_t(j), score);
  }
  return table;
}

ScoreTable read_score_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_score_file(in);
}

std::vector<FramePair> evaluate_pairs(std::span<const RgbImage> frames, const Scene& scene,
                                      const ScoreTable& scores, const MinerConfig& cfg) {
  if (scene.start >= scene.end || scene.end > frames.size()) {
    throw std::invalid_argument("evaluate_pairs: scene [" + std::to_string(scene.start) + ", " +
                                std::to_string(scene.end) + ") outside " +
                                std::to_string(frames.size()) + " frames");
  }
  std::vector<FramePair> out;
  for (std::size_t i = scene.start; i < scene.end; ++i) {
    for (std::size_t j = i + 1; j < scene.end; ++j) {
      if (cfg.band.max_gap > 0 && j - i > std::size_t(cfg.band.max_gap)) break;
      const double s = scores.at(i, j);
      if (s < cfg.band.lo || s > cfg.band.hi) continue;
      FramePair fp;
      fp.i = i;
      fp.j = j;
      fp.score = s;
      fp.proportion = block_similarity(frames[i], frames[j], cfg.block);
      fp.consistent = fp.proportion >= cfg.block.tau_frame;
      out.push_back(fp);
    }
  }
  return out;
}

std::vector<FramePair> select_pairs(std::span<const RgbImage> frames, const Scene& scene,
                                    const ScoreTable& scores, const MinerConfig& cfg) {
  auto pairs = evaluate_pairs(frames, scene, scores, cfg);
  std::erase_if(pairs, [](const FramePair& p) { return !p.consistent; });
  return pairs;
}

MiningResult mine(std::span<const RgbImage> frames, const ScoreTable& scores,
                  const MinerConfig& cfg) {
  cfg.validate();
  MiningResult r;
  const auto stats = compute_frame_stats(frames, cfg.scene.window);
  r.cuts = detect_scene_cuts(stats, cfg.scene);
  r.scenes = scenes_from_cuts(r.cuts, frames.size());
  for (const auto& s : r.scenes) {
    auto pairs = evaluate_pairs(frames, s, scores, cfg);
    r.pairs.insert(r.pairs.end(), pairs.begin(), pairs.end());
  }
  return r;
}

nlohmann::json scenes_json(std::span<const Scene> scenes, std::span<const SceneCut> cuts) {
  nlohmann::json js = nlohmann::json::array();
  for (const auto& s : scenes) js.push_back({{"start", s.start}, {"end", s.end}});
  nlohmann::json jc = nlohmann::json::array();
  for (const auto& c : cuts) {
    jc.push_back({{"frame", c.frame}, {"rgb_diff", c.rgb_diff}, {"hsv_diff", c.hsv_diff}});
  }
  return {{"scenes", js}, {"cuts", jc}};
}

nlohmann::json manifest_json(const MiningResult& r, const MinerConfig& cfg) {
  nlohmann::json j = scenes_json(r.scenes, r.cuts);
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : r.pairs) {
    pairs.push_back({{"i", p.i},
                     {"j", p.j},
                     {"score", p.score},
                     {"proportion", p.proportion},
                     {"consistent", p.consistent}});
  }
  j["pairs"] = pairs;
  j["config"] = to_json(cfg);
  return j;
}

}  // namespace omnilab::pairminer
