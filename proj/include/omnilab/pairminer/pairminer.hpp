#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "omnilab/pairminer/image.hpp"

namespace omnilab::pairminer {

struct SceneParams {
  double t_rgb = 30.0;  // 8-bit scale
  int window = 8;
  double alpha = 2.0;
  int min_scene_length = 5;
};

struct BlockParams {
  int grid = 4;
  int bins = 16;
  double tau_block = 0.8;
  double tau_frame = 0.7;
};

struct BandParams {
  double lo = 0.05;
  double hi = 0.35;
  /// Largest j - i considered within a scene; 0 means unlimited.
  int max_gap = 0;
};

struct MinerConfig {
  SceneParams scene;
  BlockParams block;
  BandParams band;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const MinerConfig& c);
MinerConfig parse_miner_config(const nlohmann::json& j);

struct Hsv {
  double h = 0.0;  // degrees, [0, 360)
  double s = 0.0;  // [0, 1]
  double v = 0.0;  // [0, 1]
};

/// Hexcone conversion of 8-bit RGB. Grey pixels get h = 0.
Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Per-pixel HSV distance in [0, 1]: mean of the circular hue distance
/// scaled by 1/180, |dS| and |dV|.
double hsv_distance(const Hsv& a, const Hsv& b);

/// Mean absolute channel difference on the 8-bit scale.
double rgb_mean_abs_diff(const RgbImage& a, const RgbImage& b);
/// Mean of hsv_distance over pixels.
double hsv_mean_diff(const RgbImage& a, const RgbImage& b);

/// Entry i of the per-pair vectors compares frames i and i + 1, so the
/// diff "at frame i" (i >= 1) is entry i - 1.
struct FrameStats {
  std::vector<std::array<double, 3>> mean_rgb;  // per frame
  std::vector<double> rgb_diff;                 // per consecutive pair
  std::vector<double> hsv_diff;                 // per consecutive pair
  /// Mean of the `window` HSV diffs ending at frame i; set from frame
  /// index `window` on, indexed like rgb_diff.
  std::vector<std::optional<double>> hsv_rolling;
  int window = 0;

  std::size_t frame_count() const noexcept { return mean_rgb.size(); }
};

/// Needs >= 2 frames of equal size; throws std::invalid_argument otherwise.
FrameStats compute_frame_stats(std::span<const RgbImage> frames, int window);

struct SceneCut {
  std::size_t frame = 0;  // first frame of the new scene
  double rgb_diff = 0.0;
  double hsv_diff = 0.0;
};

/// A cut at frame i needs rgb_diff(i-1, i) > t_rgb and hsv_diff(i-1, i) >
/// alpha * rolling HSV mean. Before the rolling mean is defined, the mean
/// over the diffs seen so far stands in. Cuts that would leave a scene
/// shorter than min_scene_length (either side) are skipped, scanning left
/// to right.
std::vector<SceneCut> detect_scene_cuts(const FrameStats& stats, const SceneParams& p);

struct Scene {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const Scene&, const Scene&) = default;
};

std::vector<Scene> scenes_from_cuts(std::span<const SceneCut> cuts, std::size_t frame_count);

/// Fraction of grid x grid blocks whose per-channel histograms agree.
/// Rows and columns that the grid does not divide evenly go to the last
/// block row/column.
double block_similarity(const RgbImage& a, const RgbImage& b, const BlockParams& p);

bool viewpoint_consistent(const RgbImage& a, const RgbImage& b, const BlockParams& p);

class MissingScoreError : public std::runtime_error {
 public:
  MissingScoreError(std::size_t i, std::size_t j);
  std::pair<std::size_t, std::size_t> pair() const noexcept { return pair_; }

 private:
  std::pair<std::size_t, std::size_t> pair_;
};

/// Difference scores keyed by (i, j), i < j, in global frame indices.
class ScoreTable {
 public:
  void set(std::size_t i, std::size_t j, double score);
  std::optional<double> find(std::size_t i, std::size_t j) const;
  /// Throws MissingScoreError naming the pair.
  double at(std::size_t i, std::size_t j) const;
  std::size_t size() const noexcept { return scores_.size(); }

 private:
  std::map<std::pair<std::size_t, std::size_t>, double> scores_;
};

/// One "i j score" triple per line; blank lines and '#' comments are
/// skipped. Pairs given as j i are stored as i j. Throws on malformed
/// lines and on a pair listed twice.
ScoreTable read_score_file(std::istream& in);
ScoreTable read_score_file(const std::filesystem::path& path);

struct FramePair {
  std::size_t i = 0;
  std::size_t j = 0;
  double score = 0.0;
  double proportion = 0.0;
  bool consistent = false;
};

/// Every in-band candidate of the scene (all i < j, gap limited by
/// max_gap), with its block-similarity proportion and consistency flag.
std::vector<FramePair> evaluate_pairs(std::span<const RgbImage> frames, const Scene& scene,
                                      const ScoreTable& scores, const MinerConfig& cfg);

/// The in-band candidates that are viewpoint-consistent.
std::vector<FramePair> select_pairs(std::span<const RgbImage> frames, const Scene& scene,
                                    const ScoreTable& scores, const MinerConfig& cfg);

struct MiningResult {
  std::vector<SceneCut> cuts;
  std::vector<Scene> scenes;
  std::vector<FramePair> pairs;  // in-band, consistent or not
};

/// Scene detection followed by pair evaluation over every scene.
MiningResult mine(std::span<const RgbImage> frames, const ScoreTable& scores,
                  const MinerConfig& cfg);

nlohmann::json scenes_json(std::span<const Scene> scenes, std::span<const SceneCut> cuts);
nlohmann::json manifest_json(const MiningResult& r, const MinerConfig& cfg);

}  // namespace omnilab::pairminer
