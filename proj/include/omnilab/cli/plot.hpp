#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace omnilab::cli {

/// One named curve; x values are 1, 2, ... when `x` is empty.
struct Series {
  std::string name;
  std::vector<double> y;
  std::vector<double> x;
};

struct PlotOptions {
  std::string title;
  std::string x_label = "step";
  std::string y_label = "smoothed loss";
  std::optional<double> threshold;
  int width = 720;
  int height = 440;
};

/// Standalone SVG with a log-scaled y axis, one polyline per series, a
/// legend and an optional dashed threshold rule. Non-positive y values
/// are clamped to the smallest positive value present. Throws
/// std::invalid_argument for an empty series list or a series with fewer
/// than two points.
std::string render_svg(std::span<const Series> series, const PlotOptions& opt);

/// render_svg written to `path`.
void emit_plot(std::span<const Series> series, const PlotOptions& opt,
               const std::filesystem::path& path);

}  // namespace omnilab::cli
