#include "omnilab/cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace omnilab::cli {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default:
        // Control characters are not allowed in XML 1.0 text.
        if (static_cast<unsigned char>(c) >= 0x20 || c == '\t' || c == '\n') out += c;
    }
  }
  return out;
}

std::string tick_label(double decade) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(decade));
  return buf;
}

std::string tick_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::round(v));
  return buf;
}

}  // namespace

std::string render_svg(std::span<const Series> series, const PlotOptions& opt) {
  if (series.empty()) throw std::invalid_argument("emit_plot: no series");
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_pos_min = std::numeric_limits<double>::infinity(), y_max = 0.0;
  for (const auto& s : series) {
    if (s.y.size() < 2) {
      throw std::invalid_argument("emit_plot: series '" + s.name + "' has fewer than 2 points");
    }
    if (!s.x.empty() && s.x.size() != s.y.size()) {
      throw std::invalid_argument("emit_plot: series '" + s.name + "' x/y lengths differ");
    }
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      const double x = s.x.empty() ? double(i + 1) : s.x[i];
      const double y = s.y[i];
      if (!std::isfinite(x) || !std::isfinite(y)) {
        throw std::invalid_argument("emit_plot: series '" + s.name + "' has non-finite values");
      }
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      if (y > 0.0) y_pos_min = std::min(y_pos_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (opt.threshold && *opt.threshold > 0.0) {
    y_pos_min = std::min(y_pos_min, *opt.threshold);
    y_max = std::max(y_max, *opt.threshold);
  }
  if (!std::isfinite(y_pos_min)) y_pos_min = y_max = 1.0;
  if (x_max <= x_min) x_max = x_min + 1.0;
  double lo = std::floor(std::log10(y_pos_min));
  double hi = std::ceil(std::log10(y_max));
  if (hi <= lo) hi = lo + 1.0;

  const double left = 70, right = 170, top = 40, bottom = 50;
  const double pw = opt.width - left - right, ph = opt.height - top - bottom;
  auto px = [&](double x) { return left + pw * (x - x_min) / (x_max - x_min); };
  auto py = [&](double y) {
    const double ly = std::log10(std::max(y, y_pos_min));
    return top + ph * (hi - ly) / (hi - lo);
  };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\""
    << opt.height << "\" viewBox=\"0 0 " << opt.width << ' ' << opt.height << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  if (!opt.title.empty()) {
    o << "<text x=\"" << num(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << escape_xml(opt.title) << "</text>\n";
  }
  for (double d = lo; d <= hi; d += 1.0) {
    const double y = top + ph * (hi - d) / (hi - lo);
    o << "<line x1=\"" << num(left) << "\" y1=\"" << num(y) << "\" x2=\"" << num(left + pw)
      << "\" y2=\"" << num(y) << "\" stroke=\"#dddddd\"/>\n"
      << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y + 4)
      << "\" text-anchor=\"end\">" << tick_label(d) << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double xv = x_min + (x_max - x_min) * k / 4.0;
    o << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + ph + 18)
      << "\" text-anchor=\"middle\">" << tick_value(xv) << "</text>\n";
  }
  o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw)
    << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n"
    << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(opt.height - 10.0)
    << "\" text-anchor=\"middle\">" << escape_xml(opt.x_label) << "</text>\n"
    << "<text transform=\"translate(16," << num(top + ph / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape_xml(opt.y_label) << " (log)</text>\n";

  if (opt.threshold && *opt.threshold > 0.0) {
    const double y = py(*opt.threshold);
    o << "<line class=\"threshold\" x1=\"" << num(left) << "\" y1=\"" << num(y) << "\" x2=\""
      << num(left + pw) << "\" y2=\"" << num(y)
      << "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    const char* color = kPalette[s % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ser.y.size(); ++i) {
      const double x = ser.x.empty() ? double(i + 1) : ser.x[i];
      if (i) o << ' ';
      o << num(px(x)) << ',' << num(py(ser.y[i]));
    }
    o << "\"/>\n";
    const double ly = top + 14 + 18.0 * double(s);
    o << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
      << num(left + pw + 32) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n"
      << "<text class=\"legend\" x=\"" << num(left + pw + 38) << "\" y=\"" << num(ly) << "\">"
      << escape_xml(ser.name) << "</text>\n";
  }
  if (opt.threshold && *opt.threshold > 0.0) {
    const double ly = top + 14 + 18.0 * double(series.size());
    char buf[48];
    std::snprintf(buf, sizeof buf, "target %g", *opt.threshold);
    o << "<line x1=\"" << num(left + pw + 12) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
      << num(left + pw + 32) << "\" y2=\"" << num(ly - 4)
      << "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n"
      << "<text x=\"" << num(left + pw + 38) << "\" y=\"" << num(ly) << "\">" << buf
      << "</text>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

void emit_plot(std::span<const Series> series, const PlotOptions& opt,
               const std::filesystem::path& path) {
  const std::string svg = render_svg(series, opt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << svg;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace omnilab::cli
