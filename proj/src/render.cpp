#include "eegatt/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace eegatt::render {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string rgb(double r, double g, double b) {
  char buf[16];
  auto c = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(r), c(g), c(b));
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool empty() const { return lo > hi; }
};

Range range_of(const Eigen::MatrixXd& m) {
  Range r;
  for (Eigen::Index i = 0; i < m.size(); ++i) r.add(m.data()[i]);
  return r;
}

// Maps a value to a colour given the data range.
class ColourScale {
 public:
  explicit ColourScale(Range r) : r_(r) {
    diverging_ = !r.empty() && r.lo < 0.0;
    span_ = r.empty() ? 0.0 : (diverging_ ? std::max(std::abs(r.lo), std::abs(r.hi)) : r.hi);
  }
  std::string operator()(double v) const {
    if (span_ <= 0.0) return rgb(1, 1, 1);
    const double t = std::clamp(v / span_, -1.0, 1.0);
    if (t >= 0.0) return rgb(1.0, 1.0 - t, 1.0 - t);
    return rgb(1.0 + t, 1.0 + t, 1.0);
  }
  double span() const { return span_; }
  bool diverging() const { return diverging_; }

 private:
  Range r_;
  bool diverging_ = false;
  double span_ = 0.0;
};

void colour_bar(std::ostringstream& os, const ColourScale& scale, double x, double y, double h) {
  constexpr int kSteps = 32;
  const double lo = scale.diverging() ? -scale.span() : 0.0;
  const double hi = scale.span();
  for (int i = 0; i < kSteps; ++i) {
    const double v = hi - (hi - lo) * (i + 0.5) / kSteps;
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(y + h * i / kSteps) << "\" width=\"12\" height=\""
       << num(h / kSteps + 0.5) << "\" fill=\"" << scale(v) << "\"/>\n";
  }
  os << "<text x=\"" << num(x + 16) << "\" y=\"" << num(y + 4) << "\" font-size=\"10\">" << tick(hi) << "</text>\n";
  os << "<text x=\"" << num(x + 16) << "\" y=\"" << num(y + h) << "\" font-size=\"10\">" << tick(lo) << "</text>\n";
}

void header(std::ostringstream& os, double w, double h, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h) << "\" viewBox=\"0 0 "
     << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(w / 2) << "\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">" << escape(title) << "</text>\n";
}

const std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                             "#9467bd", "#8c564b", "#e377c2", "#17becf"};

}  // namespace

std::string heatmap_svg(const Eigen::MatrixXd& values, const HeatmapSpec& spec) {
  const double left = 90, top = 35, plot_w = 700, row_h = 18;
  const auto rows = static_cast<double>(values.rows());
  const auto cols = static_cast<double>(values.cols());
  const double plot_h = std::max(row_h * rows, row_h);
  const double width = left + plot_w + 70, height = top + plot_h + 50;
  std::ostringstream os;
  header(os, width, height, spec.title);
  const ColourScale scale(range_of(values));
  const double cw = cols > 0 ? plot_w / cols : plot_w;
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double v = values(r, c);
      if (!std::isfinite(v)) continue;
      os << "<rect x=\"" << num(left + cw * static_cast<double>(c)) << "\" y=\"" << num(top + row_h * static_cast<double>(r))
         << "\" width=\"" << num(cw + 0.3) << "\" height=\"" << num(row_h) << "\" fill=\"" << scale(v) << "\"/>\n";
    }
    const std::string label = static_cast<std::size_t>(r) < spec.row_labels.size() ? spec.row_labels[r] : std::to_string(r);
    os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(top + row_h * (static_cast<double>(r) + 0.7))
       << "\" font-size=\"11\" text-anchor=\"end\">" << escape(label) << "</text>\n";
  }
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(plot_w) << "\" height=\"" << num(plot_h)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (!spec.x.empty() && values.cols() > 0) {
    const std::size_t n = spec.x.size();
    for (std::size_t k = 0; k < 6; ++k) {
      const std::size_t i = std::min(n - 1, k * (n - 1) / 5);
      const double x = left + cw * (static_cast<double>(i) + 0.5);
      os << "<text x=\"" << num(x) << "\" y=\"" << num(top + plot_h + 14) << "\" font-size=\"10\" text-anchor=\"middle\">"
         << tick(spec.x[i]) << "</text>\n";
    }
  }
  os << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(top + plot_h + 32)
     << "\" font-size=\"11\" text-anchor=\"middle\">" << escape(spec.x_label) << "</text>\n";
  colour_bar(os, scale, left + plot_w + 12, top, plot_h);
  os << "</svg>\n";
  return os.str();
}

std::string line_plot_svg(const std::vector<Series>& series, const LinePlotSpec& spec) {
  const double left = 70, top = 35, plot_w = 640, plot_h = 320;
  const double width = left + plot_w + 130, height = top + plot_h + 50;
  std::ostringstream os;
  header(os, width, height, spec.title);
  Range xr, yr;
  for (double v : spec.x) xr.add(v);
  for (const auto& s : series) {
    for (double v : s.y) yr.add(v);
  }
  if (xr.empty()) xr = {0.0, 1.0};
  if (yr.empty()) yr = {0.0, 1.0};
  if (xr.hi == xr.lo) xr.hi = xr.lo + 1.0;
  if (yr.hi == yr.lo) {
    yr.lo -= 0.5;
    yr.hi += 0.5;
  }
  auto px = [&](double v) { return left + plot_w * (v - xr.lo) / (xr.hi - xr.lo); };
  auto py = [&](double v) { return top + plot_h * (1.0 - (v - yr.lo) / (yr.hi - yr.lo)); };
  os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(plot_w) << "\" height=\"" << num(plot_h)
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (yr.lo < 0.0 && yr.hi > 0.0) {
    os << "<line x1=\"" << num(left) << "\" x2=\"" << num(left + plot_w) << "\" y1=\"" << num(py(0)) << "\" y2=\"" << num(py(0))
       << "\" stroke=\"#999\" stroke-dasharray=\"3,3\"/>\n";
  }
  for (int k = 0; k <= 5; ++k) {
    const double xv = xr.lo + (xr.hi - xr.lo) * k / 5.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * k / 5.0;
    os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + plot_h + 14) << "\" font-size=\"10\" text-anchor=\"middle\">"
       << tick(xv) << "</text>\n";
    os << "<text x=\"" << num(left - 5) << "\" y=\"" << num(py(yv) + 3) << "\" font-size=\"10\" text-anchor=\"end\">" << tick(yv)
       << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& y = series[s].y;
    const char* colour = kPalette[s % kPalette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(y.size(), spec.x.size()); ++i) {
      if (!std::isfinite(y[i])) continue;
      os << num(px(spec.x[i])) << ',' << num(py(y[i])) << ' ';
    }
    os << "\"/>\n";
    const double ly = top + 14.0 * static_cast<double>(s) + 8;
    os << "<line x1=\"" << num(left + plot_w + 10) << "\" x2=\"" << num(left + plot_w + 28) << "\" y1=\"" << num(ly) << "\" y2=\""
       << num(ly) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(left + plot_w + 32) << "\" y=\"" << num(ly + 4) << "\" font-size=\"11\">" << escape(series[s].label)
       << "</text>\n";
  }
  os << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(top + plot_h + 32)
     << "\" font-size=\"11\" text-anchor=\"middle\">" << escape(spec.x_label) << "</text>\n";
  os << "<text x=\"14\" y=\"" << num(top + plot_h / 2) << "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
     << num(top + plot_h / 2) << ")\">" << escape(spec.y_label) << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string topography_svg(const Eigen::MatrixXd& grid, double extent, const std::vector<Marker>& markers,
                           const std::string& title) {
  const double size = 400, left = 30, top = 40;
  std::ostringstream os;
  header(os, left + size + 90, top + size + 30, title);
  const ColourScale scale(range_of(grid));
  const double cw = size / static_cast<double>(std::max<Eigen::Index>(grid.cols(), 1));
  const double ch = size / static_cast<double>(std::max<Eigen::Index>(grid.rows(), 1));
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
      const double v = grid(r, c);
      if (!std::isfinite(v)) continue;
      os << "<rect x=\"" << num(left + cw * static_cast<double>(c)) << "\" y=\"" << num(top + ch * static_cast<double>(r))
         << "\" width=\"" << num(cw + 0.3) << "\" height=\"" << num(ch + 0.3) << "\" fill=\"" << scale(v) << "\"/>\n";
    }
  }
  const double cx = left + size / 2, cy = top + size / 2, radius = size / 2 / extent;
  os << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"" << num(radius)
     << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"" << num(cx - 0.1 * radius) << ','
     << num(cy - radius) << ' ' << num(cx) << ',' << num(cy - 1.1 * radius) << ' ' << num(cx + 0.1 * radius) << ','
     << num(cy - radius) << "\"/>\n";
  for (const auto& m : markers) {
    const double x = cx + m.x / extent * size / 2, y = cy - m.y / extent * size / 2;
    os << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"1.8\" fill=\"black\"><title>" << escape(m.label)
       << "</title></circle>\n";
  }
  colour_bar(os, scale, left + size + 20, top, size);
  os << "</svg>\n";
  return os.str();
}

}  // namespace eegatt::render
