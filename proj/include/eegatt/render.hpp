#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace eegatt::render {

// Cell colours use a white-to-red ramp for non-negative data and a blue-white-red
// ramp centred on zero otherwise. NaN cells are left empty.
struct HeatmapSpec {
  std::string title;
  std::string x_label;
  std::vector<double> x;                // one value per column
  std::vector<std::string> row_labels;  // one per row
};

std::string heatmap_svg(const Eigen::MatrixXd& values, const HeatmapSpec& spec);

struct Series {
  std::string label;
  std::vector<double> y;
};

struct LinePlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
};

std::string line_plot_svg(const std::vector<Series>& series, const LinePlotSpec& spec);

struct Marker {
  double x = 0.0;
  double y = 0.0;
  std::string label;
};

// Scalp map: `grid` covers [-extent, extent]^2 with row 0 at the top (y = +extent).
std::string topography_svg(const Eigen::MatrixXd& grid, double extent, const std::vector<Marker>& markers,
                           const std::string& title);

}  // namespace eegatt::render
