#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "eegatt/dataset.hpp"
#include "eegatt/montage.hpp"
#include "eegatt/network.hpp"
#include "eegatt/spatial.hpp"
#include "eegatt/spline.hpp"

namespace eegatt::analysis {

std::string filters_csv(const SpatialFilterSet& filters, const Montage& montage);

// ---- ERP feature maps ----------------------------------------------------------------

struct ErpFeatureMap {
  std::string task;  // "relative" or "attended"
  std::size_t filter = 0;
  Eigen::MatrixXd values;           // (classes, time points)
  std::vector<std::size_t> counts;  // samples per class
  std::vector<double> time_ms;
};

// Spatial-convolution output of one filter, averaged within each class of `task`.
// Raises a missing-class error naming any class without samples.
ErpFeatureMap erp_feature_map(const SpatialFilterSet& filters, const EpochedDataset& data,
                              std::span<const std::size_t> idx, std::size_t filter, std::string_view task);
ErpFeatureMap erp_feature_map(const nn::Network& net, const EpochedDataset& data, std::span<const std::size_t> idx,
                              std::size_t filter, std::string_view task);

std::string erp_map_csv(const ErpFeatureMap& map);
std::string erp_map_svg(const ErpFeatureMap& map, const std::string& title);

// ---- attention gradient ------------------------------------------------------------

struct SlopeSeries {
  std::vector<double> slope;      // per time point, feature units per location step
  std::vector<double> intercept;
  std::vector<double> residual;   // residual sum of squares of the fit
  std::vector<double> time_ms;
};

// OLS of amplitude against location index 1..4 over the non-target classes.
SlopeSeries slope_analysis(const ErpFeatureMap& map);

// Least-squares gain of `shape` in the slope series after subtracting the mean
// slope over time points earlier than `baseline_end_ms`. With the shape taken as
// the attention time course this estimates the per-step amplitude decrease
// (positive when amplitude falls with distance).
double gradient_from_slopes(const SlopeSeries& series, std::span<const double> shape, double baseline_end_ms = 0.0);

std::string slope_csv(const SlopeSeries& series);
std::string slope_svg(const SlopeSeries& series, const std::string& title);

// ---- topography ----------------------------------------------------------------------

struct TopographyConfig {
  std::size_t grid = 67;  // cells per side
  SplineConfig spline;
};

struct Topography {
  std::vector<std::string> labels;
  std::vector<std::array<double, 2>> points;  // projected electrode positions
  std::vector<double> weights;
  Eigen::MatrixXd grid;  // row 0 at the top; NaN outside the head outline
  double extent = 1.0;   // grid spans [-extent, extent] in both axes
  double head_radius = 1.0;
};

Topography topography(std::span<const double> weights, const Montage& montage, const TopographyConfig& cfg = {});
// label,x,y,weight with round-trip exact numbers.
std::string topography_csv(const Topography& topo);
std::string topography_grid_csv(const Topography& topo);
std::string topography_svg(const Topography& topo, const std::string& title);

// ---- per-filter classification ranking ---------------------------------------------

struct LogisticConfig {
  std::size_t iterations = 200;
  double learning_rate = 0.05;
  double l2 = 1e-3;
};

struct FilterAccuracy {
  std::size_t filter = 0;
  double accuracy = 0.0;  // test split
  double train_accuracy = 0.0;
};

// Multinomial logistic regression on each filter's standardized output, fitted on
// the train split (full-batch Adam from zero weights) and scored on the test split.
// Rows are sorted by accuracy, best first.
std::vector<FilterAccuracy> rank_filters_by_classification(const nn::Network& net, const EpochedDataset& data,
                                                           std::string_view task = "relative",
                                                           const LogisticConfig& cfg = {});
std::string classification_ranking_csv(const std::vector<FilterAccuracy>& rows);

// Softmax classifier used by the ranking; exposed for testing.
struct LogisticModel {
  Eigen::MatrixXd weights;  // (features, classes)
  Eigen::RowVectorXd bias;
  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& X) const;
  std::vector<int> predict(const Eigen::MatrixXd& X) const;
};
LogisticModel fit_logistic(const Eigen::MatrixXd& X, std::span<const int> labels, std::size_t classes,
                           const LogisticConfig& cfg = {});

// ---- multi-task differential samples -----------------------------------------------

struct DifferentialReport {
  std::vector<std::size_t> disagreement;  // multi-task correct, single-task wrong
  std::vector<std::size_t> reference;     // single-task correct
  std::array<std::size_t, kSpeakers> per_speaker{};  // disagreement counts, speakers 1..5
  std::size_t total = 0;
  std::vector<double> disagreement_map;  // mean filtered EEG, per time point
  std::vector<double> reference_map;
  double disagreement_mean_abs = 0.0;
  double reference_mean_abs = 0.0;
  std::vector<double> time_ms;

  std::string to_json() const;
  std::string maps_csv() const;
};

// Attended-side correctness from argmax over the attended head. The per-sample series
// is the multi-task model's spatial filter outputs (weights only) averaged over
// filters; maps average these over samples.
DifferentialReport differential_sample_analysis(const nn::Network& mtm, const nn::Network& single,
                                                const EpochedDataset& data, std::span<const std::size_t> idx);
std::string differential_svg(const DifferentialReport& report, const std::string& title);

}  // namespace eegatt::analysis
