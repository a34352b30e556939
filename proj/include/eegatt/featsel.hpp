#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eegatt/dataset.hpp"
#include "eegatt/network.hpp"

namespace eegatt::featsel {

// min_beta ||y - X beta||^2 + lambda2 ||beta||^2 + lambda1 ||beta||_1
// The sum of squares is not divided by n, so useful lambdas grow with the sample count.
struct ElasticNetProblem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  bool intercept = false;  // unpenalized; fitted by centring X and y
};

struct ElasticNetFit {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double objective = 0.0;
  std::size_t iterations = 0;  // full coordinate sweeps
  bool converged = false;
  std::vector<double> objective_trace;  // after each sweep
};

struct FitOptions {
  double tol = 1e-8;  // on the largest coordinate change in a sweep
  std::size_t max_iter = 100000;
  bool trace = false;
  const Eigen::VectorXd* warm_start = nullptr;
};

// Cyclic coordinate descent: beta_j <- S(x_j' r_j, lambda1 / 2) / (x_j' x_j + lambda2).
ElasticNetFit elastic_net_fit(const ElasticNetProblem& problem, const FitOptions& options = {});

// Same solver on precomputed Gram quantities (G = X'X, c = X'y, yy = y'y).
ElasticNetFit elastic_net_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty, double yy, double lambda1,
                               double lambda2, const FitOptions& options = {});

double elastic_net_objective(const ElasticNetProblem& problem, const Eigen::VectorXd& beta, double intercept = 0.0);

// Largest KKT violation at beta, relative to scale = max(1, max_j |2 x_j' y|).
struct KktReport {
  double max_violation = 0.0;
  double scale = 1.0;
  bool satisfied(double rel_tol) const { return max_violation <= rel_tol * scale; }
};
KktReport kkt_check(const ElasticNetProblem& problem, const ElasticNetFit& fit);

// Column standardization fitted on one matrix and applied to others. Constant
// columns are flagged and mapped to zero.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  std::vector<bool> constant;

  static Standardizer fit(const Eigen::MatrixXd& X);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
  std::size_t constant_count() const;
};

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& predicted);

// ---- spatial filter ranking --------------------------------------------------------

// The grids reach 1e4 because the unscaled objective needs penalties comparable to
// the sample count before noisy features are shrunk away.
struct RankingConfig {
  std::vector<double> lambda1_grid = {0.01, 0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0};
  std::vector<double> lambda2_grid = {0.01, 0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0};
  double tol = 1e-6;
  std::size_t max_iter = 20000;
};

struct FilterRegression {
  std::size_t filter = 0;
  double score = 0.0;  // test R^2 as a percentage
  double val_r2 = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  bool degenerate = false;
  bool converged = true;
  Eigen::VectorXd beta;  // on standardized time-point features
};

struct RegressionRanking {
  std::vector<FilterRegression> rows;  // sorted by score, best first
  std::vector<std::string> warnings;
};

// For every first-layer spatial filter: its 350-point output per sample is the
// feature vector, the attended side (0/1) the response. Lambdas are picked on the
// validation split; the score is the test-split R^2.
RegressionRanking rank_filters_by_regression(const nn::Network& net, const EpochedDataset& data,
                                             const RankingConfig& cfg = {});

std::string ranking_csv(const RegressionRanking& ranking);

// |beta| per filter (rows in filter order) and time point.
struct BetaHeatmap {
  Eigen::MatrixXd values;
  std::vector<double> time_ms;
};

BetaHeatmap beta_heatmap(const std::vector<Eigen::VectorXd>& betas, const std::vector<double>& time_ms);
std::string heatmap_csv(const BetaHeatmap& map);
std::string heatmap_svg(const BetaHeatmap& map, const std::string& title);

}  // namespace eegatt::featsel
