#include "eegatt/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "eegatt/error.hpp"
#include "eegatt/io.hpp"
#include "eegatt/render.hpp"
#include "eegatt/spatial.hpp"

namespace eegatt::featsel {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

void check_penalties(double l1, double l2) {
  if (!(l1 >= 0.0) || !(l2 >= 0.0)) fail(ErrorCode::kConfig, "elastic-net penalties must be non-negative");
}

double gram_objective(const Eigen::VectorXd& xty, double yy, double l1, double l2,
                      const Eigen::VectorXd& beta, const Eigen::VectorXd& gb) {
  return yy - 2.0 * xty.dot(beta) + beta.dot(gb) + l2 * beta.squaredNorm() + l1 * beta.lpNorm<1>();
}

struct Centred {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::RowVectorXd x_mean;
  double y_mean = 0.0;
};

Centred centre(const ElasticNetProblem& p) {
  Centred c{p.X, p.y, Eigen::RowVectorXd::Zero(p.X.cols()), 0.0};
  if (p.intercept) {
    c.x_mean = p.X.colwise().mean();
    c.y_mean = p.y.mean();
    c.X.rowwise() -= c.x_mean;
    c.y.array() -= c.y_mean;
  }
  return c;
}

void check_problem(const ElasticNetProblem& p) {
  if (p.X.rows() < 2) fail(ErrorCode::kDimension, "elastic net needs at least 2 samples");
  if (p.X.rows() != p.y.size()) fail(ErrorCode::kDimension, "design matrix and response differ in length");
  check_penalties(p.lambda1, p.lambda2);
}

}  // namespace

ElasticNetFit elastic_net_gram(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty, double yy, double lambda1,
                               double lambda2, const FitOptions& options) {
  check_penalties(lambda1, lambda2);
  const Eigen::Index p = gram.rows();
  if (gram.cols() != p || xty.size() != p) fail(ErrorCode::kDimension, "Gram matrix and X'y disagree in size");
  ElasticNetFit fit;
  fit.beta = Eigen::VectorXd::Zero(p);
  if (options.warm_start != nullptr) {
    if (options.warm_start->size() != p) fail(ErrorCode::kDimension, "warm start has the wrong length");
    fit.beta = *options.warm_start;
  }
  Eigen::VectorXd gb = gram * fit.beta;
  const double half_l1 = lambda1 / 2.0;
  while (fit.iterations < options.max_iter) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double gjj = gram(j, j);
      const double old = fit.beta(j);
      const double denom = gjj + lambda2;
      const double next = denom > 0.0 ? soft_threshold(xty(j) - gb(j) + gjj * old, half_l1) / denom : 0.0;
      const double delta = next - old;
      if (delta != 0.0) {
        fit.beta(j) = next;
        gb.noalias() += delta * gram.col(j);
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    ++fit.iterations;
    gb.noalias() = gram * fit.beta;
    if (options.trace) fit.objective_trace.push_back(gram_objective(xty, yy, lambda1, lambda2, fit.beta, gb));
    if (max_change < options.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.objective = gram_objective(xty, yy, lambda1, lambda2, fit.beta, gb);
  return fit;
}

ElasticNetFit elastic_net_fit(const ElasticNetProblem& problem, const FitOptions& options) {
  check_problem(problem);
  const Centred c = centre(problem);
  const Eigen::MatrixXd gram = c.X.transpose() * c.X;
  const Eigen::VectorXd xty = c.X.transpose() * c.y;
  ElasticNetFit fit = elastic_net_gram(gram, xty, c.y.squaredNorm(), problem.lambda1, problem.lambda2, options);
  if (problem.intercept) fit.intercept = c.y_mean - c.x_mean.dot(fit.beta);
  return fit;
}

double elastic_net_objective(const ElasticNetProblem& problem, const Eigen::VectorXd& beta, double intercept) {
  const Eigen::VectorXd r = (problem.y - problem.X * beta).array() - intercept;
  return r.squaredNorm() + problem.lambda2 * beta.squaredNorm() + problem.lambda1 * beta.lpNorm<1>();
}

KktReport kkt_check(const ElasticNetProblem& problem, const ElasticNetFit& fit) {
  check_problem(problem);
  const Centred c = centre(problem);
  const Eigen::VectorXd r = c.y - c.X * fit.beta;
  const Eigen::VectorXd g = 2.0 * (c.X.transpose() * r);
  KktReport k;
  k.scale = std::max(1.0, (2.0 * (c.X.transpose() * c.y)).lpNorm<Eigen::Infinity>());
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const double b = fit.beta(j);
    const double v = b != 0.0 ? std::abs(g(j) - 2.0 * problem.lambda2 * b - problem.lambda1 * (b > 0 ? 1.0 : -1.0))
                              : std::max(0.0, std::abs(g(j)) - problem.lambda1);
    k.max_violation = std::max(k.max_violation, v);
  }
  return k;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& X) {
  if (X.rows() < 1) fail(ErrorCode::kDimension, "cannot standardize an empty matrix");
  Standardizer s;
  s.mean = X.colwise().mean().transpose();
  s.sd.resize(X.cols());
  s.constant.resize(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double sd = std::sqrt((X.col(j).array() - s.mean(j)).square().mean());
    const bool flat = !(sd > 1e-12 * std::max(1.0, std::abs(s.mean(j))));
    s.constant[static_cast<std::size_t>(j)] = flat;
    s.sd(j) = flat ? 1.0 : sd;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& X) const {
  if (X.cols() != mean.size()) fail(ErrorCode::kDimension, "standardizer fitted on a different column count");
  Eigen::MatrixXd out = (X.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array();
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (constant[static_cast<std::size_t>(j)]) out.col(j).setZero();
  }
  return out;
}

std::size_t Standardizer::constant_count() const {
  return static_cast<std::size_t>(std::count(constant.begin(), constant.end(), true));
}

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& predicted) {
  if (y.size() != predicted.size()) fail(ErrorCode::kDimension, "R^2 inputs differ in length");
  if (y.size() == 0) return 0.0;
  const double ss_tot = (y.array() - y.mean()).square().sum();
  const double ss_res = (y - predicted).squaredNorm();
  return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
}

// ---- ranking -----------------------------------------------------------------------

RegressionRanking rank_filters_by_regression(const nn::Network& net, const EpochedDataset& data,
                                             const RankingConfig& cfg) {
  if (cfg.lambda1_grid.empty() || cfg.lambda2_grid.empty()) fail(ErrorCode::kConfig, "lambda grids must not be empty");
  const auto filters = analysis::extract_spatial_filters(net);
  const auto train = data.indices(Split::kTrain);
  const auto val = data.indices(Split::kVal);
  const auto test = data.indices(Split::kTest);
  for (auto [split, idx] : {std::pair{Split::kTrain, &train}, {Split::kVal, &val}, {Split::kTest, &test}}) {
    if (idx->size() < 2) fail(ErrorCode::kMissingClass, std::string("split '") + split_name(split) + "' has fewer than 2 samples");
  }
  auto response = [&](const std::vector<std::size_t>& idx) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) y(static_cast<Eigen::Index>(i)) = data.info(idx[i]).side == Side::kRight ? 1.0 : 0.0;
    return y;
  };
  const Eigen::VectorXd y_train = response(train), y_val = response(val), y_test = response(test);

  RegressionRanking out;
  for (std::size_t f = 0; f < filters.size(); ++f) {
    FilterRegression row;
    row.filter = f;
    const Eigen::MatrixXd raw = analysis::filter_outputs(filters, data, train, f);
    const auto st = Standardizer::fit(raw);
    row.beta = Eigen::VectorXd::Zero(raw.cols());
    if (st.constant_count() == static_cast<std::size_t>(raw.cols())) {
      row.degenerate = true;
      out.warnings.push_back("spatial filter " + std::to_string(f + 1) + " has a constant feature map; score set to 0");
      out.rows.push_back(std::move(row));
      continue;
    }
    const Eigen::MatrixXd x_train = st.apply(raw);
    const Eigen::MatrixXd x_val = st.apply(analysis::filter_outputs(filters, data, val, f));
    const Eigen::MatrixXd x_test = st.apply(analysis::filter_outputs(filters, data, test, f));

    const Eigen::RowVectorXd x_mean = x_train.colwise().mean();
    const double y_mean = y_train.mean();
    const Eigen::MatrixXd xc = x_train.rowwise() - x_mean;
    const Eigen::VectorXd yc = y_train.array() - y_mean;
    const Eigen::MatrixXd gram = xc.transpose() * xc;
    const Eigen::VectorXd xty = xc.transpose() * yc;
    const double yy = yc.squaredNorm();

    FitOptions opts;
    opts.tol = cfg.tol;
    opts.max_iter = cfg.max_iter;
    double best = -std::numeric_limits<double>::infinity();
    double best_intercept = 0.0;
    bool all_converged = true;
    for (double l2 : cfg.lambda2_grid) {
      Eigen::VectorXd warm = Eigen::VectorXd::Zero(gram.rows());
      for (double l1 : cfg.lambda1_grid) {
        opts.warm_start = &warm;
        auto fit = elastic_net_gram(gram, xty, yy, l1, l2, opts);
        all_converged = all_converged && fit.converged;
        warm = fit.beta;
        const double intercept = y_mean - x_mean.dot(fit.beta);
        const Eigen::VectorXd pred = (x_val * fit.beta).array() + intercept;
        const double r2 = r_squared(y_val, pred);
        if (r2 > best) {
          best = r2;
          best_intercept = intercept;
          row.beta = fit.beta;
          row.lambda1 = l1;
          row.lambda2 = l2;
          row.converged = fit.converged;
        }
      }
    }
    if (!all_converged) {
      out.warnings.push_back("spatial filter " + std::to_string(f + 1) + ": some fits stopped at the iteration limit");
    }
    row.val_r2 = best;
    const Eigen::VectorXd pred = (x_test * row.beta).array() + best_intercept;
    row.score = 100.0 * r_squared(y_test, pred);
    out.rows.push_back(std::move(row));
  }
  std::stable_sort(out.rows.begin(), out.rows.end(),
                   [](const FilterRegression& a, const FilterRegression& b) { return a.score > b.score; });
  return out;
}

std::string ranking_csv(const RegressionRanking& ranking) {
  std::ostringstream os;
  os << "rank,filter,score,val_r2,lambda1,lambda2,degenerate,converged\n";
  for (std::size_t i = 0; i < ranking.rows.size(); ++i) {
    const auto& r = ranking.rows[i];
    os << i + 1 << ",Spatial" << r.filter + 1 << ',' << io::format_double(r.score) << ',' << io::format_double(r.val_r2) << ','
       << io::format_double(r.lambda1) << ',' << io::format_double(r.lambda2) << ',' << (r.degenerate ? 1 : 0) << ','
       << (r.converged ? 1 : 0) << '\n';
  }
  return os.str();
}

BetaHeatmap beta_heatmap(const std::vector<Eigen::VectorXd>& betas, const std::vector<double>& time_ms) {
  BetaHeatmap m;
  m.time_ms = time_ms;
  const auto width = static_cast<Eigen::Index>(time_ms.size());
  m.values.resize(static_cast<Eigen::Index>(betas.size()), width);
  for (std::size_t f = 0; f < betas.size(); ++f) {
    if (betas[f].size() != width) {
      fail(ErrorCode::kDimension, "coefficient vector " + std::to_string(f) + " has " + std::to_string(betas[f].size()) +
                                      " entries, expected " + std::to_string(width));
    }
    m.values.row(static_cast<Eigen::Index>(f)) = betas[f].cwiseAbs().transpose();
  }
  return m;
}

std::string heatmap_csv(const BetaHeatmap& map) {
  std::ostringstream os;
  os << "filter";
  for (double t : map.time_ms) os << ",t" << io::format_double(t);
  os << '\n';
  for (Eigen::Index r = 0; r < map.values.rows(); ++r) {
    os << "Spatial" << r + 1;
    for (Eigen::Index c = 0; c < map.values.cols(); ++c) os << ',' << io::format_double(map.values(r, c));
    os << '\n';
  }
  return os.str();
}

std::string heatmap_svg(const BetaHeatmap& map, const std::string& title) {
  render::HeatmapSpec spec;
  spec.title = title;
  spec.x_label = "time from onset (ms)";
  spec.x = map.time_ms;
  for (Eigen::Index r = 0; r < map.values.rows(); ++r) spec.row_labels.push_back("Spatial" + std::to_string(r + 1));
  return render::heatmap_svg(map.values, spec);
}

}  // namespace eegatt::featsel
