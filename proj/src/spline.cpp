#include "eegatt/spline.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "eegatt/error.hpp"

namespace eegatt {

double spline_kernel(double x, const SplineConfig& cfg) {
  double p_prev = 1.0, p = x;  // P0, P1
  double sum = 0.0;
  for (int n = 1; n <= cfg.terms; ++n) {
    const double nn = static_cast<double>(n);
    sum += (2.0 * nn + 1.0) / std::pow(nn * (nn + 1.0), cfg.order) * p;
    const double next = ((2.0 * nn + 1.0) * x * p - nn * p_prev) / (nn + 1.0);
    p_prev = p;
    p = next;
  }
  return sum / (4.0 * std::numbers::pi);
}

SphericalSpline::SphericalSpline(std::vector<Vec3> sources, SplineConfig cfg) : sources_(std::move(sources)), cfg_(cfg) {
  const auto n = static_cast<Eigen::Index>(sources_.size());
  if (n < 4) fail(ErrorCode::kPreprocess, "spherical spline needs at least 4 source electrodes, got " + std::to_string(n));
  if (cfg_.order < 2 || cfg_.terms < 1 || cfg_.lambda < 0.0) fail(ErrorCode::kConfig, "invalid spherical spline parameters");

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double g = spline_kernel(dot(sources_[i], sources_[j]), cfg_);
      a(i, j) = g;
      a(j, i) = g;
    }
    a(i, i) += cfg_.lambda;
    a(i, n) = 1.0;
    a(n, i) = 1.0;
  }
  lu_.compute(a);
  rcond_ = lu_.rcond();
  if (!(rcond_ > 1e-14)) {
    std::ostringstream os;
    os << "spherical spline system is singular (reciprocal condition " << rcond_ << ", " << n
       << " sources; duplicate electrode positions?)";
    fail(ErrorCode::kNumerical, os.str());
  }
}

Eigen::MatrixXd SphericalSpline::interpolation_matrix(const std::vector<Vec3>& targets) const {
  const auto n = static_cast<Eigen::Index>(sources_.size());
  const auto t = static_cast<Eigen::Index>(targets.size());
  Eigen::MatrixXd k(t, n + 1);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = spline_kernel(dot(targets[i], sources_[j]), cfg_);
    k(i, n) = 1.0;
  }
  // value = [K 1] A^-1 [v; 0]; only the first n columns of A^-1 matter.
  const Eigen::MatrixXd inv = lu_.inverse();
  return k * inv.leftCols(n);
}

std::vector<double> SphericalSpline::evaluate(std::span<const double> values, const std::vector<Vec3>& targets) const {
  if (values.size() != sources_.size()) fail(ErrorCode::kDimension, "spline values do not match the source count");
  const auto w = interpolation_matrix(targets);
  const Eigen::Map<const Eigen::VectorXd> v(values.data(), static_cast<Eigen::Index>(values.size()));
  const Eigen::VectorXd out = w * v;
  return {out.data(), out.data() + out.size()};
}

}  // namespace eegatt
