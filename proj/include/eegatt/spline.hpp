#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "eegatt/montage.hpp"

namespace eegatt {

struct SplineConfig {
  int order = 4;         // m
  int terms = 50;        // Legendre terms
  double lambda = 1e-5;  // ridge added to the diagonal
};

// Perrin's spherical spline kernel g_m(cos angle).
double spline_kernel(double cos_angle, const SplineConfig& cfg);

// Spherical-spline interpolator fitted to a fixed set of source sites. The bordered
// system [G + lambda I, 1; 1', 0] is factored once and reused for every field.
class SphericalSpline {
 public:
  SphericalSpline(std::vector<Vec3> sources, SplineConfig cfg = {});

  std::size_t sources() const { return sources_.size(); }
  // Reciprocal condition estimate of the bordered system.
  double rcond() const { return rcond_; }

  // (targets x sources) matrix mapping source values to target values.
  Eigen::MatrixXd interpolation_matrix(const std::vector<Vec3>& targets) const;
  std::vector<double> evaluate(std::span<const double> values, const std::vector<Vec3>& targets) const;

 private:
  std::vector<Vec3> sources_;
  SplineConfig cfg_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  double rcond_ = 0.0;
};

}  // namespace eegatt
