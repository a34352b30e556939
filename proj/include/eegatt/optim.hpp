#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "eegatt/network.hpp"
#include "eegatt/tensor.hpp"

namespace eegatt::optim {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;  // first moments, mirroring the parameter shapes
  std::vector<Tensor> v;  // second moments
  std::uint64_t step = 0;
};

// Hyperbolic per-epoch decay: base / (1 + decay * epoch).
struct LrSchedule {
  double base = 0.01;
  double decay = 0.001;
  double at(std::size_t epoch) const;
};

// Bias-corrected Adam update of every trainable parameter. Throws a training error
// naming the parameter when a gradient is not finite.
void adam_step(nn::ParamBundle& params, const std::vector<Tensor>& grads, AdamState& state, double lr);

// Probabilities are clipped to [1e-12, 1 - 1e-12] before the log.
inline constexpr double kProbClip = 1e-12;

double categorical_ce(std::span<const double> probs, std::span<const double> onehot);
// Averaged over the output units.
double binary_ce(std::span<const double> probs, std::span<const double> onehot);

struct LossResult {
  double loss = 0.0;  // mean over the batch
  Tensor grad;        // d(loss)/d(probs)
};
LossResult categorical_ce_batch(const Tensor& probs, const Tensor& targets);
LossResult binary_ce_batch(const Tensor& probs, const Tensor& targets);

struct JointLossConfig {
  double alpha_relative = 0.4;
  double alpha_attended = 0.6;
  void validate() const;
};

double joint_loss(double relative_loss, double attended_loss, const JointLossConfig& cfg);

struct RegConfig {
  double l1 = 0.001;
  double l2 = 0.001;
  bool conv = true;    // convolution kernels
  bool dense = false;  // dense weights
  bool applies(nn::RegGroup group) const;
};

// l1 * sum|w| + l2 * sum w^2 over the selected parameter groups. When `grads` is given the
// penalty gradient (subgradient 0 at w = 0) is added into it.
double reg_penalty(const nn::ParamBundle& params, const RegConfig& cfg, std::vector<Tensor>* grads = nullptr);

}  // namespace eegatt::optim
