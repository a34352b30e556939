#include "eegatt/optim.hpp"

#include <algorithm>
#include <cmath>

#include "eegatt/error.hpp"

namespace eegatt::optim {
namespace {

void check_onehot(std::span<const double> target) {
  int ones = 0;
  for (double t : target) {
    if (t == 1.0) {
      ++ones;
    } else if (t != 0.0) {
      fail(ErrorCode::kLabel, "target is not one-hot");
    }
  }
  if (ones != 1) fail(ErrorCode::kLabel, "target is not one-hot");
}

double clip(double p) { return std::clamp(p, kProbClip, 1.0 - kProbClip); }
bool clipped(double p) { return p < kProbClip || p > 1.0 - kProbClip; }

void check_pair(const Tensor& probs, const Tensor& targets) {
  if (probs.shape() != targets.shape() || probs.rank() != 2) {
    fail(ErrorCode::kDimension, "loss expects (N, K) probabilities and targets, got " + shape_str(probs.shape()) +
                                    " and " + shape_str(targets.shape()));
  }
}

}  // namespace

double LrSchedule::at(std::size_t epoch) const { return base / (1.0 + decay * static_cast<double>(epoch)); }

void adam_step(nn::ParamBundle& params, const std::vector<Tensor>& grads, AdamState& state, double lr) {
  auto& ps = params.params;
  if (grads.size() != ps.size()) fail(ErrorCode::kDimension, "adam: gradient count does not match parameters");
  if (state.m.size() != ps.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : ps) {
      state.m.emplace_back(p.value.shape());
      state.v.emplace_back(p.value.shape());
    }
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps[i].trainable) continue;
    if (grads[i].shape() != ps[i].value.shape()) fail(ErrorCode::kDimension, "adam: gradient shape mismatch for " + ps[i].name);
    if (!grads[i].all_finite()) fail(ErrorCode::kTraining, "non-finite gradient in parameter '" + ps[i].name + "'");
  }
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!ps[i].trainable) continue;
    double* w = ps[i].value.data();
    double* m = state.m[i].data();
    double* v = state.v[i].data();
    const double* g = grads[i].data();
    const std::size_t n = ps[i].value.size();
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      w[k] -= lr * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

double categorical_ce(std::span<const double> probs, std::span<const double> onehot) {
  if (probs.size() != onehot.size()) fail(ErrorCode::kDimension, "categorical_ce: length mismatch");
  check_onehot(onehot);
  double loss = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k)
    if (onehot[k] != 0.0) loss -= onehot[k] * std::log(clip(probs[k]));
  return loss;
}

double binary_ce(std::span<const double> probs, std::span<const double> onehot) {
  if (probs.size() != onehot.size() || probs.empty()) fail(ErrorCode::kDimension, "binary_ce: length mismatch");
  check_onehot(onehot);
  double loss = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double p = clip(probs[k]);
    loss -= onehot[k] * std::log(p) + (1.0 - onehot[k]) * std::log(1.0 - p);
  }
  return loss / static_cast<double>(probs.size());
}

LossResult categorical_ce_batch(const Tensor& probs, const Tensor& targets) {
  check_pair(probs, targets);
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  LossResult r{0.0, Tensor(probs.shape())};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> p(probs.data() + i * k, k), t(targets.data() + i * k, k);
    r.loss += categorical_ce(p, t);
    for (std::size_t j = 0; j < k; ++j) {
      if (t[j] != 0.0 && !clipped(p[j])) r.grad[i * k + j] = -t[j] / p[j] * inv_n;
    }
  }
  r.loss *= inv_n;
  return r;
}

LossResult binary_ce_batch(const Tensor& probs, const Tensor& targets) {
  check_pair(probs, targets);
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  LossResult r{0.0, Tensor(probs.shape())};
  const double scale = 1.0 / static_cast<double>(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> p(probs.data() + i * k, k), t(targets.data() + i * k, k);
    r.loss += binary_ce(p, t);
    for (std::size_t j = 0; j < k; ++j) {
      if (clipped(p[j])) continue;
      r.grad[i * k + j] = -(t[j] / p[j] - (1.0 - t[j]) / (1.0 - p[j])) * scale;
    }
  }
  r.loss /= static_cast<double>(n);
  return r;
}

void JointLossConfig::validate() const {
  if (!(alpha_relative >= 0.0 && alpha_attended >= 0.0) || alpha_relative + alpha_attended <= 0.0) {
    fail(ErrorCode::kConfig, "joint loss weights must be non-negative with a positive sum");
  }
}

double joint_loss(double relative_loss, double attended_loss, const JointLossConfig& cfg) {
  return cfg.alpha_relative * relative_loss + cfg.alpha_attended * attended_loss;
}

bool RegConfig::applies(nn::RegGroup group) const {
  return (group == nn::RegGroup::kConv && conv) || (group == nn::RegGroup::kDense && dense);
}

double reg_penalty(const nn::ParamBundle& params, const RegConfig& cfg, std::vector<Tensor>* grads) {
  double penalty = 0.0;
  for (std::size_t i = 0; i < params.params.size(); ++i) {
    const auto& p = params.params[i];
    if (!cfg.applies(p.reg_group)) continue;
    double* g = grads ? (*grads)[i].data() : nullptr;
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double w = p.value[k];
      penalty += cfg.l1 * std::abs(w) + cfg.l2 * w * w;
      if (g) g[k] += cfg.l1 * (w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0)) + 2.0 * cfg.l2 * w;
    }
  }
  return penalty;
}

}  // namespace eegatt::optim
