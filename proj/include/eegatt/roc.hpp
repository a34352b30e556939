#pragma once

#include <optional>
#include <span>
#include <vector>

#include "eegatt/tensor.hpp"

namespace eegatt::analysis {

// P(score_pos > score_neg) + 0.5 * P(tie), computed from midranks. Empty when the
// labels contain only one class.
std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels);

struct OvrAuc {
  std::vector<std::optional<double>> per_class;
  double macro = 0.0;  // mean over the classes with a defined AUC
  std::size_t defined = 0;
};

// scores (N, K); labels in [0, K).
OvrAuc macro_ovr(const Tensor& scores, std::span<const int> labels);

}  // namespace eegatt::analysis
