#include "eegatt/roc.hpp"

#include <algorithm>
#include <numeric>

#include "eegatt/error.hpp"

namespace eegatt::analysis {

std::optional<double> roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) fail(ErrorCode::kDimension, "roc_auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1 .. j share the midrank.
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] != 0) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double p = static_cast<double>(n_pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(n_neg));
}

OvrAuc macro_ovr(const Tensor& scores, std::span<const int> labels) {
  if (scores.rank() != 2 || scores.dim(0) != labels.size()) fail(ErrorCode::kDimension, "macro_ovr: scores must be (N, K)");
  const std::size_t n = scores.dim(0), k = scores.dim(1);
  OvrAuc r;
  double sum = 0.0;
  std::vector<double> col(n);
  std::vector<int> bin(n);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = scores[i * k + c];
      bin[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
    }
    auto auc = roc_auc(col, bin);
    if (auc) {
      sum += *auc;
      ++r.defined;
    }
    r.per_class.push_back(auc);
  }
  r.macro = r.defined ? sum / static_cast<double>(r.defined) : 0.0;
  return r;
}

}  // namespace eegatt::analysis
