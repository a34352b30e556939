#include "eegatt/spatial.hpp"

#include "eegatt/error.hpp"

namespace eegatt::analysis {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> sample_map(const EpochedDataset& data, std::size_t i) {
  const auto x = data.eeg(i);
  return {x.data(), static_cast<Eigen::Index>(data.electrodes()), static_cast<Eigen::Index>(data.time_points())};
}

void check_electrodes(const SpatialFilterSet& f, const EpochedDataset& data) {
  if (static_cast<std::size_t>(f.weights.cols()) != data.electrodes()) {
    fail(ErrorCode::kDimension, "spatial filters span " + std::to_string(f.weights.cols()) + " electrodes, dataset has " +
                                    std::to_string(data.electrodes()));
  }
}

}  // namespace

SpatialFilterSet extract_spatial_filters(const nn::Network& net) {
  for (const auto& L : net.spec().layers) {
    if (L.kind != nn::LayerKind::kSpatialConv) continue;
    const auto* kernel = net.params().find(L.name + "/kernel");
    const auto* bias = net.params().find(L.name + "/bias");
    if (kernel == nullptr || bias == nullptr) fail(ErrorCode::kStructure, "spatial layer '" + L.name + "' has no parameters");
    const std::size_t e = L.kernel_h;
    const std::size_t f = L.filters;
    SpatialFilterSet s;
    s.layer = L.name;
    s.weights.resize(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(e));
    s.bias.resize(static_cast<Eigen::Index>(f));
    // kernel layout (kh, kw = 1, cin = 1, filters)
    for (std::size_t i = 0; i < e; ++i) {
      for (std::size_t j = 0; j < f; ++j) s.weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = kernel->value[i * f + j];
    }
    for (std::size_t j = 0; j < f; ++j) s.bias(static_cast<Eigen::Index>(j)) = bias->value[j];
    return s;
  }
  fail(ErrorCode::kStructure, "model '" + net.spec().name + "' has no spatial convolution layer");
}

Eigen::MatrixXd filter_outputs(const SpatialFilterSet& filters, const EpochedDataset& data,
                               std::span<const std::size_t> idx, std::size_t filter, bool with_bias) {
  check_electrodes(filters, data);
  if (filter >= filters.size()) fail(ErrorCode::kLookup, "spatial filter index " + std::to_string(filter) + " out of range");
  const auto row = static_cast<Eigen::Index>(filter);
  const double b = with_bias ? filters.bias(row) : 0.0;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(data.time_points()));
  for (std::size_t n = 0; n < idx.size(); ++n) {
    out.row(static_cast<Eigen::Index>(n)) = (filters.weights.row(row) * sample_map(data, idx[n])).array() + b;
  }
  return out;
}

Eigen::MatrixXd sample_outputs(const SpatialFilterSet& filters, const EpochedDataset& data, std::size_t sample,
                               bool with_bias) {
  check_electrodes(filters, data);
  Eigen::MatrixXd out = filters.weights * sample_map(data, sample);
  if (with_bias) out.colwise() += filters.bias;
  return out;
}

}  // namespace eegatt::analysis
