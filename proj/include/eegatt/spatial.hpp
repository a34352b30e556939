#pragma once

#include <span>
#include <string>

#include <Eigen/Dense>

#include "eegatt/dataset.hpp"
#include "eegatt/network.hpp"

namespace eegatt::analysis {

// First-layer spatial kernels: one row of electrode weights per filter.
struct SpatialFilterSet {
  std::string layer;
  Eigen::MatrixXd weights;  // (filters, electrodes)
  Eigen::VectorXd bias;     // (filters)
  std::size_t size() const { return static_cast<std::size_t>(weights.rows()); }
};

// Raises a structure error when the network has no spatial convolution.
SpatialFilterSet extract_spatial_filters(const nn::Network& net);

// Output of one filter for every listed sample: (samples, time points).
Eigen::MatrixXd filter_outputs(const SpatialFilterSet& filters, const EpochedDataset& data,
                               std::span<const std::size_t> idx, std::size_t filter, bool with_bias = true);

// All filters for one sample: (filters, time points).
Eigen::MatrixXd sample_outputs(const SpatialFilterSet& filters, const EpochedDataset& data, std::size_t sample,
                               bool with_bias = true);

}  // namespace eegatt::analysis
