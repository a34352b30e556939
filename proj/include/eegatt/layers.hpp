#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "eegatt/rng.hpp"
#include "eegatt/tensor.hpp"

// Differentiable layer primitives. Every function accepts either a single sample or a
// batch with a leading sample axis; shapes below omit the batch axis.
namespace eegatt::nn {

enum class Mode { kTrain, kInfer };

// ---- convolution -------------------------------------------------------------------

// Valid cross-correlation, stride 1, no kernel flip.
// input (H, W, Cin), kernels (kh, kw, Cin, K), bias (K) -> (H-kh+1, W-kw+1, K).
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);

struct Conv2dGrads {
  Tensor input;
  Tensor kernels;
  Tensor bias;
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out);

// ---- batch normalization -----------------------------------------------------------

// One scalar (mean, variance) pair shared by every position of the layer.
struct BatchNormState {
  double gamma = 1.0;
  double beta = 0.0;
  double running_mean = 0.0;
  double running_var = 1.0;
  double epsilon = 1e-3;
  double momentum = 0.99;
};

struct BatchNormCache {
  Mode mode = Mode::kInfer;
  Tensor normalized;  // x-hat
  double mean = 0.0;
  double var = 0.0;
  double inv_std = 0.0;
};

Tensor batchnorm_forward(const Tensor& x, const BatchNormState& state, Mode mode, BatchNormCache& cache);

struct BatchNormGrads {
  Tensor input;
  double gamma = 0.0;
  double beta = 0.0;
};
BatchNormGrads batchnorm_backward(const Tensor& grad_out, const BatchNormState& state, const BatchNormCache& cache);

// Exponential moving average of the batch statistics recorded in a train-mode cache.
void batchnorm_update_running(BatchNormState& state, const BatchNormCache& cache);

// ---- pointwise ---------------------------------------------------------------------

Tensor elu_forward(const Tensor& x, double alpha = 1.0);
Tensor elu_backward(const Tensor& x, const Tensor& grad_out, double alpha = 1.0);

Tensor sigmoid_forward(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out);

// Normalizes over the last axis.
Tensor softmax_forward(const Tensor& x);
Tensor softmax_backward(const Tensor& y, const Tensor& grad_out);

Tensor multiply_forward(const Tensor& a, const Tensor& b);

// ---- pooling / dropout -------------------------------------------------------------

// Max over windows of the time axis (second to last). Trailing columns that do not
// fill a window are dropped.
struct PoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // flat input index of each output cell
};
PoolResult maxpool_forward(const Tensor& x, std::size_t pool_w = 3, std::size_t stride = 3);
Tensor maxpool_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax, const Tensor& grad_out);

// Inverted dropout: survivors are scaled by 1/(1-p). The mask stores the factor
// applied to each element (0 or 1/(1-p)); it is empty in infer mode.
struct DropoutResult {
  Tensor output;
  std::vector<double> mask;
};
DropoutResult dropout_forward(const Tensor& x, double p, Mode mode, Rng& rng);
Tensor dropout_backward(std::span<const double> mask, const Tensor& grad_out);

// ---- dense / embedding -------------------------------------------------------------

// x (F) or (N, F); weights (F, U); bias (U).
Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};
DenseGrads dense_backward(const Tensor& x, const Tensor& weights, const Tensor& grad_out);

// indices hold one integer per sample; table (V, D) -> (N, 1, D).
Tensor embedding_forward(std::span<const int> indices, const Tensor& table);
Tensor embedding_backward(std::span<const int> indices, const Shape& table_shape, const Tensor& grad_out);

}  // namespace eegatt::nn
