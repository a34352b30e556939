#include "eegatt/layers.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "eegatt/error.hpp"

namespace eegatt::nn {
namespace {

// Splits a (N, ...) or (...) tensor into batch count and per-sample shape.
struct BatchView {
  std::size_t batch;
  Shape sample;
  bool batched;
};

BatchView view_of(const Tensor& t, std::size_t sample_rank, const char* what) {
  if (t.rank() == sample_rank) return {1, t.shape(), false};
  if (t.rank() == sample_rank + 1) {
    return {t.dim(0), Shape(t.shape().begin() + 1, t.shape().end()), true};
  }
  fail(ErrorCode::kDimension, std::string(what) + ": expected rank " + std::to_string(sample_rank) + " or " +
                                  std::to_string(sample_rank + 1) + ", got " + shape_str(t.shape()));
}

Shape with_batch(const BatchView& v, Shape sample) {
  if (!v.batched) return sample;
  sample.insert(sample.begin(), v.batch);
  return sample;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::kDimension, std::string(what) + ": shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

// ---- convolution -------------------------------------------------------------------
//
// Each output row is a sum of GEMMs: for kernel row a, the sliding windows of input
// row i+a are contiguous (kw * Cin) slices starting every Cin values, so they form a
// matrix with row stride Cin that multiplies the (kw * Cin, K) kernel slab.

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWindows = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using ConstMat = Eigen::Map<const RowMat>;
using MutMat = Eigen::Map<RowMat>;

struct ConvDims {
  std::size_t batch, H, W, Cin, kh, kw, K, Ho, Wo, span;
};

ConvDims conv_dims(const BatchView& v, const Tensor& kernels) {
  ConvDims d{};
  d.batch = v.batch;
  d.H = v.sample[0];
  d.W = v.sample[1];
  d.Cin = v.sample[2];
  d.kh = kernels.dim(0);
  d.kw = kernels.dim(1);
  d.K = kernels.dim(3);
  d.Ho = d.H - d.kh + 1;
  d.Wo = d.W - d.kw + 1;
  d.span = d.kw * d.Cin;
  return d;
}

// Single-channel full-height kernels of width 1: out (W, K) = X^T (W, H) * kernels (H, K).
bool is_spatial(const ConvDims& d) { return d.Cin == 1 && d.kw == 1 && d.Ho == 1; }

Eigen::Index ix(std::size_t v) { return static_cast<Eigen::Index>(v); }

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  const auto v = view_of(input, 3, "conv2d input");
  if (kernels.rank() != 4) fail(ErrorCode::kDimension, "conv2d kernels must be rank 4 (kh, kw, Cin, K)");
  const std::size_t H = v.sample[0], W = v.sample[1], Cin = v.sample[2];
  const std::size_t kh = kernels.dim(0), kw = kernels.dim(1), K = kernels.dim(3);
  if (kernels.dim(2) != Cin) {
    fail(ErrorCode::kDimension, "conv2d channel axis: input has " + std::to_string(Cin) + ", kernels expect " +
                                    std::to_string(kernels.dim(2)));
  }
  if (kh > H) fail(ErrorCode::kDimension, "conv2d height axis: kernel " + std::to_string(kh) + " > input " + std::to_string(H));
  if (kw > W) fail(ErrorCode::kDimension, "conv2d width axis: kernel " + std::to_string(kw) + " > input " + std::to_string(W));
  if (bias.size() != K) fail(ErrorCode::kDimension, "conv2d bias length " + std::to_string(bias.size()) + " != " + std::to_string(K));

  const auto d = conv_dims(v, kernels);
  Tensor out(with_batch(v, {d.Ho, d.Wo, K}));
  const Eigen::Map<const Eigen::RowVectorXd> b(bias.data(), ix(K));

  for (std::size_t n = 0; n < d.batch; ++n) {
    if (is_spatial(d)) {
      const ConstMat x(input.data() + n * H * W, ix(H), ix(W));
      const ConstMat w(kernels.data(), ix(H), ix(K));
      MutMat o(out.data() + n * W * K, ix(W), ix(K));
      o.noalias() = x.transpose() * w;
      o.rowwise() += b;
      continue;
    }
    for (std::size_t i = 0; i < d.Ho; ++i) {
      MutMat o(out.data() + ((n * d.Ho + i) * d.Wo) * K, ix(d.Wo), ix(K));
      o.rowwise() = b;
      for (std::size_t a = 0; a < kh; ++a) {
        const ConstWindows x(input.data() + ((n * H + i + a) * W) * Cin, ix(d.Wo), ix(d.span), Eigen::OuterStride<>(ix(Cin)));
        const ConstMat w(kernels.data() + a * d.span * K, ix(d.span), ix(K));
        o.noalias() += x * w;
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out) {
  const auto v = view_of(input, 3, "conv2d input");
  const auto d = conv_dims(v, kernels);
  if (grad_out.shape() != with_batch(v, {d.Ho, d.Wo, d.K})) {
    fail(ErrorCode::kDimension, "conv2d backward: upstream gradient shape " + shape_str(grad_out.shape()));
  }
  const std::size_t K = d.K;
  Conv2dGrads g{Tensor(input.shape()), Tensor(kernels.shape()), Tensor({K})};
  Eigen::Map<Eigen::RowVectorXd> db(g.bias.data(), ix(K));
  RowMat window_grad(ix(d.Wo), ix(d.span));

  for (std::size_t n = 0; n < d.batch; ++n) {
    if (is_spatial(d)) {
      const ConstMat x(input.data() + n * d.H * d.W, ix(d.H), ix(d.W));
      const ConstMat gy(grad_out.data() + n * d.W * K, ix(d.W), ix(K));
      const ConstMat w(kernels.data(), ix(d.H), ix(K));
      MutMat dw(g.kernels.data(), ix(d.H), ix(K));
      MutMat dx(g.input.data() + n * d.H * d.W, ix(d.H), ix(d.W));
      db += gy.colwise().sum();
      dw.noalias() += x * gy;
      dx.noalias() = w * gy.transpose();
      continue;
    }
    for (std::size_t i = 0; i < d.Ho; ++i) {
      const ConstMat gy(grad_out.data() + ((n * d.Ho + i) * d.Wo) * K, ix(d.Wo), ix(K));
      db += gy.colwise().sum();
      for (std::size_t a = 0; a < d.kh; ++a) {
        const std::size_t row = ((n * d.H + i + a) * d.W) * d.Cin;
        const ConstWindows x(input.data() + row, ix(d.Wo), ix(d.span), Eigen::OuterStride<>(ix(d.Cin)));
        const ConstMat w(kernels.data() + a * d.span * K, ix(d.span), ix(K));
        MutMat dw(g.kernels.data() + a * d.span * K, ix(d.span), ix(K));
        dw.noalias() += x.transpose() * gy;
        window_grad.noalias() = gy * w.transpose();
        // Overlapping windows: scatter-add each window gradient back into the row.
        double* dx = g.input.data() + row;
        for (std::size_t j = 0; j < d.Wo; ++j) {
          const double* src = window_grad.data() + j * d.span;
          double* dst = dx + j * d.Cin;
          for (std::size_t q = 0; q < d.span; ++q) dst[q] += src[q];
        }
      }
    }
  }
  return g;
}

// ---- batch normalization -----------------------------------------------------------

Tensor batchnorm_forward(const Tensor& x, const BatchNormState& state, Mode mode, BatchNormCache& cache) {
  cache.mode = mode;
  const std::size_t m = x.size();
  Tensor y(x.shape());
  if (mode == Mode::kTrain) {
    const std::size_t batch = x.rank() > 0 ? x.dim(0) : 0;
    if (batch < 2) fail(ErrorCode::kState, "batchnorm: train mode needs a batch of at least 2 samples");
    double sum = 0.0;
    for (double v : x.values()) sum += v;
    const double mean = sum / static_cast<double>(m);
    double ss = 0.0;
    for (double v : x.values()) ss += (v - mean) * (v - mean);
    const double var = ss / static_cast<double>(m);
    cache.mean = mean;
    cache.var = var;
    cache.inv_std = 1.0 / std::sqrt(var + state.epsilon);
  } else {
    cache.mean = state.running_mean;
    cache.var = state.running_var;
    cache.inv_std = 1.0 / std::sqrt(state.running_var + state.epsilon);
  }
  cache.normalized = Tensor(x.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double xh = (x[i] - cache.mean) * cache.inv_std;
    cache.normalized[i] = xh;
    y[i] = state.gamma * xh + state.beta;
  }
  return y;
}

BatchNormGrads batchnorm_backward(const Tensor& grad_out, const BatchNormState& state, const BatchNormCache& cache) {
  require_same_shape(grad_out, cache.normalized, "batchnorm backward");
  const std::size_t m = grad_out.size();
  BatchNormGrads g{Tensor(grad_out.shape()), 0.0, 0.0};
  double sum_dy = 0.0, sum_dy_xh = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sum_dy += grad_out[i];
    sum_dy_xh += grad_out[i] * cache.normalized[i];
  }
  g.gamma = sum_dy_xh;
  g.beta = sum_dy;
  const double scale = state.gamma * cache.inv_std;
  if (cache.mode == Mode::kTrain) {
    const double mean_dy = sum_dy / static_cast<double>(m);
    const double mean_dy_xh = sum_dy_xh / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
      g.input[i] = scale * (grad_out[i] - mean_dy - cache.normalized[i] * mean_dy_xh);
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) g.input[i] = scale * grad_out[i];
  }
  return g;
}

void batchnorm_update_running(BatchNormState& state, const BatchNormCache& cache) {
  if (cache.mode != Mode::kTrain) return;
  state.running_mean = state.momentum * state.running_mean + (1.0 - state.momentum) * cache.mean;
  state.running_var = state.momentum * state.running_var + (1.0 - state.momentum) * cache.var;
}

// ---- pointwise ---------------------------------------------------------------------

Tensor elu_forward(const Tensor& x, double alpha) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : alpha * std::expm1(x[i]);
  return y;
}

Tensor elu_backward(const Tensor& x, const Tensor& grad_out, double alpha) {
  require_same_shape(x, grad_out, "elu backward");
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = grad_out[i] * (x[i] > 0.0 ? 1.0 : alpha * std::exp(x[i]));
  return g;
}

Tensor sigmoid_forward(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    if (v >= 0.0) {
      y[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      y[i] = e / (1.0 + e);
    }
  }
  return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out) {
  require_same_shape(y, grad_out, "sigmoid backward");
  Tensor g(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) g[i] = grad_out[i] * y[i] * (1.0 - y[i]);
  return g;
}

Tensor softmax_forward(const Tensor& x) {
  if (x.rank() == 0) fail(ErrorCode::kDimension, "softmax of a scalar");
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.size() / d;
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * d;
    double* out = y.data() + r * d;
    const double mx = *std::max_element(in, in + d);
    double sum = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      out[k] = std::exp(in[k] - mx);
      sum += out[k];
    }
    for (std::size_t k = 0; k < d; ++k) out[k] /= sum;
  }
  return y;
}

Tensor softmax_backward(const Tensor& y, const Tensor& grad_out) {
  require_same_shape(y, grad_out, "softmax backward");
  const std::size_t d = y.shape().back();
  const std::size_t rows = y.size() / d;
  Tensor g(y.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = y.data() + r * d;
    const double* go = grad_out.data() + r * d;
    double dot = 0.0;
    for (std::size_t k = 0; k < d; ++k) dot += p[k] * go[k];
    for (std::size_t k = 0; k < d; ++k) g[r * d + k] = p[k] * (go[k] - dot);
  }
  return g;
}

Tensor multiply_forward(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "multiply");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
  return y;
}

// ---- pooling / dropout -------------------------------------------------------------

PoolResult maxpool_forward(const Tensor& x, std::size_t pool_w, std::size_t stride) {
  if (x.rank() < 2) fail(ErrorCode::kDimension, "maxpool needs at least (time, feature) axes");
  if (pool_w == 0 || stride == 0) fail(ErrorCode::kConfig, "maxpool window and stride must be positive");
  const std::size_t K = x.shape().back();
  const std::size_t W = x.shape()[x.rank() - 2];
  if (W < pool_w) {
    fail(ErrorCode::kDimension, "maxpool time axis: width " + std::to_string(W) + " < pool " + std::to_string(pool_w));
  }
  const std::size_t Wo = (W - pool_w) / stride + 1;
  const std::size_t outer = x.size() / (W * K);
  Shape os = x.shape();
  os[os.size() - 2] = Wo;
  PoolResult r{Tensor(os), std::vector<std::uint32_t>(shape_size(os))};
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < Wo; ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        std::size_t best = (o * W + j * stride) * K + k;
        for (std::size_t s = 1; s < pool_w; ++s) {
          const std::size_t idx = (o * W + j * stride + s) * K + k;
          if (x[idx] > x[best]) best = idx;
        }
        const std::size_t out_idx = (o * Wo + j) * K + k;
        r.output[out_idx] = x[best];
        r.argmax[out_idx] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

Tensor maxpool_backward(const Shape& input_shape, std::span<const std::uint32_t> argmax, const Tensor& grad_out) {
  if (argmax.size() != grad_out.size()) fail(ErrorCode::kState, "maxpool backward: argmax/gradient size mismatch");
  Tensor g(input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

DropoutResult dropout_forward(const Tensor& x, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::kConfig, "dropout rate must lie in [0, 1), got " + std::to_string(p));
  if (mode == Mode::kInfer || p == 0.0) return {x, {}};
  DropoutResult r{Tensor(x.shape()), std::vector<double>(x.size())};
  const double keep = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.mask[i] = rng.uniform() < p ? 0.0 : keep;
    r.output[i] = x[i] * r.mask[i];
  }
  return r;
}

Tensor dropout_backward(std::span<const double> mask, const Tensor& grad_out) {
  if (mask.empty()) return grad_out;
  if (mask.size() != grad_out.size()) fail(ErrorCode::kState, "dropout backward: mask size mismatch");
  Tensor g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * mask[i];
  return g;
}

// ---- dense / embedding -------------------------------------------------------------

Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  const auto v = view_of(x, 1, "dense input");
  if (weights.rank() != 2) fail(ErrorCode::kDimension, "dense weights must be (in, out)");
  const std::size_t F = v.sample[0], U = weights.dim(1);
  if (weights.dim(0) != F) {
    fail(ErrorCode::kDimension, "dense input axis: got " + std::to_string(F) + " features, weights expect " +
                                    std::to_string(weights.dim(0)));
  }
  if (bias.size() != U) fail(ErrorCode::kDimension, "dense bias length mismatch");
  Tensor y(with_batch(v, {U}));
  for (std::size_t n = 0; n < v.batch; ++n) {
    double* out = y.data() + n * U;
    std::copy(bias.data(), bias.data() + U, out);
    const double* in = x.data() + n * F;
    for (std::size_t f = 0; f < F; ++f) {
      const double xv = in[f];
      const double* wr = weights.data() + f * U;
      for (std::size_t u = 0; u < U; ++u) out[u] += xv * wr[u];
    }
  }
  return y;
}

DenseGrads dense_backward(const Tensor& x, const Tensor& weights, const Tensor& grad_out) {
  const auto v = view_of(x, 1, "dense input");
  const std::size_t F = v.sample[0], U = weights.dim(1);
  if (grad_out.size() != v.batch * U) fail(ErrorCode::kDimension, "dense backward: upstream gradient size mismatch");
  DenseGrads g{Tensor(x.shape()), Tensor(weights.shape()), Tensor({U})};
  for (std::size_t n = 0; n < v.batch; ++n) {
    const double* go = grad_out.data() + n * U;
    const double* in = x.data() + n * F;
    double* gi = g.input.data() + n * F;
    for (std::size_t u = 0; u < U; ++u) g.bias[u] += go[u];
    for (std::size_t f = 0; f < F; ++f) {
      const double* wr = weights.data() + f * U;
      double* gw = g.weights.data() + f * U;
      const double xv = in[f];
      double acc = 0.0;
      for (std::size_t u = 0; u < U; ++u) {
        gw[u] += xv * go[u];
        acc += wr[u] * go[u];
      }
      gi[f] = acc;
    }
  }
  return g;
}

Tensor embedding_forward(std::span<const int> indices, const Tensor& table) {
  if (table.rank() != 2) fail(ErrorCode::kDimension, "embedding table must be (V, D)");
  const std::size_t V = table.dim(0), D = table.dim(1);
  Tensor y({indices.size(), 1, D});
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const int idx = indices[n];
    if (idx < 0 || static_cast<std::size_t>(idx) >= V) {
      fail(ErrorCode::kLookup, "embedding index " + std::to_string(idx) + " outside [0, " + std::to_string(V) + ")");
    }
    std::copy_n(table.data() + static_cast<std::size_t>(idx) * D, D, y.data() + n * D);
  }
  return y;
}

Tensor embedding_backward(std::span<const int> indices, const Shape& table_shape, const Tensor& grad_out) {
  const std::size_t D = table_shape.at(1);
  if (grad_out.size() != indices.size() * D) fail(ErrorCode::kDimension, "embedding backward: gradient size mismatch");
  Tensor g(table_shape);
  for (std::size_t n = 0; n < indices.size(); ++n) {
    double* row = g.data() + static_cast<std::size_t>(indices[n]) * D;
    const double* go = grad_out.data() + n * D;
    for (std::size_t d = 0; d < D; ++d) row[d] += go[d];
  }
  return g;
}

}  // namespace eegatt::nn
