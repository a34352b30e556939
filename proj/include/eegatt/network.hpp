#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eegatt/layers.hpp"
#include "eegatt/tensor.hpp"

namespace eegatt::nn {

enum class LayerKind {
  kInput,
  kSpatialConv,
  kTemporalConv,
  kBatchNorm,
  kElu,
  kMaxPool,
  kDropout,
  kFlatten,
  kDense,
  kEmbedding,
  kMultiply,
  kSoftmax,
  kSigmoid,
};

std::string_view layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(std::string_view name);

// One node of the layer graph. Only the fields relevant to `kind` are read.
struct LayerSpec {
  LayerKind kind = LayerKind::kInput;
  std::string name;
  std::vector<std::string> inputs;

  Shape shape;               // input: per-sample shape
  bool index_input = false;  // input: carries one integer label per sample

  std::size_t kernel_h = 0;  // convolutions
  std::size_t kernel_w = 0;
  std::size_t filters = 0;

  std::size_t pool_w = 3;  // max pooling
  std::size_t pool_stride = 3;

  double rate = 0.0;  // dropout

  std::size_t units = 0;  // dense

  std::size_t vocab = 0;  // embedding
  std::size_t embed_dim = 0;

  double epsilon = 1e-3;  // batch norm
  double momentum = 0.99;

  bool operator==(const LayerSpec&) const = default;
};

// A named network output and the task it answers ("relative" or "attended").
struct OutputHead {
  std::string task;
  std::string layer;
  bool operator==(const OutputHead&) const = default;
};

struct NetworkSpec {
  std::string name;
  std::vector<LayerSpec> layers;  // topological order
  std::vector<OutputHead> outputs;
  bool operator==(const NetworkSpec&) const = default;
};

struct ParamCount {
  std::size_t total = 0;
  std::size_t trainable = 0;
  std::size_t non_trainable() const { return total - trainable; }
};

// Per-sample output shape of every layer; validates the graph.
std::vector<Shape> infer_shapes(const NetworkSpec& spec);

// Exact parameter count by layer summation.
ParamCount param_count(const NetworkSpec& spec);

// Weight-penalty group of a parameter.
enum class RegGroup : std::uint8_t { kNone = 0, kConv = 1, kDense = 2 };

struct Param {
  std::string name;
  Tensor value;
  bool trainable = true;
  RegGroup reg_group = RegGroup::kNone;
};

struct ParamBundle {
  std::vector<Param> params;

  ParamCount count() const;
  const Param* find(std::string_view name) const;
  Param* find(std::string_view name);
};

struct ForwardCache {
  std::vector<Tensor> inputs;       // per Input layer, in declaration order
  std::vector<Tensor> activations;  // per layer output
  std::vector<std::vector<std::uint32_t>> pool_argmax;
  std::vector<std::vector<double>> dropout_masks;
  std::vector<BatchNormCache> batchnorm;
  std::vector<std::vector<int>> indices;  // per layer, for index inputs
  Mode mode = Mode::kInfer;
  std::size_t batch = 0;
};

struct Gradients {
  std::vector<Tensor> params;  // aligned with ParamBundle::params
  std::vector<Tensor> inputs;  // aligned with the Input layers (empty for index inputs)
};

class Network {
 public:
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<Shape>& shapes() const { return shapes_; }
  ParamBundle& params() { return params_; }
  const ParamBundle& params() const { return params_; }

  // Glorot-uniform kernels, zero biases, embeddings uniform in [-0.05, 0.05].
  void initialize(std::uint64_t seed);

  // Indices of the Input layers, in the order forward() expects its inputs.
  const std::vector<std::size_t>& input_layers() const { return input_layers_; }
  std::size_t layer_index(std::string_view name) const;
  std::size_t head_layer(std::string_view task) const;

  // Inputs carry a leading batch axis. Index inputs are (N, 1) tensors of integers.
  ForwardCache forward(const std::vector<Tensor>& inputs, Mode mode, std::uint64_t dropout_seed = 0) const;

  // upstream[i] is dL/d(output i) for spec().outputs[i]; an empty tensor means zero.
  Gradients backward(const ForwardCache& cache, const std::vector<Tensor>& upstream) const;

  void update_running_stats(const ForwardCache& cache);

 private:
  struct LayerParams {
    std::optional<std::size_t> weight;  // kernel / dense weights / embedding table
    std::optional<std::size_t> bias;
    std::optional<std::size_t> gamma, beta, running_mean, running_var;
  };

  BatchNormState bn_state(std::size_t layer) const;

  NetworkSpec spec_;
  std::vector<Shape> shapes_;
  std::vector<std::vector<std::size_t>> input_ids_;
  std::vector<std::size_t> input_layers_;
  std::vector<LayerParams> layer_params_;
  ParamBundle params_;
};

}  // namespace eegatt::nn
