#include "eegatt/network.hpp"

#include <array>
#include <cmath>
#include <unordered_map>

#include "eegatt/error.hpp"
#include "eegatt/rng.hpp"

namespace eegatt::nn {
namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 13> kKindNames{{
    {LayerKind::kInput, "Input"},
    {LayerKind::kSpatialConv, "SpatialConv"},
    {LayerKind::kTemporalConv, "TemporalConv"},
    {LayerKind::kBatchNorm, "BatchNorm"},
    {LayerKind::kElu, "Elu"},
    {LayerKind::kMaxPool, "MaxPool"},
    {LayerKind::kDropout, "Dropout"},
    {LayerKind::kFlatten, "Flatten"},
    {LayerKind::kDense, "Dense"},
    {LayerKind::kEmbedding, "Embedding"},
    {LayerKind::kMultiply, "Multiply"},
    {LayerKind::kSoftmax, "Softmax"},
    {LayerKind::kSigmoid, "Sigmoid"},
}};

std::size_t expected_inputs(LayerKind kind) {
  switch (kind) {
    case LayerKind::kInput: return 0;
    case LayerKind::kMultiply: return 2;
    default: return 1;
  }
}

std::vector<std::vector<std::size_t>> resolve_inputs(const NetworkSpec& spec) {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<std::size_t>> ids(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    if (layer.name.empty()) fail(ErrorCode::kConfig, "layer " + std::to_string(i) + " has no name");
    if (layer.inputs.size() != expected_inputs(layer.kind)) {
      fail(ErrorCode::kConfig, "layer '" + layer.name + "' expects " + std::to_string(expected_inputs(layer.kind)) +
                                   " inputs, got " + std::to_string(layer.inputs.size()));
    }
    for (const auto& in : layer.inputs) {
      auto it = index.find(in);
      if (it == index.end()) fail(ErrorCode::kConfig, "layer '" + layer.name + "' reads unknown or later layer '" + in + "'");
      ids[i].push_back(it->second);
    }
    if (!index.emplace(layer.name, i).second) fail(ErrorCode::kConfig, "duplicate layer name '" + layer.name + "'");
  }
  return ids;
}

Shape batched(std::size_t n, const Shape& s) {
  Shape out{n};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::vector<int> to_indices(const Tensor& t, const std::string& layer) {
  std::vector<int> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = t[i];
    if (v != std::floor(v) || !std::isfinite(v)) fail(ErrorCode::kLookup, "input '" + layer + "' holds a non-integer index");
    out[i] = static_cast<int>(v);
  }
  return out;
}

void add_into(Tensor& acc, const Tensor& g) {
  if (acc.empty()) {
    acc = g;
    return;
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
  for (const auto& [k, n] : kKindNames)
    if (k == kind) return n;
  return "?";
}

LayerKind layer_kind_from_name(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  fail(ErrorCode::kFormat, "unknown layer kind '" + std::string(name) + "'");
}

std::vector<Shape> infer_shapes(const NetworkSpec& spec) {
  const auto ids = resolve_inputs(spec);
  std::vector<Shape> shapes(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& L = spec.layers[i];
    const auto where = "layer '" + L.name + "'";
    const Shape in = ids[i].empty() ? Shape{} : shapes[ids[i][0]];
    switch (L.kind) {
      case LayerKind::kInput:
        shapes[i] = L.index_input ? Shape{1} : L.shape;
        if (shapes[i].empty() || shape_size(shapes[i]) == 0) fail(ErrorCode::kConfig, where + ": empty input shape");
        break;
      case LayerKind::kSpatialConv:
      case LayerKind::kTemporalConv: {
        if (in.size() != 3) fail(ErrorCode::kDimension, where + ": convolution needs (electrode, time, feature) input");
        if (L.filters == 0 || L.kernel_h == 0 || L.kernel_w == 0) fail(ErrorCode::kConfig, where + ": empty kernel");
        if (L.kind == LayerKind::kSpatialConv && (L.kernel_h != in[0] || L.kernel_w != 1)) {
          fail(ErrorCode::kConfig, where + ": spatial kernel must be (" + std::to_string(in[0]) + ", 1)");
        }
        if (L.kind == LayerKind::kTemporalConv && L.kernel_h != 1) fail(ErrorCode::kConfig, where + ": temporal kernel height must be 1");
        if (L.kernel_h > in[0]) fail(ErrorCode::kDimension, where + ": kernel taller than the electrode axis");
        if (L.kernel_w > in[1]) fail(ErrorCode::kDimension, where + ": kernel wider than the time axis");
        shapes[i] = {in[0] - L.kernel_h + 1, in[1] - L.kernel_w + 1, L.filters};
        break;
      }
      case LayerKind::kMaxPool: {
        if (in.size() < 2) fail(ErrorCode::kDimension, where + ": pooling needs a time axis");
        const std::size_t W = in[in.size() - 2];
        if (L.pool_w == 0 || L.pool_stride == 0) fail(ErrorCode::kConfig, where + ": empty pool window");
        if (W < L.pool_w) fail(ErrorCode::kDimension, where + ": time axis " + std::to_string(W) + " shorter than pool window");
        shapes[i] = in;
        shapes[i][in.size() - 2] = (W - L.pool_w) / L.pool_stride + 1;
        break;
      }
      case LayerKind::kDropout:
        if (!(L.rate >= 0.0 && L.rate < 1.0)) fail(ErrorCode::kConfig, where + ": dropout rate must lie in [0, 1)");
        shapes[i] = in;
        break;
      case LayerKind::kBatchNorm:
      case LayerKind::kElu:
      case LayerKind::kSoftmax:
      case LayerKind::kSigmoid:
        shapes[i] = in;
        break;
      case LayerKind::kFlatten:
        shapes[i] = {shape_size(in)};
        break;
      case LayerKind::kDense:
        if (in.size() != 1) fail(ErrorCode::kDimension, where + ": dense input must be flat, got " + shape_str(in));
        if (L.units == 0) fail(ErrorCode::kConfig, where + ": dense needs units");
        shapes[i] = {L.units};
        break;
      case LayerKind::kEmbedding: {
        const auto& src = spec.layers[ids[i][0]];
        if (src.kind != LayerKind::kInput || !src.index_input) fail(ErrorCode::kConfig, where + ": embedding must read an index input");
        if (L.vocab == 0 || L.embed_dim == 0) fail(ErrorCode::kConfig, where + ": embedding needs vocab and dim");
        shapes[i] = {1, L.embed_dim};
        break;
      }
      case LayerKind::kMultiply:
        if (shapes[ids[i][0]] != shapes[ids[i][1]]) {
          fail(ErrorCode::kDimension, where + ": operands " + shape_str(shapes[ids[i][0]]) + " and " +
                                          shape_str(shapes[ids[i][1]]) + " differ");
        }
        shapes[i] = in;
        break;
    }
  }
  for (const auto& head : spec.outputs) {
    bool found = false;
    for (const auto& L : spec.layers) found = found || L.name == head.layer;
    if (!found) fail(ErrorCode::kConfig, "output head '" + head.task + "' names unknown layer '" + head.layer + "'");
  }
  return shapes;
}

ParamCount param_count(const NetworkSpec& spec) {
  const auto shapes = infer_shapes(spec);
  const auto ids = resolve_inputs(spec);
  ParamCount c;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& L = spec.layers[i];
    switch (L.kind) {
      case LayerKind::kSpatialConv:
      case LayerKind::kTemporalConv: {
        const std::size_t cin = shapes[ids[i][0]][2];
        const std::size_t n = L.kernel_h * L.kernel_w * cin * L.filters + L.filters;
        c.total += n;
        c.trainable += n;
        break;
      }
      case LayerKind::kBatchNorm:
        c.total += 4;
        c.trainable += 2;
        break;
      case LayerKind::kDense: {
        const std::size_t n = shapes[ids[i][0]][0] * L.units + L.units;
        c.total += n;
        c.trainable += n;
        break;
      }
      case LayerKind::kEmbedding:
        c.total += L.vocab * L.embed_dim;
        c.trainable += L.vocab * L.embed_dim;
        break;
      default:
        break;
    }
  }
  return c;
}

ParamCount ParamBundle::count() const {
  ParamCount c;
  for (const auto& p : params) {
    c.total += p.value.size();
    if (p.trainable) c.trainable += p.value.size();
  }
  return c;
}

const Param* ParamBundle::find(std::string_view name) const {
  for (const auto& p : params)
    if (p.name == name) return &p;
  return nullptr;
}

Param* ParamBundle::find(std::string_view name) {
  for (auto& p : params)
    if (p.name == name) return &p;
  return nullptr;
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  shapes_ = infer_shapes(spec_);
  input_ids_ = resolve_inputs(spec_);
  layer_params_.resize(spec_.layers.size());
  auto add = [&](const std::string& name, Shape shape, bool trainable, RegGroup group, double fill = 0.0) {
    params_.params.push_back({name, Tensor(std::move(shape), fill), trainable, group});
    return params_.params.size() - 1;
  };
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& L = spec_.layers[i];
    auto& lp = layer_params_[i];
    switch (L.kind) {
      case LayerKind::kInput:
        input_layers_.push_back(i);
        break;
      case LayerKind::kSpatialConv:
      case LayerKind::kTemporalConv: {
        const std::size_t cin = shapes_[input_ids_[i][0]][2];
        lp.weight = add(L.name + "/kernel", {L.kernel_h, L.kernel_w, cin, L.filters}, true, RegGroup::kConv);
        lp.bias = add(L.name + "/bias", {L.filters}, true, RegGroup::kNone);
        break;
      }
      case LayerKind::kBatchNorm:
        lp.gamma = add(L.name + "/gamma", {1}, true, RegGroup::kNone, 1.0);
        lp.beta = add(L.name + "/beta", {1}, true, RegGroup::kNone);
        lp.running_mean = add(L.name + "/running_mean", {1}, false, RegGroup::kNone);
        lp.running_var = add(L.name + "/running_var", {1}, false, RegGroup::kNone, 1.0);
        break;
      case LayerKind::kDense:
        lp.weight = add(L.name + "/kernel", {shapes_[input_ids_[i][0]][0], L.units}, true, RegGroup::kDense);
        lp.bias = add(L.name + "/bias", {L.units}, true, RegGroup::kNone);
        break;
      case LayerKind::kEmbedding:
        lp.weight = add(L.name + "/table", {L.vocab, L.embed_dim}, true, RegGroup::kNone);
        break;
      default:
        break;
    }
  }
}

void Network::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& L = spec_.layers[i];
    const auto& lp = layer_params_[i];
    if (!lp.weight) continue;
    Tensor& w = params_.params[*lp.weight].value;
    double limit = 0.05;
    if (L.kind != LayerKind::kEmbedding) {
      double fan_in = 0.0, fan_out = 0.0;
      if (w.rank() == 4) {
        const double receptive = static_cast<double>(w.dim(0) * w.dim(1));
        fan_in = receptive * static_cast<double>(w.dim(2));
        fan_out = receptive * static_cast<double>(w.dim(3));
      } else {
        fan_in = static_cast<double>(w.dim(0));
        fan_out = static_cast<double>(w.dim(1));
      }
      limit = std::sqrt(6.0 / (fan_in + fan_out));
    }
    for (auto& v : w.values()) v = rng.uniform(-limit, limit);
    if (lp.bias) params_.params[*lp.bias].value.fill(0.0);
  }
}

std::size_t Network::layer_index(std::string_view name) const {
  for (std::size_t i = 0; i < spec_.layers.size(); ++i)
    if (spec_.layers[i].name == name) return i;
  fail(ErrorCode::kConfig, "no layer named '" + std::string(name) + "'");
}

std::size_t Network::head_layer(std::string_view task) const {
  for (const auto& h : spec_.outputs)
    if (h.task == task) return layer_index(h.layer);
  fail(ErrorCode::kConfig, "network '" + spec_.name + "' has no '" + std::string(task) + "' head");
}

BatchNormState Network::bn_state(std::size_t layer) const {
  const auto& lp = layer_params_[layer];
  const auto& L = spec_.layers[layer];
  BatchNormState s;
  s.gamma = params_.params[*lp.gamma].value[0];
  s.beta = params_.params[*lp.beta].value[0];
  s.running_mean = params_.params[*lp.running_mean].value[0];
  s.running_var = params_.params[*lp.running_var].value[0];
  s.epsilon = L.epsilon;
  s.momentum = L.momentum;
  return s;
}

ForwardCache Network::forward(const std::vector<Tensor>& inputs, Mode mode, std::uint64_t dropout_seed) const {
  if (inputs.size() != input_layers_.size()) {
    fail(ErrorCode::kDimension, "network '" + spec_.name + "' expects " + std::to_string(input_layers_.size()) + " inputs");
  }
  const std::size_t n_layers = spec_.layers.size();
  ForwardCache c;
  c.mode = mode;
  c.inputs = inputs;
  c.activations.resize(n_layers);
  c.pool_argmax.resize(n_layers);
  c.dropout_masks.resize(n_layers);
  c.batchnorm.resize(n_layers);
  c.indices.resize(n_layers);
  c.batch = inputs.empty() ? 0 : (inputs[0].rank() ? inputs[0].dim(0) : 0);
  Rng rng(dropout_seed);

  std::size_t next_input = 0;
  for (std::size_t i = 0; i < n_layers; ++i) {
    const auto& L = spec_.layers[i];
    const auto& lp = layer_params_[i];
    const Tensor* x = input_ids_[i].empty() ? nullptr : &c.activations[input_ids_[i][0]];
    auto param = [&](const std::optional<std::size_t>& id) -> const Tensor& { return params_.params[*id].value; };
    Tensor& y = c.activations[i];
    switch (L.kind) {
      case LayerKind::kInput: {
        const Tensor& t = inputs[next_input++];
        const Shape expect = batched(c.batch, shapes_[i]);
        if (t.shape() != expect) {
          fail(ErrorCode::kDimension, "input '" + L.name + "' expects " + shape_str(expect) + ", got " + shape_str(t.shape()));
        }
        y = t;
        if (L.index_input) c.indices[i] = to_indices(t, L.name);
        break;
      }
      case LayerKind::kSpatialConv:
      case LayerKind::kTemporalConv:
        y = conv2d_forward(*x, param(lp.weight), param(lp.bias));
        break;
      case LayerKind::kBatchNorm:
        y = batchnorm_forward(*x, bn_state(i), mode, c.batchnorm[i]);
        break;
      case LayerKind::kElu:
        y = elu_forward(*x);
        break;
      case LayerKind::kMaxPool: {
        auto r = maxpool_forward(*x, L.pool_w, L.pool_stride);
        y = std::move(r.output);
        c.pool_argmax[i] = std::move(r.argmax);
        break;
      }
      case LayerKind::kDropout: {
        auto r = dropout_forward(*x, L.rate, mode, rng);
        y = std::move(r.output);
        c.dropout_masks[i] = std::move(r.mask);
        break;
      }
      case LayerKind::kFlatten:
        y = *x;
        y.reshape(batched(c.batch, shapes_[i]));
        break;
      case LayerKind::kDense:
        y = dense_forward(*x, param(lp.weight), param(lp.bias));
        break;
      case LayerKind::kEmbedding:
        y = embedding_forward(c.indices[input_ids_[i][0]], param(lp.weight));
        break;
      case LayerKind::kMultiply:
        y = multiply_forward(*x, c.activations[input_ids_[i][1]]);
        break;
      case LayerKind::kSoftmax:
        y = softmax_forward(*x);
        break;
      case LayerKind::kSigmoid:
        y = sigmoid_forward(*x);
        break;
    }
  }
  return c;
}

Gradients Network::backward(const ForwardCache& cache, const std::vector<Tensor>& upstream) const {
  const std::size_t n_layers = spec_.layers.size();
  if (cache.activations.size() != n_layers) fail(ErrorCode::kState, "backward called without a forward cache");
  if (upstream.size() != spec_.outputs.size()) {
    fail(ErrorCode::kDimension, "backward expects " + std::to_string(spec_.outputs.size()) + " upstream gradients");
  }
  std::vector<Tensor> node_grad(n_layers);
  for (std::size_t h = 0; h < upstream.size(); ++h) {
    if (upstream[h].empty()) continue;
    const std::size_t li = layer_index(spec_.outputs[h].layer);
    if (upstream[h].shape() != cache.activations[li].shape()) {
      fail(ErrorCode::kDimension, "upstream gradient for head '" + spec_.outputs[h].task + "' has shape " +
                                      shape_str(upstream[h].shape()));
    }
    add_into(node_grad[li], upstream[h]);
  }

  Gradients g;
  g.params.reserve(params_.params.size());
  for (const auto& p : params_.params) g.params.emplace_back(p.value.shape());
  g.inputs.resize(input_layers_.size());

  for (std::size_t ii = n_layers; ii-- > 0;) {
    const auto& L = spec_.layers[ii];
    const auto& lp = layer_params_[ii];
    if (node_grad[ii].empty()) continue;
    const Tensor& gy = node_grad[ii];
    const std::size_t src = input_ids_[ii].empty() ? 0 : input_ids_[ii][0];
    const Tensor* x = input_ids_[ii].empty() ? nullptr : &cache.activations[src];
    auto param = [&](const std::optional<std::size_t>& id) -> const Tensor& { return params_.params[*id].value; };
    switch (L.kind) {
      case LayerKind::kInput: {
        for (std::size_t k = 0; k < input_layers_.size(); ++k)
          if (input_layers_[k] == ii && !L.index_input) g.inputs[k] = gy;
        break;
      }
      case LayerKind::kSpatialConv:
      case LayerKind::kTemporalConv: {
        auto cg = conv2d_backward(*x, param(lp.weight), gy);
        g.params[*lp.weight] = std::move(cg.kernels);
        g.params[*lp.bias] = std::move(cg.bias);
        add_into(node_grad[src], cg.input);
        break;
      }
      case LayerKind::kBatchNorm: {
        auto bg = batchnorm_backward(gy, bn_state(ii), cache.batchnorm[ii]);
        g.params[*lp.gamma][0] = bg.gamma;
        g.params[*lp.beta][0] = bg.beta;
        add_into(node_grad[src], bg.input);
        break;
      }
      case LayerKind::kElu:
        add_into(node_grad[src], elu_backward(*x, gy));
        break;
      case LayerKind::kMaxPool:
        add_into(node_grad[src], maxpool_backward(x->shape(), cache.pool_argmax[ii], gy));
        break;
      case LayerKind::kDropout:
        add_into(node_grad[src], dropout_backward(cache.dropout_masks[ii], gy));
        break;
      case LayerKind::kFlatten: {
        Tensor r = gy;
        r.reshape(x->shape());
        add_into(node_grad[src], r);
        break;
      }
      case LayerKind::kDense: {
        auto dg = dense_backward(*x, param(lp.weight), gy);
        g.params[*lp.weight] = std::move(dg.weights);
        g.params[*lp.bias] = std::move(dg.bias);
        add_into(node_grad[src], dg.input);
        break;
      }
      case LayerKind::kEmbedding:
        g.params[*lp.weight] = embedding_backward(cache.indices[src], param(lp.weight).shape(), gy);
        break;
      case LayerKind::kMultiply: {
        const std::size_t other = input_ids_[ii][1];
        add_into(node_grad[src], multiply_forward(gy, cache.activations[other]));
        add_into(node_grad[other], multiply_forward(gy, cache.activations[src]));
        break;
      }
      case LayerKind::kSoftmax:
        add_into(node_grad[src], softmax_backward(cache.activations[ii], gy));
        break;
      case LayerKind::kSigmoid:
        add_into(node_grad[src], sigmoid_backward(cache.activations[ii], gy));
        break;
    }
  }
  return g;
}

void Network::update_running_stats(const ForwardCache& cache) {
  if (cache.mode != Mode::kTrain) return;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    if (spec_.layers[i].kind != LayerKind::kBatchNorm) continue;
    auto s = bn_state(i);
    batchnorm_update_running(s, cache.batchnorm[i]);
    const auto& lp = layer_params_[i];
    params_.params[*lp.running_mean].value[0] = s.running_mean;
    params_.params[*lp.running_var].value[0] = s.running_var;
  }
}

}  // namespace eegatt::nn
