#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "eegatt/models.hpp"
#include "eegatt/network.hpp"
#include "test_util.hpp"

namespace eegatt::testing {

struct ModelGradReport {
  double param_error = 0.0;
  double input_error = 0.0;
  std::size_t checked = 0;
  double worst() const { return std::max(param_error, input_error); }
};

// Toy-width variant of one of the three architectures.
inline nn::NetworkSpec toy_model(const std::string& name, Rng& rng) {
  models::ArchConfig a;
  a.electrodes = 3 + rng.below(3);
  a.spatial_filters = 2 + rng.below(2);
  a.time_points = 40 + rng.below(12);
  a.blocks = {{2 + rng.below(2), 3 + rng.below(2)}, {2 + rng.below(2), 2 + rng.below(2)}};
  a.dropout = 0.3;
  a.attended_units = 3 + rng.below(3);
  if (name == "relloc") return models::build_relloc(a);
  if (name == "attloc") return models::build_attloc(a);
  return models::build_mtm(a);
}

// Scalar probe L = sum over heads <G_head, output_head> in train mode with a fixed
// dropout seed; compares backward() against central differences for every trainable
// parameter and every EEG input value.
inline ModelGradReport model_gradient_check(const nn::NetworkSpec& spec, std::uint64_t seed, std::size_t batch = 3) {
  nn::Network net(spec);
  net.initialize(seed);
  Rng rng(derive_seed(seed, 1));
  // move batch-norm affine terms away from the identity
  for (auto& p : net.params().params) {
    if (p.name.find("/gamma") != std::string::npos) p.value[0] = rng.uniform(0.5, 1.5);
    if (p.name.find("/beta") != std::string::npos) p.value[0] = rng.uniform(-0.5, 0.5);
    if (p.name.find("/table") != std::string::npos) {
      for (auto& v : p.value.storage()) v = rng.uniform(-1.0, 1.0);
    }
  }
  std::vector<Tensor> inputs;
  for (auto li : net.input_layers()) {
    const auto& L = spec.layers[li];
    if (L.index_input) {
      Tensor idx({batch, 1});
      for (std::size_t n = 0; n < batch; ++n) idx[n] = static_cast<double>(1 + rng.below(5));
      inputs.push_back(idx);
    } else {
      inputs.push_back(random_tensor(with_batch(batch, L.shape), rng));
    }
  }
  std::vector<Tensor> upstream;
  for (const auto& head : spec.outputs) {
    upstream.push_back(random_tensor(with_batch(batch, net.shapes()[net.layer_index(head.layer)]), rng));
  }
  const std::uint64_t dropout_seed = derive_seed(seed, 2);
  auto probe = [&] {
    const auto cache = net.forward(inputs, nn::Mode::kTrain, dropout_seed);
    double s = 0.0;
    for (std::size_t h = 0; h < spec.outputs.size(); ++h) {
      s += dot(cache.activations[net.layer_index(spec.outputs[h].layer)], upstream[h]);
    }
    return s;
  };
  const auto grads = net.backward(net.forward(inputs, nn::Mode::kTrain, dropout_seed), upstream);

  ModelGradReport r;
  for (std::size_t i = 0; i < net.params().params.size(); ++i) {
    auto& p = net.params().params[i];
    if (!p.trainable) continue;
    r.param_error = std::max(r.param_error, max_fd_error(p.value, grads.params[i], probe));
    r.checked += p.value.size();
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (spec.layers[net.input_layers()[k]].index_input) continue;
    r.input_error = std::max(r.input_error, max_fd_error(inputs[k], grads.inputs[k], probe));
    r.checked += inputs[k].size();
  }
  return r;
}

}  // namespace eegatt::testing
