#include "eegatt/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "eegatt/error.hpp"
#include "eegatt/io.hpp"
#include "eegatt/rng.hpp"
#include "eegatt/serialize.hpp"
#include "json.hpp"

namespace eegatt::models {

using nlohmann::json;
using nn::LayerKind;
using nn::LayerSpec;
using nn::NetworkSpec;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

LayerSpec layer(LayerKind kind, std::string name, std::vector<std::string> inputs) {
  LayerSpec L;
  L.kind = kind;
  L.name = std::move(name);
  L.inputs = std::move(inputs);
  return L;
}

// Input, spatial filters, then the convolution blocks. Returns the last layer name.
std::string add_trunk(NetworkSpec& spec, const ArchConfig& arch) {
  auto in = layer(LayerKind::kInput, "eeg", {});
  in.shape = {arch.electrodes, arch.time_points, 1};
  spec.layers.push_back(in);

  auto spatial = layer(LayerKind::kSpatialConv, "spatial_conv", {"eeg"});
  spatial.kernel_h = arch.electrodes;
  spatial.kernel_w = 1;
  spatial.filters = arch.spatial_filters;
  spec.layers.push_back(spatial);

  std::string prev = "spatial_conv";
  for (std::size_t b = 0; b < arch.blocks.size(); ++b) {
    const std::string p = "block" + std::to_string(b + 1) + "_";
    auto conv = layer(LayerKind::kTemporalConv, p + "conv", {prev});
    conv.kernel_h = 1;
    conv.kernel_w = arch.blocks[b].kernel_w;
    conv.filters = arch.blocks[b].filters;
    spec.layers.push_back(conv);
    spec.layers.push_back(layer(LayerKind::kBatchNorm, p + "bn", {p + "conv"}));
    spec.layers.push_back(layer(LayerKind::kElu, p + "elu", {p + "bn"}));
    spec.layers.push_back(layer(LayerKind::kMaxPool, p + "pool", {p + "elu"}));
    auto drop = layer(LayerKind::kDropout, p + "dropout", {p + "pool"});
    drop.rate = arch.dropout;
    spec.layers.push_back(drop);
    prev = p + "dropout";
  }
  spec.layers.push_back(layer(LayerKind::kFlatten, "flatten", {prev}));
  return "flatten";
}

std::size_t flat_width(const NetworkSpec& spec) { return nn::infer_shapes(spec).back()[0]; }

void add_embedding(NetworkSpec& spec, const ArchConfig& arch, std::size_t dim) {
  auto speaker = layer(LayerKind::kInput, "speaker", {});
  speaker.index_input = true;
  spec.layers.push_back(speaker);
  auto emb = layer(LayerKind::kEmbedding, "speaker_embedding", {"speaker"});
  emb.vocab = arch.embed_vocab;
  emb.embed_dim = dim;
  spec.layers.push_back(emb);
  spec.layers.push_back(layer(LayerKind::kFlatten, "embedding_flatten", {"speaker_embedding"}));
}

void add_dense(NetworkSpec& spec, const std::string& name, const std::string& input, std::size_t units) {
  auto d = layer(LayerKind::kDense, name, {input});
  d.units = units;
  spec.layers.push_back(d);
}

const char* kind_loss_name(LayerKind kind) { return kind == LayerKind::kSoftmax ? "categorical" : "binary"; }

}  // namespace

ArchConfig relloc_arch() {
  ArchConfig a;
  a.spatial_filters = 10;
  a.blocks = {{25, 10}, {50, 10}, {100, 10}, {200, 6}};
  a.dropout = 0.6;
  return a;
}

ArchConfig attloc_arch() {
  ArchConfig a;
  a.spatial_filters = 10;
  a.blocks = {{25, 10}, {50, 10}, {100, 10}};
  a.dropout = 0.5;
  return a;
}

ArchConfig mtm_arch() {
  ArchConfig a;
  a.spatial_filters = 15;
  a.blocks = {{30, 10}, {60, 10}, {120, 10}};
  a.dropout = 0.5;
  a.attended_units = 200;
  return a;
}

NetworkSpec build_relloc(const ArchConfig& arch) {
  NetworkSpec spec;
  spec.name = "relloc";
  const auto features = add_trunk(spec, arch);
  add_dense(spec, "relative_dense", features, arch.relative_classes);
  spec.layers.push_back(layer(LayerKind::kSoftmax, "relative_softmax", {"relative_dense"}));
  spec.outputs = {{std::string(kRelativeTask), "relative_softmax"}};
  nn::infer_shapes(spec);
  return spec;
}

NetworkSpec build_attloc(const ArchConfig& arch) {
  NetworkSpec spec;
  spec.name = "attloc";
  const auto features = add_trunk(spec, arch);
  add_embedding(spec, arch, flat_width(spec));
  spec.layers.push_back(layer(LayerKind::kMultiply, "merge", {features, "embedding_flatten"}));
  add_dense(spec, "attended_dense", "merge", 2);
  spec.layers.push_back(layer(LayerKind::kSigmoid, "attended_sigmoid", {"attended_dense"}));
  spec.outputs = {{std::string(kAttendedTask), "attended_sigmoid"}};
  nn::infer_shapes(spec);
  return spec;
}

NetworkSpec build_mtm(const ArchConfig& arch) {
  NetworkSpec spec;
  spec.name = "mtm";
  const auto features = add_trunk(spec, arch);
  add_dense(spec, "relative_dense", features, arch.relative_classes);
  spec.layers.push_back(layer(LayerKind::kSoftmax, "relative_softmax", {"relative_dense"}));
  add_embedding(spec, arch, arch.attended_units);
  add_dense(spec, "attended_features", features, arch.attended_units);
  spec.layers.push_back(layer(LayerKind::kMultiply, "merge", {"attended_features", "embedding_flatten"}));
  add_dense(spec, "attended_dense", "merge", 2);
  spec.layers.push_back(layer(LayerKind::kSigmoid, "attended_sigmoid", {"attended_dense"}));
  spec.outputs = {{std::string(kRelativeTask), "relative_softmax"}, {std::string(kAttendedTask), "attended_sigmoid"}};
  nn::infer_shapes(spec);
  return spec;
}

NetworkSpec build_model(std::string_view name) {
  if (name == "relloc") return build_relloc();
  if (name == "attloc") return build_attloc();
  if (name == "mtm") return build_mtm();
  fail(ErrorCode::kUnknownModel, "unknown model '" + std::string(name) + "' (expected relloc, attloc or mtm)");
}

// ---- training config ---------------------------------------------------------------

std::string TrainConfig::to_json() const {
  json j{{"epochs", epochs},
         {"batch_size", batch_size},
         {"learning_rate", lr.base},
         {"decay", lr.decay},
         {"adam_beta1", adam.beta1},
         {"adam_beta2", adam.beta2},
         {"adam_epsilon", adam.epsilon},
         {"reg_l1", reg.l1},
         {"reg_l2", reg.l2},
         {"reg_conv", reg.conv},
         {"reg_dense", reg.dense},
         {"alpha1", alpha.alpha_relative},
         {"alpha2", alpha.alpha_attended},
         {"track_validation", track_validation}};
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text, TrainConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("malformed training config: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::kConfig, "training config must be a JSON object");
  static const char* kKeys[] = {"epochs",   "batch_size", "learning_rate", "decay",     "adam_beta1",
                                "adam_beta2", "adam_epsilon", "reg_l1",      "reg_l2",    "reg_conv",
                                "reg_dense", "alpha1",     "alpha2",        "track_validation"};
  for (const auto& item : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), item.key()) == std::end(kKeys)) {
      fail(ErrorCode::kConfig, "unknown training config key '" + item.key() + "'");
    }
  }
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr.base = j.value("learning_rate", c.lr.base);
    c.lr.decay = j.value("decay", c.lr.decay);
    c.adam.beta1 = j.value("adam_beta1", c.adam.beta1);
    c.adam.beta2 = j.value("adam_beta2", c.adam.beta2);
    c.adam.epsilon = j.value("adam_epsilon", c.adam.epsilon);
    c.reg.l1 = j.value("reg_l1", c.reg.l1);
    c.reg.l2 = j.value("reg_l2", c.reg.l2);
    c.reg.conv = j.value("reg_conv", c.reg.conv);
    c.reg.dense = j.value("reg_dense", c.reg.dense);
    c.alpha.alpha_relative = j.value("alpha1", c.alpha.alpha_relative);
    c.alpha.alpha_attended = j.value("alpha2", c.alpha.alpha_attended);
    c.track_validation = j.value("track_validation", c.track_validation);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("bad training config value: ") + e.what());
  }
  return c;
}

TrainConfig TrainConfig::from_json(const std::string& text) { return from_json(text, TrainConfig{}); }

TrainConfig default_train_config(std::string_view model_name) {
  TrainConfig c;
  c.epochs = model_name == "relloc" ? 400 : 600;
  return c;
}

std::string TrainedModel::fingerprint() const {
  return io::fingerprint(nn::spec_to_json(network.spec()) + config.to_json() + std::to_string(seed));
}

// ---- batches -----------------------------------------------------------------------

std::vector<Tensor> make_inputs(const nn::Network& net, const EpochedDataset& data, std::span<const std::size_t> idx) {
  std::vector<Tensor> inputs;
  const std::size_t n = idx.size();
  for (auto li : net.input_layers()) {
    const auto& L = net.spec().layers[li];
    if (L.index_input) {
      Tensor t({n, 1});
      for (std::size_t i = 0; i < n; ++i) t[i] = data.info(idx[i]).speaker;
      inputs.push_back(std::move(t));
      continue;
    }
    if (L.shape.size() != 3 || L.shape[0] != data.electrodes() || L.shape[1] != data.time_points()) {
      fail(ErrorCode::kDimension, "network input " + shape_str(L.shape) + " does not match dataset samples (" +
                                      std::to_string(data.electrodes()) + "," + std::to_string(data.time_points()) + ",1)");
    }
    Tensor t({n, data.electrodes(), data.time_points(), 1});
    const std::size_t per = data.sample_size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto eeg = data.eeg(idx[i]);
      std::copy(eeg.begin(), eeg.end(), t.data() + i * per);
    }
    inputs.push_back(std::move(t));
  }
  return inputs;
}

std::vector<int> task_labels(const EpochedDataset& data, std::span<const std::size_t> idx, std::string_view task) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& s = data.info(idx[i]);
    if (task == kRelativeTask) {
      out[i] = s.relative;
    } else if (task == kAttendedTask) {
      out[i] = static_cast<int>(s.side);
    } else {
      fail(ErrorCode::kConfig, "unknown task '" + std::string(task) + "'");
    }
  }
  return out;
}

namespace {

Tensor onehot(std::span<const int> labels, std::size_t classes) {
  Tensor t({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) t[i * classes + static_cast<std::size_t>(labels[i])] = 1.0;
  return t;
}

double head_weight(const NetworkSpec& spec, const std::string& task, const optim::JointLossConfig& alpha) {
  if (spec.outputs.size() < 2) return 1.0;
  return task == kRelativeTask ? alpha.alpha_relative : alpha.alpha_attended;
}

}  // namespace

const Tensor& Predictions::for_task(std::string_view task) const {
  for (std::size_t i = 0; i < tasks.size(); ++i)
    if (tasks[i] == task) return scores[i];
  fail(ErrorCode::kConfig, "predictions have no '" + std::string(task) + "' task");
}

Predictions predict(const nn::Network& net, const EpochedDataset& data, std::span<const std::size_t> idx,
                    std::size_t batch_size) {
  Predictions p;
  std::vector<std::size_t> head_layers;
  for (const auto& h : net.spec().outputs) {
    p.tasks.push_back(h.task);
    head_layers.push_back(net.layer_index(h.layer));
  }
  const auto& shapes = net.shapes();
  for (auto li : head_layers) p.scores.emplace_back(Shape{idx.size(), shapes[li][0]});
  for (std::size_t start = 0; start < idx.size(); start += batch_size) {
    const std::size_t end = std::min(idx.size(), start + batch_size);
    auto cache = net.forward(make_inputs(net, data, idx.subspan(start, end - start)), nn::Mode::kInfer);
    for (std::size_t h = 0; h < head_layers.size(); ++h) {
      const Tensor& a = cache.activations[head_layers[h]];
      std::copy(a.data(), a.data() + a.size(), p.scores[h].data() + start * a.dim(1));
    }
  }
  return p;
}

std::vector<int> argmax_rows(const Tensor& scores) {
  const std::size_t n = scores.dim(0), k = scores.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (scores[i * k + c] > scores[i * k + best]) best = c;
    out[i] = static_cast<int>(best);
  }
  return out;
}

// ---- training ----------------------------------------------------------------------

TrainedModel train(const NetworkSpec& spec, const EpochedDataset& data, const TrainConfig& config, std::uint64_t seed,
                   const ProgressFn& progress) {
  config.alpha.validate();
  if (config.epochs == 0) fail(ErrorCode::kConfig, "training needs at least one epoch");
  if (config.batch_size < 2) fail(ErrorCode::kConfig, "batch size must be at least 2");
  const auto train_idx = data.indices(Split::kTrain);
  const auto val_idx = data.indices(Split::kVal);
  if (train_idx.size() < 2) fail(ErrorCode::kConfig, "training split needs at least 2 samples");
  if (config.track_validation && val_idx.empty()) fail(ErrorCode::kConfig, "validation split is empty");

  TrainedModel model{nn::Network(spec), config, {}, seed, data.provenance()};
  auto& net = model.network;
  net.initialize(derive_seed(seed, 0));

  std::vector<std::size_t> head_layers;
  std::vector<LayerKind> head_kinds;
  std::vector<double> head_alpha;
  for (const auto& h : spec.outputs) {
    head_layers.push_back(net.layer_index(h.layer));
    head_kinds.push_back(spec.layers[head_layers.back()].kind);
    head_alpha.push_back(head_weight(spec, h.task, config.alpha));
  }
  std::vector<std::vector<int>> val_labels;
  for (const auto& h : spec.outputs) val_labels.push_back(task_labels(data, val_idx, h.task));

  optim::AdamState adam;
  adam.config = config.adam;
  std::vector<std::size_t> order = train_idx;
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, 1'000'000 + epoch));
    shuffle_rng.shuffle(order.begin(), order.end());
    const double lr = config.lr.at(epoch);

    // Batch boundaries; a trailing singleton joins the previous batch.
    std::vector<std::size_t> bounds;
    for (std::size_t s = 0; s < order.size(); s += config.batch_size) bounds.push_back(s);
    if (order.size() - bounds.back() < 2 && bounds.size() > 1) bounds.pop_back();
    bounds.push_back(order.size());

    double loss_sum = 0.0;
    for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
      std::span<const std::size_t> idx(order.data() + bounds[b], bounds[b + 1] - bounds[b]);
      auto cache = net.forward(make_inputs(net, data, idx), nn::Mode::kTrain, derive_seed(seed, 2'000'000'000ull + step));
      double total = 0.0;
      std::vector<Tensor> upstream;
      for (std::size_t h = 0; h < head_layers.size(); ++h) {
        const auto labels = task_labels(data, idx, spec.outputs[h].task);
        const Tensor& probs = cache.activations[head_layers[h]];
        const Tensor targets = onehot(labels, probs.dim(1));
        auto lr_h = head_kinds[h] == LayerKind::kSoftmax ? optim::categorical_ce_batch(probs, targets)
                                                         : optim::binary_ce_batch(probs, targets);
        total += head_alpha[h] * lr_h.loss;
        for (auto& g : lr_h.grad.values()) g *= head_alpha[h];
        upstream.push_back(std::move(lr_h.grad));
      }
      auto grads = net.backward(cache, upstream);
      total += optim::reg_penalty(net.params(), config.reg, &grads.params);
      if (!std::isfinite(total)) {
        fail(ErrorCode::kTraining, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      try {
        optim::adam_step(net.params(), grads.params, adam, lr);
      } catch (const Error& e) {
        fail(e.code(), std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      }
      net.update_running_stats(cache);
      loss_sum += total * static_cast<double>(idx.size());
      ++step;
    }

    EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(order.size()), kNaN, kNaN};
    if (config.track_validation) {
      const auto pred = predict(net, data, val_idx);
      for (std::size_t h = 0; h < spec.outputs.size(); ++h) {
        const double auc = analysis::macro_ovr(pred.scores[h], val_labels[h]).macro;
        (spec.outputs[h].task == kRelativeTask ? rec.val_auc_relative : rec.val_auc_attended) = auc;
      }
    }
    model.history.push_back(rec);
    if (progress) progress(rec);
  }
  return model;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch,learning_rate,train_loss,val_auc_relative,val_auc_attended\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << io::format_double(r.lr) << ',' << io::format_double(r.train_loss) << ','
       << io::format_double(r.val_auc_relative) << ',' << io::format_double(r.val_auc_attended) << '\n';
  }
  return os.str();
}

// ---- evaluation --------------------------------------------------------------------

std::vector<TaskEvaluation> evaluate(const nn::Network& net, const EpochedDataset& data, Split split) {
  const auto idx = data.indices(split);
  if (idx.empty()) fail(ErrorCode::kMissingClass, std::string("split '") + split_name(split) + "' is empty");
  const auto pred = predict(net, data, idx);
  std::vector<TaskEvaluation> out;
  for (std::size_t h = 0; h < pred.tasks.size(); ++h) {
    TaskEvaluation e;
    e.task = pred.tasks[h];
    const auto labels = task_labels(data, idx, e.task);
    const Tensor& scores = pred.scores[h];
    const std::size_t k = scores.dim(1);
    e.auc = analysis::macro_ovr(scores, labels);
    e.confusion.assign(k, std::vector<std::size_t>(k, 0));
    const auto predicted = argmax_rows(scores);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      ++e.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predicted[i])];
      correct += labels[i] == predicted[i];
    }
    e.samples = labels.size();
    e.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    out.push_back(std::move(e));
  }
  return out;
}

std::string evaluation_csv(const std::vector<TaskEvaluation>& evals) {
  std::ostringstream os;
  os << "task,class,auc,support,predicted\n";
  for (const auto& e : evals) {
    const std::size_t k = e.confusion.size();
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t support = 0, predicted = 0;
      for (std::size_t j = 0; j < k; ++j) {
        support += e.confusion[c][j];
        predicted += e.confusion[j][c];
      }
      os << e.task << ',' << c << ',' << (e.auc.per_class[c] ? io::format_double(*e.auc.per_class[c]) : "undefined")
         << ',' << support << ',' << predicted << '\n';
    }
    os << e.task << ",macro," << io::format_double(e.auc.macro) << ',' << e.samples << ",\n";
    os << e.task << ",accuracy," << io::format_double(e.accuracy) << ',' << e.samples << ",\n";
  }
  return os.str();
}

// ---- persistence -------------------------------------------------------------------

void save_model(const TrainedModel& model, const std::filesystem::path& prefix) {
  auto with = [&](const char* ext) {
    auto p = prefix;
    p += ext;
    return p;
  };
  nn::save_params(model.network.params(), with(".params"));
  io::write_file_atomic(with(".spec.json"), nn::spec_to_json(model.network.spec()));
  json meta{{"seed", model.seed},
            {"fingerprint", model.fingerprint()},
            {"provenance", model.provenance},
            {"heads", std::vector<std::string>{}},
            {"train_config", json::parse(model.config.to_json())},
            {"epochs_completed", model.history.size()}};
  for (const auto& h : model.network.spec().outputs) {
    const auto li = model.network.layer_index(h.layer);
    meta["heads"].push_back(h.task + ":" + kind_loss_name(model.network.spec().layers[li].kind));
  }
  io::write_file_atomic(with(".meta.json"), meta.dump(2) + "\n");
}

TrainedModel load_model(const std::filesystem::path& prefix) {
  auto with = [&](const char* ext) {
    auto p = prefix;
    p += ext;
    return p;
  };
  for (const char* ext : {".params", ".spec.json", ".meta.json"}) {
    if (!std::filesystem::exists(with(ext))) fail(ErrorCode::kIo, "missing model file '" + with(ext).string() + "'");
  }
  auto spec = nn::spec_from_json(io::read_file(with(".spec.json")), with(".spec.json").string());
  TrainedModel model{nn::Network(std::move(spec)), {}, {}, 0, {}};
  nn::load_params(model.network, with(".params"));
  try {
    const json meta = json::parse(io::read_file(with(".meta.json")));
    model.seed = meta.at("seed").get<std::uint64_t>();
    model.provenance = meta.value("provenance", "");
    model.config = TrainConfig::from_json(meta.at("train_config").dump());
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, with(".meta.json").string() + ": malformed metadata: " + e.what());
  }
  return model;
}

}  // namespace eegatt::models
