#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eegatt/dataset.hpp"
#include "eegatt/network.hpp"
#include "eegatt/optim.hpp"
#include "eegatt/roc.hpp"

namespace eegatt::models {

inline constexpr std::string_view kRelativeTask = "relative";
inline constexpr std::string_view kAttendedTask = "attended";

struct ConvBlock {
  std::size_t filters = 0;
  std::size_t kernel_w = 0;
};

// Shape parameters of the three architectures. The defaults give the full-size
// networks; smaller values give toy-width variants for gradient checks.
struct ArchConfig {
  std::size_t electrodes = kElectrodes;
  std::size_t time_points = kTimePoints;
  std::size_t spatial_filters = 10;
  std::vector<ConvBlock> blocks;
  double dropout = 0.6;
  std::size_t relative_classes = kRelativeClasses;
  std::size_t embed_vocab = 6;     // speaker indices 1..5, index 0 unused
  std::size_t attended_units = 200;  // multi-task: dense layer merged with the embedding
};

ArchConfig relloc_arch();
ArchConfig attloc_arch();
ArchConfig mtm_arch();

// Relative location: four blocks, flatten, dense(5), softmax.
nn::NetworkSpec build_relloc(const ArchConfig& arch = relloc_arch());
// Attended location: three blocks, flattened features multiplied with a speaker
// embedding of the same width, dense(2), sigmoid.
nn::NetworkSpec build_attloc(const ArchConfig& arch = attloc_arch());
// Multi-task: shared three-block trunk; relative head dense(5)+softmax; attended
// head dense(200) merged with a 200-wide speaker embedding, dense(2)+sigmoid.
nn::NetworkSpec build_mtm(const ArchConfig& arch = mtm_arch());

// "relloc", "attloc" or "mtm"; anything else raises an unknown-model error.
nn::NetworkSpec build_model(std::string_view name);

struct TrainConfig {
  std::size_t epochs = 400;
  std::size_t batch_size = 64;
  optim::LrSchedule lr;
  optim::AdamConfig adam;
  optim::RegConfig reg;
  optim::JointLossConfig alpha;
  bool track_validation = true;

  std::string to_json() const;
  // Keys absent from `text` keep the values of `defaults`.
  static TrainConfig from_json(const std::string& text, TrainConfig defaults);
  static TrainConfig from_json(const std::string& text);
};

// Default epoch counts: 400 (relloc), 600 (attloc, mtm).
TrainConfig default_train_config(std::string_view model_name);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_auc_relative = 0.0;  // NaN when the network has no such head
  double val_auc_attended = 0.0;
};

struct TrainedModel {
  nn::Network network;
  TrainConfig config;
  std::vector<EpochRecord> history;
  std::uint64_t seed = 0;
  std::string provenance;

  // Hash of the network spec, resolved training config and seed.
  std::string fingerprint() const;
};

using ProgressFn = std::function<void(const EpochRecord&)>;

// Minibatch Adam training on the train split with validation tracking on the val split.
TrainedModel train(const nn::NetworkSpec& spec, const EpochedDataset& data, const TrainConfig& config,
                   std::uint64_t seed, const ProgressFn& progress = {});

std::string history_csv(const std::vector<EpochRecord>& history);

// Network inputs for the given samples, in the order of the network's Input layers.
std::vector<Tensor> make_inputs(const nn::Network& net, const EpochedDataset& data, std::span<const std::size_t> idx);

std::vector<int> task_labels(const EpochedDataset& data, std::span<const std::size_t> idx, std::string_view task);

struct Predictions {
  std::vector<std::string> tasks;  // aligned with the network outputs
  std::vector<Tensor> scores;      // (N, K) per task
  const Tensor& for_task(std::string_view task) const;
};

// Infer-mode forward pass in fixed-size batches.
Predictions predict(const nn::Network& net, const EpochedDataset& data, std::span<const std::size_t> idx,
                    std::size_t batch_size = 128);

// Row argmax; ties resolve to the lowest class index.
std::vector<int> argmax_rows(const Tensor& scores);

struct TaskEvaluation {
  std::string task;
  analysis::OvrAuc auc;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  double accuracy = 0.0;
  std::size_t samples = 0;
};

std::vector<TaskEvaluation> evaluate(const nn::Network& net, const EpochedDataset& data, Split split);
std::string evaluation_csv(const std::vector<TaskEvaluation>& evals);

// Files: <prefix>.params (parameter container), <prefix>.spec.json (network spec),
// <prefix>.meta.json (seed, fingerprint, provenance, training config).
void save_model(const TrainedModel& model, const std::filesystem::path& prefix);
TrainedModel load_model(const std::filesystem::path& prefix);

}  // namespace eegatt::models
