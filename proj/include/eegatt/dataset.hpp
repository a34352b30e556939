#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eegatt/aligned.hpp"

namespace eegatt {

enum class Side : std::uint8_t { kLeft = 0, kRight = 1 };
enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };

inline constexpr std::size_t kElectrodes = 64;
inline constexpr std::size_t kTimePoints = 350;
inline constexpr int kSpeakers = 5;
inline constexpr int kRelativeClasses = 5;

const char* side_name(Side side);
Side side_from_name(const std::string& name);
const char* split_name(Split split);

// Distance of the speaker from the attended side in 45 degree steps. Speakers run
// 1..5 from -90 to +90 degrees. Throws a label error for indices outside 1..5.
int relative_label(Side side, int speaker_index);

struct SampleInfo {
  int speaker = 1;  // 1..5
  Side side = Side::kLeft;
  int relative = 0;  // 0..4, derived
  Split split = Split::kTrain;
  int subject = 0;
  bool sequence_effect = false;
};

// Epochs of shape (electrodes, time points, 1). Values are held in 64-bit precision
// in memory; the container stores 32-bit floats.
class EpochedDataset {
 public:
  EpochedDataset(std::size_t electrodes = kElectrodes, std::size_t time_points = kTimePoints,
                 std::string montage = "standard-64");

  std::size_t size() const { return info_.size(); }
  std::size_t electrodes() const { return electrodes_; }
  std::size_t time_points() const { return time_points_; }
  std::size_t sample_size() const { return electrodes_ * time_points_; }
  const std::string& montage() const { return montage_; }
  const std::string& provenance() const { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

  // Latency of time point 0 and the spacing of time points, ms.
  double start_ms() const { return start_ms_; }
  double step_ms() const { return step_ms_; }
  void set_time_axis(double start_ms, double step_ms);
  std::vector<double> time_ms() const;

  // Row-major (electrode, time) values, µV.
  void add(std::span<const double> eeg, SampleInfo info);
  void add(std::span<const float> eeg, SampleInfo info);
  std::span<const double> eeg(std::size_t i) const;
  const SampleInfo& info(std::size_t i) const { return info_.at(i); }
  SampleInfo& info(std::size_t i) { return info_.at(i); }

  std::vector<std::size_t> indices(Split split) const;
  std::array<std::size_t, kRelativeClasses> relative_histogram(Split split) const;
  std::array<std::size_t, 2> side_histogram(Split split) const;

 private:
  std::size_t electrodes_;
  std::size_t time_points_;
  std::string montage_;
  std::string provenance_;
  double start_ms_ = -200.0;
  double step_ms_ = 2.0;
  AlignedDoubles eeg_;
  std::vector<SampleInfo> info_;
};

enum class SplitMode { kTrial, kSubject };

// 80/10/10 split. Trial mode stratifies within every (subject, speaker, side) cell;
// subject mode holds out whole subjects.
void assign_splits(EpochedDataset& data, SplitMode mode, std::uint64_t seed);

// Container layout (little-endian):
//   "EEGATTDS" | u32 version | u64 n_samples | u32 electrodes | u32 time points
//   | str montage | str provenance | f64 start ms | f64 step ms
//   | per sample: u8 speaker, u8 side, u8 relative, u8 split, u16 subject, u8 sequence, u8 reserved
//   | f32 payload, sample-major then electrode-major
inline constexpr char kDatasetMagic[] = "EEGATTDS";
inline constexpr std::uint32_t kDatasetVersion = 1;

void save_dataset(const EpochedDataset& data, const std::filesystem::path& path);
EpochedDataset load_dataset(const std::filesystem::path& path);

}  // namespace eegatt
