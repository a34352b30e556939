#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eegatt/dataset.hpp"
#include "eegatt/montage.hpp"
#include "eegatt/spline.hpp"

namespace eegatt::preprocess {

struct Event {
  std::size_t onset = 0;  // sample index
  int speaker = 1;
  Side side = Side::kLeft;
  bool operator==(const Event&) const = default;
};

// Continuous multichannel EEG in µV, one vector per channel.
struct ContinuousRecording {
  double rate = 500.0;
  std::string montage = "standard-64";
  std::vector<std::vector<double>> channels;
  std::vector<Event> events;

  std::size_t length() const { return channels.empty() ? 0 : channels[0].size(); }
  // Equal channel lengths, sorted events, valid labels.
  void validate() const;
};

struct ChannelReport {
  std::vector<double> sd;
  std::vector<double> z;
  std::vector<bool> bad;
  std::size_t bad_count() const;
};

// z-scores the per-channel standard deviations and flags channels outside
// [z_low, z_high]. When every SD is equal all z-scores are 0.
ChannelReport reject_bad_channels(const ContinuousRecording& rec, double z_low = -2.0, double z_high = 2.0);

// Rebuilds the flagged channels from the good ones with a spherical spline fitted
// per recording and applied at every time point. Good channels are left untouched.
ContinuousRecording spherical_interpolate(const ContinuousRecording& rec, const std::vector<bool>& bad,
                                          const Montage& montage, const SplineConfig& cfg = {});

struct BandpassConfig {
  double lo = 1.0;
  double hi = 45.0;
  double transition = 0.8;  // full transition width at each edge, Hz
};

// Odd-length Hamming-windowed sinc bandpass. The cutoffs sit half a transition
// outside [lo, hi] so that the passband edges keep unit gain.
std::vector<double> design_bandpass(double rate, const BandpassConfig& cfg);

// Zero-phase application of a symmetric FIR by FFT overlap-add, with the signal
// extended by reflection at both ends.
std::vector<double> apply_fir(std::span<const double> signal, std::span<const double> taps);

ContinuousRecording bandpass(const ContinuousRecording& rec, const BandpassConfig& cfg = {});

struct EpochWindow {
  double start = -0.2;  // seconds relative to onset
  double end = 0.5;
  std::size_t points = kTimePoints;

  // -1.2 .. 1.2 s resampled to 350 points.
  static EpochWindow wide() { return {-1.2, 1.2, kTimePoints}; }
};

struct EpochResult {
  EpochedDataset data;
  std::vector<std::size_t> kept;     // event indices, in output order
  std::vector<std::size_t> skipped;  // events whose window leaves the recording
};

// Cuts one epoch per event. Windows that span exactly `points` samples are copied;
// other lengths are linearly resampled onto `points` equally spaced instants.
EpochResult epoch(const ContinuousRecording& rec, const EpochWindow& window);

struct PipelineConfig {
  bool reject = true;
  double z_low = -2.0;
  double z_high = 2.0;
  SplineConfig spline;
  BandpassConfig band;
  EpochWindow window;

  std::string to_json() const;
  static PipelineConfig from_json(const std::string& text);
};

struct PipelineReport {
  ChannelReport channels;
  std::size_t events = 0;
  std::size_t epochs = 0;
  std::vector<std::size_t> skipped;
  std::string to_json(const Montage& montage) const;
};

// Rejection, interpolation, bandpass, epoching.
EpochResult run_pipeline(const ContinuousRecording& rec, const PipelineConfig& cfg, PipelineReport* report = nullptr);

// Recording container (little-endian):
//   "EEGATTCR" | u32 version | u32 channels | f64 rate | str montage | u64 samples
//   | f64 samples, channel-major
inline constexpr char kRecordingMagic[] = "EEGATTCR";
inline constexpr std::uint32_t kRecordingVersion = 1;

void save_recording(const ContinuousRecording& rec, const std::filesystem::path& path);
// Loads the samples only; events come from the CSV file.
ContinuousRecording load_recording(const std::filesystem::path& path);

// CSV with header onset_sample,speaker_index,attended_side (side: left/right).
std::string events_csv(const std::vector<Event>& events);
std::vector<Event> parse_events_csv(const std::string& text, const std::string& source);

}  // namespace eegatt::preprocess
