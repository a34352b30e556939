#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eegatt/dataset.hpp"
#include "eegatt/montage.hpp"
#include "eegatt/preprocess.hpp"

namespace eegatt::synth {

// Amplitudes in µV, latencies in ms relative to sound onset.
struct SynthConfig {
  int n_subjects = 5;
  int trials_per_condition = 260;  // per (speaker, side) cell, summed over subjects

  double noise_sd = 4.0;
  double pink_fraction = 0.7;     // share of noise variance that is 1/f
  double noise_length_scale = 0.35;  // radians; spatial correlation of the noise

  // Sensory peaks on fronto-central sites.
  double p1_amplitude = 2.0, p1_latency = 100.0, p1_width = 50.0;
  double n1_amplitude = -4.0, n1_latency = 150.0, n1_width = 60.0;
  double p2_amplitude = 3.0, p2_latency = 200.0, p2_width = 70.0;
  // Contralateral shift of the sensory response per speaker step away from centre.
  double speaker_lateral_gain = 1.0;

  // Centro-parietal positivity in the attention window: attention_amplitude at
  // relative class 0, falling by gradient_slope per class; targets add target_amplitude.
  double attention_onset = 440.0;
  double attention_offset = 550.0;
  double attention_amplitude = 5.0;
  double gradient_slope = 1.25;
  double target_amplitude = 2.0;

  // Sustained lateral component whose sign follows the attended side.
  double laterality_gain = 3.0;

  double subject_gain_spread = 0.2;  // subject gains uniform in 1 +/- spread, mean 1

  // Fraction of trials whose post-sensory components are scaled by the attenuation.
  double sequence_effect_rate = 0.0;
  double sequence_attenuation = 0.25;

  double rate = 500.0;
  double epoch_start = -0.1;  // seconds; 350 points at 500 Hz reach 598 ms
  std::size_t points = kTimePoints;

  double soa = 2.4;  // seconds between onsets in the continuous stream
  std::vector<std::string> corrupt_channels;
  double corrupt_factor = 50.0;  // noise multiple on corrupted channels

  std::uint64_t seed = 1;

  void validate() const;
  std::string to_json() const;
  // Keys absent from `text` keep their defaults.
  static SynthConfig from_json(const std::string& text);
};

struct TrialTruth {
  int speaker = 1;
  Side side = Side::kLeft;
  int relative = 0;
  int subject = 0;
  bool sequence_effect = false;
  double attention_level = 0.0;  // planted attention amplitude before gains, µV
  double post_gain = 1.0;        // subject gain times any sequence attenuation
  double sensory_gain = 1.0;     // subject gain
};

// Every planted quantity; clean_trial() reproduces the noise-free signal exactly.
struct GroundTruth {
  SynthConfig config;
  std::vector<double> time_ms;
  std::vector<double> sensory_wave, attention_wave, lateral_wave;
  std::vector<double> sensory_topo, speaker_topo, attention_topo, lateral_topo;
  std::vector<double> subject_gain;
  std::vector<TrialTruth> trials;

  // Planted attention amplitude for a relative class.
  double attention_level(int relative) const;
  // Noise-free (electrode, time) signal of trial i, µV.
  std::vector<double> clean_trial(std::size_t i) const;
  std::string to_json() const;
};

struct SynthResult {
  EpochedDataset data;
  GroundTruth truth;
};

// Trial-split (80/10/10) dataset with planted attention structure.
SynthResult generate(const SynthConfig& config);

struct ContinuousResult {
  preprocess::ContinuousRecording recording;
  GroundTruth truth;
};

// The same trials stitched into a continuous stream at one onset per `soa`.
ContinuousResult emit_continuous(const SynthConfig& config);

}  // namespace eegatt::synth
