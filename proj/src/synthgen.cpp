#include "eegatt/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "eegatt/error.hpp"
#include "eegatt/rng.hpp"
#include "json.hpp"

namespace eegatt::synth {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

// Raised half-cosine: peak 1 at `centre`, zero beyond centre +/- width/2.
double half_cosine(double t, double centre, double width) {
  const double u = (t - centre) / width;
  return std::abs(u) <= 0.5 ? std::cos(kPi * u) : 0.0;
}

Vec3 direction(double x, double y, double z) {
  const double n = std::sqrt(x * x + y * y + z * z);
  return {x / n, y / n, z / n};
}

double gaussian_at(const Vec3& p, const Vec3& centre, double sigma) {
  const double d = angular_distance(p, centre);
  return std::exp(-d * d / (2.0 * sigma * sigma));
}

// 1/f noise from three leaky integrators plus a direct term; states start in their
// stationary distribution so every trial is statistically identical.
class PinkNoise {
 public:
  explicit PinkNoise(Rng& rng) {
    Eigen::Matrix3d s;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s(i, j) = kGain[i] * kGain[j] / (1.0 - kPole[i] * kPole[j]);
    const Eigen::Matrix3d l = s.llt().matrixL();
    const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
    const Eigen::Vector3d b = l * z;
    for (int i = 0; i < 3; ++i) state_[i] = b(i);
  }

  double next(Rng& rng) {
    const double w = rng.normal();
    double out = kDirect * w;
    for (int i = 0; i < 3; ++i) {
      state_[i] = kPole[i] * state_[i] + kGain[i] * w;
      out += state_[i];
    }
    return out / stationary_sd();
  }

  static double stationary_sd() {
    static const double sd = [] {
      double v = kDirect * kDirect;
      for (int i = 0; i < 3; ++i) {
        v += 2.0 * kDirect * kGain[i];
        for (int j = 0; j < 3; ++j) v += kGain[i] * kGain[j] / (1.0 - kPole[i] * kPole[j]);
      }
      return std::sqrt(v);
    }();
    return sd;
  }

 private:
  static constexpr double kPole[3] = {0.99765, 0.96300, 0.57000};
  static constexpr double kGain[3] = {0.0990460, 0.2965164, 1.0526913};
  static constexpr double kDirect = 0.1848;
  double state_[3] = {0.0, 0.0, 0.0};
};

// Lower Cholesky factor of a Gaussian kernel over electrode angular distance; its
// rows have unit norm, so mixing preserves the per-channel variance.
Eigen::MatrixXd spatial_mixing(const Montage& m, double length_scale) {
  const auto n = static_cast<Eigen::Index>(m.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = angular_distance(m.positions[i], m.positions[j]);
      k(i, j) = std::exp(-d * d / (2.0 * length_scale * length_scale));
    }
  k.diagonal().array() += 1e-9;
  Eigen::MatrixXd l = k.llt().matrixL();
  for (Eigen::Index i = 0; i < n; ++i) l.row(i) /= l.row(i).norm();
  return l;
}

class NoiseSource {
 public:
  NoiseSource(const SynthConfig& cfg, const Eigen::MatrixXd& mixing, std::uint64_t seed)
      : cfg_(cfg), mixing_(mixing), rng_(seed) {
    for (Eigen::Index c = 0; c < mixing_.rows(); ++c) pink_.emplace_back(rng_);
  }

  // (channels x samples) block, row-major, continuing each channel's pink state.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> block(std::size_t samples) {
    const auto c = mixing_.rows();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> z(c, static_cast<Eigen::Index>(samples));
    const double a = std::sqrt(cfg_.pink_fraction), b = std::sqrt(1.0 - cfg_.pink_fraction);
    for (Eigen::Index ch = 0; ch < c; ++ch)
      for (Eigen::Index t = 0; t < z.cols(); ++t) {
        const double pink = pink_[static_cast<std::size_t>(ch)].next(rng_);
        z(ch, t) = a * pink + b * rng_.normal();
      }
    return cfg_.noise_sd * (mixing_ * z);
  }

  Rng& rng() { return rng_; }

 private:
  const SynthConfig& cfg_;
  const Eigen::MatrixXd& mixing_;
  Rng rng_;
  std::vector<PinkNoise> pink_;
};

std::vector<int> trials_per_subject(const SynthConfig& cfg) {
  std::vector<int> n(static_cast<std::size_t>(cfg.n_subjects), cfg.trials_per_condition / cfg.n_subjects);
  for (int s = 0; s < cfg.trials_per_condition % cfg.n_subjects; ++s) ++n[static_cast<std::size_t>(s)];
  return n;
}

GroundTruth build_truth(const SynthConfig& cfg, const Montage& montage) {
  cfg.validate();
  GroundTruth gt;
  gt.config = cfg;
  const double step_ms = 1000.0 / cfg.rate;
  for (std::size_t k = 0; k < cfg.points; ++k) {
    const double t = cfg.epoch_start * 1000.0 + static_cast<double>(k) * step_ms;
    gt.time_ms.push_back(t);
    gt.sensory_wave.push_back(cfg.p1_amplitude * half_cosine(t, cfg.p1_latency, cfg.p1_width) +
                              cfg.n1_amplitude * half_cosine(t, cfg.n1_latency, cfg.n1_width) +
                              cfg.p2_amplitude * half_cosine(t, cfg.p2_latency, cfg.p2_width));
    const double centre = 0.5 * (cfg.attention_onset + cfg.attention_offset);
    gt.attention_wave.push_back(half_cosine(t, centre, cfg.attention_offset - cfg.attention_onset));
    gt.lateral_wave.push_back(half_cosine(t, 450.0, 500.0));
  }

  const Vec3 fronto_central = direction(0.0, std::sin(kPi / 8.0), std::cos(kPi / 8.0));
  const Vec3 vertex{0.0, 0.0, 1.0};
  const Vec3 parietal = direction(0.0, -std::sin(kPi / 6.0), std::cos(kPi / 6.0));
  for (const auto& p : montage.positions) {
    gt.sensory_topo.push_back(gaussian_at(p, fronto_central, 0.7));
    gt.speaker_topo.push_back(-p[0] * gaussian_at(p, vertex, 0.8));
    gt.attention_topo.push_back(gaussian_at(p, parietal, 0.7));
    gt.lateral_topo.push_back(p[0] * gaussian_at(p, parietal, 0.8));
  }

  const auto per_subject = trials_per_subject(cfg);
  Rng gain_rng(derive_seed(cfg.seed, 1));
  double weighted = 0.0, count = 0.0;
  for (int s = 0; s < cfg.n_subjects; ++s) {
    const double g = 1.0 + cfg.subject_gain_spread * gain_rng.uniform(-1.0, 1.0);
    gt.subject_gain.push_back(g);
    weighted += g * per_subject[static_cast<std::size_t>(s)];
    count += per_subject[static_cast<std::size_t>(s)];
  }
  // Every class shares the same subject composition, so a unit trial-weighted mean
  // gain keeps class averages equal to the planted amplitudes.
  for (auto& g : gt.subject_gain) g /= weighted / count;

  for (int s = 0; s < cfg.n_subjects; ++s) {
    std::vector<TrialTruth> trials;
    for (int speaker = 1; speaker <= kSpeakers; ++speaker)
      for (Side side : {Side::kLeft, Side::kRight})
        for (int k = 0; k < per_subject[static_cast<std::size_t>(s)]; ++k) {
          TrialTruth t;
          t.speaker = speaker;
          t.side = side;
          t.relative = relative_label(side, speaker);
          t.subject = s;
          trials.push_back(t);
        }
    Rng order(derive_seed(cfg.seed, 200 + static_cast<std::uint64_t>(s)));
    order.shuffle(trials.begin(), trials.end());
    Rng seq(derive_seed(cfg.seed, 300 + static_cast<std::uint64_t>(s)));
    for (auto& t : trials) {
      t.sequence_effect = seq.uniform() < cfg.sequence_effect_rate;
      t.attention_level = gt.attention_level(t.relative);
      t.sensory_gain = gt.subject_gain[static_cast<std::size_t>(s)];
      t.post_gain = t.sensory_gain * (t.sequence_effect ? cfg.sequence_attenuation : 1.0);
      gt.trials.push_back(t);
    }
  }
  return gt;
}

void check_corrupt_labels(const SynthConfig& cfg, const Montage& montage) {
  for (const auto& label : cfg.corrupt_channels) montage.index_of(label);
}

std::string provenance(const SynthConfig& cfg) { return "synth:seed=" + std::to_string(cfg.seed); }

}  // namespace

void SynthConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::kConfig, "synthetic config: " + what); };
  if (n_subjects < 1) bad("n_subjects must be at least 1");
  if (trials_per_condition <= 0) bad("trials_per_condition must be positive");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) bad("noise_sd must be finite and non-negative");
  if (!(pink_fraction >= 0.0 && pink_fraction <= 1.0)) bad("pink_fraction must lie in [0, 1]");
  if (!(noise_length_scale > 0.0)) bad("noise_length_scale must be positive");
  if (!(rate > 0.0) || points < 2) bad("rate and points must be positive");
  if (!(sequence_effect_rate >= 0.0 && sequence_effect_rate <= 1.0)) bad("sequence_effect_rate must lie in [0, 1]");
  if (!(sequence_attenuation >= 0.0)) bad("sequence_attenuation must be non-negative");
  if (!(corrupt_factor >= 0.0)) bad("corrupt_factor must be non-negative");
  const double first = epoch_start * 1000.0;
  const double last = first + static_cast<double>(points - 1) * 1000.0 / rate;
  if (!(attention_onset < attention_offset) || attention_onset < first || attention_offset > last + 1000.0 / rate) {
    bad("attention window must lie inside the epoch");
  }
  if (soa * rate < static_cast<double>(points)) bad("soa must be at least one epoch long");
  for (double v : {p1_amplitude, n1_amplitude, p2_amplitude, speaker_lateral_gain, attention_amplitude, gradient_slope,
                   target_amplitude, laterality_gain, subject_gain_spread}) {
    if (!std::isfinite(v)) bad("amplitudes must be finite");
  }
  if (!(subject_gain_spread >= 0.0 && subject_gain_spread < 1.0)) bad("subject_gain_spread must lie in [0, 1)");
}

std::string SynthConfig::to_json() const {
  json j{{"n_subjects", n_subjects},
         {"trials_per_condition", trials_per_condition},
         {"noise_sd", noise_sd},
         {"pink_fraction", pink_fraction},
         {"noise_length_scale", noise_length_scale},
         {"p1_amplitude", p1_amplitude},
         {"p1_latency", p1_latency},
         {"p1_width", p1_width},
         {"n1_amplitude", n1_amplitude},
         {"n1_latency", n1_latency},
         {"n1_width", n1_width},
         {"p2_amplitude", p2_amplitude},
         {"p2_latency", p2_latency},
         {"p2_width", p2_width},
         {"speaker_lateral_gain", speaker_lateral_gain},
         {"attention_onset", attention_onset},
         {"attention_offset", attention_offset},
         {"attention_amplitude", attention_amplitude},
         {"gradient_slope", gradient_slope},
         {"target_amplitude", target_amplitude},
         {"laterality_gain", laterality_gain},
         {"subject_gain_spread", subject_gain_spread},
         {"sequence_effect_rate", sequence_effect_rate},
         {"sequence_attenuation", sequence_attenuation},
         {"rate", rate},
         {"epoch_start", epoch_start},
         {"points", points},
         {"soa", soa},
         {"corrupt_channels", corrupt_channels},
         {"corrupt_factor", corrupt_factor},
         {"seed", seed}};
  return j.dump(2);
}

SynthConfig SynthConfig::from_json(const std::string& text) {
  SynthConfig c;
  try {
    const json j = json::parse(text);
    for (const auto& [key, _] : j.items()) {
      static const char* known[] = {"n_subjects", "trials_per_condition", "noise_sd", "pink_fraction", "noise_length_scale",
                                    "p1_amplitude", "p1_latency", "p1_width", "n1_amplitude", "n1_latency", "n1_width",
                                    "p2_amplitude", "p2_latency", "p2_width", "speaker_lateral_gain", "attention_onset",
                                    "attention_offset", "attention_amplitude", "gradient_slope", "target_amplitude",
                                    "laterality_gain", "subject_gain_spread", "sequence_effect_rate",
                                    "sequence_attenuation", "rate", "epoch_start", "points", "soa", "corrupt_channels",
                                    "corrupt_factor", "seed"};
      if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
        fail(ErrorCode::kConfig, "synthetic config: unknown key '" + key + "'");
      }
    }
#define EEGATT_GET(name) c.name = j.value(#name, c.name)
    EEGATT_GET(n_subjects);
    EEGATT_GET(trials_per_condition);
    EEGATT_GET(noise_sd);
    EEGATT_GET(pink_fraction);
    EEGATT_GET(noise_length_scale);
    EEGATT_GET(p1_amplitude);
    EEGATT_GET(p1_latency);
    EEGATT_GET(p1_width);
    EEGATT_GET(n1_amplitude);
    EEGATT_GET(n1_latency);
    EEGATT_GET(n1_width);
    EEGATT_GET(p2_amplitude);
    EEGATT_GET(p2_latency);
    EEGATT_GET(p2_width);
    EEGATT_GET(speaker_lateral_gain);
    EEGATT_GET(attention_onset);
    EEGATT_GET(attention_offset);
    EEGATT_GET(attention_amplitude);
    EEGATT_GET(gradient_slope);
    EEGATT_GET(target_amplitude);
    EEGATT_GET(laterality_gain);
    EEGATT_GET(subject_gain_spread);
    EEGATT_GET(sequence_effect_rate);
    EEGATT_GET(sequence_attenuation);
    EEGATT_GET(rate);
    EEGATT_GET(epoch_start);
    EEGATT_GET(points);
    EEGATT_GET(soa);
    EEGATT_GET(corrupt_channels);
    EEGATT_GET(corrupt_factor);
    EEGATT_GET(seed);
#undef EEGATT_GET
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("malformed synthetic config: ") + e.what());
  }
  c.validate();
  return c;
}

double GroundTruth::attention_level(int relative) const {
  return config.attention_amplitude - config.gradient_slope * relative + (relative == 0 ? config.target_amplitude : 0.0);
}

std::vector<double> GroundTruth::clean_trial(std::size_t i) const {
  const auto& t = trials.at(i);
  const std::size_t e_count = sensory_topo.size(), n = time_ms.size();
  const double speaker_pos = (t.speaker - 3) / 2.0;
  const double side_sign = t.side == Side::kLeft ? -1.0 : 1.0;
  std::vector<double> out(e_count * n);
  for (std::size_t e = 0; e < e_count; ++e) {
    const double sens = t.sensory_gain * (sensory_topo[e] + config.speaker_lateral_gain * speaker_pos * speaker_topo[e]);
    const double att = t.post_gain * t.attention_level * attention_topo[e];
    const double lat = t.post_gain * side_sign * config.laterality_gain * lateral_topo[e];
    double* row = out.data() + e * n;
    for (std::size_t k = 0; k < n; ++k) row[k] = sens * sensory_wave[k] + att * attention_wave[k] + lat * lateral_wave[k];
  }
  return out;
}

std::string GroundTruth::to_json() const {
  json trials_j{{"speaker", json::array()}, {"side", json::array()},           {"relative", json::array()},
                {"subject", json::array()}, {"sequence_effect", json::array()}, {"attention_level", json::array()},
                {"post_gain", json::array()}};
  for (const auto& t : trials) {
    trials_j["speaker"].push_back(t.speaker);
    trials_j["side"].push_back(side_name(t.side));
    trials_j["relative"].push_back(t.relative);
    trials_j["subject"].push_back(t.subject);
    trials_j["sequence_effect"].push_back(t.sequence_effect);
    trials_j["attention_level"].push_back(t.attention_level);
    trials_j["post_gain"].push_back(t.post_gain);
  }
  json j{{"config", json::parse(config.to_json())},
         {"time_ms", time_ms},
         {"waves", {{"sensory", sensory_wave}, {"attention", attention_wave}, {"lateral", lateral_wave}}},
         {"topographies",
          {{"sensory", sensory_topo}, {"speaker", speaker_topo}, {"attention", attention_topo}, {"lateral", lateral_topo}}},
         {"subject_gain", subject_gain},
         {"trials", trials_j}};
  return j.dump() + "\n";
}

SynthResult generate(const SynthConfig& config) {
  const Montage montage = standard_montage();
  check_corrupt_labels(config, montage);
  SynthResult r{EpochedDataset(montage.size(), config.points, montage.name), build_truth(config, montage)};
  r.data.set_provenance(provenance(config));
  r.data.set_time_axis(config.epoch_start * 1000.0, 1000.0 / config.rate);
  const auto mixing = spatial_mixing(montage, config.noise_length_scale);
  std::vector<bool> corrupt(montage.size(), false);
  for (const auto& label : config.corrupt_channels) corrupt[montage.index_of(label)] = true;

  std::size_t i = 0;
  for (int s = 0; s < config.n_subjects; ++s) {
    NoiseSource noise(config, mixing, derive_seed(config.seed, 100 + static_cast<std::uint64_t>(s)));
    for (; i < r.truth.trials.size() && r.truth.trials[i].subject == s; ++i) {
      auto x = r.truth.clean_trial(i);
      if (config.noise_sd > 0.0) {
        const auto z = noise.block(config.points);
        for (std::size_t k = 0; k < x.size(); ++k) x[k] += z.data()[k];
      }
      for (std::size_t e = 0; e < montage.size(); ++e) {
        if (!corrupt[e]) continue;
        const double sd = config.corrupt_factor * (config.noise_sd > 0.0 ? config.noise_sd : 1.0);
        for (std::size_t k = 0; k < config.points; ++k) x[e * config.points + k] += sd * noise.rng().normal();
      }
      const auto& t = r.truth.trials[i];
      SampleInfo info;
      info.speaker = t.speaker;
      info.side = t.side;
      info.subject = t.subject;
      info.sequence_effect = t.sequence_effect;
      r.data.add(std::span<const double>(x), info);
    }
  }
  assign_splits(r.data, SplitMode::kTrial, derive_seed(config.seed, 7));
  return r;
}

ContinuousResult emit_continuous(const SynthConfig& config) {
  const Montage montage = standard_montage();
  check_corrupt_labels(config, montage);
  ContinuousResult r{{}, build_truth(config, montage)};
  auto& rec = r.recording;
  rec.rate = config.rate;
  rec.montage = montage.name;

  const auto soa = static_cast<std::size_t>(std::llround(config.soa * config.rate));
  const auto lead = static_cast<std::size_t>(std::llround(1.5 * config.rate));  // quiet margin at both ends
  const auto pre = static_cast<std::size_t>(std::llround(-config.epoch_start * config.rate));
  const std::size_t n_trials = r.truth.trials.size();
  const std::size_t length = lead + n_trials * soa + lead;
  rec.channels.assign(montage.size(), std::vector<double>(length, 0.0));

  if (config.noise_sd > 0.0 || !config.corrupt_channels.empty()) {
    const auto mixing = spatial_mixing(montage, config.noise_length_scale);
    NoiseSource noise(config, mixing, derive_seed(config.seed, 100));
    const std::size_t chunk = 4096;
    for (std::size_t start = 0; start < length; start += chunk) {
      const std::size_t len = std::min(chunk, length - start);
      if (config.noise_sd > 0.0) {
        const auto z = noise.block(len);
        for (std::size_t c = 0; c < montage.size(); ++c)
          for (std::size_t k = 0; k < len; ++k) rec.channels[c][start + k] = z(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
      }
      for (const auto& label : config.corrupt_channels) {
        auto& ch = rec.channels[montage.index_of(label)];
        const double sd = config.corrupt_factor * (config.noise_sd > 0.0 ? config.noise_sd : 1.0);
        for (std::size_t k = 0; k < len; ++k) ch[start + k] += sd * noise.rng().normal();
      }
    }
  }

  for (std::size_t i = 0; i < n_trials; ++i) {
    const std::size_t onset = lead + i * soa;
    const auto x = r.truth.clean_trial(i);
    for (std::size_t c = 0; c < montage.size(); ++c)
      for (std::size_t k = 0; k < config.points; ++k) rec.channels[c][onset - pre + k] += x[c * config.points + k];
    const auto& t = r.truth.trials[i];
    rec.events.push_back({onset, t.speaker, t.side});
  }
  return r;
}

}  // namespace eegatt::synth
