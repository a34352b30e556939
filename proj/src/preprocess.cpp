#include "eegatt/preprocess.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "eegatt/error.hpp"
#include "eegatt/io.hpp"
#include "json.hpp"

namespace eegatt::preprocess {

using nlohmann::json;

void ContinuousRecording::validate() const {
  if (!(rate > 0.0)) fail(ErrorCode::kConfig, "sample rate must be positive");
  if (channels.empty()) fail(ErrorCode::kDimension, "recording has no channels");
  for (const auto& ch : channels) {
    if (ch.size() != channels[0].size()) fail(ErrorCode::kDimension, "recording channels differ in length");
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    relative_label(events[i].side, events[i].speaker);
    if (i > 0 && events[i].onset < events[i - 1].onset) fail(ErrorCode::kFormat, "events are not sorted by onset");
  }
}

// ---- bad channels ------------------------------------------------------------------

std::size_t ChannelReport::bad_count() const { return static_cast<std::size_t>(std::count(bad.begin(), bad.end(), true)); }

ChannelReport reject_bad_channels(const ContinuousRecording& rec, double z_low, double z_high) {
  rec.validate();
  const std::size_t c = rec.channels.size();
  if (c < 2) fail(ErrorCode::kPreprocess, "bad-channel rejection needs at least 2 channels");
  ChannelReport r;
  r.sd.resize(c);
  for (std::size_t i = 0; i < c; ++i) {
    const auto& x = rec.channels[i];
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    r.sd[i] = std::sqrt(ss / static_cast<double>(x.size()));
  }
  double mu = 0.0;
  for (double s : r.sd) mu += s;
  mu /= static_cast<double>(c);
  double var = 0.0;
  for (double s : r.sd) var += (s - mu) * (s - mu);
  const double spread = std::sqrt(var / static_cast<double>(c));
  r.z.resize(c);
  r.bad.resize(c);
  for (std::size_t i = 0; i < c; ++i) {
    r.z[i] = spread > 0.0 ? (r.sd[i] - mu) / spread : 0.0;
    r.bad[i] = r.z[i] < z_low || r.z[i] > z_high;
  }
  if (r.bad_count() == c) fail(ErrorCode::kPreprocess, "every channel was rejected");
  return r;
}

// ---- interpolation -----------------------------------------------------------------

ContinuousRecording spherical_interpolate(const ContinuousRecording& rec, const std::vector<bool>& bad,
                                          const Montage& montage, const SplineConfig& cfg) {
  rec.validate();
  if (bad.size() != rec.channels.size()) fail(ErrorCode::kDimension, "bad-channel mask length differs from channel count");
  if (montage.size() != rec.channels.size()) {
    fail(ErrorCode::kDimension, "montage '" + montage.name + "' has " + std::to_string(montage.size()) + " sites, recording has " +
                                    std::to_string(rec.channels.size()) + " channels");
  }
  ContinuousRecording out = rec;
  std::vector<std::size_t> good_idx, bad_idx;
  for (std::size_t i = 0; i < bad.size(); ++i) (bad[i] ? bad_idx : good_idx).push_back(i);
  if (bad_idx.empty()) return out;
  if (good_idx.size() < 4) fail(ErrorCode::kPreprocess, "spherical interpolation needs at least 4 good channels");

  std::vector<Vec3> src, dst;
  for (auto i : good_idx) src.push_back(montage.positions[i]);
  for (auto i : bad_idx) dst.push_back(montage.positions[i]);
  const SphericalSpline spline(src, cfg);
  const Eigen::MatrixXd w = spline.interpolation_matrix(dst);

  const std::size_t n = rec.length();
  for (std::size_t b = 0; b < bad_idx.size(); ++b) {
    auto& target = out.channels[bad_idx[b]];
    std::fill(target.begin(), target.end(), 0.0);
    for (std::size_t g = 0; g < good_idx.size(); ++g) {
      const double wg = w(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(g));
      const auto& s = rec.channels[good_idx[g]];
      for (std::size_t t = 0; t < n; ++t) target[t] += wg * s[t];
    }
  }
  return out;
}

// ---- filtering ---------------------------------------------------------------------

std::vector<double> design_bandpass(double rate, const BandpassConfig& cfg) {
  const double nyquist = rate / 2.0;
  if (!(cfg.transition > 0.0)) fail(ErrorCode::kConfig, "filter transition width must be positive");
  if (!(cfg.lo - cfg.transition / 2.0 > 0.0)) fail(ErrorCode::kConfig, "low cutoff must exceed half the transition width");
  if (!(cfg.hi > cfg.lo)) fail(ErrorCode::kConfig, "high cutoff must exceed the low cutoff");
  if (!(cfg.hi + cfg.transition / 2.0 < nyquist)) {
    fail(ErrorCode::kConfig, "high cutoff " + io::format_double(cfg.hi) + " Hz is not below the Nyquist frequency " +
                                 io::format_double(nyquist) + " Hz");
  }
  auto taps = static_cast<std::size_t>(std::ceil(3.3 * rate / cfg.transition));
  if (taps % 2 == 0) ++taps;
  const double f1 = (cfg.lo - cfg.transition / 2.0) / rate;
  const double f2 = (cfg.hi + cfg.transition / 2.0) / rate;
  const double mid = static_cast<double>(taps - 1) / 2.0;
  auto lowpass = [](double fc, double k) {
    return k == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * k) / (std::numbers::pi * k);
  };
  std::vector<double> h(taps);
  for (std::size_t i = 0; i <= taps / 2; ++i) {
    const double k = static_cast<double>(i) - mid;
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(taps - 1));
    h[i] = h[taps - 1 - i] = w * (lowpass(f2, k) - lowpass(f1, k));
  }
  return h;
}

namespace {

std::size_t reflect(long long i, std::size_t n) {
  if (n == 1) return 0;
  const long long period = 2 * static_cast<long long>(n - 1);
  long long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long long>(n) ? m : period - m);
}

// Overlap-add FFT convolution with a fixed kernel.
class FftConvolver {
 public:
  explicit FftConvolver(std::span<const double> taps) : taps_(taps.size()) {
    fft_ = 1;
    while (fft_ < 2 * taps_) fft_ <<= 1;
    block_ = fft_ - taps_ + 1;
    time_ = fftw_alloc_real(fft_);
    freq_ = fftw_alloc_complex(fft_ / 2 + 1);
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(fft_), time_, freq_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(fft_), freq_, time_, FFTW_ESTIMATE);
    std::fill(time_, time_ + fft_, 0.0);
    std::copy(taps.begin(), taps.end(), time_);
    fftw_execute(forward_);
    kernel_.resize(fft_ / 2 + 1);
    for (std::size_t i = 0; i < kernel_.size(); ++i) kernel_[i] = {freq_[i][0], freq_[i][1]};
  }
  ~FftConvolver() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(time_);
    fftw_free(freq_);
  }
  FftConvolver(const FftConvolver&) = delete;
  FftConvolver& operator=(const FftConvolver&) = delete;

  // Full linear convolution of x with the kernel.
  std::vector<double> convolve(const std::vector<double>& x) {
    std::vector<double> out(x.size() + taps_ - 1, 0.0);
    const double scale = 1.0 / static_cast<double>(fft_);
    for (std::size_t start = 0; start < x.size(); start += block_) {
      const std::size_t len = std::min(block_, x.size() - start);
      std::fill(time_, time_ + fft_, 0.0);
      std::copy(x.begin() + static_cast<long>(start), x.begin() + static_cast<long>(start + len), time_);
      fftw_execute(forward_);
      for (std::size_t i = 0; i < kernel_.size(); ++i) {
        const std::complex<double> v = std::complex<double>(freq_[i][0], freq_[i][1]) * kernel_[i];
        freq_[i][0] = v.real();
        freq_[i][1] = v.imag();
      }
      fftw_execute(inverse_);
      const std::size_t produced = std::min(len + taps_ - 1, out.size() - start);
      for (std::size_t i = 0; i < produced; ++i) out[start + i] += time_[i] * scale;
    }
    return out;
  }

  std::vector<double> filter_zero_phase(std::span<const double> signal) {
    const std::size_t n = signal.size();
    const std::size_t pad = (taps_ - 1) / 2;
    std::vector<double> ext(n + 2 * pad);
    for (std::size_t i = 0; i < ext.size(); ++i) {
      ext[i] = signal[reflect(static_cast<long long>(i) - static_cast<long long>(pad), n)];
    }
    const auto full = convolve(ext);
    // The symmetric kernel delays by pad samples; skipping the padding and the delay
    // leaves the aligned output.
    return {full.begin() + static_cast<long>(2 * pad), full.begin() + static_cast<long>(2 * pad + n)};
  }

 private:
  std::size_t taps_;
  std::size_t fft_ = 0;
  std::size_t block_ = 0;
  double* time_ = nullptr;
  fftw_complex* freq_ = nullptr;
  fftw_plan forward_{};
  fftw_plan inverse_{};
  std::vector<std::complex<double>> kernel_;
};

}  // namespace

std::vector<double> apply_fir(std::span<const double> signal, std::span<const double> taps) {
  if (taps.empty() || taps.size() % 2 == 0) fail(ErrorCode::kConfig, "zero-phase FIR needs an odd number of taps");
  if (signal.empty()) return {};
  FftConvolver conv(taps);
  return conv.filter_zero_phase(signal);
}

ContinuousRecording bandpass(const ContinuousRecording& rec, const BandpassConfig& cfg) {
  rec.validate();
  const auto taps = design_bandpass(rec.rate, cfg);
  ContinuousRecording out = rec;
  if (rec.length() == 0) return out;
  FftConvolver conv(taps);
  for (auto& ch : out.channels) ch = conv.filter_zero_phase(ch);
  return out;
}

// ---- epoching ----------------------------------------------------------------------

EpochResult epoch(const ContinuousRecording& rec, const EpochWindow& window) {
  rec.validate();
  if (!(window.end > window.start)) fail(ErrorCode::kConfig, "epoch window end must follow its start");
  if (window.points < 2) fail(ErrorCode::kConfig, "epochs need at least 2 points");
  const long long s0 = std::llround(window.start * rec.rate);
  const long long count = std::llround(window.end * rec.rate) - s0;
  if (count < 2) fail(ErrorCode::kConfig, "epoch window is shorter than two samples");

  const std::size_t electrodes = rec.channels.size();
  EpochResult r{EpochedDataset(electrodes, window.points, rec.montage), {}, {}};
  r.data.set_provenance("recording");
  const double step = static_cast<double>(count - 1) / static_cast<double>(window.points - 1);
  r.data.set_time_axis(static_cast<double>(s0) * 1000.0 / rec.rate, step * 1000.0 / rec.rate);
  const auto length = static_cast<long long>(rec.length());
  std::vector<double> sample(electrodes * window.points);
  for (std::size_t e = 0; e < rec.events.size(); ++e) {
    const auto& ev = rec.events[e];
    const long long first = static_cast<long long>(ev.onset) + s0;
    if (first < 0 || first + count > length) {
      r.skipped.push_back(e);
      continue;
    }
    for (std::size_t c = 0; c < electrodes; ++c) {
      const double* x = rec.channels[c].data() + first;
      double* y = sample.data() + c * window.points;
      if (static_cast<std::size_t>(count) == window.points) {
        std::copy(x, x + count, y);
        continue;
      }
      for (std::size_t k = 0; k < window.points; ++k) {
        const double pos = static_cast<double>(k) * step;
        const auto i0 = std::min(static_cast<long long>(pos), count - 2);
        const double frac = pos - static_cast<double>(i0);
        y[k] = (1.0 - frac) * x[i0] + frac * x[i0 + 1];
      }
    }
    SampleInfo info;
    info.speaker = ev.speaker;
    info.side = ev.side;
    r.data.add(std::span<const double>(sample), info);
    r.kept.push_back(e);
  }
  return r;
}

// ---- pipeline ----------------------------------------------------------------------

std::string PipelineConfig::to_json() const {
  json j{{"reject", reject},
         {"z_low", z_low},
         {"z_high", z_high},
         {"spline_order", spline.order},
         {"spline_terms", spline.terms},
         {"spline_lambda", spline.lambda},
         {"band_lo", band.lo},
         {"band_hi", band.hi},
         {"band_transition", band.transition},
         {"epoch_start", window.start},
         {"epoch_end", window.end},
         {"epoch_points", window.points}};
  return j.dump(2);
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  PipelineConfig c;
  try {
    const json j = json::parse(text);
    c.reject = j.value("reject", c.reject);
    c.z_low = j.value("z_low", c.z_low);
    c.z_high = j.value("z_high", c.z_high);
    c.spline.order = j.value("spline_order", c.spline.order);
    c.spline.terms = j.value("spline_terms", c.spline.terms);
    c.spline.lambda = j.value("spline_lambda", c.spline.lambda);
    c.band.lo = j.value("band_lo", c.band.lo);
    c.band.hi = j.value("band_hi", c.band.hi);
    c.band.transition = j.value("band_transition", c.band.transition);
    c.window.start = j.value("epoch_start", c.window.start);
    c.window.end = j.value("epoch_end", c.window.end);
    c.window.points = j.value("epoch_points", c.window.points);
  } catch (const json::exception& e) {
    fail(ErrorCode::kConfig, std::string("malformed preprocessing config: ") + e.what());
  }
  return c;
}

std::string PipelineReport::to_json(const Montage& montage) const {
  json bad = json::array();
  for (std::size_t i = 0; i < channels.bad.size(); ++i) {
    if (channels.bad[i]) bad.push_back(i < montage.size() ? montage.labels[i] : std::to_string(i));
  }
  json j{{"bad_channels", bad}, {"events", events}, {"epochs", epochs}, {"skipped_events", skipped}};
  return j.dump(2) + "\n";
}

EpochResult run_pipeline(const ContinuousRecording& rec, const PipelineConfig& cfg, PipelineReport* report) {
  rec.validate();
  ContinuousRecording work = rec;
  PipelineReport local;
  if (cfg.reject) {
    local.channels = reject_bad_channels(work, cfg.z_low, cfg.z_high);
    if (local.channels.bad_count() > 0) {
      work = spherical_interpolate(work, local.channels.bad, montage_by_name(work.montage), cfg.spline);
    }
  }
  work = bandpass(work, cfg.band);
  auto result = epoch(work, cfg.window);
  local.events = rec.events.size();
  local.epochs = result.kept.size();
  local.skipped = result.skipped;
  if (report) *report = std::move(local);
  return result;
}

// ---- files -------------------------------------------------------------------------

void save_recording(const ContinuousRecording& rec, const std::filesystem::path& path) {
  rec.validate();
  io::ByteWriter w;
  w.bytes(std::string_view(kRecordingMagic, 8));
  w.u32(kRecordingVersion);
  w.u32(static_cast<std::uint32_t>(rec.channels.size()));
  w.f64(rec.rate);
  w.str(rec.montage);
  w.u64(rec.length());
  for (const auto& ch : rec.channels)
    for (double v : ch) w.f64(v);
  io::write_file_atomic(path, w.buffer());
}

ContinuousRecording load_recording(const std::filesystem::path& path) {
  io::ByteReader r(io::read_file(path), path.string());
  r.expect_magic(std::string_view(kRecordingMagic, 8));
  const auto version = r.u32();
  if (version != kRecordingVersion) fail(ErrorCode::kFormat, path.string() + ": unsupported recording version " + std::to_string(version));
  ContinuousRecording rec;
  const auto channels = r.u32();
  rec.rate = r.f64();
  rec.montage = r.str();
  const auto samples = r.u64();
  if (channels == 0 || !(rec.rate > 0.0)) fail(ErrorCode::kFormat, path.string() + ": invalid recording header");
  if (r.remaining() != static_cast<std::size_t>(channels) * samples * 8) {
    fail(ErrorCode::kFormat, path.string() + ": payload size does not match the header");
  }
  rec.channels.assign(channels, std::vector<double>(samples));
  for (auto& ch : rec.channels)
    for (auto& v : ch) v = r.f64();
  return rec;
}

std::string events_csv(const std::vector<Event>& events) {
  std::ostringstream os;
  os << "onset_sample,speaker_index,attended_side\n";
  for (const auto& e : events) os << e.onset << ',' << e.speaker << ',' << side_name(e.side) << '\n';
  return os.str();
}

std::vector<Event> parse_events_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::vector<Event> events;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("onset", 0) == 0) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    const auto where = source + ":" + std::to_string(line_no);
    if (fields.size() != 3) fail(ErrorCode::kFormat, where + ": expected 3 fields, got " + std::to_string(fields.size()));
    Event e;
    try {
      std::size_t used = 0;
      const long long onset = std::stoll(fields[0], &used);
      if (used != fields[0].size() || onset < 0) throw std::invalid_argument("onset");
      e.onset = static_cast<std::size_t>(onset);
      e.speaker = std::stoi(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("speaker");
    } catch (const std::logic_error&) {
      fail(ErrorCode::kFormat, where + ": malformed number");
    }
    try {
      e.side = side_from_name(fields[2]);
      relative_label(e.side, e.speaker);
    } catch (const Error& err) {
      fail(ErrorCode::kFormat, where + ": " + err.what());
    }
    if (!events.empty() && e.onset < events.back().onset) fail(ErrorCode::kFormat, where + ": events are not sorted by onset");
    events.push_back(e);
  }
  return events;
}

}  // namespace eegatt::preprocess
