#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "eegatt/error.hpp"
#include "eegatt/montage.hpp"
#include "eegatt/preprocess.hpp"
#include "eegatt/rng.hpp"
#include "eegatt/spline.hpp"
#include "spectrum.hpp"

namespace eegatt {
namespace {

using preprocess::ContinuousRecording;

ContinuousRecording noise_recording(std::size_t channels, std::size_t length, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  ContinuousRecording rec;
  rec.channels.assign(channels, std::vector<double>(length));
  for (auto& ch : rec.channels)
    for (auto& v : ch) v = sd * rng.normal();
  return rec;
}

// ---- montage ------------------------------------------------------------------------

TEST(Montage, SixtyFourUniqueUnitSites) {
  const auto m = standard_montage();
  EXPECT_EQ(m.size(), 64u);
  EXPECT_NO_THROW(m.validate());
  for (const auto& p : m.positions) EXPECT_NEAR(std::sqrt(dot(p, p)), 1.0, 1e-12);
}

TEST(Montage, LandmarksAndSymmetry) {
  const auto m = standard_montage();
  const auto cz = m.positions[m.index_of("Cz")];
  EXPECT_NEAR(cz[2], 1.0, 1e-12);
  const auto c3 = m.positions[m.index_of("C3")], c4 = m.positions[m.index_of("C4")];
  EXPECT_NEAR(c3[0], -c4[0], 1e-12);
  EXPECT_LT(c3[0], 0.0);
  EXPECT_GT(m.positions[m.index_of("Fz")][1], 0.0);
  EXPECT_LT(m.positions[m.index_of("Oz")][1], 0.0);
}

TEST(Montage, UnknownLabelAndName) {
  const auto m = standard_montage();
  EXPECT_THROW(m.index_of("Xx9"), Error);
  EXPECT_THROW(montage_by_name("biosemi-128"), Error);
}

TEST(Montage, ProjectionRoundTrip) {
  for (const auto& p : standard_montage().positions) {
    const auto xy = project_azimuthal(p);
    const auto q = unproject_azimuthal(xy[0], xy[1]);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(p[k], q[k], 1e-12);
  }
  const auto vertex = project_azimuthal({0, 0, 1});
  EXPECT_NEAR(std::hypot(vertex[0], vertex[1]), 0.0, 1e-15);
  EXPECT_NEAR(std::hypot(project_azimuthal({1, 0, 0})[0], project_azimuthal({1, 0, 0})[1]), 1.0, 1e-12);
}

// ---- spline -------------------------------------------------------------------------

TEST(Spline, ReproducesConstantField) {
  const auto m = standard_montage();
  std::vector<Vec3> sources(m.positions.begin() + 1, m.positions.end());
  SphericalSpline s(sources);
  std::vector<double> v(sources.size(), 7.25);
  const auto out = s.evaluate(v, {m.positions[0], {0, 0, 1}, {0.6, 0.0, 0.8}});
  for (double x : out) EXPECT_NEAR(x, 7.25, 1e-6);
}

TEST(Spline, SmoothFieldLeaveOneOut) {
  const auto m = standard_montage();
  const Vec3 axis{0.3, 0.5, 0.81};
  auto field = [&](const Vec3& p) { return 2.0 * dot(p, axis) + 0.5 * p[2] * p[2]; };
  double err = 0.0, ref = 0.0;
  for (std::size_t h = 0; h < m.size(); ++h) {
    std::vector<Vec3> src;
    std::vector<double> val;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (i == h) continue;
      src.push_back(m.positions[i]);
      val.push_back(field(m.positions[i]));
    }
    const double got = SphericalSpline(src).evaluate(val, {m.positions[h]})[0];
    err += std::pow(got - field(m.positions[h]), 2);
    ref += std::pow(field(m.positions[h]), 2);
  }
  EXPECT_LT(std::sqrt(err / ref), 0.10);
}

TEST(Spline, InterpolatesAtSources) {
  const auto m = standard_montage();
  Rng rng(3);
  std::vector<double> v(m.size());
  for (auto& x : v) x = rng.normal();
  SplineConfig exact;
  exact.lambda = 0.0;
  SphericalSpline s(m.positions, exact);
  const auto out = s.evaluate(v, m.positions);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(out[i], v[i], 1e-6);
  EXPECT_GT(s.rcond(), 0.0);
}

TEST(Spline, TooFewSources) {
  EXPECT_THROW(SphericalSpline({{0, 0, 1}, {1, 0, 0}, {0, 1, 0}}), Error);
}

TEST(Spline, KernelIsSymmetricAndDecreasing) {
  SplineConfig cfg;
  double last = spline_kernel(1.0, cfg);
  for (double c = 0.9; c >= -1.0; c -= 0.1) {
    const double g = spline_kernel(c, cfg);
    EXPECT_LT(g, last);
    last = g;
  }
}

// ---- rejection and interpolation ------------------------------------------------------

TEST(Reject, EqualNoiseNoRejections) {
  ContinuousRecording rec;
  rec.channels.assign(8, std::vector<double>(100));
  for (auto& ch : rec.channels)
    for (std::size_t i = 0; i < ch.size(); ++i) ch[i] = (i % 2) ? 1.0 : -1.0;
  const auto r = preprocess::reject_bad_channels(rec);
  EXPECT_EQ(r.bad_count(), 0u);
  for (double z : r.z) EXPECT_EQ(z, 0.0);
}

TEST(Reject, LoudChannel) {
  auto rec = noise_recording(64, 2000, 4);
  for (auto& v : rec.channels[17]) v *= 100.0;
  const auto r = preprocess::reject_bad_channels(rec);
  EXPECT_TRUE(r.bad[17]);
  EXPECT_EQ(r.bad_count(), 1u);
}

TEST(Reject, FlatChannel) {
  auto rec = noise_recording(64, 2000, 5);
  std::fill(rec.channels[3].begin(), rec.channels[3].end(), 0.0);
  const auto r = preprocess::reject_bad_channels(rec);
  EXPECT_TRUE(r.bad[3]);
  EXPECT_LT(r.z[3], -2.0);
}

TEST(Reject, EveryChannelRejectedIsAnError) {
  auto rec = noise_recording(6, 500, 6);
  try {
    preprocess::reject_bad_channels(rec, 5.0, 6.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPreprocess);
  }
}

TEST(Interpolate, EmptyMaskIsIdentity) {
  const auto rec = noise_recording(64, 50, 7);
  const auto out = preprocess::spherical_interpolate(rec, std::vector<bool>(64, false), standard_montage());
  EXPECT_EQ(out.channels, rec.channels);
}

TEST(Interpolate, GoodChannelsUntouchedAndConstantFieldRecovered) {
  auto rec = noise_recording(64, 40, 8);
  for (auto& ch : rec.channels) std::fill(ch.begin(), ch.end(), -3.5);
  const auto before = rec.channels;
  std::vector<bool> bad(64, false);
  bad[10] = bad[40] = true;
  rec.channels[10].assign(40, 999.0);
  rec.channels[40].assign(40, -999.0);
  const auto out = preprocess::spherical_interpolate(rec, bad, standard_montage());
  for (std::size_t c = 0; c < 64; ++c) {
    if (bad[c]) {
      for (double v : out.channels[c]) EXPECT_NEAR(v, -3.5, 1e-6);
    } else {
      EXPECT_EQ(out.channels[c], before[c]);
    }
  }
}

TEST(Interpolate, TooFewGoodChannels) {
  const auto rec = noise_recording(64, 10, 9);
  std::vector<bool> bad(64, true);
  bad[0] = bad[1] = bad[2] = false;
  EXPECT_THROW(preprocess::spherical_interpolate(rec, bad, standard_montage()), Error);
}

// ---- bandpass ----------------------------------------------------------------------

TEST(Bandpass, GateFrequencies) {
  const double rate = 500.0;
  const auto taps = preprocess::design_bandpass(rate, {});
  auto filt = [&](const std::vector<double>& x) { return preprocess::apply_fir(x, taps); };
  const std::size_t n = 40000;
  const double g10 = testing::measured_gain(filt, 10.0, rate, n);
  EXPECT_LE(std::abs(20.0 * std::log10(g10)), 1.0);
  EXPECT_GE(g10, 0.89);
  EXPECT_LE(g10, 1.12);
  EXPECT_LE(20.0 * std::log10(testing::measured_gain(filt, 0.1, rate, n)), -20.0);
  EXPECT_LE(testing::measured_gain(filt, 60.0, rate, n), 0.1);
}

TEST(Bandpass, DcRemoved) {
  const auto taps = preprocess::design_bandpass(500.0, {});
  const std::vector<double> dc(20000, 5.0);
  const auto y = preprocess::apply_fir(dc, taps);
  for (std::size_t i = 5000; i < 15000; i += 97) EXPECT_LT(std::abs(y[i]), 0.05);
}

TEST(Bandpass, ZeroPhaseKeepsSymmetry) {
  const auto taps = preprocess::design_bandpass(500.0, {});
  std::vector<double> x(8001, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = (static_cast<double>(i) - 4000.0) / 500.0;
    x[i] = std::exp(-t * t / (2 * 0.02 * 0.02));
  }
  const auto y = preprocess::apply_fir(x, taps);
  double peak = 0.0, asym = 0.0;
  for (std::size_t k = 0; k <= 4000; ++k) {
    peak = std::max(peak, std::abs(y[4000 + k]));
    asym = std::max(asym, std::abs(y[4000 + k] - y[4000 - k]));
  }
  EXPECT_LT(asym / peak, 1e-6);
}

TEST(Bandpass, TapsOddAndSymmetric) {
  const auto taps = preprocess::design_bandpass(500.0, {});
  ASSERT_EQ(taps.size() % 2, 1u);
  for (std::size_t i = 0; i < taps.size() / 2; ++i) EXPECT_DOUBLE_EQ(taps[i], taps[taps.size() - 1 - i]);
}

TEST(Bandpass, HighCutoffAboveNyquist) {
  preprocess::BandpassConfig cfg;
  cfg.hi = 300.0;
  try {
    preprocess::design_bandpass(500.0, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(Bandpass, FilterMatchesDirectConvolution) {
  Rng rng(10);
  std::vector<double> x(300);
  for (auto& v : x) v = rng.normal();
  const std::vector<double> taps = {0.1, -0.2, 0.5, -0.2, 0.1};
  const auto y = preprocess::apply_fir(x, taps);
  for (std::size_t i = 2; i + 2 < x.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < 5; ++k) s += taps[k] * x[i + 2 - k];
    EXPECT_NEAR(y[i], s, 1e-12);
  }
}

// ---- epoching ----------------------------------------------------------------------

TEST(Epoch, ShapeImpulseAndLabels) {
  ContinuousRecording rec;
  rec.channels.assign(64, std::vector<double>(5000, 0.0));
  rec.events = {{600, 1, Side::kLeft}, {1800, 4, Side::kRight}, {3100, 3, Side::kLeft}};
  for (const auto& e : rec.events) rec.channels[5][e.onset] = 1.0;
  const auto r = preprocess::epoch(rec, {});
  ASSERT_EQ(r.data.size(), 3u);
  EXPECT_EQ(r.data.electrodes(), 64u);
  EXPECT_EQ(r.data.time_points(), 350u);
  EXPECT_DOUBLE_EQ(r.data.start_ms(), -200.0);
  EXPECT_DOUBLE_EQ(r.data.step_ms(), 2.0);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(r.kept[k], k);
    EXPECT_EQ(r.data.info(k).speaker, rec.events[k].speaker);
    EXPECT_EQ(r.data.info(k).side, rec.events[k].side);
    EXPECT_EQ(r.data.info(k).relative, relative_label(rec.events[k].side, rec.events[k].speaker));
    const auto x = r.data.eeg(k);
    EXPECT_EQ(x[5 * 350 + 100], 1.0);
    double total = 0.0;
    for (double v : x) total += v;
    EXPECT_EQ(total, 1.0);
  }
}

TEST(Epoch, BoundaryEventsSkipped) {
  ContinuousRecording rec;
  rec.channels.assign(4, std::vector<double>(1000, 1.0));
  rec.events = {{0, 2, Side::kLeft}, {500, 2, Side::kRight}, {900, 5, Side::kLeft}};
  const auto r = preprocess::epoch(rec, {});
  EXPECT_EQ(r.data.size(), 1u);
  EXPECT_EQ(r.skipped, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(r.kept, (std::vector<std::size_t>{1}));
}

TEST(Epoch, WideWindowResamplesTo350) {
  ContinuousRecording rec;
  rec.channels.assign(2, std::vector<double>(3000));
  for (std::size_t i = 0; i < 3000; ++i) rec.channels[0][i] = rec.channels[1][i] = static_cast<double>(i);
  rec.events = {{1500, 3, Side::kLeft}};
  const auto r = preprocess::epoch(rec, preprocess::EpochWindow::wide());
  ASSERT_EQ(r.data.size(), 1u);
  const auto x = r.data.eeg(0);
  EXPECT_EQ(r.data.time_points(), 350u);
  EXPECT_DOUBLE_EQ(x[0], 900.0);
  EXPECT_NEAR(x[349], 900.0 + 1199.0, 1e-9);
  for (std::size_t k = 1; k < 350; ++k) EXPECT_NEAR(x[k] - x[k - 1], 1199.0 / 349.0, 1e-9);
  EXPECT_DOUBLE_EQ(r.data.start_ms(), -1200.0);
}

// ---- containers --------------------------------------------------------------------

TEST(EventsCsv, RoundTripAndErrors) {
  const std::vector<preprocess::Event> ev = {{10, 1, Side::kLeft}, {1210, 5, Side::kRight}};
  const auto text = preprocess::events_csv(ev);
  EXPECT_EQ(text.substr(0, text.find('\n')), "onset_sample,speaker_index,attended_side");
  EXPECT_EQ(preprocess::parse_events_csv(text, "mem"), ev);
  EXPECT_THROW(preprocess::parse_events_csv("onset_sample,speaker_index,attended_side\n5,2\n", "mem"), Error);
  EXPECT_THROW(preprocess::parse_events_csv("onset_sample,speaker_index,attended_side\n5,9,left\n", "mem"), Error);
  EXPECT_THROW(preprocess::parse_events_csv("onset_sample,speaker_index,attended_side\n9,2,left\n5,2,up\n", "mem"), Error);
  EXPECT_THROW(preprocess::parse_events_csv("onset_sample,speaker_index,attended_side\n9,2,left\n5,2,left\n", "mem"), Error);
}

TEST(RecordingContainer, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "eegatt_rec_test";
  std::filesystem::create_directories(dir);
  auto rec = noise_recording(3, 77, 11);
  rec.rate = 250.0;
  preprocess::save_recording(rec, dir / "r.bin");
  const auto back = preprocess::load_recording(dir / "r.bin");
  EXPECT_EQ(back.rate, 250.0);
  EXPECT_EQ(back.channels, rec.channels);
  EXPECT_EQ(back.montage, rec.montage);
  std::filesystem::resize_file(dir / "r.bin", 40);
  EXPECT_THROW(preprocess::load_recording(dir / "r.bin"), Error);
  std::filesystem::remove_all(dir);
}

TEST(PipelineConfig, JsonRoundTrip) {
  preprocess::PipelineConfig c;
  c.z_high = 2.5;
  c.window = preprocess::EpochWindow::wide();
  const auto d = preprocess::PipelineConfig::from_json(c.to_json());
  EXPECT_EQ(d.z_high, 2.5);
  EXPECT_EQ(d.window.start, -1.2);
  EXPECT_EQ(d.window.points, 350u);
  EXPECT_THROW(preprocess::PipelineConfig::from_json("{"), Error);
}

}  // namespace
}  // namespace eegatt
