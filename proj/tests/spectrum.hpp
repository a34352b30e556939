#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include <fftw3.h>

namespace eegatt::testing {

// Single-sided amplitude spectrum of a real signal via FFTW.
inline std::vector<double> amplitude_spectrum(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> in(x.begin(), x.end());
  std::vector<std::complex<double>> out(x.size() / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  std::vector<double> amp(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double scale = (k == 0 || 2 * k == x.size()) ? 1.0 : 2.0;
    amp[k] = scale * std::abs(out[k]) / n;
  }
  return amp;
}

// Amplitude at `freq` Hz; the signal length should place it on a bin.
inline double amplitude_at(std::span<const double> x, double rate, double freq) {
  const auto amp = amplitude_spectrum(x);
  const auto k = static_cast<std::size_t>(std::lround(freq * static_cast<double>(x.size()) / rate));
  return amp.at(k);
}

// Sine (or DC when freq is 0) of unit amplitude.
inline std::vector<double> tone(double freq, double rate, std::size_t n) {
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = freq == 0.0 ? 1.0 : std::sin(2.0 * M_PI * freq * static_cast<double>(i) / rate);
  return s;
}

// Gain at `freq` measured on the central half of the filtered tone, away from edges.
template <class Filter>
double measured_gain(const Filter& filter, double freq, double rate, std::size_t n) {
  const auto x = tone(freq, rate, n);
  const auto y = filter(x);
  const std::span<const double> xs(x.data() + n / 4, n / 2), ys(y.data() + n / 4, n / 2);
  return amplitude_at(ys, rate, freq) / amplitude_at(xs, rate, freq);
}

}  // namespace eegatt::testing
