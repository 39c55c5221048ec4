#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "vasim/error.hpp"

namespace vasim::dsp {

inline constexpr double kSilenceFloorDb = -120.0;
inline constexpr double kReferenceAmplitude = 1.0;

// Sound level in dB relative to kReferenceAmplitude.
struct DbLevel {
  double value = kSilenceFloorDb;
};

inline double rms(std::span<const double> frame) {
  double acc = 0.0;
  for (double v : frame) acc += v * v;
  return std::sqrt(acc / static_cast<double>(frame.size()));
}

// 10*log10(A1^2 / A0^2) with A1 the frame RMS, floored at -120 dB.
inline DbLevel noise_db(std::span<const double> frame) {
  if (frame.empty()) throw RangeError("noise_db: empty frame");
  const double a1 = rms(frame);
  const double ratio = (a1 * a1) / (kReferenceAmplitude * kReferenceAmplitude);
  if (ratio <= 0.0) return {kSilenceFloorDb};
  return {std::max(kSilenceFloorDb, 10.0 * std::log10(ratio))};
}

// One second-order section, normalized so a0 = 1:
//   y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(double omega) const {
    const std::complex<double> z1 = std::polar(1.0, -omega);
    const std::complex<double> z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  }

  // Both roots of z^2 + a1 z + a2 strictly inside the unit circle.
  bool stable() const { return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2; }
};

struct FilterCoeffs {
  std::vector<Biquad> sections;
  int order = 0;
  double cutoff_hz = 0.0;
  double sample_rate_hz = 0.0;

  std::complex<double> response(double freq_hz) const {
    const double omega = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
    std::complex<double> h{1.0, 0.0};
    for (const auto& s : sections) h *= s.response(omega);
    return h;
  }

  double magnitude_db(double freq_hz) const {
    return 20.0 * std::log10(std::abs(response(freq_hz)));
  }
};

// Digital Butterworth low-pass as cascaded biquads: bilinear transform of the
// analog prototype with the cutoff pre-warped, so |H| is exactly -3.01 dB at
// cutoff_hz.
inline FilterCoeffs butterworth_lowpass(int order, double cutoff_hz, double sample_rate_hz) {
  if (order != 2 && order != 4 && order != 6 && order != 8)
    throw RangeError("butterworth_lowpass: order must be 2, 4, 6 or 8");
  if (!(sample_rate_hz > 0.0)) throw RangeError("butterworth_lowpass: sample rate must be positive");
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < sample_rate_hz / 2.0))
    throw RangeError("butterworth_lowpass: cutoff must lie in (0, Nyquist)");

  FilterCoeffs out;
  out.order = order;
  out.cutoff_hz = cutoff_hz;
  out.sample_rate_hz = sample_rate_hz;

  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate_hz);
  const double k2 = k * k;
  const int pairs = order / 2;
  for (int i = 0; i < pairs; ++i) {
    // 1/Q of the i-th conjugate pole pair of the unit-cutoff prototype.
    const double inv_q =
        2.0 * std::sin(std::numbers::pi * (2.0 * i + 1.0) / (2.0 * order));
    const double norm = 1.0 / (1.0 + inv_q * k + k2);
    Biquad s;
    s.b0 = k2 * norm;
    s.b1 = 2.0 * s.b0;
    s.b2 = s.b0;
    s.a1 = 2.0 * (k2 - 1.0) * norm;
    s.a2 = (1.0 - inv_q * k + k2) * norm;
    out.sections.push_back(s);
  }
  return out;
}

// Streaming cascade (transposed direct form II). Single owner.
class BiquadCascade {
 public:
  explicit BiquadCascade(const FilterCoeffs& coeffs)
      : sections_(coeffs.sections), state_(coeffs.sections.size()) {}

  double process(double x) {
    for (std::size_t i = 0; i < sections_.size(); ++i) {
      const auto& s = sections_[i];
      auto& st = state_[i];
      const double y = s.b0 * x + st[0];
      st[0] = s.b1 * x - s.a1 * y + st[1];
      st[1] = s.b2 * x - s.a2 * y;
      x = y;
    }
    return x;
  }

  void reset() {
    for (auto& st : state_) st = {0.0, 0.0};
  }

 private:
  std::vector<Biquad> sections_;
  std::vector<std::array<double, 2>> state_;
};

// Causal forward filtering from zero initial conditions.
inline std::vector<double> filter_apply(const FilterCoeffs& coeffs, std::span<const double> signal) {
  BiquadCascade cascade(coeffs);
  std::vector<double> out;
  out.reserve(signal.size());
  for (double x : signal) out.push_back(cascade.process(x));
  return out;
}

// Running median with a centered window of `width` samples (shrinks at the
// edges). width <= 1 returns the input.
inline std::vector<double> median_filter(std::span<const double> signal, std::size_t width) {
  std::vector<double> out(signal.begin(), signal.end());
  if (width <= 1 || signal.empty()) return out;
  const std::size_t half = width / 2;
  // Sorted copy of signal[lo, hi), updated as the window slides.
  std::vector<double> sorted;
  sorted.reserve(width + 1);
  std::size_t lo = 0, hi = 0;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    const std::size_t want_lo = i >= half ? i - half : 0;
    const std::size_t want_hi = std::min(signal.size(), i + half + 1);
    for (; hi < want_hi; ++hi) sorted.insert(std::upper_bound(sorted.begin(), sorted.end(), signal[hi]), signal[hi]);
    for (; lo < want_lo; ++lo) sorted.erase(std::lower_bound(sorted.begin(), sorted.end(), signal[lo]));
    const std::size_t n = sorted.size();
    out[i] = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2] + sorted[n / 2 - 1]);
  }
  return out;
}

// Number of grid points for a span sampled at `rate`.
inline std::size_t grid_count(double t0, double t1, double rate) {
  return static_cast<std::size_t>(std::llround((t1 - t0) * rate));
}

// Grid time for index k. Shared by every resampling consumer.
inline double grid_time(double t0, std::size_t k, double rate) {
  return t0 + static_cast<double>(k) / rate;
}

// For each grid time t0 + k/rate, the index of the sample with the nearest
// timestamp; exact ties pick the earlier sample, queries beyond either end
// clamp to the first/last sample. `times` must be increasing.
inline std::vector<std::size_t> nearest_indices(std::span<const double> times, double rate,
                                                double t0, double t1) {
  if (times.empty()) throw RangeError("resample_nn: no samples");
  if (!(rate > 0.0)) throw RangeError("resample_nn: rate must be positive");
  const std::size_t n = grid_count(t0, t1, rate);
  std::vector<std::size_t> idx(n);
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double q = grid_time(t0, k, rate);
    while (i + 1 < times.size() && std::abs(times[i + 1] - q) < std::abs(times[i] - q)) ++i;
    idx[k] = i;
  }
  return idx;
}

template <typename T>
std::vector<T> resample_nn(std::span<const double> times, std::span<const T> values, double rate,
                           double t0, double t1) {
  if (times.size() != values.size())
    throw RangeError("resample_nn: times and values differ in length");
  const auto idx = nearest_indices(times, rate, t0, t1);
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(values[i]);
  return out;
}

// Frames of round(window*rate) samples starting every round(hop*rate)
// samples; an incomplete tail is dropped.
template <typename T>
std::vector<std::vector<T>> segment(std::span<const T> signal, double window_s, double hop_s,
                                    double rate) {
  if (!(window_s > 0.0) || !(hop_s > 0.0)) throw RangeError("segment: window and hop must be positive");
  const auto win = static_cast<std::size_t>(std::llround(window_s * rate));
  const auto hop = static_cast<std::size_t>(std::llround(hop_s * rate));
  if (win == 0 || hop == 0) throw RangeError("segment: window or hop shorter than one sample");
  std::vector<std::vector<T>> frames;
  for (std::size_t start = 0; start + win <= signal.size(); start += hop)
    frames.emplace_back(signal.begin() + static_cast<std::ptrdiff_t>(start),
                        signal.begin() + static_cast<std::ptrdiff_t>(start + win));
  return frames;
}

}  // namespace vasim::dsp
