#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vasim/dsp.hpp"
#include "vasim/error.hpp"
#include "vasim/forest.hpp"
#include "vasim/trace.hpp"

namespace vasim::features {

enum class MotionCategory : std::uint8_t { DefiniteMotion, DefiniteStationary, RelativeMotionStationary };

inline std::string_view category_name(MotionCategory c) {
  switch (c) {
    case MotionCategory::DefiniteMotion: return "DefiniteMotion";
    case MotionCategory::DefiniteStationary: return "DefiniteStationary";
    case MotionCategory::RelativeMotionStationary: return "RelativeMotionStationary";
  }
  return "?";
}

inline constexpr double kDefiniteMotionAbove = 0.6;
inline constexpr double kDefiniteStationaryBelow = 0.4;

// Over 60 % either way is definite; [0.4, 0.6] is relative.
inline MotionCategory movement_intensity(double p_motion) {
  if (!(p_motion >= 0.0 && p_motion <= 1.0)) throw RangeError("movement_intensity: probability outside [0, 1]");
  if (p_motion > kDefiniteMotionAbove) return MotionCategory::DefiniteMotion;
  if (p_motion < kDefiniteStationaryBelow) return MotionCategory::DefiniteStationary;
  return MotionCategory::RelativeMotionStationary;
}

using OneHot = std::array<int, 2>;

inline OneHot one_hot(MotionCategory c) {
  switch (c) {
    case MotionCategory::DefiniteMotion: return {0, 1};
    case MotionCategory::DefiniteStationary: return {1, 0};
    case MotionCategory::RelativeMotionStationary: return {1, 1};
  }
  return {1, 1};
}

inline constexpr double kSubWindowSeconds = 2.0;
inline constexpr std::size_t kMotionFeatureCount = 6;

// Per 2 s sub-window of |a|: mean, standard deviation and mean absolute jerk.
// Returned as {mean of each over sub-windows..., max of each...}.
using MotionFeatures = std::array<double, kMotionFeatureCount>;

inline MotionFeatures motion_features(std::span<const double> ax, std::span<const double> ay,
                                      std::span<const double> az, double rate = kAnalysisRateHz) {
  if (ax.size() != ay.size() || ax.size() != az.size()) throw RangeError("motion_features: axis lengths differ");
  const auto sub = static_cast<std::size_t>(std::llround(kSubWindowSeconds * rate));
  if (ax.size() < sub) throw RangeError("motion_features: window shorter than 2 s");

  std::vector<double> mag(ax.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::sqrt(ax[i] * ax[i] + ay[i] * ay[i] + az[i] * az[i]);

  std::array<double, 3> sum{}, peak{};
  std::size_t frames = 0;
  for (const auto& frame : dsp::segment<double>(mag, kSubWindowSeconds, kSubWindowSeconds, rate)) {
    const double n = static_cast<double>(frame.size());
    double mean = 0.0;
    for (double v : frame) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : frame) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    double jerk = 0.0;
    for (std::size_t i = 1; i < frame.size(); ++i) jerk += std::abs(frame[i] - frame[i - 1]);
    jerk = jerk * rate / (n - 1.0);
    const std::array<double, 3> vals{mean, sd, jerk};
    for (std::size_t j = 0; j < 3; ++j) {
      sum[j] += vals[j];
      peak[j] = frames == 0 ? vals[j] : std::max(peak[j], vals[j]);
    }
    ++frames;
  }
  MotionFeatures out{};
  for (std::size_t j = 0; j < 3; ++j) {
    out[j] = sum[j] / static_cast<double>(frames);
    out[j + 3] = peak[j];
  }
  return out;
}

struct EnvFeatures {
  double noise_mean = 0.0, noise_max = 0.0;
  double light_mean = 0.0, light_min = 0.0;
  int screen_interactive = 0;
  int audio_route_external = 0;
};

inline EnvFeatures env_features(std::span<const double> noise, std::span<const double> light,
                                const PhoneState& phone) {
  if (noise.empty() || light.empty()) throw RangeError("env_features: empty window");
  EnvFeatures e;
  double ns = 0.0, ls = 0.0;
  for (double v : noise) ns += v;
  for (double v : light) ls += v;
  e.noise_mean = ns / static_cast<double>(noise.size());
  e.noise_max = *std::max_element(noise.begin(), noise.end());
  e.light_mean = ls / static_cast<double>(light.size());
  e.light_min = *std::min_element(light.begin(), light.end());
  e.screen_interactive = phone.screen_interactive ? 1 : 0;
  e.audio_route_external = phone.audio_route_external() ? 1 : 0;
  return e;
}

inline constexpr std::size_t kFeatureCount = 8;
inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "move_bit0", "move_bit1", "noise_mean", "noise_max", "light_mean", "light_min", "screen_interactive",
    "audio_external"};

struct FeatureVector {
  OneHot movement_onehot{1, 1};
  EnvFeatures env;

  std::array<double, kFeatureCount> values() const {
    return {static_cast<double>(movement_onehot[0]), static_cast<double>(movement_onehot[1]),
            env.noise_mean, env.noise_max, env.light_mean, env.light_min,
            static_cast<double>(env.screen_interactive), static_cast<double>(env.audio_route_external)};
  }
};

// Class orders the two forests are trained with.
inline const std::vector<std::string> kMotionClasses = {"stationary", "motion"};
inline const std::vector<std::string> kOpportunityClasses = {"unsuccessful", "successful"};

struct PreprocessConfig {
  int butterworth_order = 4;
  double accel_cutoff_hz = 5.0;
  double env_median_seconds = 1.0;
};

// Butterworth low-pass on each accelerometer axis, then motion features.
inline MotionFeatures window_motion_features(const Window& w, const PreprocessConfig& cfg = {}) {
  const auto coeffs = dsp::butterworth_lowpass(cfg.butterworth_order, cfg.accel_cutoff_hz, kAnalysisRateHz);
  const auto fx = dsp::filter_apply(coeffs, w.ax);
  const auto fy = dsp::filter_apply(coeffs, w.ay);
  const auto fz = dsp::filter_apply(coeffs, w.az);
  return motion_features(fx, fy, fz, kAnalysisRateHz);
}

// Median-smoothed noise and light channels, then environment features.
inline EnvFeatures window_env_features(const Window& w, const PhoneState& phone, const PreprocessConfig& cfg = {}) {
  const auto width = static_cast<std::size_t>(std::llround(cfg.env_median_seconds * kAnalysisRateHz)) | 1u;
  return env_features(dsp::median_filter(w.noise, width), dsp::median_filter(w.light, width), phone);
}

inline void check_motion_model(const forest::ForestModel& m) {
  if (!m.trained()) throw ConfigError("motion model is not trained");
  if (m.class_order != kMotionClasses) throw ConfigError("motion model class order must be [stationary, motion]");
  if (m.n_features != kMotionFeatureCount) throw ConfigError("motion model expects a different feature count");
}

inline double motion_probability(const MotionFeatures& mf, const forest::ForestModel& motion_model) {
  check_motion_model(motion_model);
  return std::clamp(forest::predict_proba(motion_model, mf)[1], 0.0, 1.0);
}

inline FeatureVector assemble(const Window& w, const forest::ForestModel& motion_model, const PhoneState& phone,
                              const PreprocessConfig& cfg = {}) {
  check_motion_model(motion_model);
  FeatureVector fv;
  fv.movement_onehot = one_hot(movement_intensity(motion_probability(window_motion_features(w, cfg), motion_model)));
  fv.env = window_env_features(w, phone, cfg);
  return fv;
}

inline std::string feature_csv_header() {
  std::string h;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (i) h += ',';
    h += kFeatureNames[i];
  }
  return h;
}

}  // namespace vasim::features
