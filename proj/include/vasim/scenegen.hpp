#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "vasim/error.hpp"
#include "vasim/keyword.hpp"
#include "vasim/parallel.hpp"
#include "vasim/random.hpp"
#include "vasim/trace.hpp"

namespace vasim::scenegen {

enum class MotionProfile : std::uint8_t { Walking, Riding, Seated };

inline std::string_view profile_name(MotionProfile p) {
  switch (p) {
    case MotionProfile::Walking: return "Walking";
    case MotionProfile::Riding: return "Riding";
    case MotionProfile::Seated: return "Seated";
  }
  return "?";
}

struct ScenarioParams {
  double noise_mean = 50.0;  // dB
  double noise_std = 2.0;
  double light_mean = 500.0;  // lux
  double light_std = 50.0;
  MotionProfile motion_profile = MotionProfile::Seated;
  double gait_freq = 0.0;   // Hz
  double accel_amp = 0.0;   // m/s^2
  double burst_rate = 0.0;  // noise bursts per minute
  // Std of a per-trace shift of noise_mean, for scenarios that cover many
  // distinct places.
  double level_spread = 0.0;
  bool placeholder = false;
};

inline void validate(const ScenarioParams& p) {
  if (p.noise_std < 0 || p.light_std < 0 || p.level_spread < 0)
    throw ConfigError("scenario params: standard deviations must be >= 0");
  if (p.gait_freq < 0 || p.gait_freq > 4) throw ConfigError("scenario params: gait_freq must be in [0, 4] Hz");
  if (p.accel_amp < 0) throw ConfigError("scenario params: accel_amp must be >= 0");
  if (p.burst_rate < 0) throw ConfigError("scenario params: burst_rate must be >= 0");
  if (p.light_mean < 0) throw ConfigError("scenario params: light_mean must be >= 0");
}

using ScenarioTable = std::array<ScenarioParams, 6>;

// Synthetic anchors for the six scenarios. Only the ordering of levels is
// grounded in observation; (c) is a placeholder.
inline ScenarioTable default_scenario_table() {
  ScenarioTable t;
  t[index_of(Scenario::QuietRoad)] = {35, 2.0, 800, 80, MotionProfile::Walking, 1.8, 3.0, 0.5, 0, false};
  t[index_of(Scenario::Highway)] = {70, 0.85, 1000, 100, MotionProfile::Walking, 2.0, 3.5, 0.3, 0, false};
  t[index_of(Scenario::SpecificPlaces)] = {55, 2.0, 400, 60, MotionProfile::Walking, 1.6, 2.5, 0.6, 8, true};
  t[index_of(Scenario::PublicTransport)] = {65, 2.0, 300, 50, MotionProfile::Riding, 0.0, 0.8, 1.2, 0, false};
  t[index_of(Scenario::Car)] = {50, 1.5, 500, 50, MotionProfile::Seated, 0.0, 0.05, 0.3, 0, false};
  t[index_of(Scenario::Restaurant)] = {68, 0.5, 350, 40, MotionProfile::Seated, 0.0, 0.05, 0.05, 0, false};
  return t;
}

inline constexpr double kBurstMinDb = 5.0;
inline constexpr double kBurstMaxDb = 15.0;
inline constexpr double kBurstMinSeconds = 0.5;
inline constexpr double kBurstMaxSeconds = 2.0;
// Light reaching the sensor inside a pocket.
inline constexpr double kPocketLightFactor = 0.05;
inline constexpr double kInHandMotionFactor = 0.8;

namespace detail {

inline std::size_t sample_count(double duration, double rate) {
  return static_cast<std::size_t>(std::llround(duration * rate));
}

}  // namespace detail

// Deterministic in (params, duration, phone, seed); the scenario only labels
// the trace.
inline SensorTrace generate_trace(Scenario scenario, double duration, const PhoneState& phone,
                                  const ScenarioParams& params, std::uint64_t seed) {
  if (!(duration > 0.0)) throw RangeError("generate_trace: duration must be positive");
  validate(params);
  Rng rng = make_rng(seed, {stream::kTrace});
  std::normal_distribution<double> gauss(0.0, 1.0);

  SensorTrace trace;
  trace.scenario = scenario;
  trace.phone = phone;
  trace.duration = duration;

  const std::size_t n_acc = detail::sample_count(duration, kAccelRateHz);
  trace.accel.resize(n_acc);
  for (std::size_t k = 0; k < n_acc; ++k) trace.accel[k].t = static_cast<double>(k) / kAccelRateHz;

  const double amp = params.accel_amp * (phone.placement == Placement::InHand ? kInHandMotionFactor : 1.0);
  if (amp > 0.0) {
    switch (params.motion_profile) {
      case MotionProfile::Walking: {
        // Vertical heel-strike waveform with an asymmetric second harmonic so
        // |a| repeats once per step, plus smaller fore-aft and lateral sway.
        const double omega = 2.0 * std::numbers::pi * params.gait_freq;
        const double phase = 2.0 * std::numbers::pi * uniform01(rng);
        for (auto& s : trace.accel) {
          const double th = omega * s.t + phase;
          const double vert = std::sin(th) + 0.5 * std::cos(2.0 * th);
          s.x = static_cast<float>(amp * (0.3 * std::cos(th) + 0.1 * gauss(rng)));
          s.y = static_cast<float>(amp * (0.15 * std::sin(th + 1.0) + 0.1 * gauss(rng)));
          s.z = static_cast<float>(amp * (vert + 0.1 * gauss(rng)));
        }
        break;
      }
      case MotionProfile::Riding: {
        // AR(1) vibration, roughly band-limited below a few Hz.
        constexpr double rho = 0.9;
        const double innov = std::sqrt(1.0 - rho * rho);
        double ex = gauss(rng), ey = gauss(rng), ez = gauss(rng);
        for (auto& s : trace.accel) {
          ex = rho * ex + innov * gauss(rng);
          ey = rho * ey + innov * gauss(rng);
          ez = rho * ez + innov * gauss(rng);
          s.x = static_cast<float>(amp * 0.6 * ex);
          s.y = static_cast<float>(amp * 0.6 * ey);
          s.z = static_cast<float>(amp * ez);
        }
        break;
      }
      case MotionProfile::Seated:
        for (auto& s : trace.accel) {
          s.x = static_cast<float>(amp * gauss(rng));
          s.y = static_cast<float>(amp * gauss(rng));
          s.z = static_cast<float>(amp * gauss(rng));
        }
        break;
    }
  }

  const std::size_t n_env = detail::sample_count(duration, kEnvRateHz);
  const double level = params.noise_mean + params.level_spread * gauss(rng);
  std::vector<double> noise(n_env);
  for (auto& v : noise) v = level + params.noise_std * gauss(rng);

  if (params.burst_rate > 0.0) {
    std::exponential_distribution<double> gap(params.burst_rate / 60.0);
    for (double tb = gap(rng); tb < duration; tb += gap(rng)) {
      const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
      const double size = kBurstMinDb + (kBurstMaxDb - kBurstMinDb) * uniform01(rng);
      const double len = kBurstMinSeconds + (kBurstMaxSeconds - kBurstMinSeconds) * uniform01(rng);
      for (std::size_t k = 0; k < n_env; ++k) {
        const double t = static_cast<double>(k) / kEnvRateHz;
        if (t >= tb && t < tb + len) noise[k] += sign * size;
      }
    }
  }

  const double light_scale = phone.placement == Placement::Pocket ? kPocketLightFactor : 1.0;
  trace.noise.resize(n_env);
  trace.light.resize(n_env);
  for (std::size_t k = 0; k < n_env; ++k) {
    const double t = static_cast<double>(k) / kEnvRateHz;
    trace.noise[k] = {t, static_cast<float>(std::max(dsp::kSilenceFloorDb, noise[k]))};
    const double lux = light_scale * std::max(0.0, params.light_mean + params.light_std * gauss(rng));
    trace.light[k] = {t, static_cast<float>(lux)};
  }
  return trace;
}

// Call and transcript statistics for the recording phase.
struct ConversationModel {
  double calls_per_hour = 2.0;
  double mean_call_minutes = 3.0;
  int tokens_per_segment = 30;
  double segment_seconds = 20.0;
};

inline double next_call_gap_minutes(const ConversationModel& m, Rng& rng) {
  return std::exponential_distribution<double>(m.calls_per_hour / 60.0)(rng);
}

inline double call_length_minutes(const ConversationModel& m, Rng& rng) {
  return std::exponential_distribution<double>(1.0 / m.mean_call_minutes)(rng);
}

// Draws one annotated transcript segment from the lexicon's word weights.
inline keyword::Segment sample_segment(std::uint64_t id, const ConversationModel& m,
                                       const keyword::Lexicon& lex, Rng& rng) {
  std::vector<std::string> vocab;
  std::vector<double> weights;
  for (const auto& [w, weight] : lex.word_weights) {
    vocab.push_back(w);
    weights.push_back(weight);
  }
  if (vocab.empty()) throw ConfigError("conversation model: lexicon has no weighted words");
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::vector<std::string> words;
  words.reserve(static_cast<std::size_t>(m.tokens_per_segment));
  for (int i = 0; i < m.tokens_per_segment; ++i) words.push_back(vocab[pick(rng)]);
  return keyword::annotate(id, words, lex);
}

enum class InvasionLabel : std::uint8_t { Unsuccessful = 0, Successful = 1 };

inline std::string_view label_name(InvasionLabel l) {
  return l == InvasionLabel::Successful ? "SuccessfulInvasion" : "UnsuccessfulInvasion";
}

struct DatasetSpec {
  Scenario scenario;
  int trials = 0;
  double window_seconds = 180.0;
};

// One generated trial. The trace is not stored; `regenerate` rebuilds it.
struct LabeledWindow {
  Scenario scenario = Scenario::QuietRoad;
  std::size_t trial = 0;
  std::uint64_t trace_seed = 0;
  PhoneState phone;
  double window_seconds = 180.0;
  double trace_seconds = 190.0;
  InvasionLabel label = InvasionLabel::Unsuccessful;
};

struct LabeledDataset {
  std::vector<LabeledWindow> items;
  ScenarioTable params;
};

// Ground truth for a trace whose analysis window is [0, window_seconds) and
// whose remainder is the playback period.
using Labeler = std::function<InvasionLabel(const SensorTrace&, double window_seconds, std::uint64_t label_seed)>;

// Extra trace time after the analysis window in which playback happens.
inline constexpr double kPlaybackTailSeconds = 10.0;

inline PhoneState trial_phone(std::size_t trial) {
  PhoneState p;
  p.placement = trial % 2 == 0 ? Placement::Pocket : Placement::InHand;
  return p;
}

inline SensorTrace regenerate(const LabeledWindow& item, const ScenarioTable& params) {
  return generate_trace(item.scenario, item.trace_seconds, item.phone, params[index_of(item.scenario)],
                        item.trace_seed);
}

inline LabeledDataset generate_dataset(const std::vector<DatasetSpec>& plan, const ScenarioTable& params,
                                       const Labeler& labeler, std::uint64_t seed, unsigned jobs = 1) {
  if (plan.empty()) throw ConfigError("generate_dataset: empty plan");
  LabeledDataset ds;
  ds.params = params;
  for (const auto& entry : plan) {
    if (entry.trials < 1) throw ConfigError("generate_dataset: trials must be >= 1");
    if (!(entry.window_seconds > 0)) throw ConfigError("generate_dataset: window must be positive");
    for (int i = 0; i < entry.trials; ++i) {
      LabeledWindow w;
      w.scenario = entry.scenario;
      w.trial = static_cast<std::size_t>(i);
      w.trace_seed = derive_seed(seed, {stream::kDataset, index_of(entry.scenario), w.trial});
      w.phone = trial_phone(w.trial);
      w.window_seconds = entry.window_seconds;
      w.trace_seconds = entry.window_seconds + kPlaybackTailSeconds;
      ds.items.push_back(w);
    }
  }
  parallel_for(ds.items.size(), jobs, [&](std::size_t i) {
    auto& item = ds.items[i];
    const auto trace = regenerate(item, params);
    item.label = labeler(trace, item.window_seconds,
                         derive_seed(seed, {stream::kLabel, index_of(item.scenario), item.trial}));
  });
  return ds;
}

}  // namespace vasim::scenegen
