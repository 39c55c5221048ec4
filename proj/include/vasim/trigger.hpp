#pragma once

#include <algorithm>
#include <vector>

#include "vasim/error.hpp"
#include "vasim/features.hpp"
#include "vasim/forest.hpp"
#include "vasim/trace.hpp"

namespace vasim::trigger {

// Minimum playback levels (dB) that still activate the assistant and get the
// command recognized, measured at one ambient level.
struct VolumeAnchor {
  double ambient = 0.0;
  double min_activation = 0.0;
  double min_command = 0.0;
  bool operator==(const VolumeAnchor&) const = default;
};

struct VolumePolicy {
  std::vector<VolumeAnchor> anchors;
  double margin_db = 1.0;
  // Commands that would need more than this are not played at all.
  double shout_ceiling_db = 80.0;
};

// The five measured rows, 30 dB to 73 dB ambient.
inline VolumePolicy default_policy() {
  return {{{30, 44, 40}, {41, 44, 40}, {52, 54, 54}, {68, 67, 67}, {73, 75, 76}}, 1.0, 80.0};
}

inline void validate(const VolumePolicy& p) {
  if (p.anchors.empty()) throw ConfigError("volume policy: no anchors");
  for (std::size_t i = 1; i < p.anchors.size(); ++i)
    if (!(p.anchors[i].ambient > p.anchors[i - 1].ambient))
      throw ConfigError("volume policy: anchors must be strictly increasing in ambient level");
  if (p.margin_db < 0) throw ConfigError("volume policy: margin must be >= 0");
}

struct Volumes {
  double activation = 0.0;
  double command = 0.0;
};

// Piecewise-linear in ambient between anchors, clamped to the end anchors.
inline Volumes minimum_volume(double ambient, const VolumePolicy& policy) {
  const auto& a = policy.anchors;
  if (a.empty()) throw ConfigError("volume policy: no anchors");
  if (ambient <= a.front().ambient) return {a.front().min_activation, a.front().min_command};
  if (ambient >= a.back().ambient) return {a.back().min_activation, a.back().min_command};
  const auto hi = std::upper_bound(a.begin(), a.end(), ambient,
                                   [](double v, const VolumeAnchor& x) { return v < x.ambient; });
  const auto lo = hi - 1;
  const double w = (ambient - lo->ambient) / (hi->ambient - lo->ambient);
  return {lo->min_activation + w * (hi->min_activation - lo->min_activation),
          lo->min_command + w * (hi->min_command - lo->min_command)};
}

inline Volumes playback_volume(double ambient, const VolumePolicy& policy) {
  auto v = minimum_volume(ambient, policy);
  v.activation += policy.margin_db;
  v.command += policy.margin_db;
  return v;
}

// Standby listens to the microphone only; full sensing starts at the gate level.
inline bool standby_gate(double noise_db, double gate_threshold_db) { return noise_db >= gate_threshold_db; }

struct TriggerDecision {
  bool launch = false;
  double p_success = 0.0;
  double ambient = 0.0;
  double activation_volume = 0.0;
  double command_volume = 0.0;
  bool gated = false;
};

struct TriggerConfig {
  double threshold = 0.6;
  bool gating = false;
  double gate_threshold_db = 50.0;
  features::PreprocessConfig preprocess;
};

inline void check_opportunity_model(const forest::ForestModel& m) {
  if (!m.trained()) throw ConfigError("opportunity model is not trained");
  if (m.class_order != features::kOpportunityClasses)
    throw ConfigError("opportunity model class order must be [unsuccessful, successful]");
  if (m.n_features != features::kFeatureCount) throw ConfigError("opportunity model expects a different feature count");
}

// Launch needs the screen off, audio on the built-in speaker and the
// opportunity probability above threshold. A threshold of 0 disables the
// classifier gate.
inline TriggerDecision decide(const Window& window, const PhoneState& phone, const forest::ForestModel& opportunity,
                              const forest::ForestModel& motion, const VolumePolicy& policy, double threshold,
                              const features::PreprocessConfig& preprocess = {}) {
  check_opportunity_model(opportunity);
  const auto fv = features::assemble(window, motion, phone, preprocess);
  TriggerDecision d;
  d.p_success = std::clamp(forest::predict_proba(opportunity, fv.values())[1], 0.0, 1.0);
  d.ambient = fv.env.noise_mean;
  const auto vol = playback_volume(d.ambient, policy);
  d.activation_volume = vol.activation;
  d.command_volume = vol.command;
  const bool gates_open = !phone.screen_interactive && !phone.audio_route_external();
  const bool model_says_go = threshold <= 0.0 || d.p_success > threshold;
  const bool audible_enough = d.command_volume <= policy.shout_ceiling_db;
  d.launch = gates_open && model_says_go && audible_enough;
  return d;
}

// decide() behind the optional noise-gated standby.
inline TriggerDecision decide(const Window& window, const PhoneState& phone, const forest::ForestModel& opportunity,
                              const forest::ForestModel& motion, const VolumePolicy& policy,
                              const TriggerConfig& cfg) {
  if (cfg.gating) {
    const double level = features::window_env_features(window, phone, cfg.preprocess).noise_mean;
    if (!standby_gate(level, cfg.gate_threshold_db)) {
      TriggerDecision d;
      d.gated = true;
      d.ambient = level;
      const auto vol = playback_volume(level, policy);
      d.activation_volume = vol.activation;
      d.command_volume = vol.command;
      return d;
    }
  }
  return decide(window, phone, opportunity, motion, policy, cfg.threshold, cfg.preprocess);
}

}  // namespace vasim::trigger
