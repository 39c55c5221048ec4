#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vasim/error.hpp"
#include "vasim/features.hpp"
#include "vasim/forest.hpp"
#include "vasim/keyword.hpp"
#include "vasim/parallel.hpp"
#include "vasim/random.hpp"
#include "vasim/scenegen.hpp"
#include "vasim/trace.hpp"
#include "vasim/trigger.hpp"

namespace vasim::lifecycle {

// ---------------------------------------------------------------------------
// Attack phases

enum class Phase : std::uint8_t { P1_CallMonitor, P2_RecordSynthesize, P3_EnvironmentMonitor, P4_Attack, Done };

inline std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::P1_CallMonitor: return "P1";
    case Phase::P2_RecordSynthesize: return "P2";
    case Phase::P3_EnvironmentMonitor: return "P3";
    case Phase::P4_Attack: return "P4";
    case Phase::Done: return "Done";
  }
  return "?";
}

enum class EventKind : std::uint8_t { CallStarted, SegmentAvailable, CallEnded, WindowElapsed, DecisionMade, AttackCompleted };

inline std::string_view event_name(EventKind e) {
  switch (e) {
    case EventKind::CallStarted: return "CallStarted";
    case EventKind::SegmentAvailable: return "SegmentAvailable";
    case EventKind::CallEnded: return "CallEnded";
    case EventKind::WindowElapsed: return "WindowElapsed";
    case EventKind::DecisionMade: return "DecisionMade";
    case EventKind::AttackCompleted: return "AttackCompleted";
  }
  return "?";
}

// `flag` carries the event's outcome: key complete (SegmentAvailable),
// launch (DecisionMade), more commands pending (AttackCompleted).
struct Event {
  EventKind kind;
  bool flag = false;
};

// Once the key is complete, call and segment events no longer matter (the
// recorder is off) and are absorbed in P3.
inline Phase step(Phase phase, Event ev) {
  auto illegal = [&]() -> Phase {
    throw TransitionError(std::string("illegal event ") + std::string(event_name(ev.kind)) + " in phase " +
                          std::string(phase_name(phase)));
  };
  switch (phase) {
    case Phase::P1_CallMonitor:
      return ev.kind == EventKind::CallStarted ? Phase::P2_RecordSynthesize : illegal();
    case Phase::P2_RecordSynthesize:
      if (ev.kind == EventKind::SegmentAvailable) return ev.flag ? Phase::P3_EnvironmentMonitor : phase;
      if (ev.kind == EventKind::CallEnded) return Phase::P1_CallMonitor;
      return illegal();
    case Phase::P3_EnvironmentMonitor:
      switch (ev.kind) {
        case EventKind::CallStarted:
        case EventKind::CallEnded:
        case EventKind::SegmentAvailable:
        case EventKind::WindowElapsed: return phase;
        case EventKind::DecisionMade: return ev.flag ? Phase::P4_Attack : phase;
        case EventKind::AttackCompleted: return illegal();
      }
      return illegal();
    case Phase::P4_Attack:
      if (ev.kind == EventKind::AttackCompleted) return ev.flag ? Phase::P3_EnvironmentMonitor : Phase::Done;
      return illegal();
    case Phase::Done: return illegal();
  }
  return illegal();
}

// ---------------------------------------------------------------------------
// Notice model

// P(user hears playback) = logistic(slope * (volume - ambient - offset[s] - base_margin)).
struct NoticeModel {
  double base_margin = 0.0;  // dB
  double slope = 8.0;        // per dB
  std::array<double, 6> scenario_offset{};
  bool calibrated = false;
  std::array<double, 6> target{};
  std::array<double, 6> residual{};
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double notice_probability(const NoticeModel& m, Scenario s, double ambient, double volume) {
  return logistic(m.slope * (volume - ambient - m.scenario_offset[index_of(s)] - m.base_margin));
}

inline bool notice(const NoticeModel& m, Scenario s, double ambient, double volume, Rng& rng) {
  if (!m.calibrated) throw ConfigError("notice model is not calibrated");
  return bernoulli(rng, notice_probability(m, s, ambient, volume));
}

// "Being noticed" fractions per scenario a..f from the field study.
inline constexpr std::array<double, 6> kObservedNoticeRate = {20.0 / 20, 0.0 / 20, 24.0 / 40, 0.0 / 20, 20.0 / 20, 0.0 / 20};
// Success rates per scenario a..f from the same study.
inline constexpr std::array<double, 6> kObservedSuccessRate = {0.0, 0.90, 0.325, 0.85, 0.0, 0.95};

// ---------------------------------------------------------------------------
// Playback

struct PlaybackConfig {
  double activation_seconds = 1.5;
  double command_seconds = 3.0;
  double command_recognition = 0.95;
};

inline double mean_noise(const SensorTrace& trace, double t0, double t1) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : trace.noise)
    if (s.t >= t0 && s.t < t1) {
      sum += s.v;
      ++n;
    }
  if (n == 0) throw RangeError("no noise samples in playback interval");
  return sum / static_cast<double>(n);
}

struct PlaybackAmbient {
  double activation = 0.0;
  double command = 0.0;
  double overall = 0.0;
};

// Ambient levels while the key and then the command play, starting at `start`.
inline PlaybackAmbient playback_ambient(const SensorTrace& trace, double start, const PlaybackConfig& cfg) {
  const double mid = start + cfg.activation_seconds;
  const double end = mid + cfg.command_seconds;
  return {mean_noise(trace, start, mid), mean_noise(trace, mid, end), mean_noise(trace, start, end)};
}

// Level the IED meters for a window; drives the volume choice.
inline double window_ambient(const Window& w, const features::PreprocessConfig& pre = {}) {
  return features::window_env_features(w, w.phone, pre).noise_mean;
}

struct PlaybackOutcome {
  PlaybackAmbient ambient;
  bool noticed = false;
  bool activated = false;
  bool command_recognized = false;
};

// Activation and command each fail when the ambient level during playback
// climbs above what the chosen volume covers, or on their own Bernoulli
// draw. Draw order is fixed: notice, activation, command.
inline PlaybackOutcome play(const SensorTrace& trace, double start, Scenario scenario, const trigger::Volumes& volume,
                            double key_success_prob, const trigger::VolumePolicy& policy, const NoticeModel& notice_model,
                            const PlaybackConfig& cfg, Rng& rng) {
  PlaybackOutcome out;
  out.ambient = playback_ambient(trace, start, cfg);
  const double loudest = std::max(volume.activation, volume.command);
  out.noticed = notice(notice_model, scenario, out.ambient.overall, loudest, rng);
  const bool key_ok = bernoulli(rng, key_success_prob);
  const bool cmd_ok = bernoulli(rng, cfg.command_recognition);
  const auto need_act = trigger::minimum_volume(out.ambient.activation, policy);
  const auto need_cmd = trigger::minimum_volume(out.ambient.command, policy);
  out.activated = key_ok && volume.activation >= need_act.activation;
  out.command_recognized = out.activated && cmd_ok && volume.command >= need_cmd.command;
  return out;
}

// Ground truth for a labeled window: would playback right after it succeed?
inline scenegen::Labeler make_labeler(trigger::VolumePolicy policy, NoticeModel notice_model, PlaybackConfig cfg,
                                      features::PreprocessConfig pre = {}) {
  return [=](const SensorTrace& trace, double window_seconds, std::uint64_t label_seed) {
    const auto w = cut_window(trace, 0.0, window_seconds);
    const auto vol = trigger::playback_volume(window_ambient(w, pre), policy);
    Rng rng(label_seed);
    const auto out = play(trace, window_seconds, trace.scenario, vol, 1.0, policy, notice_model, cfg, rng);
    return !out.noticed && out.command_recognized ? scenegen::InvasionLabel::Successful
                                                   : scenegen::InvasionLabel::Unsuccessful;
  };
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationConfig {
  int trials = 1000;
  double window_seconds = 180.0;
  double tolerance = 0.05;
  double offset_bound = 60.0;  // dB, bisection bracket is [-bound, bound]
  int max_iterations = 60;
};

namespace detail {

struct NoticeDraw {
  double ambient = 0.0;
  double volume = 0.0;
  double u = 0.0;
};

inline double notice_rate(const NoticeModel& m, const std::vector<NoticeDraw>& draws, double offset) {
  std::size_t hits = 0;
  for (const auto& d : draws)
    if (d.u < logistic(m.slope * (d.volume - d.ambient - offset - m.base_margin))) ++hits;
  return static_cast<double>(hits) / static_cast<double>(draws.size());
}

}  // namespace detail

// Fits each scenario offset by bisection against common random numbers so
// the simulated notice rate hits its target. Targets of exactly 0 or 1 drive
// the offset to the bracket edge. Trial streams do not depend on the
// scenario, so scenarios with equal parameters and targets get equal offsets.
inline NoticeModel calibrate_notice(NoticeModel model, const std::array<double, 6>& targets,
                                    const scenegen::ScenarioTable& table, const trigger::VolumePolicy& policy,
                                    const PlaybackConfig& playback, const CalibrationConfig& cfg, std::uint64_t seed,
                                    unsigned jobs = 1, const features::PreprocessConfig& pre = {}) {
  if (cfg.trials < 1) throw ConfigError("calibrate_notice: trials must be >= 1");
  for (double t : targets)
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("calibrate_notice: targets must lie in [0, 1]");

  const std::size_t n = static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<detail::NoticeDraw>> draws(6, std::vector<detail::NoticeDraw>(n));
  parallel_for(6 * n, jobs, [&](std::size_t job) {
    const std::size_t s = job / n, i = job % n;
    const auto scenario = kAllScenarios[s];
    const auto trace = scenegen::generate_trace(scenario, cfg.window_seconds + scenegen::kPlaybackTailSeconds,
                                                scenegen::trial_phone(i), table[s],
                                                derive_seed(seed, {stream::kCalibrate, i}));
    const auto w = cut_window(trace, 0.0, cfg.window_seconds);
    const auto vol = trigger::playback_volume(window_ambient(w, pre), policy);
    Rng rng = make_rng(seed, {stream::kCalibrate, i, 1});
    draws[s][i] = {playback_ambient(trace, cfg.window_seconds, playback).overall,
                   std::max(vol.activation, vol.command), uniform01(rng)};
  });

  std::string failures;
  for (std::size_t s = 0; s < 6; ++s) {
    const double target = targets[s];
    double lo = -cfg.offset_bound, hi = cfg.offset_bound;
    double offset = 0.0;
    bool settled = false;
    for (int it = 0; it < cfg.max_iterations; ++it) {
      offset = 0.5 * (lo + hi);
      const double r = detail::notice_rate(model, draws[s], offset);
      // Rate falls as the offset grows.
      if (r > target || (r == target && target <= 0.0)) lo = offset;
      else if (r < target || (r == target && target >= 1.0)) hi = offset;
      else {
        settled = true;
        break;
      }
      if (hi - lo < 1e-9) {
        settled = true;
        break;
      }
    }
    if (!settled) offset = 0.5 * (lo + hi);
    model.scenario_offset[s] = offset;
    model.target[s] = target;
    model.residual[s] = detail::notice_rate(model, draws[s], offset) - target;
    if (std::abs(model.residual[s]) > cfg.tolerance)
      failures += std::string(1, scenario_tag(kAllScenarios[s])) + ": residual " + std::to_string(model.residual[s]) + "; ";
  }
  if (!failures.empty()) throw ConfigError("calibrate_notice: did not converge (" + failures + ")");
  model.calibrated = true;
  return model;
}

// ---------------------------------------------------------------------------
// Resource ledger

inline constexpr std::size_t kPhaseCount = 4;

inline std::size_t phase_slot(Phase p) {
  if (p == Phase::Done) throw RangeError("ledger: Done has no resource rates");
  return static_cast<std::size_t>(p);
}

struct DeviceProfile {
  std::string name;
  std::array<double, kPhaseCount> ram_mb{};
  std::array<double, kPhaseCount> cpu_percent{};
};

inline DeviceProfile galaxy_s9_profile() { return {"galaxy-s9", {15, 22, 26, 25}, {0, 0, 7, 0}}; }
inline DeviceProfile pixel2_profile() { return {"pixel-2", {17, 35, 35, 35}, {0, 0, 7, 0}}; }

struct FileSizes {
  double voice_kb = 180.9;
  double accel_kb = 91.7;
  double light_kb = 4.4;
  double noise_kb = 5.4;
};

struct LedgerConfig {
  // mAh per minute.
  double p1_rate = 0.2;
  double p2_rate = 0.1;
  double p4_rate = 0.1;
  double p3_gated_rate = 0.4;
  // (sensing Hz, mAh/min), interpolated linearly and clamped at the ends.
  std::vector<std::pair<double, double>> p3_rate_by_sensing = {{10.0, 0.5}, {50.0, 0.8}};
  DeviceProfile device = galaxy_s9_profile();
  FileSizes files;
};

inline double p3_rate(double sensing_hz, const LedgerConfig& cfg) {
  const auto& a = cfg.p3_rate_by_sensing;
  if (a.empty()) throw ConfigError("ledger: no P3 rate anchors");
  if (sensing_hz <= a.front().first) return a.front().second;
  if (sensing_hz >= a.back().first) return a.back().second;
  for (std::size_t i = 1; i < a.size(); ++i)
    if (sensing_hz <= a[i].first) {
      const double w = (sensing_hz - a[i - 1].first) / (a[i].first - a[i - 1].first);
      return a[i - 1].second + w * (a[i].second - a[i - 1].second);
    }
  return a.back().second;
}

struct ResourceLedger {
  std::array<double, kPhaseCount> minutes{};
  std::array<double, kPhaseCount> mah{};
  std::array<double, kPhaseCount> ram_mb_minutes{};
  std::array<double, kPhaseCount> cpu_percent_minutes{};
  double peak_ram_mb = 0.0;
  double storage_kb = 0.0;  // peak on-disk footprint

  double total_mah() const { return mah[0] + mah[1] + mah[2] + mah[3]; }
  double total_minutes() const { return minutes[0] + minutes[1] + minutes[2] + minutes[3]; }

  void merge(const ResourceLedger& o) {
    for (std::size_t i = 0; i < kPhaseCount; ++i) {
      minutes[i] += o.minutes[i];
      mah[i] += o.mah[i];
      ram_mb_minutes[i] += o.ram_mb_minutes[i];
      cpu_percent_minutes[i] += o.cpu_percent_minutes[i];
    }
    peak_ram_mb = std::max(peak_ram_mb, o.peak_ram_mb);
    storage_kb = std::max(storage_kb, o.storage_kb);
  }
};

inline double power_rate(Phase phase, double sensing_hz, bool gated, const LedgerConfig& cfg) {
  switch (phase) {
    case Phase::P1_CallMonitor: return cfg.p1_rate;
    case Phase::P2_RecordSynthesize: return cfg.p2_rate;
    case Phase::P3_EnvironmentMonitor: return gated ? cfg.p3_gated_rate : p3_rate(sensing_hz, cfg);
    case Phase::P4_Attack: return cfg.p4_rate;
    case Phase::Done: break;
  }
  throw RangeError("ledger: Done has no resource rates");
}

inline ResourceLedger ledger_accumulate(ResourceLedger ledger, Phase phase, double minutes, double sensing_hz,
                                        bool gated, const LedgerConfig& cfg = {}) {
  if (!(minutes >= 0.0)) throw RangeError("ledger: minutes must be >= 0");
  if (minutes == 0.0) return ledger;
  const auto slot = phase_slot(phase);
  ledger.minutes[slot] += minutes;
  ledger.mah[slot] += power_rate(phase, sensing_hz, gated, cfg) * minutes;
  ledger.ram_mb_minutes[slot] += cfg.device.ram_mb[slot] * minutes;
  ledger.cpu_percent_minutes[slot] += cfg.device.cpu_percent[slot] * minutes;
  ledger.peak_ram_mb = std::max(ledger.peak_ram_mb, cfg.device.ram_mb[slot]);
  // From P3 on, the key audio and one retained set of sensor logs sit on disk.
  if (phase == Phase::P3_EnvironmentMonitor || phase == Phase::P4_Attack) {
    const auto& f = cfg.files;
    ledger.storage_kb = std::max(ledger.storage_kb, f.voice_kb + f.accel_kb + f.light_kb + f.noise_kb);
  }
  return ledger;
}

// ---------------------------------------------------------------------------
// Defenses

enum class Defense : std::uint8_t { None, SourceCheck, ContinuousAuth, MagneticDetect };

inline std::string_view defense_name(Defense d) {
  switch (d) {
    case Defense::None: return "none";
    case Defense::SourceCheck: return "source-check";
    case Defense::ContinuousAuth: return "continuous-auth";
    case Defense::MagneticDetect: return "magnetic-detect";
  }
  return "?";
}

inline std::optional<Defense> parse_defense(std::string_view s) {
  for (auto d : {Defense::None, Defense::SourceCheck, Defense::ContinuousAuth, Defense::MagneticDetect})
    if (defense_name(d) == s) return d;
  return std::nullopt;
}

struct DefenseConfig {
  double magnetic_false_negative = 0.05;
  double magnetic_false_positive = 0.10;
  // Share of legitimate commands issued without touching the phone.
  double hands_free_fraction = 0.2;
  // Share of legitimate commands issued near another loudspeaker.
  double nearby_device_fraction = 0.3;
};

enum class AudioOrigin : std::uint8_t { BuiltInSpeaker, UserVoice };

struct VoiceContext {
  AudioOrigin origin = AudioOrigin::BuiltInSpeaker;
  bool body_vibration_match = false;
  bool nearby_speaker_device = false;
};

inline VoiceContext attack_context() { return {AudioOrigin::BuiltInSpeaker, false, false}; }

// Vibration is only picked up when the user holds or wears the device.
inline VoiceContext legitimate_context(bool hands_free, bool nearby_speaker_device) {
  return {AudioOrigin::UserVoice, !hands_free, nearby_speaker_device};
}

// True if the defense rejects this voice input.
inline bool apply_defense(Defense d, const VoiceContext& ctx, const DefenseConfig& cfg, Rng& rng) {
  switch (d) {
    case Defense::None: return false;
    case Defense::SourceCheck: return ctx.origin == AudioOrigin::BuiltInSpeaker;
    case Defense::ContinuousAuth: return !ctx.body_vibration_match;
    case Defense::MagneticDetect:
      if (ctx.origin == AudioOrigin::BuiltInSpeaker) return bernoulli(rng, 1.0 - cfg.magnetic_false_negative);
      return ctx.nearby_speaker_device && bernoulli(rng, cfg.magnetic_false_positive);
  }
  return false;
}

struct DefenseEvaluation {
  Defense defense = Defense::None;
  long attacks = 0, attacks_blocked = 0;
  long legitimate = 0, legitimate_blocked = 0;

  double attack_block_rate() const { return attacks ? static_cast<double>(attacks_blocked) / static_cast<double>(attacks) : 0.0; }
  double false_reject_rate() const {
    return legitimate ? static_cast<double>(legitimate_blocked) / static_cast<double>(legitimate) : 0.0;
  }
};

inline DefenseEvaluation evaluate_defense(Defense d, const DefenseConfig& cfg, long attacks, long legitimate,
                                          std::uint64_t seed) {
  DefenseEvaluation ev;
  ev.defense = d;
  Rng rng = make_rng(seed, {stream::kDefense, static_cast<std::uint64_t>(d)});
  for (long i = 0; i < attacks; ++i) {
    ++ev.attacks;
    if (apply_defense(d, attack_context(), cfg, rng)) ++ev.attacks_blocked;
  }
  for (long i = 0; i < legitimate; ++i) {
    const bool hands_free = bernoulli(rng, cfg.hands_free_fraction);
    const bool nearby = bernoulli(rng, cfg.nearby_device_fraction);
    ++ev.legitimate;
    if (apply_defense(d, legitimate_context(hands_free, nearby), cfg, rng)) ++ev.legitimate_blocked;
  }
  return ev;
}

// ---------------------------------------------------------------------------
// Trials

enum class Protocol : std::uint8_t {
  // Playback after every first window, no environment detection.
  Forced,
  // The environment detector decides per window.
  Triggered,
};

inline std::string_view protocol_name(Protocol p) { return p == Protocol::Forced ? "forced" : "triggered"; }

struct TrialConfig {
  scenegen::ScenarioTable params = scenegen::default_scenario_table();
  trigger::VolumePolicy policy = trigger::default_policy();
  keyword::Lexicon lexicon = keyword::default_lexicon();
  keyword::CaptureMode capture_mode = keyword::CaptureMode::WordBased;
  keyword::KeyConfig key;
  scenegen::ConversationModel conversation;
  std::vector<std::string> commands;
  NoticeModel notice;
  PlaybackConfig playback;
  Protocol protocol = Protocol::Forced;
  trigger::TriggerConfig trigger;
  const forest::ForestModel* motion_model = nullptr;
  const forest::ForestModel* opportunity_model = nullptr;
  std::optional<PhoneState> phone;  // default: scenegen::trial_phone(trial)
  double window_seconds = 180.0;
  int max_windows = 20;
  double max_capture_hours = 72.0;
  double sensing_rate_hz = 50.0;
  LedgerConfig ledger;
  Defense defense = Defense::None;
  DefenseConfig defense_config;
};

struct TrialRecord {
  Scenario scenario = Scenario::QuietRoad;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<Phase> timeline;
  bool key_complete = false;
  int windows = 0;
  bool launched = false;
  bool gated_any = false;
  double p_success = 0.0;
  double ambient = 0.0;
  double activation_volume = 0.0;
  double command_volume = 0.0;
  double playback_ambient = 0.0;
  bool noticed = false;
  bool activated = false;
  bool command_recognized = false;
  bool blocked = false;
  bool succeeded = false;
  int command_index = -1;
  ResourceLedger ledger;
};

inline void check_ready(const TrialConfig& cfg) {
  if (!cfg.notice.calibrated) throw ConfigError("trial: notice model is not calibrated");
  if (cfg.commands.empty()) throw ConfigError("trial: no commands");
  trigger::validate(cfg.policy);
  keyword::validate(cfg.lexicon);
  if (cfg.protocol == Protocol::Triggered) {
    if (!cfg.motion_model || !cfg.opportunity_model) throw ConfigError("trial: triggered protocol needs both models");
    features::check_motion_model(*cfg.motion_model);
    trigger::check_opportunity_model(*cfg.opportunity_model);
  }
}

inline TrialRecord run_trial(Scenario scenario, std::size_t trial, const TrialConfig& cfg, std::uint64_t seed) {
  check_ready(cfg);
  TrialRecord rec;
  rec.scenario = scenario;
  rec.trial = trial;
  rec.seed = derive_seed(seed, {stream::kTrial, index_of(scenario), trial});
  Rng rng(rec.seed);
  const PhoneState phone = cfg.phone.value_or(scenegen::trial_phone(trial));

  Phase phase = Phase::P1_CallMonitor;
  rec.timeline.push_back(phase);
  auto advance = [&](Event ev) {
    const Phase next = step(phase, ev);
    if (next != phase) rec.timeline.push_back(next);
    phase = next;
  };
  auto spend = [&](Phase p, double minutes, bool gated = false) {
    rec.ledger = ledger_accumulate(rec.ledger, p, minutes, cfg.sensing_rate_hz, gated, cfg.ledger);
  };

  // P1/P2: wait for calls and harvest the key from their transcripts.
  auto capture = keyword::start_capture(cfg.capture_mode, cfg.lexicon);
  double waited = 0.0;
  std::uint64_t segment_id = 0;
  const double segment_minutes = cfg.conversation.segment_seconds / 60.0;
  while (!capture.complete) {
    const double gap = scenegen::next_call_gap_minutes(cfg.conversation, rng);
    waited += gap;
    if (waited > cfg.max_capture_hours * 60.0) {
      spend(Phase::P1_CallMonitor, gap - (waited - cfg.max_capture_hours * 60.0));
      return rec;
    }
    spend(Phase::P1_CallMonitor, gap);
    advance({EventKind::CallStarted});
    const double call = scenegen::call_length_minutes(cfg.conversation, rng);
    const auto segments = std::max<long>(1, static_cast<long>(std::floor(call / segment_minutes)));
    for (long s = 0; s < segments && !capture.complete; ++s) {
      capture = keyword::feed_segment(capture, scenegen::sample_segment(segment_id++, cfg.conversation, cfg.lexicon, rng));
      spend(Phase::P2_RecordSynthesize, segment_minutes);
      waited += segment_minutes;
      advance({EventKind::SegmentAvailable, capture.complete});
    }
    if (!capture.complete) advance({EventKind::CallEnded});
  }
  rec.key_complete = true;
  const auto key = keyword::synthesize(capture, cfg.key);

  // P3: watch the environment window by window.
  std::optional<SensorTrace> trace;
  trigger::TriggerDecision decision;
  for (int w = 0; w < cfg.max_windows; ++w) {
    trace = scenegen::generate_trace(scenario, cfg.window_seconds + scenegen::kPlaybackTailSeconds, phone,
                                     cfg.params[index_of(scenario)],
                                     derive_seed(rec.seed, {stream::kTrace, static_cast<std::uint64_t>(w)}));
    const auto window = cut_window(*trace, 0.0, cfg.window_seconds);
    if (cfg.protocol == Protocol::Forced) {
      decision = {};
      decision.launch = true;
      decision.p_success = 1.0;
      decision.ambient = window_ambient(window, cfg.trigger.preprocess);
      const auto vol = trigger::playback_volume(decision.ambient, cfg.policy);
      decision.activation_volume = vol.activation;
      decision.command_volume = vol.command;
    } else {
      decision = trigger::decide(window, phone, *cfg.opportunity_model, *cfg.motion_model, cfg.policy, cfg.trigger);
    }
    ++rec.windows;
    rec.gated_any = rec.gated_any || decision.gated;
    spend(Phase::P3_EnvironmentMonitor, cfg.window_seconds / 60.0, decision.gated);
    advance({EventKind::WindowElapsed});
    advance({EventKind::DecisionMade, decision.launch});
    if (decision.launch) break;
  }
  rec.p_success = decision.p_success;
  rec.ambient = decision.ambient;
  if (!decision.launch) return rec;

  // P4: play key and one command.
  rec.launched = true;
  rec.activation_volume = decision.activation_volume;
  rec.command_volume = decision.command_volume;
  const auto outcome = play(*trace, cfg.window_seconds, scenario, {decision.activation_volume, decision.command_volume},
                            key.activation_success_prob, cfg.policy, cfg.notice, cfg.playback, rng);
  rec.command_index = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, cfg.commands.size() - 1)(rng));
  rec.playback_ambient = outcome.ambient.overall;
  rec.noticed = outcome.noticed;
  rec.activated = outcome.activated;
  rec.command_recognized = outcome.command_recognized;
  rec.blocked = apply_defense(cfg.defense, attack_context(), cfg.defense_config, rng);
  rec.succeeded = !rec.noticed && rec.command_recognized && !rec.blocked;
  spend(Phase::P4_Attack, (cfg.playback.activation_seconds + cfg.playback.command_seconds) / 60.0);
  advance({EventKind::AttackCompleted, false});
  return rec;
}

struct ScenarioSummary {
  Scenario scenario = Scenario::QuietRoad;
  long trials = 0;
  long key_complete = 0;
  long launched = 0;
  long noticed = 0;
  long recognized = 0;
  long blocked = 0;
  long succeeded = 0;

  double success_rate() const { return launched ? static_cast<double>(succeeded) / static_cast<double>(launched) : 0.0; }
  double launch_rate() const { return trials ? static_cast<double>(launched) / static_cast<double>(trials) : 0.0; }
};

struct SimulationReport {
  std::uint64_t seed = 0;
  Protocol protocol = Protocol::Forced;
  Defense defense = Defense::None;
  int trials_per_scenario = 0;
  std::vector<TrialRecord> trials;
  std::vector<ScenarioSummary> scenarios;
  ResourceLedger ledger;
};

inline SimulationReport summarize(std::vector<TrialRecord> trials, const std::vector<Scenario>& scenarios) {
  SimulationReport r;
  for (auto s : scenarios) r.scenarios.push_back({s});
  for (const auto& t : trials) {
    auto it = std::find_if(r.scenarios.begin(), r.scenarios.end(), [&](const auto& x) { return x.scenario == t.scenario; });
    if (it == r.scenarios.end()) continue;
    ++it->trials;
    it->key_complete += t.key_complete;
    it->launched += t.launched;
    it->noticed += t.noticed;
    it->recognized += t.command_recognized;
    it->blocked += t.blocked;
    it->succeeded += t.succeeded;
    r.ledger.merge(t.ledger);
  }
  r.trials = std::move(trials);
  return r;
}

// Trials run in any order on `jobs` threads; records are stored by index, so
// the report is identical for every jobs value.
inline SimulationReport simulate(const TrialConfig& cfg, const std::vector<Scenario>& scenarios, int trials_per_scenario,
                                 std::uint64_t seed, unsigned jobs = 1) {
  check_ready(cfg);
  if (trials_per_scenario < 1) throw ConfigError("simulate: trials must be >= 1");
  const auto n = static_cast<std::size_t>(trials_per_scenario);
  std::vector<TrialRecord> records(scenarios.size() * n);
  parallel_for(records.size(), jobs, [&](std::size_t i) { records[i] = run_trial(scenarios[i / n], i % n, cfg, seed); });
  auto report = summarize(std::move(records), scenarios);
  report.seed = seed;
  report.protocol = cfg.protocol;
  report.defense = cfg.defense;
  report.trials_per_scenario = trials_per_scenario;
  return report;
}

}  // namespace vasim::lifecycle
