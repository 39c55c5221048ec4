#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "support.hpp"
#include "vasim/lifecycle.hpp"
#include "vasim/report.hpp"

using namespace vasim;
using namespace vasim::lifecycle;

namespace {

const std::vector<EventKind> kEvents = {EventKind::CallStarted,   EventKind::SegmentAvailable, EventKind::CallEnded,
                                        EventKind::WindowElapsed, EventKind::DecisionMade,     EventKind::AttackCompleted};
const std::vector<Phase> kPhases = {Phase::P1_CallMonitor, Phase::P2_RecordSynthesize, Phase::P3_EnvironmentMonitor,
                                    Phase::P4_Attack, Phase::Done};

// Ghost state carried alongside the machine: has the key ever completed, and
// did the event that moved us into P4 carry a launch verdict.
struct Walk {
  Phase phase = Phase::P1_CallMonitor;
  bool key_complete = false;
  bool operator<(const Walk& o) const { return std::tie(phase, key_complete) < std::tie(o.phase, o.key_complete); }
};

struct Explorer {
  long steps = 0, violations = 0, p4_reached = 0;
  std::set<std::pair<int, Walk>> seen;
  bool memo = true;

  void dfs(Walk w, int depth) {
    if (depth == 0) return;
    if (memo && !seen.insert({depth, w}).second) return;
    for (auto kind : kEvents)
      for (bool flag : {false, true}) {
        Phase next;
        try {
          next = step(w.phase, {kind, flag});
        } catch (const TransitionError&) {
          continue;
        }
        ++steps;
        Walk n = w;
        n.phase = next;
        if (w.phase == Phase::P2_RecordSynthesize && kind == EventKind::SegmentAvailable && flag) n.key_complete = true;
        if (next == Phase::P4_Attack && w.phase != Phase::P4_Attack) {
          ++p4_reached;
          const bool launch = kind == EventKind::DecisionMade && flag;
          if (!launch || !n.key_complete) ++violations;
        }
        if (next == Phase::P3_EnvironmentMonitor && !n.key_complete) ++violations;
        dfs(n, depth - 1);
      }
  }
};

TrialConfig forced_config(std::uint64_t calib_seed = 21) {
  TrialConfig cfg;
  cfg.commands = {"what time is it", "open the calendar"};
  cfg.notice = fixtures::quick_notice(calib_seed);
  return cfg;
}

}  // namespace

TEST(StateMachine, PublishedTransitions) {
  EXPECT_EQ(step(Phase::P1_CallMonitor, {EventKind::CallStarted}), Phase::P2_RecordSynthesize);
  EXPECT_EQ(step(Phase::P2_RecordSynthesize, {EventKind::SegmentAvailable, true}), Phase::P3_EnvironmentMonitor);
  EXPECT_EQ(step(Phase::P2_RecordSynthesize, {EventKind::SegmentAvailable, false}), Phase::P2_RecordSynthesize);
  EXPECT_EQ(step(Phase::P2_RecordSynthesize, {EventKind::CallEnded}), Phase::P1_CallMonitor);
  EXPECT_EQ(step(Phase::P3_EnvironmentMonitor, {EventKind::CallStarted}), Phase::P3_EnvironmentMonitor);
  EXPECT_EQ(step(Phase::P3_EnvironmentMonitor, {EventKind::DecisionMade, true}), Phase::P4_Attack);
  EXPECT_EQ(step(Phase::P3_EnvironmentMonitor, {EventKind::DecisionMade, false}), Phase::P3_EnvironmentMonitor);
  EXPECT_EQ(step(Phase::P4_Attack, {EventKind::AttackCompleted, true}), Phase::P3_EnvironmentMonitor);
  EXPECT_EQ(step(Phase::P4_Attack, {EventKind::AttackCompleted, false}), Phase::Done);
  try {
    step(Phase::P1_CallMonitor, {EventKind::WindowElapsed});
    ADD_FAILURE();
  } catch (const TransitionError& e) {
    EXPECT_NE(std::string(e.what()).find("WindowElapsed"), std::string::npos);
  }
}

TEST(StateMachine, IllegalTransitionsAllRejected) {
  const std::set<std::pair<Phase, EventKind>> legal = {
      {Phase::P1_CallMonitor, EventKind::CallStarted},
      {Phase::P2_RecordSynthesize, EventKind::SegmentAvailable},
      {Phase::P2_RecordSynthesize, EventKind::CallEnded},
      {Phase::P3_EnvironmentMonitor, EventKind::CallStarted},
      {Phase::P3_EnvironmentMonitor, EventKind::CallEnded},
      {Phase::P3_EnvironmentMonitor, EventKind::SegmentAvailable},
      {Phase::P3_EnvironmentMonitor, EventKind::WindowElapsed},
      {Phase::P3_EnvironmentMonitor, EventKind::DecisionMade},
      {Phase::P4_Attack, EventKind::AttackCompleted}};
  int rejected = 0;
  for (auto p : kPhases)
    for (auto e : kEvents)
      for (bool flag : {false, true}) {
        if (legal.contains({p, e})) {
          EXPECT_NO_THROW(step(p, {e, flag}));
        } else {
          EXPECT_THROW(step(p, {e, flag}), TransitionError);
          ++rejected;
        }
      }
  EXPECT_EQ(rejected, 2 * (5 * 6 - 9));
}

TEST(StateMachine, NoP4WithoutKeyAndLaunchDepth12) {
  Explorer ex;
  ex.dfs({}, 12);
  EXPECT_EQ(ex.violations, 0);
  EXPECT_GT(ex.p4_reached, 0);
  // Unmemoized enumeration of every sequence at a shallower depth.
  Explorer raw;
  raw.memo = false;
  raw.dfs({}, 7);
  EXPECT_EQ(raw.violations, 0);
  EXPECT_GT(raw.p4_reached, 0);
}

TEST(Notice, LogisticLimitsAndMidpoint) {
  NoticeModel m;
  m.scenario_offset[2] = 3.0;
  m.base_margin = 1.0;
  EXPECT_DOUBLE_EQ(notice_probability(m, Scenario::SpecificPlaces, 50.0, 54.0), 0.5);
  EXPECT_LT(notice_probability(m, Scenario::SpecificPlaces, 50.0, -1e6), 1e-12);
  EXPECT_GT(notice_probability(m, Scenario::SpecificPlaces, 50.0, 1e6), 1.0 - 1e-12);
  Rng rng(1);
  EXPECT_THROW(notice(m, Scenario::Car, 50.0, 50.0, rng), ConfigError);
  m.calibrated = true;
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(notice(m, Scenario::Car, 50.0, 50.0, a), notice(m, Scenario::Car, 50.0, 50.0, b));
}

TEST(Notice, CalibrationHitsTargetsOnFreshDraws) {
  const auto m = fixtures::quick_notice(31, 1000);
  EXPECT_TRUE(m.calibrated);
  for (std::size_t s = 0; s < 6; ++s) EXPECT_LE(std::abs(m.residual[s]), 0.05);
  // Rates measured on trial streams the fit never saw.
  const auto table = scenegen::default_scenario_table();
  const auto policy = trigger::default_policy();
  for (auto s : {Scenario::QuietRoad, Scenario::Highway, Scenario::Car, Scenario::Restaurant}) {
    int hits = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto t = scenegen::generate_trace(s, 190.0, scenegen::trial_phone(i), table[index_of(s)],
                                              derive_seed(999, {static_cast<std::uint64_t>(i)}));
      const auto vol = trigger::playback_volume(window_ambient(cut_window(t, 0, 180)), policy);
      Rng rng = make_rng(999, {static_cast<std::uint64_t>(i), 7});
      hits += notice(m, s, playback_ambient(t, 180.0, {}).overall, std::max(vol.activation, vol.command), rng);
    }
    const double rate = hits / 1000.0;
    if (kObservedNoticeRate[index_of(s)] == 0.0) {
      EXPECT_LE(rate, 0.05) << scenario_name(s);
    } else {
      EXPECT_GE(rate, 0.95) << scenario_name(s);
    }
  }
}

TEST(Notice, SymmetricTargetsGiveEqualOffsets) {
  auto table = scenegen::default_scenario_table();
  table[3] = table[1];
  auto targets = kObservedNoticeRate;
  targets[1] = targets[3] = 0.3;
  CalibrationConfig cc;
  cc.trials = 200;
  const auto m = calibrate_notice({}, targets, table, trigger::default_policy(), {}, cc, 4);
  EXPECT_EQ(m.scenario_offset[1], m.scenario_offset[3]);
  const auto again = calibrate_notice({}, targets, table, trigger::default_policy(), {}, cc, 4, 4);
  EXPECT_EQ(again.scenario_offset, m.scenario_offset);
}

TEST(Notice, CalibrationRejectsBadInputs) {
  CalibrationConfig cc;
  cc.trials = 0;
  const auto table = scenegen::default_scenario_table();
  EXPECT_THROW(calibrate_notice({}, kObservedNoticeRate, table, trigger::default_policy(), {}, cc, 1), ConfigError);
  cc.trials = 50;
  auto targets = kObservedNoticeRate;
  targets[0] = 1.5;
  EXPECT_THROW(calibrate_notice({}, targets, table, trigger::default_policy(), {}, cc, 1), ConfigError);
  // A two-iteration budget cannot reach a 60 % target.
  cc.max_iterations = 2;
  cc.tolerance = 0.0;
  try {
    calibrate_notice({}, kObservedNoticeRate, table, trigger::default_policy(), {}, cc, 1);
    ADD_FAILURE();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos);
  }
}

TEST(Ledger, PublishedRates) {
  EXPECT_DOUBLE_EQ(ledger_accumulate({}, Phase::P3_EnvironmentMonitor, 10, 50, false).total_mah(), 8.0);
  EXPECT_DOUBLE_EQ(ledger_accumulate({}, Phase::P3_EnvironmentMonitor, 10, 10, false).total_mah(), 5.0);
  EXPECT_DOUBLE_EQ(ledger_accumulate({}, Phase::P3_EnvironmentMonitor, 10, 50, true).total_mah(), 4.0);
  EXPECT_DOUBLE_EQ(ledger_accumulate({}, Phase::P1_CallMonitor, 10, 50, false).total_mah(), 2.0);
  EXPECT_DOUBLE_EQ(ledger_accumulate({}, Phase::P2_RecordSynthesize, 10, 50, false).total_mah(), 1.0);
  EXPECT_DOUBLE_EQ(ledger_accumulate({}, Phase::P4_Attack, 10, 50, false).total_mah(), 1.0);
  EXPECT_DOUBLE_EQ(p3_rate(30.0, {}), 0.65);
}

TEST(Ledger, ZeroMinutesAndErrors) {
  const auto l = ledger_accumulate({}, Phase::P1_CallMonitor, 3, 50, false);
  const auto same = ledger_accumulate(l, Phase::P3_EnvironmentMonitor, 0, 50, false);
  EXPECT_EQ(same.mah, l.mah);
  EXPECT_EQ(same.storage_kb, l.storage_kb);
  EXPECT_THROW(ledger_accumulate({}, Phase::P1_CallMonitor, -1, 50, false), RangeError);
  EXPECT_THROW(ledger_accumulate({}, Phase::Done, 1, 50, false), RangeError);
}

TEST(Ledger, RamCpuAndStorage) {
  auto l = ledger_accumulate({}, Phase::P2_RecordSynthesize, 2, 50, false);
  EXPECT_EQ(l.storage_kb, 0.0);
  EXPECT_EQ(l.peak_ram_mb, 22.0);
  l = ledger_accumulate(l, Phase::P3_EnvironmentMonitor, 3, 50, false);
  EXPECT_DOUBLE_EQ(l.storage_kb, 180.9 + 91.7 + 4.4 + 5.4);
  EXPECT_DOUBLE_EQ(l.cpu_percent_minutes[2], 21.0);
  EXPECT_EQ(l.peak_ram_mb, 26.0);
  LedgerConfig pixel;
  pixel.device = pixel2_profile();
  EXPECT_EQ(ledger_accumulate({}, Phase::P4_Attack, 1, 50, false, pixel).peak_ram_mb, 35.0);
}

TEST(Ledger, LinearityProperty) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> mins(0.0, 30.0), hz(1.0, 80.0);
  for (int rep = 0; rep < 500; ++rep) {
    const Phase p = kPhases[rng() % 4];
    const double t1 = mins(rng), t2 = mins(rng), rate = hz(rng);
    const bool gated = rng() % 2;
    const auto split = ledger_accumulate(ledger_accumulate({}, p, t1, rate, gated), p, t2, rate, gated);
    const auto whole = ledger_accumulate({}, p, t1 + t2, rate, gated);
    EXPECT_NEAR(split.total_mah(), whole.total_mah(), 1e-9);
    EXPECT_NEAR(split.total_minutes(), whole.total_minutes(), 1e-9);
  }
}

TEST(Defense, SourceCheckAndContinuousAuth) {
  const DefenseConfig cfg;
  const auto src = evaluate_defense(Defense::SourceCheck, cfg, 1000, 1000, 1);
  EXPECT_EQ(src.attacks_blocked, 1000);
  EXPECT_EQ(src.legitimate_blocked, 0);
  const auto ca = evaluate_defense(Defense::ContinuousAuth, cfg, 1000, 1000, 1);
  EXPECT_EQ(ca.attacks_blocked, 1000);
  EXPECT_GT(ca.false_reject_rate(), 0.0);
  EXPECT_NEAR(ca.false_reject_rate(), cfg.hands_free_fraction, 3.0 * std::sqrt(0.2 * 0.8 / 1000));
  Rng rng(1);
  EXPECT_TRUE(apply_defense(Defense::ContinuousAuth, legitimate_context(true, false), cfg, rng));
  EXPECT_FALSE(apply_defense(Defense::ContinuousAuth, legitimate_context(false, false), cfg, rng));
  EXPECT_FALSE(apply_defense(Defense::None, attack_context(), cfg, rng));
}

TEST(Defense, MagneticRatesWithinThreeSigma) {
  DefenseConfig cfg;
  cfg.nearby_device_fraction = 1.0;
  const auto ev = evaluate_defense(Defense::MagneticDetect, cfg, 1000, 1000, 8);
  const double fn = 1.0 - ev.attack_block_rate();
  EXPECT_NEAR(fn, 0.05, 3.0 * std::sqrt(0.05 * 0.95 / 1000));
  EXPECT_NEAR(ev.false_reject_rate(), 0.10, 3.0 * std::sqrt(0.1 * 0.9 / 1000));
  Rng rng(2);
  for (int i = 0; i < 100; ++i) EXPECT_FALSE(apply_defense(Defense::MagneticDetect, legitimate_context(false, false), cfg, rng));
  for (auto d : {Defense::None, Defense::SourceCheck, Defense::ContinuousAuth, Defense::MagneticDetect})
    EXPECT_EQ(parse_defense(defense_name(d)), d);
  EXPECT_FALSE(parse_defense("firewall").has_value());
}

TEST(Trial, DeterministicAndConsistent) {
  const auto cfg = forced_config();
  for (auto s : kAllScenarios)
    for (std::size_t i = 0; i < 5; ++i) {
      const auto a = run_trial(s, i, cfg, 77);
      const auto b = run_trial(s, i, cfg, 77);
      EXPECT_EQ(report::to_json(a).dump(), report::to_json(b).dump());
      EXPECT_TRUE(a.key_complete);
      EXPECT_EQ(a.timeline.front(), Phase::P1_CallMonitor);
      EXPECT_EQ(a.timeline.back(), Phase::Done);
      if (a.succeeded) {
        EXPECT_TRUE(a.launched && !a.noticed && a.command_recognized);
      }
      EXPECT_GE(a.command_index, 0);
      EXPECT_GT(a.ledger.mah[2], 0.0);
    }
}

TEST(Trial, QuietRoadNeverSucceeds) {
  const auto r = simulate(forced_config(), {Scenario::QuietRoad}, 20, 5, fixtures::jobs());
  EXPECT_EQ(r.scenarios[0].succeeded, 0);
  EXPECT_EQ(r.scenarios[0].launched, 20);
}

TEST(Trial, RestaurantSuccessRate) {
  const auto r = simulate(forced_config(), {Scenario::Restaurant}, 1000, 6, fixtures::jobs());
  EXPECT_NEAR(r.scenarios[0].success_rate(), 0.95, 0.03);
}

TEST(Trial, SourceCheckBlocksEverything) {
  auto cfg = forced_config();
  cfg.defense = Defense::SourceCheck;
  const auto r = simulate(cfg, std::vector<Scenario>(kAllScenarios.begin(), kAllScenarios.end()), 50, 7, fixtures::jobs());
  for (const auto& s : r.scenarios) {
    EXPECT_EQ(s.succeeded, 0);
    EXPECT_EQ(s.blocked, s.launched);
  }
}

TEST(Trial, CaptureBudgetCanRunOut) {
  auto cfg = forced_config();
  cfg.capture_mode = keyword::CaptureMode::SyllableBased;
  cfg.max_capture_hours = 0.01;
  const auto rec = run_trial(Scenario::Car, 0, cfg, 1);
  EXPECT_FALSE(rec.key_complete);
  EXPECT_FALSE(rec.launched);
  EXPECT_EQ(rec.timeline, std::vector<Phase>{Phase::P1_CallMonitor});
}

TEST(Trial, NotReadyConfigsRejected) {
  TrialConfig cfg;
  cfg.commands = {"x"};
  EXPECT_THROW(run_trial(Scenario::Car, 0, cfg, 1), ConfigError);
  cfg = forced_config();
  cfg.commands.clear();
  EXPECT_THROW(run_trial(Scenario::Car, 0, cfg, 1), ConfigError);
  cfg = forced_config();
  cfg.protocol = Protocol::Triggered;
  EXPECT_THROW(run_trial(Scenario::Car, 0, cfg, 1), ConfigError);
}

TEST(Simulate, JobsInvariantAndReportConsistent) {
  auto cfg = forced_config();
  const auto& models = fixtures::quick_models();
  for (auto protocol : {Protocol::Forced, Protocol::Triggered}) {
    cfg.protocol = protocol;
    cfg.motion_model = &models.motion;
    cfg.opportunity_model = &models.opportunity;
    const std::vector<Scenario> all(kAllScenarios.begin(), kAllScenarios.end());
    const auto one = simulate(cfg, all, 30, 9, 1);
    const auto many = simulate(cfg, all, 30, 9, 8);
    EXPECT_EQ(report::to_json(one).dump(), report::to_json(many).dump());
    EXPECT_EQ(report::trials_csv(one), report::trials_csv(many));
    double mah = 0.0;
    for (const auto& s : one.scenarios) {
      long succeeded = 0, launched = 0;
      for (const auto& t : one.trials)
        if (t.scenario == s.scenario) {
          succeeded += t.succeeded;
          launched += t.launched;
        }
      EXPECT_EQ(s.succeeded, succeeded);
      EXPECT_EQ(s.launched, launched);
      EXPECT_EQ(s.trials, 30);
      if (launched) {
        EXPECT_DOUBLE_EQ(s.success_rate(), static_cast<double>(succeeded) / static_cast<double>(launched));
      }
    }
    for (const auto& t : one.trials) mah += t.ledger.total_mah();
    EXPECT_NEAR(one.ledger.total_mah(), mah, 1e-9);
  }
}

TEST(Simulate, GatingLowersP3PowerInQuietScenes) {
  auto cfg = forced_config();
  const auto& models = fixtures::quick_models();
  cfg.protocol = Protocol::Triggered;
  cfg.motion_model = &models.motion;
  cfg.opportunity_model = &models.opportunity;
  cfg.max_windows = 4;
  const auto plain = simulate(cfg, {Scenario::QuietRoad}, 10, 3, fixtures::jobs());
  cfg.trigger.gating = true;
  const auto gated = simulate(cfg, {Scenario::QuietRoad}, 10, 3, fixtures::jobs());
  EXPECT_NEAR(plain.ledger.mah[2] / plain.ledger.minutes[2], 0.8, 1e-12);
  EXPECT_NEAR(gated.ledger.mah[2] / gated.ledger.minutes[2], 0.4, 1e-12);
}
