#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vasim/config.hpp"
#include "vasim/dsp.hpp"
#include "vasim/error.hpp"
#include "vasim/forest.hpp"
#include "vasim/lifecycle.hpp"
#include "vasim/pipeline.hpp"
#include "vasim/report.hpp"
#include "vasim/scenegen.hpp"
#include "vasim/trace.hpp"

namespace vasim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitThreshold = 3;

// Harmless commands shipped with the simulator; data/commands.txt holds the same list.
inline std::vector<std::string> default_commands() {
  return {"what time is it",
          "what is the weather today",
          "set a timer for five minutes",
          "tell me a joke",
          "how tall is mount everest",
          "what is twenty times seven",
          "play some music",
          "turn on the flashlight",
          "what day is it tomorrow",
          "how do you say thank you in french",
          "set an alarm for seven am",
          "what is on my calendar today",
          "remind me to water the plants",
          "how far away is the moon",
          "open the calculator",
          "what is the capital of australia",
          "show me pictures of cats",
          "flip a coin",
          "what song is this",
          "good night"};
}

// Every flag of every subcommand lands here.
struct Options {
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string params_path, policy_path, lexicon_path, commands_path, notice_path, models_dir;
  double window_seconds = 180.0;

  // generate
  std::string scenario = "a";
  double minutes = 3.0;
  std::string out;
  std::string placement = "pocket";
  bool screen = false, bluetooth = false, wired = false;
  std::string dataset_dir;
  int dataset_trials = 200;

  // train
  std::string data_dir;
  int folds = 20;
  std::string out_dir = "models";
  int trees = 200;
  int depth = 10;
  int motion_windows = 200;
  std::optional<double> min_f1;

  // calibrate
  double slope = 8.0;
  double base_margin = 0.0;
  double tolerance = 0.05;

  // simulate
  std::string scenarios = "abcdef";
  std::string protocol = "forced";
  double threshold = 0.6;
  double sensing_rate = 50.0;
  bool gating = false;
  double gate_db = 50.0;
  std::string defense = "none";
  std::string capture = "word";
  std::string device = "galaxy-s9";
  int max_windows = 20;
  int trials = 1000;
  int calibration_trials = 1000;
  double command_recognition = 0.95;
  std::string csv_path, summary_csv_path;
  bool check = false;

  // report / filter-response
  std::string in_path, bars_path, metrics_path, features_dir;
  bool filter_response = false;
  int order = 4;
  double cutoff = 5.0;
  double rate = 50.0;
  int points = 101;
};

struct Context {
  Options opt;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
};

inline std::uint64_t need_seed(const Options& o) {
  if (!o.seed) throw ConfigError("--seed is required");
  return *o.seed;
}

inline scenegen::ScenarioTable params_of(const Options& o) {
  return o.params_path.empty() ? scenegen::default_scenario_table() : config::load_params(o.params_path);
}
inline trigger::VolumePolicy policy_of(const Options& o) {
  return o.policy_path.empty() ? trigger::default_policy() : config::load_policy(o.policy_path);
}
inline keyword::Lexicon lexicon_of(const Options& o) {
  return o.lexicon_path.empty() ? keyword::default_lexicon() : config::load_lexicon(o.lexicon_path);
}
inline std::vector<std::string> commands_of(const Options& o) {
  return o.commands_path.empty() ? default_commands() : config::load_commands(o.commands_path);
}

inline Scenario scenario_of(const std::string& s) {
  const auto sc = parse_scenario(s);
  if (!sc) throw ConfigError("unknown scenario '" + s + "'");
  return *sc;
}

inline std::vector<Scenario> scenario_list(const std::string& s) {
  std::vector<Scenario> out;
  for (char c : s) out.push_back(scenario_of(std::string(1, c)));
  if (out.empty()) throw ConfigError("--scenarios is empty");
  return out;
}

inline lifecycle::NoticeModel calibrated_notice(const Options& o, const scenegen::ScenarioTable& table,
                                                const trigger::VolumePolicy& policy,
                                                const lifecycle::PlaybackConfig& playback, std::uint64_t seed,
                                                int trials) {
  lifecycle::NoticeModel m;
  m.slope = o.slope;
  m.base_margin = o.base_margin;
  lifecycle::CalibrationConfig cc;
  cc.trials = trials;
  cc.window_seconds = o.window_seconds;
  cc.tolerance = o.tolerance;
  return lifecycle::calibrate_notice(m, lifecycle::kObservedNoticeRate, table, policy, playback, cc, seed, o.jobs);
}

inline lifecycle::NoticeModel notice_of(const Options& o, const scenegen::ScenarioTable& table,
                                        const trigger::VolumePolicy& policy, const lifecycle::PlaybackConfig& playback,
                                        std::uint64_t seed) {
  if (!o.notice_path.empty()) return config::load_notice_model(o.notice_path);
  return calibrated_notice(o, table, policy, playback, derive_seed(seed, {stream::kCalibrate}), o.calibration_trials);
}

inline std::string models_path(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}

// ---------------------------------------------------------------------------

inline int cmd_generate(Context& ctx) {
  const auto& o = ctx.opt;
  const auto seed = need_seed(o);
  const auto table = params_of(o);
  if (!o.dataset_dir.empty()) {
    const auto policy = policy_of(o);
    const lifecycle::PlaybackConfig playback{1.5, 3.0, o.command_recognition};
    const auto notice = notice_of(o, table, policy, playback, seed);
    const auto ds = pipeline::build_dataset(table, policy, notice, playback, o.dataset_trials, o.window_seconds, seed, o.jobs);
    config::save_json(models_path(o.dataset_dir, "manifest.json"), config::to_json(ds, seed));
    long positive = 0;
    for (const auto& w : ds.items) positive += w.label == scenegen::InvasionLabel::Successful;
    *ctx.out << "wrote " << ds.items.size() << " labeled windows (" << positive << " successful) to " << o.dataset_dir
             << "\n";
    return kExitOk;
  }
  if (o.out.empty()) throw ConfigError("generate needs --out (or --dataset)");
  if (!(o.minutes > 0)) throw ConfigError("--minutes must be positive");
  PhoneState phone;
  phone.screen_interactive = o.screen;
  phone.bluetooth_audio = o.bluetooth;
  phone.wired_headphone = o.wired;
  if (o.placement == "pocket") phone.placement = Placement::Pocket;
  else if (o.placement == "hand") phone.placement = Placement::InHand;
  else throw ConfigError("--placement must be pocket or hand");
  const auto s = scenario_of(o.scenario);
  const auto trace = scenegen::generate_trace(s, o.minutes * 60.0, phone, table[index_of(s)],
                                              derive_seed(seed, {stream::kTrace, index_of(s)}));
  save_trace(trace, o.out);
  *ctx.out << "wrote " << o.out << "\n";
  return kExitOk;
}

inline int cmd_train(Context& ctx) {
  const auto& o = ctx.opt;
  const auto seed = need_seed(o);
  if (o.data_dir.empty()) throw ConfigError("train needs --data");
  const auto ds = config::dataset_from_json(config::load_json(models_path(o.data_dir, "manifest.json")));
  pipeline::TrainConfig tc;
  tc.folds = o.folds;
  tc.motion_per_class = o.motion_windows;
  tc.opportunity_forest.n_estimators = o.trees;
  tc.opportunity_forest.max_depth = o.depth;
  forest::validate(tc.opportunity_forest);
  const auto r = pipeline::train_models(ds, tc, seed, o.jobs);
  config::save_json(models_path(o.out_dir, "motion.forest.json"), forest::to_json(r.motion));
  config::save_json(models_path(o.out_dir, "opportunity.forest.json"), forest::to_json(r.opportunity));
  auto metrics = report::to_json(r.cv);
  metrics["folds"] = o.folds;
  metrics["seed"] = seed;
  metrics["samples"] = r.opportunity_set.size();
  if (r.opportunity.oob_accuracy) metrics["oob_accuracy"] = *r.opportunity.oob_accuracy;
  config::save_json(models_path(o.out_dir, "metrics.json"), metrics);
  config::write_text(models_path(o.out_dir, "features.csv"), pipeline::features_csv(r.opportunity_set));
  *ctx.out << report::metrics_table(metrics);
  if (!r.cv.warning.empty()) *ctx.err << "warning: " << r.cv.warning << "\n";
  if (o.min_f1 && r.cv.macro_f1 < *o.min_f1) {
    *ctx.err << "macro F1 " << r.cv.macro_f1 << " below --min-f1 " << *o.min_f1 << "\n";
    return kExitThreshold;
  }
  return kExitOk;
}

inline int cmd_calibrate(Context& ctx) {
  const auto& o = ctx.opt;
  const auto seed = need_seed(o);
  const lifecycle::PlaybackConfig playback{1.5, 3.0, o.command_recognition};
  const auto m = calibrated_notice(o, params_of(o), policy_of(o), playback, seed, o.trials);
  const auto path = o.out.empty() ? std::string("notice_model.json") : o.out;
  config::save_json(path, config::to_json(m));
  for (auto s : kAllScenarios)
    *ctx.out << scenario_tag(s) << ": offset " << report::fmt("%.4f", m.scenario_offset[index_of(s)]) << " dB, residual "
             << report::fmt("%+.4f", m.residual[index_of(s)]) << "\n";
  *ctx.out << "wrote " << path << "\n";
  return kExitOk;
}

// Success-rate bands from the field study, as [lo, hi].
inline std::array<std::pair<double, double>, 6> observed_bands() {
  return {{{0.0, 0.05}, {0.85, 0.95}, {0.265, 0.385}, {0.80, 0.90}, {0.0, 0.05}, {0.92, 0.98}}};
}

inline lifecycle::TrialConfig trial_config(const Options& o, std::uint64_t seed, forest::ForestModel* motion,
                                           forest::ForestModel* opportunity) {
  lifecycle::TrialConfig cfg;
  cfg.params = params_of(o);
  cfg.policy = policy_of(o);
  cfg.lexicon = lexicon_of(o);
  cfg.commands = commands_of(o);
  cfg.playback.command_recognition = o.command_recognition;
  cfg.window_seconds = o.window_seconds;
  cfg.max_windows = o.max_windows;
  cfg.sensing_rate_hz = o.sensing_rate;
  cfg.trigger.threshold = o.threshold;
  cfg.trigger.gating = o.gating;
  cfg.trigger.gate_threshold_db = o.gate_db;
  if (o.protocol == "forced") cfg.protocol = lifecycle::Protocol::Forced;
  else if (o.protocol == "triggered") cfg.protocol = lifecycle::Protocol::Triggered;
  else throw ConfigError("--protocol must be forced or triggered");
  if (o.capture == "word") cfg.capture_mode = keyword::CaptureMode::WordBased;
  else if (o.capture == "syllable") cfg.capture_mode = keyword::CaptureMode::SyllableBased;
  else throw ConfigError("--capture must be word or syllable");
  const auto d = lifecycle::parse_defense(o.defense);
  if (!d) throw ConfigError("unknown --defense '" + o.defense + "'");
  cfg.defense = *d;
  if (o.device == "galaxy-s9") cfg.ledger.device = lifecycle::galaxy_s9_profile();
  else if (o.device == "pixel-2") cfg.ledger.device = lifecycle::pixel2_profile();
  else throw ConfigError("--device must be galaxy-s9 or pixel-2");
  if (cfg.protocol == lifecycle::Protocol::Triggered) {
    if (o.models_dir.empty()) throw ConfigError("triggered protocol needs --models");
    *motion = forest::model_from_json(config::load_json(models_path(o.models_dir, "motion.forest.json")));
    *opportunity = forest::model_from_json(config::load_json(models_path(o.models_dir, "opportunity.forest.json")));
    cfg.motion_model = motion;
    cfg.opportunity_model = opportunity;
  }
  cfg.notice = notice_of(o, cfg.params, cfg.policy, cfg.playback, seed);
  return cfg;
}

inline int cmd_simulate(Context& ctx) {
  const auto& o = ctx.opt;
  const auto seed = need_seed(o);
  forest::ForestModel motion, opportunity;
  const auto cfg = trial_config(o, seed, &motion, &opportunity);
  const auto scenarios = scenario_list(o.scenarios);
  const auto rep = lifecycle::simulate(cfg, scenarios, o.trials, seed, o.jobs);
  const auto j = report::to_json(rep);
  config::save_json(o.out.empty() ? std::string("report.json") : o.out, j);
  if (!o.csv_path.empty()) config::write_text(o.csv_path, report::trials_csv(rep));
  if (!o.summary_csv_path.empty()) config::write_text(o.summary_csv_path, report::summary_csv(rep));
  *ctx.out << report::summary_table(j);
  if (o.check) {
    const auto bands = observed_bands();
    bool ok = true;
    for (const auto& s : rep.scenarios) {
      const auto [lo, hi] = bands[index_of(s.scenario)];
      if (s.success_rate() < lo || s.success_rate() > hi) {
        *ctx.err << "scenario " << scenario_tag(s.scenario) << ": success rate " << s.success_rate() << " outside ["
                 << lo << ", " << hi << "]\n";
        ok = false;
      }
    }
    if (!ok) return kExitThreshold;
  }
  return kExitOk;
}

inline int cmd_report(Context& ctx) {
  const auto& o = ctx.opt;
  bool did = false;
  if (o.filter_response) {
    const auto c = dsp::butterworth_lowpass(o.order, o.cutoff, o.rate);
    const auto csv = report::filter_response_csv(c, o.points);
    if (o.out.empty()) *ctx.out << csv;
    else config::write_text(o.out, csv);
    did = true;
  }
  if (!o.features_dir.empty()) {
    if (o.models_dir.empty()) throw ConfigError("report --features needs --models for the motion model");
    const auto ds = config::dataset_from_json(config::load_json(models_path(o.features_dir, "manifest.json")));
    const auto motion = forest::model_from_json(config::load_json(models_path(o.models_dir, "motion.forest.json")));
    const auto csv = pipeline::features_csv(pipeline::opportunity_training_set(ds, motion, o.jobs));
    if (o.out.empty()) *ctx.out << csv;
    else config::write_text(o.out, csv);
    did = true;
  }
  if (!o.metrics_path.empty()) {
    *ctx.out << report::metrics_table(config::load_json(o.metrics_path));
    did = true;
  }
  if (!o.in_path.empty()) {
    const auto j = config::load_json(o.in_path);
    if (j.value("format", std::string()) != "vasim-report") throw ConfigError(o.in_path + " is not a report");
    *ctx.out << report::summary_table(j);
    if (!o.bars_path.empty()) config::write_text(o.bars_path, report::success_bars_csv(j));
    did = true;
  }
  if (!did) throw ConfigError("report needs --in, --metrics, --features or --filter-response");
  return kExitOk;
}

inline int cmd_filter_response(Context& ctx) {
  ctx.opt.filter_response = true;
  return cmd_report(ctx);
}

// ---------------------------------------------------------------------------

inline void add_seed(CLI::App* s, Options& o) {
  s->add_option("--seed", o.seed, "Base seed for all randomness (required)")->required();
}
inline void add_jobs(CLI::App* s, Options& o) {
  s->add_option("--jobs", o.jobs, "Worker threads; results do not depend on it")->check(CLI::Range(1u, 256u));
}
inline void add_scene_files(CLI::App* s, Options& o) {
  s->add_option("--params", o.params_path, "Scenario parameter table (params.json)")->check(CLI::ExistingFile);
  s->add_option("--policy", o.policy_path, "Volume policy (policy.json)")->check(CLI::ExistingFile);
}

inline std::unique_ptr<CLI::App> build_app(Context& ctx) {
  auto app = std::make_unique<CLI::App>("Voice-assistant attack lifecycle simulator", "vasim");
  app->require_subcommand(1);
  auto& o = ctx.opt;

  auto* gen = app->add_subcommand("generate", "Write a synthetic sensor trace, or a labeled dataset manifest");
  add_seed(gen, o);
  add_jobs(gen, o);
  add_scene_files(gen, o);
  gen->add_option("--scenario", o.scenario, "Scenario tag a..f or name");
  gen->add_option("--minutes", o.minutes, "Trace length in minutes");
  gen->add_option("--out", o.out, "Trace CSV output path");
  gen->add_option("--placement", o.placement, "pocket or hand");
  gen->add_flag("--screen", o.screen, "Screen interactive");
  gen->add_flag("--bluetooth", o.bluetooth, "Bluetooth audio connected");
  gen->add_flag("--wired", o.wired, "Wired headphones plugged in");
  gen->add_option("--dataset", o.dataset_dir, "Write a labeled dataset manifest into this directory instead");
  gen->add_option("--trials", o.dataset_trials, "Dataset windows per scenario");
  gen->add_option("--window", o.window_seconds, "Window length in seconds");
  gen->add_option("--notice-model", o.notice_path, "Calibrated notice model for labels (default: calibrate now)")
      ->check(CLI::ExistingFile);
  gen->add_option("--calibration-trials", o.calibration_trials, "Trials per scenario when calibrating inline");
  gen->add_option("--command-recognition", o.command_recognition, "Per-command recognition probability");

  auto* train = app->add_subcommand("train", "Train motion and opportunity forests, with k-fold metrics");
  add_seed(train, o);
  add_jobs(train, o);
  train->add_option("--data", o.data_dir, "Dataset directory holding manifest.json")->required();
  train->add_option("--k", o.folds, "Cross-validation folds");
  train->add_option("--out-dir", o.out_dir, "Directory for model, metrics and feature files");
  train->add_option("--trees", o.trees, "Opportunity forest size");
  train->add_option("--depth", o.depth, "Opportunity forest maximum depth");
  train->add_option("--motion-windows", o.motion_windows, "Motion training windows per class");
  train->add_option("--min-f1", o.min_f1, "Exit 3 when cross-validated macro F1 falls below this");

  auto* cal = app->add_subcommand("calibrate", "Fit the per-scenario notice offsets");
  add_seed(cal, o);
  add_jobs(cal, o);
  add_scene_files(cal, o);
  cal->add_option("--trials", o.trials, "Trials per scenario");
  cal->add_option("--window", o.window_seconds, "Window length in seconds");
  cal->add_option("--slope", o.slope, "Logistic slope per dB");
  cal->add_option("--base-margin", o.base_margin, "Base margin in dB");
  cal->add_option("--tolerance", o.tolerance, "Largest accepted residual");
  cal->add_option("--command-recognition", o.command_recognition, "Per-command recognition probability");
  cal->add_option("--out", o.out, "Output path (default notice_model.json)");

  auto* sim = app->add_subcommand("simulate", "Run attack trials and write a report");
  add_seed(sim, o);
  add_jobs(sim, o);
  add_scene_files(sim, o);
  sim->add_option("--lexicon", o.lexicon_path, "Lexicon (lexicon.json)")->check(CLI::ExistingFile);
  sim->add_option("--commands", o.commands_path, "Command list (commands.txt)")->check(CLI::ExistingFile);
  sim->add_option("--notice-model", o.notice_path, "Calibrated notice model (default: calibrate now)")
      ->check(CLI::ExistingFile);
  sim->add_option("--models", o.models_dir, "Directory with motion/opportunity forests");
  sim->add_option("--trials", o.trials, "Trials per scenario");
  sim->add_option("--scenarios", o.scenarios, "Scenario tags to run, e.g. abcdef");
  sim->add_option("--protocol", o.protocol, "forced (play after the first window) or triggered");
  sim->add_option("--threshold", o.threshold, "Opportunity probability threshold; 0 disables it");
  sim->add_option("--sensing-rate", o.sensing_rate, "Sensor rate in Hz for the energy ledger");
  sim->add_flag("--gating", o.gating, "Enable noise-gated standby");
  sim->add_option("--gate-db", o.gate_db, "Standby gate level in dB");
  sim->add_option("--defense", o.defense, "none, source-check, continuous-auth or magnetic-detect");
  sim->add_option("--capture", o.capture, "Keyword capture: word or syllable");
  sim->add_option("--device", o.device, "Ledger device profile: galaxy-s9 or pixel-2");
  sim->add_option("--window", o.window_seconds, "Window length in seconds");
  sim->add_option("--max-windows", o.max_windows, "Windows watched before giving up");
  sim->add_option("--calibration-trials", o.calibration_trials, "Trials per scenario when calibrating inline");
  sim->add_option("--slope", o.slope, "Logistic slope when calibrating inline");
  sim->add_option("--base-margin", o.base_margin, "Base margin when calibrating inline");
  sim->add_option("--tolerance", o.tolerance, "Largest accepted calibration residual");
  sim->add_option("--command-recognition", o.command_recognition, "Per-command recognition probability");
  sim->add_option("--out", o.out, "Report JSON path (default report.json)");
  sim->add_option("--csv", o.csv_path, "Per-trial CSV path");
  sim->add_option("--summary-csv", o.summary_csv_path, "Per-scenario CSV path");
  sim->add_flag("--check", o.check, "Exit 3 when a success rate misses its field-study band");

  auto* rep = app->add_subcommand("report", "Print tables and write plot-ready CSV");
  add_jobs(rep, o);
  rep->add_option("--in", o.in_path, "Report JSON from simulate")->check(CLI::ExistingFile);
  rep->add_option("--bars", o.bars_path, "Write success-rate bars as x,y CSV");
  rep->add_option("--metrics", o.metrics_path, "Metrics JSON from train")->check(CLI::ExistingFile);
  rep->add_option("--features", o.features_dir, "Dataset directory to export feature rows from");
  rep->add_option("--models", o.models_dir, "Directory with motion.forest.json, for --features");
  rep->add_flag("--filter-response", o.filter_response, "Write |H(f)| of the Butterworth design as x,y CSV");
  rep->add_option("--order", o.order, "Filter order (2, 4, 6 or 8)");
  rep->add_option("--cutoff", o.cutoff, "Cutoff in Hz");
  rep->add_option("--rate", o.rate, "Sample rate in Hz");
  rep->add_option("--points", o.points, "Frequency points from 0 to Nyquist");
  rep->add_option("--out", o.out, "Output path for CSV (default stdout)");

  auto* fr = app->add_subcommand("filter-response", "Write |H(f)| of the Butterworth design as x,y CSV");
  fr->add_option("--order", o.order, "Filter order (2, 4, 6 or 8)");
  fr->add_option("--cutoff", o.cutoff, "Cutoff in Hz");
  fr->add_option("--rate", o.rate, "Sample rate in Hz");
  fr->add_option("--points", o.points, "Frequency points from 0 to Nyquist");
  fr->add_option("--out", o.out, "Output path (default stdout)");
  return app;
}

inline int dispatch(Context& ctx, const CLI::App& app) {
  if (app.got_subcommand("generate")) return cmd_generate(ctx);
  if (app.got_subcommand("train")) return cmd_train(ctx);
  if (app.got_subcommand("calibrate")) return cmd_calibrate(ctx);
  if (app.got_subcommand("simulate")) return cmd_simulate(ctx);
  if (app.got_subcommand("report")) return cmd_report(ctx);
  if (app.got_subcommand("filter-response")) return cmd_filter_response(ctx);
  throw ConfigError("no subcommand");
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  auto app = build_app(ctx);
  std::vector<const char*> argv{"vasim"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app->parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app->exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app->exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app->exit(e, out, err);
    return kExitConfig;
  }
  try {
    return dispatch(ctx, *app);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
  } catch (const RangeError& e) {
    err << "range error: " << e.what() << "\n";
  }
  return kExitConfig;
}

}  // namespace vasim::cli
