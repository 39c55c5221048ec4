#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vasim/error.hpp"
#include "vasim/features.hpp"
#include "vasim/forest.hpp"
#include "vasim/lifecycle.hpp"
#include "vasim/parallel.hpp"
#include "vasim/random.hpp"
#include "vasim/scenegen.hpp"
#include "vasim/trace.hpp"
#include "vasim/trigger.hpp"

// Glue between generator, labeler and the two forests.
namespace vasim::pipeline {

inline forest::ForestParams default_motion_forest() {
  forest::ForestParams p;
  p.n_estimators = 50;
  p.max_depth = 8;
  return p;
}

// Windows from walking scenarios are "motion", seated ones "stationary".
// Riding is left out: it is what the relative category exists for.
inline forest::TrainingSet motion_training_set(const scenegen::ScenarioTable& table, int per_class,
                                               double window_seconds, std::uint64_t seed, unsigned jobs = 1,
                                               const features::PreprocessConfig& pre = {}) {
  if (per_class < 1) throw ConfigError("motion training: per_class must be >= 1");
  std::vector<Scenario> moving, still;
  for (auto s : kAllScenarios) {
    const auto profile = table[index_of(s)].motion_profile;
    if (profile == scenegen::MotionProfile::Walking) moving.push_back(s);
    if (profile == scenegen::MotionProfile::Seated) still.push_back(s);
  }
  if (moving.empty() || still.empty()) throw ConfigError("motion training: need walking and seated scenarios");

  const auto n = static_cast<std::size_t>(per_class);
  forest::TrainingSet ts;
  ts.class_order = features::kMotionClasses;
  ts.rows.resize(2 * n);
  ts.labels.resize(2 * n);
  parallel_for(2 * n, jobs, [&](std::size_t i) {
    const std::size_t cls = i / n, k = i % n;
    const auto& pool = cls == 1 ? moving : still;
    const auto s = pool[k % pool.size()];
    const auto trace = scenegen::generate_trace(s, window_seconds, scenegen::trial_phone(k), table[index_of(s)],
                                                derive_seed(seed, {stream::kMotion, cls, k}));
    const auto mf = features::window_motion_features(cut_window(trace, 0.0, window_seconds), pre);
    ts.rows[i].assign(mf.begin(), mf.end());
    ts.labels[i] = static_cast<int>(cls);
  });
  return ts;
}

inline forest::ForestModel train_motion_model(const scenegen::ScenarioTable& table, int per_class,
                                              double window_seconds, const forest::ForestParams& params,
                                              std::uint64_t seed, unsigned jobs = 1,
                                              const features::PreprocessConfig& pre = {}) {
  const auto ts = motion_training_set(table, per_class, window_seconds, seed, jobs, pre);
  return forest::train(ts, params, derive_seed(seed, {stream::kMotion}), jobs);
}

inline scenegen::LabeledDataset build_dataset(const scenegen::ScenarioTable& table, const trigger::VolumePolicy& policy,
                                              const lifecycle::NoticeModel& notice,
                                              const lifecycle::PlaybackConfig& playback, int trials_per_scenario,
                                              double window_seconds, std::uint64_t seed, unsigned jobs = 1,
                                              const features::PreprocessConfig& pre = {}) {
  if (!notice.calibrated) throw ConfigError("dataset: notice model is not calibrated");
  std::vector<scenegen::DatasetSpec> plan;
  for (auto s : kAllScenarios) plan.push_back({s, trials_per_scenario, window_seconds});
  return scenegen::generate_dataset(plan, table, lifecycle::make_labeler(policy, notice, playback, pre), seed, jobs);
}

// One 8-value feature row per dataset item; label 1 = successful.
inline forest::TrainingSet opportunity_training_set(const scenegen::LabeledDataset& ds,
                                                    const forest::ForestModel& motion, unsigned jobs = 1,
                                                    const features::PreprocessConfig& pre = {}) {
  features::check_motion_model(motion);
  forest::TrainingSet ts;
  ts.class_order = features::kOpportunityClasses;
  ts.rows.resize(ds.items.size());
  ts.labels.resize(ds.items.size());
  parallel_for(ds.items.size(), jobs, [&](std::size_t i) {
    const auto& item = ds.items[i];
    const auto trace = scenegen::regenerate(item, ds.params);
    const auto fv = features::assemble(cut_window(trace, 0.0, item.window_seconds), motion, item.phone, pre);
    const auto v = fv.values();
    ts.rows[i].assign(v.begin(), v.end());
    ts.labels[i] = item.label == scenegen::InvasionLabel::Successful ? 1 : 0;
  });
  return ts;
}

inline std::string features_csv(const forest::TrainingSet& ts) {
  std::string out = features::feature_csv_header() + ",label\n";
  char buf[64];
  for (std::size_t i = 0; i < ts.size(); ++i) {
    for (double v : ts.rows[i]) {
      std::snprintf(buf, sizeof buf, "%.9g,", v);
      out += buf;
    }
    out += ts.class_order[static_cast<std::size_t>(ts.labels[i])];
    out += '\n';
  }
  return out;
}

struct TrainConfig {
  int motion_per_class = 200;
  forest::ForestParams motion_forest = default_motion_forest();
  forest::ForestParams opportunity_forest;
  int folds = 20;
  features::PreprocessConfig preprocess;
};

struct TrainResult {
  forest::ForestModel motion;
  forest::ForestModel opportunity;
  forest::TrainingSet opportunity_set;
  forest::EvalMetrics cv;
};

// Motion model first (its output feeds the opportunity features), then
// k-fold CV and a final fit of the opportunity model on all windows.
inline TrainResult train_models(const scenegen::LabeledDataset& ds, const TrainConfig& cfg, std::uint64_t seed,
                                unsigned jobs = 1) {
  if (ds.items.empty()) throw ConfigError("train: empty dataset");
  TrainResult r;
  r.motion = train_motion_model(ds.params, cfg.motion_per_class, ds.items.front().window_seconds, cfg.motion_forest,
                                derive_seed(seed, {stream::kMotion}), jobs, cfg.preprocess);
  r.opportunity_set = opportunity_training_set(ds, r.motion, jobs, cfg.preprocess);
  r.cv = forest::cross_validate(r.opportunity_set, cfg.opportunity_forest, cfg.folds,
                                derive_seed(seed, {stream::kFold}), jobs);
  r.opportunity = forest::train(r.opportunity_set, cfg.opportunity_forest, derive_seed(seed, {stream::kOpportunity}),
                                jobs);
  return r;
}

}  // namespace vasim::pipeline
