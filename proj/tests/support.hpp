#pragma once

#include <thread>

#include "vasim/lifecycle.hpp"
#include "vasim/pipeline.hpp"

namespace vasim::fixtures {

inline unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

inline lifecycle::NoticeModel quick_notice(std::uint64_t seed, int trials = 300) {
  lifecycle::CalibrationConfig cc;
  cc.trials = trials;
  return lifecycle::calibrate_notice({}, lifecycle::kObservedNoticeRate, scenegen::default_scenario_table(),
                                     trigger::default_policy(), {}, cc, seed, jobs());
}

// Small but complete training run: motion model plus opportunity model.
inline const pipeline::TrainResult& quick_models() {
  static const pipeline::TrainResult result = [] {
    const auto notice = quick_notice(11);
    const auto ds = pipeline::build_dataset(scenegen::default_scenario_table(), trigger::default_policy(), notice, {},
                                            60, 180.0, 12, jobs());
    pipeline::TrainConfig cfg;
    cfg.motion_per_class = 60;
    cfg.opportunity_forest.n_estimators = 100;
    cfg.folds = 5;
    return pipeline::train_models(ds, cfg, 13, jobs());
  }();
  return result;
}

}  // namespace vasim::fixtures
