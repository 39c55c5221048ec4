#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "vasim/features.hpp"
#include "vasim/pipeline.hpp"
#include "vasim/scenegen.hpp"

using namespace vasim;
using namespace vasim::features;

namespace {

// Two constant clusters: zeros are stationary, ones are motion.
forest::ForestModel toy_motion_model() {
  forest::TrainingSet ts;
  ts.class_order = kMotionClasses;
  for (int i = 0; i < 20; ++i) {
    ts.rows.push_back(std::vector<double>(kMotionFeatureCount, 0.0));
    ts.labels.push_back(0);
    ts.rows.push_back(std::vector<double>(kMotionFeatureCount, 1.0));
    ts.labels.push_back(1);
  }
  forest::ForestParams p;
  p.n_estimators = 15;
  return forest::train(ts, p, 8);
}

Window zero_window(double seconds) {
  SensorTrace t;
  t.scenario = Scenario::Car;
  t.duration = seconds;
  for (int k = 0; k < static_cast<int>(seconds * 50); ++k) t.accel.push_back({k / 50.0, 0.f, 0.f, 0.f});
  for (int k = 0; k < static_cast<int>(seconds * 5); ++k) {
    t.noise.push_back({k / 5.0, 50.f});
    t.light.push_back({k / 5.0, 0.f});
  }
  return cut_window(t, 0.0, seconds);
}

}  // namespace

TEST(MovementIntensity, PublishedRowsAndBoundaries) {
  EXPECT_EQ(movement_intensity(0.70), MotionCategory::DefiniteMotion);
  EXPECT_EQ(movement_intensity(0.56), MotionCategory::RelativeMotionStationary);
  EXPECT_EQ(movement_intensity(0.44), MotionCategory::RelativeMotionStationary);
  EXPECT_EQ(movement_intensity(0.45), MotionCategory::RelativeMotionStationary);
  // The 0.85/0.15 row, read with the threshold rule: motion probability 0.15.
  EXPECT_EQ(movement_intensity(0.15), MotionCategory::DefiniteStationary);
  EXPECT_EQ(movement_intensity(0.4), MotionCategory::RelativeMotionStationary);
  EXPECT_EQ(movement_intensity(0.6), MotionCategory::RelativeMotionStationary);
  EXPECT_EQ(movement_intensity(0.5), MotionCategory::RelativeMotionStationary);
  EXPECT_EQ(movement_intensity(std::nextafter(0.6, 1.0)), MotionCategory::DefiniteMotion);
  EXPECT_EQ(movement_intensity(std::nextafter(0.4, 0.0)), MotionCategory::DefiniteStationary);
  EXPECT_THROW(movement_intensity(-0.01), RangeError);
  EXPECT_THROW(movement_intensity(1.01), RangeError);
  EXPECT_THROW(movement_intensity(std::nan("")), RangeError);
}

TEST(OneHot, PublishedTable) {
  EXPECT_EQ(one_hot(MotionCategory::DefiniteMotion), (OneHot{0, 1}));
  EXPECT_EQ(one_hot(MotionCategory::DefiniteStationary), (OneHot{1, 0}));
  EXPECT_EQ(one_hot(MotionCategory::RelativeMotionStationary), (OneHot{1, 1}));
}

TEST(OneHot, ImageOverProbabilitySweep) {
  std::set<OneHot> image;
  MotionCategory prev = movement_intensity(0.0);
  int changes = 0;
  for (int i = 0; i <= 10000; ++i) {
    const auto c = movement_intensity(i / 10000.0);
    image.insert(one_hot(c));
    if (c != prev) ++changes;
    prev = c;
  }
  EXPECT_EQ(image, (std::set<OneHot>{{0, 1}, {1, 0}, {1, 1}}));
  EXPECT_EQ(changes, 2);  // a step function with two steps
}

TEST(MotionFeatures, DegenerateInputs) {
  const std::vector<double> zeros(500, 0.0), ones(500, 1.0);
  for (double v : motion_features(zeros, zeros, zeros)) EXPECT_EQ(v, 0.0);
  const auto f = motion_features(ones, zeros, zeros);
  EXPECT_DOUBLE_EQ(f[0], 1.0);
  EXPECT_DOUBLE_EQ(f[1], 0.0);
  EXPECT_DOUBLE_EQ(f[2], 0.0);
  EXPECT_DOUBLE_EQ(f[3], 1.0);
  const std::vector<double> short_x(99, 0.0);
  EXPECT_THROW(motion_features(short_x, short_x, short_x), RangeError);
  EXPECT_THROW(motion_features(zeros, ones, short_x), RangeError);
}

TEST(MotionFeatures, MatchesHandComputedSubWindows) {
  // Two 2 s sub-windows: a ramp and a constant.
  std::vector<double> x(200), zero(200, 0.0);
  for (std::size_t i = 0; i < 100; ++i) x[i] = static_cast<double>(i) * 0.01;
  for (std::size_t i = 100; i < 200; ++i) x[i] = 2.0;
  const auto f = motion_features(x, zero, zero);
  const double ramp_mean = 0.495, ramp_sd = std::sqrt((100.0 * 100.0 - 1.0) / 12.0) * 0.01, ramp_jerk = 0.01 * 50.0;
  EXPECT_NEAR(f[0], 0.5 * (ramp_mean + 2.0), 1e-12);
  EXPECT_NEAR(f[1], 0.5 * ramp_sd, 1e-12);
  EXPECT_NEAR(f[2], 0.5 * ramp_jerk, 1e-12);
  EXPECT_NEAR(f[3], 2.0, 1e-12);
  EXPECT_NEAR(f[4], ramp_sd, 1e-12);
  EXPECT_NEAR(f[5], ramp_jerk, 1e-12);
}

TEST(MotionFeatures, WalkingExceedsSeated) {
  const auto table = scenegen::default_scenario_table();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto walk = scenegen::generate_trace(Scenario::QuietRoad, 60.0, {}, table[0], seed);
    const auto sit = scenegen::generate_trace(Scenario::Car, 60.0, {}, table[4], seed);
    const auto fw = window_motion_features(cut_window(walk, 0, 60));
    const auto fs = window_motion_features(cut_window(sit, 0, 60));
    EXPECT_GT(fw[1], fs[1]);
  }
}

TEST(EnvFeatures, Definitions) {
  const std::vector<double> noise(20, 50.0), dark(20, 0.0);
  PhoneState phone;
  auto e = env_features(noise, dark, phone);
  EXPECT_EQ(e.noise_mean, 50.0);
  EXPECT_EQ(e.noise_max, 50.0);
  EXPECT_EQ(e.light_mean, 0.0);
  EXPECT_EQ(e.light_min, 0.0);
  EXPECT_EQ(e.audio_route_external, 0);
  phone.bluetooth_audio = true;
  EXPECT_EQ(env_features(noise, dark, phone).audio_route_external, 1);
  phone = {};
  phone.wired_headphone = true;
  phone.screen_interactive = true;
  e = env_features(noise, dark, phone);
  EXPECT_EQ(e.audio_route_external, 1);
  EXPECT_EQ(e.screen_interactive, 1);
  EXPECT_THROW(env_features(std::vector<double>{}, dark, phone), RangeError);
}

TEST(Assemble, ZeroAccelWindowIsStationary) {
  const auto model = toy_motion_model();
  const auto fv = assemble(zero_window(20.0), model, {});
  EXPECT_EQ(fv.movement_onehot, (OneHot{1, 0}));
  EXPECT_EQ(fv.env.noise_mean, 50.0);
  const auto v = fv.values();
  ASSERT_EQ(v.size(), kFeatureCount);
  EXPECT_EQ(v[0], 1.0);
  EXPECT_EQ(v[1], 0.0);
}

TEST(Assemble, RejectsWrongClassOrder) {
  auto model = toy_motion_model();
  std::swap(model.class_order[0], model.class_order[1]);
  EXPECT_THROW(assemble(zero_window(10.0), model, {}), ConfigError);
  EXPECT_THROW(assemble(zero_window(10.0), forest::ForestModel{}, {}), ConfigError);
}

TEST(Assemble, RestaurantNoiseMean) {
  const auto table = scenegen::default_scenario_table();
  const auto motion = pipeline::train_motion_model(table, 30, 60.0, pipeline::default_motion_forest(), 5);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto t = scenegen::generate_trace(Scenario::Restaurant, 180.0, {}, table[5], seed);
    const auto fv = assemble(cut_window(t, 0, 180), motion, {});
    EXPECT_NEAR(fv.env.noise_mean, 68.0, 2.0 * table[5].noise_std);
    EXPECT_EQ(fv.movement_onehot, (OneHot{1, 0}));
  }
}

TEST(Features, CsvHeaderNamesEightColumns) {
  EXPECT_EQ(feature_csv_header(),
            "move_bit0,move_bit1,noise_mean,noise_max,light_mean,light_min,screen_interactive,audio_external");
}
