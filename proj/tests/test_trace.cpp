#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include "vasim/scenegen.hpp"
#include "vasim/trace.hpp"

using namespace vasim;

namespace {

SensorTrace tiny_trace() {
  SensorTrace t;
  t.scenario = Scenario::Restaurant;
  t.duration = 1.0;
  for (int k = 0; k <= 50; ++k) t.accel.push_back({k / 50.0, 0.1f * static_cast<float>(k), -0.5f, 0.25f});
  for (int k = 0; k <= 5; ++k) {
    t.noise.push_back({k / 5.0, 60.0f + static_cast<float>(k)});
    t.light.push_back({k / 5.0, 300.0f - static_cast<float>(k)});
  }
  return t;
}

std::string expect_parse_error(const std::string& text) {
  try {
    parse_trace(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no ParseError";
  return {};
}

const std::string kHeader = "# vasim-trace v1\nscenario=f,screen=0,bluetooth=0,wired=0,placement=pocket,duration=180\n";

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("vasim_test_trace_" + name);
}

}  // namespace

TEST(Scenario, SixTagsRoundTrip) {
  ASSERT_EQ(kAllScenarios.size(), 6u);
  for (auto s : kAllScenarios) {
    EXPECT_EQ(parse_scenario(std::string(1, scenario_tag(s))), s);
    EXPECT_EQ(parse_scenario(scenario_name(s)), s);
  }
  EXPECT_EQ(scenario_tag(Scenario::QuietRoad), 'a');
  EXPECT_EQ(scenario_tag(Scenario::Restaurant), 'f');
  EXPECT_FALSE(parse_scenario("g").has_value());
}

TEST(TraceFormat, RoundTripIsIdentity) {
  const auto t = tiny_trace();
  EXPECT_EQ(parse_trace(format_trace(t)), t);
}

TEST(TraceFormat, GeneratedTraceRoundTripsThroughFile) {
  PhoneState phone;
  phone.placement = Placement::InHand;
  phone.wired_headphone = true;
  const auto t = scenegen::generate_trace(Scenario::PublicTransport, 20.0, phone,
                                          scenegen::default_scenario_table()[3], 42);
  const auto path = temp_file("roundtrip.csv");
  save_trace(t, path.string());
  EXPECT_EQ(load_trace(path.string()), t);
  const auto first = format_trace(t);
  save_trace(t, path.string());
  EXPECT_EQ(format_trace(load_trace(path.string())), first);
  std::filesystem::remove(path);
}

TEST(TraceFormat, NineThousandAccelRowsGive180s) {
  std::string text = kHeader;
  char buf[96];
  for (int k = 0; k < 9000; ++k) {
    std::snprintf(buf, sizeof buf, "accel,%.9g,0,0,0\n", k / 50.0);
    text += buf;
  }
  for (int k = 0; k < 900; ++k) {
    std::snprintf(buf, sizeof buf, "noise,%.9g,50\nlight,%.9g,300\n", k / 5.0, k / 5.0);
    text += buf;
  }
  const auto t = parse_trace(text);
  EXPECT_EQ(t.scenario, Scenario::Restaurant);
  EXPECT_DOUBLE_EQ(t.duration, 180.0);
  EXPECT_EQ(t.accel.size(), 9000u);
}

TEST(TraceFormat, NonMonotonicNamesFileLine) {
  // Third data row sits on line 5 of the file.
  const auto msg = expect_parse_error(kHeader + "accel,0.00,0,0,0\naccel,0.02,0,0,0\naccel,0.02,0,0,0\n");
  EXPECT_NE(msg.find("non-monotonic at line 5"), std::string::npos) << msg;
}

TEST(TraceFormat, MalformedInputs) {
  EXPECT_NE(expect_parse_error("garbage\n").find("line 1"), std::string::npos);
  EXPECT_NE(expect_parse_error("# vasim-trace v1\nscenario=z,screen=0,bluetooth=0,wired=0,placement=pocket,duration=1\n")
                .find("unknown scenario tag"),
            std::string::npos);
  EXPECT_NE(expect_parse_error(kHeader + "accel,0.0,1,2\n").find("line 3"), std::string::npos);
  EXPECT_NE(expect_parse_error(kHeader + "accel,0.0,x,2,3\n").find("line 3"), std::string::npos);
  EXPECT_NE(expect_parse_error(kHeader + "gyro,0.0,1\n").find("unknown channel"), std::string::npos);
  EXPECT_NE(expect_parse_error(kHeader + "accel,0.0,0,0,0\nnoise,0.0,1\n").find("channel empty"), std::string::npos);
}

TEST(TraceFormat, SaveRejectsEmptyChannelAndBadPath) {
  auto t = tiny_trace();
  t.light.clear();
  try {
    format_trace(t);
    ADD_FAILURE();
  } catch (const RangeError& e) {
    EXPECT_NE(std::string(e.what()).find("channel empty"), std::string::npos);
  }
  EXPECT_THROW(save_trace(tiny_trace(), "/nonexistent-dir/x/y.csv"), IoError);
  EXPECT_THROW(load_trace("/nonexistent-dir/x/y.csv"), IoError);
}

TEST(Window, FullTraceCountsAndNearestSamples) {
  const auto t = scenegen::generate_trace(Scenario::Restaurant, 180.0, {}, scenegen::default_scenario_table()[5], 1);
  const auto w = cut_window(t, 0.0, 180.0, "f-1");
  EXPECT_EQ(w.ax.size(), 9000u);
  EXPECT_EQ(w.noise.size(), 9000u);
  EXPECT_EQ(w.light.size(), 9000u);
  EXPECT_EQ(w.trace_ref, "f-1");
  // 50 Hz index 1 is t=0.02 s, nearest 5 Hz sample is t=0.0.
  EXPECT_EQ(w.noise[1], static_cast<double>(t.noise[0].v));
  // t=0.1 is an exact tie between 0.0 and 0.2: the earlier sample wins.
  EXPECT_EQ(w.noise[5], static_cast<double>(t.noise[0].v));
  EXPECT_EQ(w.noise[6], static_cast<double>(t.noise[1].v));
}

TEST(Window, CountsEqualForRandomDurations) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> dur(2.0, 40.0);
  for (int rep = 0; rep < 25; ++rep) {
    const double d = std::round(dur(rng) * 5.0) / 5.0;
    const auto t = scenegen::generate_trace(Scenario::Car, d, {}, scenegen::default_scenario_table()[4], rng());
    const auto w = cut_window(t, 0.0, d);
    const auto n = static_cast<std::size_t>(std::llround(d * 50.0));
    EXPECT_EQ(w.ax.size(), n);
    EXPECT_EQ(w.ay.size(), n);
    EXPECT_EQ(w.az.size(), n);
    EXPECT_EQ(w.noise.size(), n);
    EXPECT_EQ(w.light.size(), n);
  }
}

TEST(Window, RangeErrors) {
  const auto t = tiny_trace();
  try {
    cut_window(t, 0.0, 0.0);
    ADD_FAILURE();
  } catch (const RangeError& e) {
    EXPECT_EQ(std::string(e.what()), "empty window");
  }
  EXPECT_THROW(cut_window(t, -0.1, 0.5), RangeError);
  EXPECT_THROW(cut_window(t, 0.6, 0.5), RangeError);
  EXPECT_NO_THROW(cut_window(t, 0.5, 0.5));
}
