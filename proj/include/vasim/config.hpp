#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vasim/error.hpp"
#include "vasim/keyword.hpp"
#include "vasim/lifecycle.hpp"
#include "vasim/scenegen.hpp"
#include "vasim/trace.hpp"
#include "vasim/trigger.hpp"

namespace vasim::config {

using nlohmann::json;

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

inline json load_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void save_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Missing or mistyped fields surface as ConfigError naming the file kind.
template <class F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

inline std::string tag_of(Scenario s) { return std::string(1, scenario_tag(s)); }

// ---------------------------------------------------------------------------
// params.json

inline scenegen::MotionProfile parse_profile(const std::string& s) {
  using scenegen::MotionProfile;
  for (auto p : {MotionProfile::Walking, MotionProfile::Riding, MotionProfile::Seated})
    if (scenegen::profile_name(p) == s) return p;
  throw ConfigError("params: unknown motion profile '" + s + "'");
}

inline json to_json(const scenegen::ScenarioParams& p) {
  return {{"noise_mean", p.noise_mean},
          {"noise_std", p.noise_std},
          {"light_mean", p.light_mean},
          {"light_std", p.light_std},
          {"motion_profile", scenegen::profile_name(p.motion_profile)},
          {"gait_freq", p.gait_freq},
          {"accel_amp", p.accel_amp},
          {"burst_rate", p.burst_rate},
          {"level_spread", p.level_spread},
          {"placeholder", p.placeholder}};
}

inline scenegen::ScenarioParams scenario_params_from_json(const json& j) {
  scenegen::ScenarioParams p;
  p.noise_mean = j.at("noise_mean").get<double>();
  p.noise_std = j.at("noise_std").get<double>();
  p.light_mean = j.at("light_mean").get<double>();
  p.light_std = j.at("light_std").get<double>();
  p.motion_profile = parse_profile(j.at("motion_profile").get<std::string>());
  p.gait_freq = j.at("gait_freq").get<double>();
  p.accel_amp = j.at("accel_amp").get<double>();
  p.burst_rate = j.at("burst_rate").get<double>();
  p.level_spread = j.value("level_spread", 0.0);
  p.placeholder = j.value("placeholder", false);
  scenegen::validate(p);
  return p;
}

inline json to_json(const scenegen::ScenarioTable& t) {
  json scenarios = json::object();
  for (auto s : kAllScenarios) {
    auto e = to_json(t[index_of(s)]);
    e["name"] = scenario_name(s);
    scenarios[tag_of(s)] = e;
  }
  return {{"format", "vasim-params"}, {"version", 1}, {"scenarios", scenarios}};
}

inline scenegen::ScenarioTable scenario_table_from_json(const json& j) {
  return guarded("params", [&] {
    scenegen::ScenarioTable t;
    const auto& sc = j.at("scenarios");
    for (auto s : kAllScenarios) {
      if (!sc.contains(tag_of(s))) throw ConfigError("params: scenario '" + tag_of(s) + "' missing");
      t[index_of(s)] = scenario_params_from_json(sc.at(tag_of(s)));
    }
    return t;
  });
}

inline scenegen::ScenarioTable load_params(const std::string& path) { return scenario_table_from_json(load_json(path)); }

// ---------------------------------------------------------------------------
// policy.json

inline json to_json(const trigger::VolumePolicy& p) {
  json anchors = json::array();
  for (const auto& a : p.anchors)
    anchors.push_back({{"ambient", a.ambient}, {"min_activation", a.min_activation}, {"min_command", a.min_command}});
  return {{"anchors", anchors}, {"margin_db", p.margin_db}, {"shout_ceiling_db", p.shout_ceiling_db}};
}

inline trigger::VolumePolicy policy_from_json(const json& j) {
  auto p = guarded("policy", [&] {
    trigger::VolumePolicy p;
    for (const auto& a : j.at("anchors"))
      p.anchors.push_back({a.at("ambient").get<double>(), a.at("min_activation").get<double>(),
                           a.at("min_command").get<double>()});
    p.margin_db = j.value("margin_db", 1.0);
    p.shout_ceiling_db = j.value("shout_ceiling_db", 80.0);
    return p;
  });
  trigger::validate(p);
  return p;
}

inline trigger::VolumePolicy load_policy(const std::string& path) { return policy_from_json(load_json(path)); }

// ---------------------------------------------------------------------------
// lexicon.json

inline json to_json(const keyword::Lexicon& lex) {
  return {{"keyword", lex.keyword}, {"entries", lex.entries}, {"word_weights", lex.word_weights}};
}

inline keyword::Lexicon lexicon_from_json(const json& j) {
  auto lex = guarded("lexicon", [&] {
    keyword::Lexicon lex;
    lex.keyword = j.at("keyword").get<std::vector<std::string>>();
    lex.entries = j.at("entries").get<std::map<std::string, std::vector<std::string>>>();
    lex.word_weights = j.value("word_weights", std::map<std::string, double>{});
    return lex;
  });
  keyword::validate(lex);
  return lex;
}

inline keyword::Lexicon load_lexicon(const std::string& path) { return lexicon_from_json(load_json(path)); }

// ---------------------------------------------------------------------------
// notice_model.json

inline json to_json(const lifecycle::NoticeModel& m) {
  json scenarios = json::object();
  for (auto s : kAllScenarios) {
    const auto i = index_of(s);
    scenarios[tag_of(s)] = {{"offset", m.scenario_offset[i]}, {"target", m.target[i]}, {"residual", m.residual[i]}};
  }
  return {{"format", "vasim-notice"},
          {"version", 1},
          {"base_margin", m.base_margin},
          {"slope", m.slope},
          {"calibrated", m.calibrated},
          {"scenarios", scenarios}};
}

inline lifecycle::NoticeModel notice_model_from_json(const json& j) {
  return guarded("notice model", [&] {
    if (j.value("format", std::string()) != "vasim-notice") throw ConfigError("notice model: wrong format tag");
    lifecycle::NoticeModel m;
    m.base_margin = j.at("base_margin").get<double>();
    m.slope = j.at("slope").get<double>();
    m.calibrated = j.at("calibrated").get<bool>();
    const auto& sc = j.at("scenarios");
    for (auto s : kAllScenarios) {
      const auto& e = sc.at(tag_of(s));
      const auto i = index_of(s);
      m.scenario_offset[i] = e.at("offset").get<double>();
      m.target[i] = e.value("target", 0.0);
      m.residual[i] = e.value("residual", 0.0);
    }
    return m;
  });
}

inline lifecycle::NoticeModel load_notice_model(const std::string& path) {
  return notice_model_from_json(load_json(path));
}

// ---------------------------------------------------------------------------
// commands.txt: one command per line; blank lines and '#' comments skipped.

inline std::vector<std::string> parse_commands(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  if (out.empty()) throw ConfigError("commands: no commands");
  return out;
}

inline std::vector<std::string> load_commands(const std::string& path) { return parse_commands(read_text(path)); }

// ---------------------------------------------------------------------------
// Dataset manifest (dataset/manifest.json). Traces are rebuilt from seeds.

inline json to_json(const PhoneState& p) {
  return {{"screen_interactive", p.screen_interactive},
          {"bluetooth_audio", p.bluetooth_audio},
          {"wired_headphone", p.wired_headphone},
          {"placement", p.placement == Placement::Pocket ? "pocket" : "hand"}};
}

inline PhoneState phone_from_json(const json& j) {
  PhoneState p;
  p.screen_interactive = j.at("screen_interactive").get<bool>();
  p.bluetooth_audio = j.at("bluetooth_audio").get<bool>();
  p.wired_headphone = j.at("wired_headphone").get<bool>();
  const auto place = j.at("placement").get<std::string>();
  if (place == "pocket") p.placement = Placement::Pocket;
  else if (place == "hand") p.placement = Placement::InHand;
  else throw ConfigError("unknown placement '" + place + "'");
  return p;
}

inline json to_json(const scenegen::LabeledDataset& ds, std::uint64_t seed) {
  json items = json::array();
  for (const auto& w : ds.items)
    items.push_back({{"scenario", tag_of(w.scenario)},
                     {"trial", w.trial},
                     {"trace_seed", w.trace_seed},
                     {"phone", to_json(w.phone)},
                     {"window_seconds", w.window_seconds},
                     {"trace_seconds", w.trace_seconds},
                     {"label", w.label == scenegen::InvasionLabel::Successful ? "successful" : "unsuccessful"}});
  return {{"format", "vasim-dataset"}, {"version", 1}, {"seed", seed}, {"params", to_json(ds.params)}, {"items", items}};
}

inline scenegen::LabeledDataset dataset_from_json(const json& j) {
  return guarded("dataset", [&] {
    if (j.value("format", std::string()) != "vasim-dataset") throw ConfigError("dataset: wrong format tag");
    scenegen::LabeledDataset ds;
    ds.params = scenario_table_from_json(j.at("params"));
    for (const auto& e : j.at("items")) {
      scenegen::LabeledWindow w;
      const auto s = parse_scenario(e.at("scenario").get<std::string>());
      if (!s) throw ConfigError("dataset: unknown scenario");
      w.scenario = *s;
      w.trial = e.at("trial").get<std::size_t>();
      w.trace_seed = e.at("trace_seed").get<std::uint64_t>();
      w.phone = phone_from_json(e.at("phone"));
      w.window_seconds = e.at("window_seconds").get<double>();
      w.trace_seconds = e.at("trace_seconds").get<double>();
      const auto label = e.at("label").get<std::string>();
      if (label != "successful" && label != "unsuccessful") throw ConfigError("dataset: unknown label '" + label + "'");
      w.label = label == "successful" ? scenegen::InvasionLabel::Successful : scenegen::InvasionLabel::Unsuccessful;
      ds.items.push_back(w);
    }
    if (ds.items.empty()) throw ConfigError("dataset: no items");
    return ds;
  });
}

}  // namespace vasim::config
