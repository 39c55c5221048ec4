#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "vasim/dsp.hpp"
#include "vasim/forest.hpp"
#include "vasim/lifecycle.hpp"
#include "vasim/trace.hpp"

namespace vasim::report {

using nlohmann::json;

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline json to_json(const lifecycle::ResourceLedger& l) {
  json phases = json::object();
  for (std::size_t i = 0; i < lifecycle::kPhaseCount; ++i)
    phases[std::string(lifecycle::phase_name(static_cast<lifecycle::Phase>(i)))] = {
        {"minutes", l.minutes[i]},
        {"mah", l.mah[i]},
        {"ram_mb_minutes", l.ram_mb_minutes[i]},
        {"cpu_percent_minutes", l.cpu_percent_minutes[i]}};
  return {{"phases", phases},
          {"total_mah", l.total_mah()},
          {"total_minutes", l.total_minutes()},
          {"peak_ram_mb", l.peak_ram_mb},
          {"storage_kb", l.storage_kb}};
}

inline json to_json(const lifecycle::ScenarioSummary& s) {
  return {{"scenario", std::string(1, scenario_tag(s.scenario))},
          {"name", scenario_name(s.scenario)},
          {"trials", s.trials},
          {"key_complete", s.key_complete},
          {"launched", s.launched},
          {"noticed", s.noticed},
          {"recognized", s.recognized},
          {"blocked", s.blocked},
          {"succeeded", s.succeeded},
          {"success_rate", s.success_rate()}};
}

inline json to_json(const lifecycle::TrialRecord& t) {
  std::string timeline;
  for (auto p : t.timeline) {
    if (!timeline.empty()) timeline += '>';
    timeline += lifecycle::phase_name(p);
  }
  return {{"scenario", std::string(1, scenario_tag(t.scenario))},
          {"trial", t.trial},
          {"timeline", timeline},
          {"key_complete", t.key_complete},
          {"windows", t.windows},
          {"launched", t.launched},
          {"p_success", t.p_success},
          {"ambient", t.ambient},
          {"activation_volume", t.activation_volume},
          {"command_volume", t.command_volume},
          {"playback_ambient", t.playback_ambient},
          {"noticed", t.noticed},
          {"activated", t.activated},
          {"command_recognized", t.command_recognized},
          {"blocked", t.blocked},
          {"succeeded", t.succeeded},
          {"command_index", t.command_index},
          {"mah", t.ledger.total_mah()}};
}

inline json to_json(const lifecycle::SimulationReport& r) {
  json scenarios = json::array(), trials = json::array();
  for (const auto& s : r.scenarios) scenarios.push_back(to_json(s));
  for (const auto& t : r.trials) trials.push_back(to_json(t));
  return {{"format", "vasim-report"},
          {"version", 1},
          {"seed", r.seed},
          {"protocol", lifecycle::protocol_name(r.protocol)},
          {"defense", lifecycle::defense_name(r.defense)},
          {"trials_per_scenario", r.trials_per_scenario},
          {"scenarios", scenarios},
          {"ledger", to_json(r.ledger)},
          {"trials", trials}};
}

inline std::string trials_csv(const lifecycle::SimulationReport& r) {
  std::string out =
      "scenario,trial,timeline,key_complete,windows,launched,p_success,ambient,activation_volume,command_volume,"
      "noticed,command_recognized,blocked,succeeded,mah\n";
  for (const auto& t : r.trials) {
    const auto j = to_json(t);
    out += j["scenario"].get<std::string>() + ',' + std::to_string(t.trial) + ',' + j["timeline"].get<std::string>() +
           ',' + std::to_string(t.key_complete) + ',' + std::to_string(t.windows) + ',' + std::to_string(t.launched) +
           ',' + fmt("%.6f", t.p_success) + ',' + fmt("%.3f", t.ambient) + ',' + fmt("%.3f", t.activation_volume) +
           ',' + fmt("%.3f", t.command_volume) + ',' + std::to_string(t.noticed) + ',' +
           std::to_string(t.command_recognized) + ',' + std::to_string(t.blocked) + ',' + std::to_string(t.succeeded) +
           ',' + fmt("%.6f", t.ledger.total_mah()) + '\n';
  }
  return out;
}

// Same columns as the field-study tables: launched, succeeded, success rate.
inline std::string summary_csv(const lifecycle::SimulationReport& r) {
  std::string out = "scenario,name,trials,launched,noticed,succeeded,success_rate\n";
  for (const auto& s : r.scenarios)
    out += std::string(1, scenario_tag(s.scenario)) + ',' + std::string(scenario_name(s.scenario)) + ',' +
           std::to_string(s.trials) + ',' + std::to_string(s.launched) + ',' + std::to_string(s.noticed) + ',' +
           std::to_string(s.succeeded) + ',' + fmt("%.4f", s.success_rate()) + '\n';
  return out;
}

// Plot-ready success-rate bars.
inline std::string success_bars_csv(const json& report) {
  std::string out = "x,y\n";
  for (const auto& s : report.at("scenarios"))
    out += s.at("scenario").get<std::string>() + ',' + fmt("%.4f", s.at("success_rate").get<double>()) + '\n';
  return out;
}

inline std::string summary_table(const json& report) {
  std::string out = "protocol " + report.at("protocol").get<std::string>() + ", defense " +
                    report.at("defense").get<std::string>() + ", seed " + std::to_string(report.at("seed").get<std::uint64_t>()) +
                    "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-3s %-18s %7s %9s %8s %10s %8s\n", "", "scenario", "trials", "launched", "noticed",
                "succeeded", "rate");
  out += line;
  for (const auto& s : report.at("scenarios")) {
    std::snprintf(line, sizeof line, "%-3s %-18s %7ld %9ld %8ld %10ld %7.1f%%\n", s.at("scenario").get<std::string>().c_str(),
                  s.at("name").get<std::string>().c_str(), s.at("trials").get<long>(), s.at("launched").get<long>(),
                  s.at("noticed").get<long>(), s.at("succeeded").get<long>(), 100.0 * s.at("success_rate").get<double>());
    out += line;
  }
  const auto& l = report.at("ledger");
  std::snprintf(line, sizeof line, "energy %.1f mAh over %.1f min, peak RAM %.0f MB, storage %.1f KB\n",
                l.at("total_mah").get<double>(), l.at("total_minutes").get<double>(), l.at("peak_ram_mb").get<double>(),
                l.at("storage_kb").get<double>());
  out += line;
  return out;
}

inline json to_json(const forest::EvalMetrics& m) {
  return {{"class_order", m.class_order},
          {"confusion", m.confusion},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"support", m.support},
          {"macro_precision", m.macro_precision},
          {"macro_recall", m.macro_recall},
          {"macro_f1", m.macro_f1},
          {"accuracy", m.accuracy},
          {"stratified", m.stratified},
          {"warning", m.warning}};
}

inline std::string metrics_table(const json& m) {
  std::string out;
  char line[160];
  const auto classes = m.at("class_order").get<std::vector<std::string>>();
  std::snprintf(line, sizeof line, "%-14s %9s %7s %7s %8s\n", "class", "precision", "recall", "f1", "support");
  out += line;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::snprintf(line, sizeof line, "%-14s %9.3f %7.3f %7.3f %8ld\n", classes[c].c_str(), m.at("precision")[c].get<double>(),
                  m.at("recall")[c].get<double>(), m.at("f1")[c].get<double>(), m.at("support")[c].get<long>());
    out += line;
  }
  std::snprintf(line, sizeof line, "%-14s %9.3f %7.3f %7.3f\naccuracy %.3f\n", "macro", m.at("macro_precision").get<double>(),
                m.at("macro_recall").get<double>(), m.at("macro_f1").get<double>(), m.at("accuracy").get<double>());
  out += line;
  return out;
}

// |H(f)| in dB on `points` frequencies from 0 to Nyquist.
inline std::string filter_response_csv(const dsp::FilterCoeffs& c, int points) {
  if (points < 2) throw RangeError("filter response needs at least 2 points");
  std::string out = "x,y\n";
  const double nyquist = c.sample_rate_hz / 2.0;
  for (int i = 0; i < points; ++i) {
    const double f = nyquist * static_cast<double>(i) / static_cast<double>(points - 1);
    out += fmt("%.6g", f) + ',' + fmt("%.6f", std::max(c.magnitude_db(f), -300.0)) + '\n';
  }
  return out;
}

}  // namespace vasim::report
