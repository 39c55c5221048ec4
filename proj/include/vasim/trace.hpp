#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vasim/dsp.hpp"
#include "vasim/error.hpp"

namespace vasim {

// The six collection scenarios, tagged a..f.
enum class Scenario : std::uint8_t { QuietRoad, Highway, SpecificPlaces, PublicTransport, Car, Restaurant };

inline constexpr std::array<Scenario, 6> kAllScenarios = {
    Scenario::QuietRoad, Scenario::Highway, Scenario::SpecificPlaces,
    Scenario::PublicTransport, Scenario::Car, Scenario::Restaurant};

inline constexpr std::size_t index_of(Scenario s) { return static_cast<std::size_t>(s); }

inline char scenario_tag(Scenario s) { return static_cast<char>('a' + index_of(s)); }

inline std::string_view scenario_name(Scenario s) {
  static constexpr std::array<std::string_view, 6> names = {
      "QuietRoad", "Highway", "SpecificPlaces", "PublicTransport", "Car", "Restaurant"};
  return names[index_of(s)];
}

// Accepts the one-letter tag ("f") or the name ("Restaurant").
inline std::optional<Scenario> parse_scenario(std::string_view text) {
  if (text.size() == 1 && text[0] >= 'a' && text[0] <= 'f')
    return static_cast<Scenario>(text[0] - 'a');
  for (auto s : kAllScenarios)
    if (scenario_name(s) == text) return s;
  return std::nullopt;
}

enum class Placement : std::uint8_t { Pocket, InHand };

struct PhoneState {
  bool screen_interactive = false;
  bool bluetooth_audio = false;
  bool wired_headphone = false;
  Placement placement = Placement::Pocket;

  bool audio_route_external() const { return bluetooth_audio || wired_headphone; }
  bool operator==(const PhoneState&) const = default;
};

inline constexpr double kAccelRateHz = 50.0;
inline constexpr double kEnvRateHz = 5.0;
inline constexpr double kAnalysisRateHz = 50.0;

// Linear acceleration (gravity removed), m/s^2.
struct AccelSample {
  double t = 0.0;
  float x = 0.0f, y = 0.0f, z = 0.0f;
  bool operator==(const AccelSample&) const = default;
};

struct ScalarSample {
  double t = 0.0;
  float v = 0.0f;
  bool operator==(const ScalarSample&) const = default;
};

// Noise is dB re unit amplitude; light is lux.
struct SensorTrace {
  Scenario scenario = Scenario::QuietRoad;
  PhoneState phone;
  double duration = 0.0;
  std::vector<AccelSample> accel;
  std::vector<ScalarSample> noise;
  std::vector<ScalarSample> light;

  bool operator==(const SensorTrace&) const = default;
};

namespace detail {

template <typename Sample>
void check_channel(const std::vector<Sample>& ch, std::string_view name, double duration) {
  if (ch.empty()) throw RangeError(std::string("channel empty: ") + std::string(name));
  if (ch.front().t < 0.0 || ch.back().t > duration)
    throw RangeError(std::string("channel outside [0, duration]: ") + std::string(name));
  for (std::size_t i = 1; i < ch.size(); ++i)
    if (!(ch[i].t > ch[i - 1].t))
      throw RangeError(std::string("non-monotonic timestamps in channel ") + std::string(name));
}

template <typename Sample>
std::vector<double> times_of(const std::vector<Sample>& ch) {
  std::vector<double> t;
  t.reserve(ch.size());
  for (const auto& s : ch) t.push_back(s.t);
  return t;
}

// 9 significant digits: exact for float payloads.
inline void put_number(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.9g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(sep, pos);
    parts.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return parts;
}

inline std::string at_line(std::size_t line) { return " at line " + std::to_string(line); }

template <typename T>
T parse_number(std::string_view text, std::size_t line) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(static_cast<double>(value)))
    throw ParseError("malformed number '" + std::string(text) + "'" + at_line(line));
  return value;
}

inline bool parse_flag(std::string_view text, std::size_t line) {
  if (text == "0") return false;
  if (text == "1") return true;
  throw ParseError("malformed flag '" + std::string(text) + "'" + at_line(line));
}

}  // namespace detail

// Throws RangeError naming the first violated invariant.
inline void validate(const SensorTrace& trace) {
  if (!(trace.duration > 0.0)) throw RangeError("trace duration must be positive");
  detail::check_channel(trace.accel, "accel", trace.duration);
  detail::check_channel(trace.noise, "noise", trace.duration);
  detail::check_channel(trace.light, "light", trace.duration);
}

inline constexpr std::string_view kTraceFormatLine = "# vasim-trace v1";

// Serialized form; deterministic, so equal traces give identical bytes.
inline std::string format_trace(const SensorTrace& trace) {
  validate(trace);
  std::string out;
  out.reserve(48 * (trace.accel.size() + trace.noise.size() + trace.light.size()) + 128);
  out.append(kTraceFormatLine);
  out += '\n';
  out += "scenario=";
  out += scenario_tag(trace.scenario);
  out += ",screen=";
  out += trace.phone.screen_interactive ? '1' : '0';
  out += ",bluetooth=";
  out += trace.phone.bluetooth_audio ? '1' : '0';
  out += ",wired=";
  out += trace.phone.wired_headphone ? '1' : '0';
  out += ",placement=";
  out += trace.phone.placement == Placement::Pocket ? "pocket" : "hand";
  out += ",duration=";
  detail::put_number(out, trace.duration);
  out += '\n';
  for (const auto& s : trace.accel) {
    out += "accel,";
    detail::put_number(out, s.t);
    for (float v : {s.x, s.y, s.z}) {
      out += ',';
      detail::put_number(out, v);
    }
    out += '\n';
  }
  for (const auto& [name, ch] : {std::pair{"noise", &trace.noise}, std::pair{"light", &trace.light}}) {
    for (const auto& s : *ch) {
      out += name;
      out += ',';
      detail::put_number(out, s.t);
      out += ',';
      detail::put_number(out, s.v);
      out += '\n';
    }
  }
  return out;
}

// Parses the trace CSV. Errors name the 1-based file line.
inline SensorTrace parse_trace(std::string_view text) {
  SensorTrace trace;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;

  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line) || line != kTraceFormatLine)
    throw ParseError("missing or unsupported format line" + detail::at_line(1));
  if (!next_line(line)) throw ParseError("missing header" + detail::at_line(2));
  {
    int seen = 0;
    for (auto field : detail::split(line, ',')) {
      const auto eq = field.find('=');
      if (eq == std::string_view::npos) throw ParseError("malformed header field" + detail::at_line(line_no));
      const auto key = field.substr(0, eq);
      const auto val = field.substr(eq + 1);
      if (key == "scenario") {
        auto s = parse_scenario(val);
        if (!s) throw ParseError("unknown scenario tag '" + std::string(val) + "'" + detail::at_line(line_no));
        trace.scenario = *s;
      } else if (key == "screen") {
        trace.phone.screen_interactive = detail::parse_flag(val, line_no);
      } else if (key == "bluetooth") {
        trace.phone.bluetooth_audio = detail::parse_flag(val, line_no);
      } else if (key == "wired") {
        trace.phone.wired_headphone = detail::parse_flag(val, line_no);
      } else if (key == "placement") {
        if (val == "pocket") trace.phone.placement = Placement::Pocket;
        else if (val == "hand") trace.phone.placement = Placement::InHand;
        else throw ParseError("unknown placement '" + std::string(val) + "'" + detail::at_line(line_no));
      } else if (key == "duration") {
        trace.duration = detail::parse_number<double>(val, line_no);
      } else {
        throw ParseError("unknown header field '" + std::string(key) + "'" + detail::at_line(line_no));
      }
      ++seen;
    }
    if (seen != 6) throw ParseError("incomplete header" + detail::at_line(line_no));
    have_header = true;
  }

  while (next_line(line)) {
    if (line.empty()) continue;
    const auto parts = detail::split(line, ',');
    const auto channel = parts[0];
    auto check_order = [&](auto& ch, double t) {
      if (!ch.empty() && !(t > ch.back().t)) throw ParseError("non-monotonic" + detail::at_line(line_no));
    };
    if (channel == "accel") {
      if (parts.size() != 5) throw ParseError("accel row needs 4 values" + detail::at_line(line_no));
      AccelSample s;
      s.t = detail::parse_number<double>(parts[1], line_no);
      s.x = detail::parse_number<float>(parts[2], line_no);
      s.y = detail::parse_number<float>(parts[3], line_no);
      s.z = detail::parse_number<float>(parts[4], line_no);
      check_order(trace.accel, s.t);
      trace.accel.push_back(s);
    } else if (channel == "noise" || channel == "light") {
      if (parts.size() != 3) throw ParseError("scalar row needs 2 values" + detail::at_line(line_no));
      ScalarSample s;
      s.t = detail::parse_number<double>(parts[1], line_no);
      s.v = detail::parse_number<float>(parts[2], line_no);
      auto& ch = channel == "noise" ? trace.noise : trace.light;
      check_order(ch, s.t);
      ch.push_back(s);
    } else {
      throw ParseError("unknown channel '" + std::string(channel) + "'" + detail::at_line(line_no));
    }
  }
  if (!have_header) throw ParseError("missing header");
  try {
    validate(trace);
  } catch (const RangeError& e) {
    throw ParseError(e.what());
  }
  return trace;
}

inline SensorTrace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

inline void save_trace(const SensorTrace& trace, const std::string& path) {
  const auto text = format_trace(trace);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write trace file: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path);
}

// A span of a trace with every channel resampled onto one 50 Hz grid.
struct Window {
  std::string trace_ref;
  Scenario scenario = Scenario::QuietRoad;
  PhoneState phone;
  double start = 0.0;
  double length = 0.0;
  std::vector<double> ax, ay, az;
  std::vector<double> noise;
  std::vector<double> light;

  std::size_t size() const { return noise.size(); }
};

inline Window cut_window(const SensorTrace& trace, double start, double length,
                         std::string trace_ref = {}) {
  if (!(length > 0.0)) throw RangeError("empty window");
  constexpr double eps = 1e-9;
  if (start < 0.0 || start + length > trace.duration + eps)
    throw RangeError("window [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     "] outside trace duration " + std::to_string(trace.duration));
  if (trace.accel.empty()) throw RangeError("channel empty: accel");
  if (trace.noise.empty()) throw RangeError("channel empty: noise");
  if (trace.light.empty()) throw RangeError("channel empty: light");

  Window w;
  w.trace_ref = std::move(trace_ref);
  w.scenario = trace.scenario;
  w.phone = trace.phone;
  w.start = start;
  w.length = length;
  const double t1 = start + length;

  const auto accel_t = detail::times_of(trace.accel);
  const auto accel_idx = dsp::nearest_indices(accel_t, kAnalysisRateHz, start, t1);
  w.ax.reserve(accel_idx.size());
  w.ay.reserve(accel_idx.size());
  w.az.reserve(accel_idx.size());
  for (auto i : accel_idx) {
    w.ax.push_back(trace.accel[i].x);
    w.ay.push_back(trace.accel[i].y);
    w.az.push_back(trace.accel[i].z);
  }
  auto scalar = [&](const std::vector<ScalarSample>& ch) {
    const auto t = detail::times_of(ch);
    std::vector<double> out;
    for (auto i : dsp::nearest_indices(t, kAnalysisRateHz, start, t1)) out.push_back(ch[i].v);
    return out;
  };
  w.noise = scalar(trace.noise);
  w.light = scalar(trace.light);
  return w;
}

}  // namespace vasim
