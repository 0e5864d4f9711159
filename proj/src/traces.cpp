#include "dcc/traces.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "dcc/error.hpp"

namespace dcc {

namespace {

struct KindRange {
  double lo;
  double hi;
};

KindRange range_of(TraceKind kind) {
  switch (kind) {
    case TraceKind::CarbonIntensity:
      return {0.0, std::numeric_limits<double>::infinity()};
    case TraceKind::AmbientTemp:
      return {-50.0, 60.0};
    case TraceKind::Workload:
      return {0.0, 1.0};
  }
  return {0.0, 0.0};
}

bool valid_step(int step_seconds) {
  return step_seconds > 0 && 3600 % step_seconds == 0;
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

std::string_view to_string(TraceKind kind) {
  switch (kind) {
    case TraceKind::CarbonIntensity:
      return "carbon_intensity";
    case TraceKind::AmbientTemp:
      return "ambient_temp";
    case TraceKind::Workload:
      return "workload";
  }
  return "unknown";
}

TraceKind trace_kind_from_string(std::string_view name) {
  if (name == "carbon_intensity" || name == "ci") return TraceKind::CarbonIntensity;
  if (name == "ambient_temp" || name == "ambient") return TraceKind::AmbientTemp;
  if (name == "workload") return TraceKind::Workload;
  throw ConfigError("unknown trace kind '" + std::string(name) + "'");
}

void validate(const TimeTrace& trace) {
  if (trace.values.empty()) throw EmptyTrace("trace has no samples");
  if (!valid_step(trace.step_seconds)) {
    throw InvalidStep("step of " + std::to_string(trace.step_seconds) +
                      " s does not divide 3600");
  }
  const auto [lo, hi] = range_of(trace.kind);
  for (std::size_t i = 0; i < trace.values.size(); ++i) {
    const double v = trace.values[i];
    if (!std::isfinite(v) || v < lo || v > hi) {
      std::ostringstream os;
      os << to_string(trace.kind) << " sample " << i << " = " << v
         << " outside [" << lo << ", " << hi << "]";
      throw RangeViolation(os.str());
    }
  }
}

TimeTrace make_trace(TraceKind kind, std::int64_t start, int step_seconds,
                     std::vector<double> values) {
  TimeTrace trace{kind, start, step_seconds, std::move(values)};
  validate(trace);
  return trace;
}

std::int64_t parse_iso8601(std::string_view text) {
  std::tm tm{};
  char z = 0;
  const std::string buf(text);
  const int n = std::sscanf(buf.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &tm.tm_year,
                            &tm.tm_mon, &tm.tm_mday, &tm.tm_hour, &tm.tm_min,
                            &tm.tm_sec, &z);
  if (n != 7 || z != 'Z' || buf.size() != 20) {
    throw ParseError("bad ISO-8601 UTC timestamp '" + buf + "'");
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  return static_cast<std::int64_t>(timegm(&tm));
}

std::string format_iso8601(std::int64_t unix_seconds) {
  const auto t = static_cast<std::time_t>(unix_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

TimeTrace load_trace(const std::filesystem::path& path, TraceKind kind) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace file " + path.string());

  std::string line;
  if (!std::getline(in, line) || trim_cr(line) != "timestamp,value") {
    throw ParseError(path.string() + ": expected header 'timestamp,value'");
  }

  std::vector<std::int64_t> stamps;
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto row = trim_cr(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string_view::npos) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": missing ','");
    }
    stamps.push_back(parse_iso8601(row.substr(0, comma)));
    const auto field = row.substr(comma + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad value '" +
                       std::string(field) + "'");
    }
    values.push_back(v);
  }
  if (values.empty()) throw EmptyTrace(path.string() + " has no rows");

  int step = 900;
  if (stamps.size() >= 2) {
    const auto dt = stamps[1] - stamps[0];
    if (dt <= 0) throw NonUniformInterval(path.string() + ": timestamps not increasing");
    step = static_cast<int>(dt);
    for (std::size_t i = 2; i < stamps.size(); ++i) {
      if (stamps[i] - stamps[i - 1] != dt) {
        throw NonUniformInterval(path.string() + ": interval changes at row " +
                                 std::to_string(i + 1));
      }
    }
  }
  return make_trace(kind, stamps.front(), step, std::move(values));
}

void write_trace(const TimeTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write trace file " + path.string());
  out << "timestamp,value\n";
  char buf[64];
  for (std::size_t i = 0; i < trace.values.size(); ++i) {
    const auto res = std::to_chars(buf, buf + sizeof buf, trace.values[i]);
    out << format_iso8601(trace.time_at(i)) << ',' << std::string_view(buf, res.ptr - buf)
        << '\n';
  }
}

TimeTrace resample(const TimeTrace& trace, int new_step_seconds) {
  if (!valid_step(new_step_seconds)) {
    throw InvalidStep("step of " + std::to_string(new_step_seconds) +
                      " s does not divide 3600");
  }
  validate(trace);
  if (new_step_seconds == trace.step_seconds) return trace;

  const auto span = static_cast<std::int64_t>(trace.size() - 1) * trace.step_seconds;
  const auto n = static_cast<std::size_t>(span / new_step_seconds) + 1;
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto offset = static_cast<std::int64_t>(j) * new_step_seconds;
    const auto i = static_cast<std::size_t>(offset / trace.step_seconds);
    const auto rem = offset - static_cast<std::int64_t>(i) * trace.step_seconds;
    if (rem == 0 || i + 1 >= trace.size()) {
      out[j] = trace.values[std::min(i, trace.size() - 1)];
    } else {
      const double frac = static_cast<double>(rem) / trace.step_seconds;
      out[j] = trace.values[i] + frac * (trace.values[i + 1] - trace.values[i]);
    }
  }
  return TimeTrace{trace.kind, trace.start, new_step_seconds, std::move(out)};
}

std::vector<double> forecast_window(const TimeTrace& trace, std::size_t t,
                                    std::size_t k) {
  if (trace.values.empty()) throw EmptyTrace("forecast on empty trace");
  std::vector<double> out(k);
  const auto last = trace.size() - 1;
  for (std::size_t j = 0; j < k; ++j) out[j] = trace.values[std::min(t + 1 + j, last)];
  return out;
}

TimeTrace synth_trace(TraceKind kind, std::uint64_t seed, const SynthParams& p) {
  if (p.length < 1 || !(p.amplitude >= 0.0) || !(p.noise_std >= 0.0) ||
      !(p.period_steps > 0.0) || !std::isfinite(p.mean)) {
    throw InvalidParams("synth_trace needs length >= 1, amplitude/noise >= 0, period > 0");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  const double drawn_phase = uniform(rng);
  const double phase = p.phase_rad.value_or(drawn_phase);
  std::normal_distribution<double> noise(0.0, 1.0);

  const auto [lo, hi] = range_of(kind);
  std::vector<double> values(p.length);
  for (std::size_t t = 0; t < p.length; ++t) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(t) / p.period_steps;
    double v = p.mean + p.amplitude * std::sin(angle + phase);
    // Draw unconditionally so the stream does not depend on noise_std.
    const double z = noise(rng);
    if (p.noise_std > 0.0) v += p.noise_std * z;
    values[t] = std::clamp(v, lo, hi);
  }
  return make_trace(kind, p.start, p.step_seconds, std::move(values));
}

}  // namespace dcc
