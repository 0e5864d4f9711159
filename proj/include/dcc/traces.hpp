#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dcc {

enum class TraceKind { CarbonIntensity, AmbientTemp, Workload };

std::string_view to_string(TraceKind kind);
TraceKind trace_kind_from_string(std::string_view name);

/// Uniformly sampled exogenous signal. Units follow the kind:
/// gCO2/kWh, degrees C, or a utilization fraction.
struct TimeTrace {
  TraceKind kind = TraceKind::CarbonIntensity;
  std::int64_t start = 0;  // unix seconds, UTC
  int step_seconds = 900;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double at(std::size_t i) const { return values.at(i); }
  std::int64_t time_at(std::size_t i) const {
    return start + static_cast<std::int64_t>(i) * step_seconds;
  }
};

/// Throws EmptyTrace, RangeViolation or InvalidStep when an invariant fails.
void validate(const TimeTrace& trace);

TimeTrace make_trace(TraceKind kind, std::int64_t start, int step_seconds,
                     std::vector<double> values);

/// Reads a `timestamp,value` CSV with ISO-8601 UTC timestamps.
TimeTrace load_trace(const std::filesystem::path& path, TraceKind kind);

/// Writes the same CSV format; values use the shortest round-trip repr.
void write_trace(const TimeTrace& trace, const std::filesystem::path& path);

/// Linear interpolation onto a new step covering the same span. When the span
/// is not a multiple of the new step the trailing partial interval is dropped.
TimeTrace resample(const TimeTrace& trace, int new_step_seconds);

/// Perfect-foresight lookahead: values at t+1..t+k, clamped to the last sample.
std::vector<double> forecast_window(const TimeTrace& trace, std::size_t t,
                                    std::size_t k);

struct SynthParams {
  double mean = 0.0;
  double amplitude = 0.0;
  double period_steps = 96.0;
  double noise_std = 0.0;
  std::size_t length = 0;
  // Overrides the seed-derived phase when set.
  std::optional<double> phase_rad;
  int step_seconds = 900;
  std::int64_t start = 0;
};

/// mean + amplitude*sin(2*pi*t/period + phase) + N(0, noise_std), clipped to
/// the kind's valid range. Pure in (kind, seed, params).
TimeTrace synth_trace(TraceKind kind, std::uint64_t seed,
                      const SynthParams& params);

std::int64_t parse_iso8601(std::string_view text);
std::string format_iso8601(std::int64_t unix_seconds);

}  // namespace dcc
