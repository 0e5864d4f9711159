#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dcc/envs.hpp"
#include "dcc/nn.hpp"

namespace dcc {

enum class Level { Top, Low, Cooling };

std::string_view to_string(Level level);
Level level_from_string(std::string_view name);

// Policy-space actions live around [-1, 1]. Top actions scale to logits;
// unit-interval actions map affinely with a margin so that a saturated mean
// still reaches the bounds after clamping.
inline constexpr double kTopLogitScale = 3.0;
inline constexpr double kUnitActionCenter = 0.5;
inline constexpr double kUnitActionHalfWidth = 0.6;

std::vector<double> to_raw_action(Level level, std::span<const double> policy_action);

/// Gaussian policy (tanh-squashed mean, state-independent log-std) plus a
/// value network, all parameters in one flat float buffer:
/// [policy MLP | log-std | value MLP].
class LevelPolicy {
 public:
  LevelPolicy(Level level, int obs_dim, int act_dim, std::vector<int> hidden,
              double log_std_init, std::uint64_t seed);

  Level level() const noexcept { return level_; }
  int obs_dim() const noexcept { return obs_dim_; }
  int act_dim() const noexcept { return act_dim_; }
  const std::vector<int>& hidden() const noexcept { return hidden_; }
  const nn::MlpLayout& policy_net() const noexcept { return policy_; }
  const nn::MlpLayout& value_net() const noexcept { return value_; }
  std::size_t log_std_offset() const noexcept { return log_std_offset_; }

  std::span<float> params() noexcept { return params_; }
  std::span<const float> params() const noexcept { return params_; }
  std::vector<float>& param_vector() noexcept { return params_; }
  const std::vector<float>& param_vector() const noexcept { return params_; }

  std::vector<double> log_std() const;
  /// tanh(policy(obs)) for one observation.
  std::vector<double> mean_action(std::span<const double> obs) const;
  double value(std::span<const double> obs) const;

 private:
  Level level_;
  int obs_dim_;
  int act_dim_;
  std::vector<int> hidden_;
  nn::MlpLayout policy_;
  nn::MlpLayout value_;
  std::size_t log_std_offset_ = 0;
  std::vector<float> params_;
};

/// Trained parameters per level. Missing levels act with their defaults.
struct PolicySet {
  std::optional<LevelPolicy> top;
  std::optional<LevelPolicy> low;
  std::optional<LevelPolicy> cooling;

  std::optional<LevelPolicy>& get(Level level);
  const std::optional<LevelPolicy>& get(Level level) const;
};

inline constexpr char kPolicyMagic[8] = {'D', 'C', 'C', 'P', 'O', 'L', '0', '1'};

/// Binary file: magic `DCCPOL01` then little-endian float32 parameters of
/// each present level in top/low/cooling order. Shapes go to `<path>.json`.
void save_policies(const PolicySet& set, const std::filesystem::path& path);
PolicySet load_policies(const std::filesystem::path& path);

/// Mean actions from the trained levels; defaults for the rest.
RawActions policy_actions(const PolicySet& set, const Observations& obs);

/// No shifting, open-loop cooling: every level at its default.
RawActions baseline_policy(const Observations& obs);

struct CoolingLookupRow {
  double utilization_upper;
  double pump_speed;
  double setpoint_fraction;  // 0 = coldest setpoint, 1 = warmest
};

/// Five utilization buckets; each row keeps the steady-state blade
/// temperature at the bucket's upper edge near 75 C on the bundled configs.
const std::array<CoolingLookupRow, 5>& greedy_cooling_table();

/// Linear-interpolation sample quantile (q in [0, 1]).
double quantile(std::vector<double> values, double q);

/// Carbon-aware heuristic: softmax(-beta * ci) dispatch, defer when the current
/// CI is at or above the q-quantile of {current, forecast}, table cooling.
RawActions greedy_policy(const Observations& obs, const EnvDims& dims, double beta, double q);

/// E[clamp(0.5 + 0.6 * a, 0, 1)] for a ~ N(mean, std): the expected decoded
/// unit-interval action of a Gaussian policy output.
double expected_unit_fraction(double mean, double std);

}  // namespace dcc
