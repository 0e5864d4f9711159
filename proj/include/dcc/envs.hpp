#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dcc/cluster.hpp"

namespace dcc {

/// Fixed affine scales mapping raw signals to roughly [-1, 1].
struct ObsScales {
  double ci_center = 400.0;
  double ci_halfrange = 300.0;
  double ambient_center = 20.0;
  double ambient_halfrange = 20.0;
  double temp_center = 55.0;
  double temp_halfrange = 35.0;
};

/// A masked level ignores its raw action and applies the baseline default.
struct LevelMask {
  bool top = false;
  bool low = false;
  bool cooling = false;

  static LevelMask all() { return {true, true, true}; }
};

struct EnvConfig {
  int top_period_steps = 4;
  int episode_steps = 672;
  double lambda_sla = 10.0;
  double lambda_temp = 1.0;
  ObsScales scales;
  LevelMask mask;
  bool random_start = false;
};

inline constexpr std::size_t kForecastSteps = 4;
inline constexpr std::size_t kTopFeaturesPerDc = 9;
inline constexpr std::size_t kTimeFeatures = 4;
inline constexpr std::size_t kLowObsDim = 10;
inline constexpr std::size_t kCoolingObsDim = 6;
inline constexpr std::size_t kLowActDim = 2;

struct EnvDims {
  std::size_t n_dcs = 0;
  std::size_t blade_groups = 0;
  std::size_t top_obs = 0;
  std::size_t low_obs = kLowObsDim;
  std::size_t cooling_obs = kCoolingObsDim;
  std::size_t top_act = 0;
  std::size_t low_act = kLowActDim;
  std::size_t cooling_act = 0;
};

struct Observations {
  std::vector<double> top;
  std::vector<std::vector<double>> low;      // per DC
  std::vector<std::vector<double>> cooling;  // per DC
};

/// Flat real-valued actions. An empty `top` selects origin dispatch; empty
/// per-DC entries select that level's default.
struct RawActions {
  std::vector<double> top;
  std::vector<std::vector<double>> low;
  std::vector<std::vector<double>> cooling;
};

struct Rewards {
  double top = 0.0;
  std::vector<double> low;
  std::vector<double> cooling;
};

struct EnvStep {
  Observations obs;
  Rewards rewards;
  bool done = false;
  bool top_latched = false;  // the top action was decoded on this step
  StepReport info;
};

/// Decodes one DC's low action: [defer, release] clamped to [0, 1].
LowAction decode_low(std::span<const double> raw);
/// Decodes one DC's cooling action: [pump, setpoint fraction, valves...].
CoolingAction decode_cooling(std::span<const double> raw, const DcConfig& cfg);
/// Softmax over logits; empty means origin dispatch.
std::optional<DispatchWeights> decode_top(std::span<const double> raw, std::size_t n_dcs);

/// Hierarchical environment over one cluster. The top level latches its
/// decoded weights every `top_period_steps`; the lower levels act every step.
class HierEnv {
 public:
  HierEnv(std::shared_ptr<const ClusterConfig> cluster, EnvConfig cfg);

  Observations reset(std::uint64_t seed);
  EnvStep step(const RawActions& actions);

  const EnvDims& dims() const noexcept { return dims_; }
  const EnvConfig& config() const noexcept { return cfg_; }
  const ClusterConfig& cluster() const noexcept { return *cluster_; }
  std::shared_ptr<const ClusterConfig> cluster_ptr() const noexcept { return cluster_; }
  const ClusterState& state() const noexcept { return state_; }
  double reward_scale() const noexcept { return reward_scale_; }
  bool done() const noexcept { return state_.t >= cfg_.episode_steps; }
  bool top_acts_now() const noexcept { return state_.t % cfg_.top_period_steps == 0; }
  std::int64_t t() const noexcept { return state_.t; }

  void set_mask(LevelMask mask) noexcept { cfg_.mask = mask; }
  void set_record_tasks(bool on) noexcept { state_.record_tasks = on; }
  Observations observe() const;

 private:
  HierAction decode(const RawActions& actions);

  std::shared_ptr<const ClusterConfig> cluster_;
  EnvConfig cfg_;
  EnvDims dims_;
  ClusterState state_;
  std::optional<DispatchWeights> latched_top_;
  std::vector<double> last_assigned_;
  double reward_scale_ = 1.0;
  bool started_ = false;
};

/// Mean per-step cluster CO2 of the all-masked baseline from offset 0.
double baseline_step_co2(const ClusterConfig& cluster, int episode_steps);

}  // namespace dcc
