#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dcc/error.hpp"
#include "dcc/envs.hpp"
#include "dcc/policies.hpp"

namespace dcc {

enum class Algo { PPO, A2C };

std::string_view to_string(Algo algo);
Algo algo_from_string(std::string_view name);

struct TrainConfig {
  Algo algo = Algo::PPO;
  long total_steps = 100000;  // env steps per training phase
  int rollout_len = 256;
  int minibatches = 4;
  int epochs = 4;
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double ent_coef = 0.01;
  double vf_coef = 0.5;
  double lr = 3e-4;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;
  // Divide rewards by the running std of the discounted return, per level.
  bool scale_rewards = true;
  std::vector<int> hidden{64, 64};
  double log_std_init = -0.5;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  /// Throws ConfigError.
  void validate() const;
  /// A2C runs the same machinery with one unclipped epoch over one minibatch.
  TrainConfig effective() const;
};

struct LevelSelection {
  bool top = false;
  bool low = false;
  bool cooling = false;

  bool trains(Level level) const noexcept;
  bool any() const noexcept { return top || low || cooling; }
};

/// On-policy samples for one level. Actions are in policy space.
struct Batch {
  nn::Mat obs;        // obs_dim x M
  nn::Mat actions;    // act_dim x M
  nn::Vec logp_old;   // M
  nn::Vec advantages; // M
  nn::Vec returns;    // M
};

struct LossStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
};

/// Diagonal Gaussian log-density of a policy-space action.
double log_prob(const LevelPolicy& policy, std::span<const double> obs,
                std::span<const double> action);

/// Gradient of clipped surrogate + vf_coef * value loss - ent_coef * entropy on
/// the samples `idx`, accumulated into `grad` (same layout as the params).
LossStats surrogate_gradient(const LevelPolicy& policy, const Batch& batch,
                             std::span<const int> idx, const TrainConfig& cfg,
                             std::span<float> grad);

/// Backward GAE over one stream; `done[k]` ends the episode after sample k.
void compute_gae(std::span<const float> rewards, std::span<const float> values,
                 std::span<const std::uint8_t> done, float bootstrap, double gamma,
                 double lambda, std::span<float> advantages);

struct LevelLog {
  LossStats stats;
  std::size_t samples = 0;
};

struct TrainLogRow {
  int iteration = 0;
  long env_steps = 0;
  // Rollout mean per-step cluster CO2 times episode length.
  double episode_co2_kg = 0.0;
  LevelLog top, low, cooling;
};

struct TrainResult {
  PolicySet policies;
  std::vector<TrainLogRow> log;
};

/// Raised when a loss goes non-finite; carries the last finite parameters.
class NumericalDivergence : public Error {
 public:
  NumericalDivergence(const std::string& message, PolicySet last_good, int iteration)
      : Error("NumericalDivergence", message),
        last_good_(std::make_shared<PolicySet>(std::move(last_good))),
        iteration_(iteration) {}

  const PolicySet& last_good() const noexcept { return *last_good_; }
  int iteration() const noexcept { return iteration_; }

 private:
  std::shared_ptr<PolicySet> last_good_;
  int iteration_;
};

using EnvFactory = std::function<HierEnv()>;
using ProgressFn = std::function<void(const std::string&)>;

/// Trains the selected levels jointly with clipped-surrogate PPO from a single
/// rollout worker. Untrained levels act with their `pretrained` mean actions
/// when present, otherwise with their defaults. Deterministic in (seed, cfg).
TrainResult ppo_train(const EnvFactory& make_env, LevelSelection train,
                      const PolicySet& pretrained, const TrainConfig& cfg, std::uint64_t seed,
                      const ProgressFn& progress = {});

struct EvalResult {
  double co2_kg = 0.0;
  LedgerTotals totals;
  std::vector<StepReport> log;
};

/// One deterministic episode with mean actions; levels absent from `policies`
/// use their defaults.
EvalResult evaluate_policy(HierEnv env, const PolicySet& policies, std::uint64_t seed);

enum class Configuration { Baseline, TopOnly, TopPlusPretrainedLow, JointHRL };

std::string_view to_string(Configuration c);
Configuration configuration_from_string(std::string_view name);

struct SeedResult {
  std::uint64_t seed = 0;
  EvalResult eval;
  PolicySet policies;
  std::vector<TrainLogRow> log;
  std::optional<PolicySet> pretrained;  // low-level phase output, TopPlusPretrainedLow only
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
};

MeanStd mean_std(std::span<const double> values);

struct ConfigurationResult {
  Configuration name = Configuration::Baseline;
  std::vector<SeedResult> seeds;

  std::vector<double> co2() const;
  MeanStd summary() const;
};

/// Trains and evaluates one rung of the configuration ladder for each seed.
/// JointHRL trains for twice cfg.total_steps so that its interaction budget
/// equals the two-phase TopPlusPretrainedLow schedule.
ConfigurationResult run_configuration(Configuration name, const EnvFactory& make_env,
                                      const TrainConfig& cfg,
                                      std::span<const std::uint64_t> seeds,
                                      const ProgressFn& progress = {});

/// Trains and evaluates a single seed; used by run_configuration and the CLI.
SeedResult run_configuration_seed(Configuration name, const EnvFactory& make_env,
                                  const TrainConfig& cfg, std::uint64_t seed,
                                  const ProgressFn& progress = {});

}  // namespace dcc
