#include "dcc/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace dcc {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)
constexpr Level kLevels[] = {Level::Top, Level::Low, Level::Cooling};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed * 0x100000001B3ull + salt);
}

/// Rollout storage for one level, samples in collection order.
struct LevelBuffer {
  int obs_dim = 0;
  int act_dim = 0;
  std::size_t streams = 1;  // samples interleave streams: k * streams + s
  std::vector<float> obs, act, logp, value, reward;
  std::vector<std::uint8_t> done;

  std::size_t size() const { return logp.size(); }
  void clear() {
    obs.clear();
    act.clear();
    logp.clear();
    value.clear();
    reward.clear();
    done.clear();
  }
};

/// Running variance of per-stream discounted returns. Starts from unit
/// variance with a negligible pseudo-count so early scales stay bounded.
class ReturnScaler {
 public:
  ReturnScaler(std::size_t streams, double gamma) : ret_(streams, 0.0), gamma_(gamma) {}

  double scale(std::size_t stream, double reward, bool done) {
    ret_[stream] = gamma_ * ret_[stream] + reward;
    const double total = count_ + 1.0;
    const double delta = ret_[stream] - mean_;
    mean_ += delta / total;
    var_ = (var_ * count_ + delta * delta * count_ / total) / total;
    count_ = total;
    if (done) ret_[stream] = 0.0;
    return reward / std::sqrt(var_ + 1e-8);
  }

 private:
  std::vector<double> ret_;
  double gamma_;
  double mean_ = 0.0;
  double var_ = 1.0;
  double count_ = 1e-4;
};

struct Sampled {
  std::vector<double> action;  // policy space
  float logp;
  float value;
};

class LevelActor {
 public:
  LevelActor(LevelPolicy& policy, std::mt19937_64& rng) : policy_(policy), rng_(rng) {}

  // Samples one action per column of `obs` and evaluates the value head.
  std::vector<Sampled> sample(const std::vector<std::vector<double>>& obs) {
    const int d = policy_.obs_dim();
    const int k = policy_.act_dim();
    nn::Mat x(d, static_cast<Eigen::Index>(obs.size()));
    for (std::size_t c = 0; c < obs.size(); ++c) {
      for (int i = 0; i < d; ++i) x(i, static_cast<Eigen::Index>(c)) = static_cast<float>(obs[c][i]);
    }
    const auto params = policy_.params();
    const nn::Mat pre = policy_.policy_net().forward(params, x);
    const nn::Mat v = policy_.value_net().forward(params, x);
    const auto log_std = policy_.log_std();

    std::vector<Sampled> out(obs.size());
    for (std::size_t c = 0; c < obs.size(); ++c) {
      auto& s = out[c];
      s.action.resize(k);
      double lp = 0.0;
      for (int j = 0; j < k; ++j) {
        const double mu = std::tanh(static_cast<double>(pre(j, static_cast<Eigen::Index>(c))));
        const double sigma = std::exp(log_std[j]);
        const double eps = normal_(rng_);
        const auto a = static_cast<float>(mu + sigma * eps);
        s.action[j] = a;
        const double z = (a - mu) / sigma;
        lp += -0.5 * z * z - log_std[j] - kHalfLog2Pi;
      }
      s.logp = static_cast<float>(lp);
      s.value = v(0, static_cast<Eigen::Index>(c));
    }
    return out;
  }

  std::vector<float> values(const std::vector<std::vector<double>>& obs) const {
    std::vector<float> out;
    for (const auto& o : obs) out.push_back(static_cast<float>(policy_.value(o)));
    return out;
  }

 private:
  LevelPolicy& policy_;
  std::mt19937_64& rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

void push_sample(LevelBuffer& buf, std::span<const double> obs, const Sampled& s) {
  for (double o : obs) buf.obs.push_back(static_cast<float>(o));
  for (double a : s.action) buf.act.push_back(static_cast<float>(a));
  buf.logp.push_back(s.logp);
  buf.value.push_back(s.value);
  buf.reward.push_back(0.0f);
  buf.done.push_back(0);
}

Batch make_batch(const LevelBuffer& buf, std::span<const float> bootstrap, const TrainConfig& cfg) {
  const auto m = buf.size();
  Batch b;
  b.obs = Eigen::Map<const nn::Mat>(buf.obs.data(), buf.obs_dim, static_cast<Eigen::Index>(m));
  b.actions = Eigen::Map<const nn::Mat>(buf.act.data(), buf.act_dim, static_cast<Eigen::Index>(m));
  b.logp_old = Eigen::Map<const nn::Vec>(buf.logp.data(), static_cast<Eigen::Index>(m));

  std::vector<float> adv(m, 0.0f);
  const auto s_count = buf.streams;
  const auto per_stream = m / s_count;
  for (std::size_t s = 0; s < s_count; ++s) {
    std::vector<float> r(per_stream), v(per_stream), a(per_stream);
    std::vector<std::uint8_t> d(per_stream);
    for (std::size_t k = 0; k < per_stream; ++k) {
      const auto idx = k * s_count + s;
      r[k] = buf.reward[idx];
      v[k] = buf.value[idx];
      d[k] = buf.done[idx];
    }
    compute_gae(r, v, d, bootstrap[s], cfg.gamma, cfg.gae_lambda, a);
    for (std::size_t k = 0; k < per_stream; ++k) adv[k * s_count + s] = a[k];
  }
  b.advantages = Eigen::Map<const nn::Vec>(adv.data(), static_cast<Eigen::Index>(m));
  b.returns = b.advantages + Eigen::Map<const nn::Vec>(buf.value.data(), static_cast<Eigen::Index>(m));
  if (cfg.normalize_advantages && m > 1) {
    const float mean = b.advantages.mean();
    const float var = (b.advantages.array() - mean).square().sum() / static_cast<float>(m - 1);
    b.advantages = (b.advantages.array() - mean) / (std::sqrt(var) + 1e-8f);
  }
  return b;
}

bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

LevelLog update_level(LevelPolicy& policy, nn::Adam& adam, const Batch& batch,
                      const TrainConfig& cfg, std::mt19937_64& rng) {
  const auto m = static_cast<int>(batch.logp_old.size());
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  const int mb_count = std::min(cfg.minibatches, m);
  const int mb_size = (m + mb_count - 1) / mb_count;
  std::vector<float> grad(policy.params().size());

  LevelLog log;
  log.samples = static_cast<std::size_t>(m);
  int updates = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int start = 0; start < m; start += mb_size) {
      const int len = std::min(mb_size, m - start);
      std::fill(grad.begin(), grad.end(), 0.0f);
      const auto stats = surrogate_gradient(
          policy, batch, std::span<const int>(order).subspan(start, len), cfg, grad);
      if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.value_loss) ||
          !all_finite(grad)) {
        throw std::range_error("non-finite loss in " + std::string(to_string(policy.level())));
      }
      nn::clip_grad_norm(grad, cfg.max_grad_norm);
      adam.step(policy.params(), grad);
      if (!all_finite(policy.params())) {
        throw std::range_error("non-finite parameters in " + std::string(to_string(policy.level())));
      }
      log.stats.policy_loss += stats.policy_loss;
      log.stats.value_loss += stats.value_loss;
      log.stats.entropy += stats.entropy;
      log.stats.approx_kl += stats.approx_kl;
      ++updates;
    }
  }
  if (updates > 0) {
    log.stats.policy_loss /= updates;
    log.stats.value_loss /= updates;
    log.stats.entropy /= updates;
    log.stats.approx_kl /= updates;
  }
  return log;
}

std::size_t obs_dim_of(Level level, const EnvDims& d) {
  switch (level) {
    case Level::Top:
      return d.top_obs;
    case Level::Low:
      return d.low_obs;
    case Level::Cooling:
      return d.cooling_obs;
  }
  return 0;
}

std::size_t act_dim_of(Level level, const EnvDims& d) {
  switch (level) {
    case Level::Top:
      return d.top_act;
    case Level::Low:
      return d.low_act;
    case Level::Cooling:
      return d.cooling_act;
  }
  return 0;
}

}  // namespace

std::string_view to_string(Algo algo) { return algo == Algo::PPO ? "ppo" : "a2c"; }

Algo algo_from_string(std::string_view name) {
  if (name == "ppo" || name == "PPO") return Algo::PPO;
  if (name == "a2c" || name == "A2C") return Algo::A2C;
  throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("TrainConfig: ") + what);
  };
  require(total_steps > 0, "total_steps must be positive");
  require(rollout_len > 0 && minibatches > 0 && epochs > 0, "rollout/minibatch/epoch counts must be positive");
  require(clip > 0.0 && (clip < 1.0 || algo == Algo::A2C || clip >= 1e6),
          "clip must lie in (0, 1)");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(gae_lambda > 0.0 && gae_lambda <= 1.0, "gae_lambda must lie in (0, 1]");
  require(ent_coef >= 0.0 && vf_coef >= 0.0, "loss coefficients must be nonnegative");
  require(lr > 0.0 && max_grad_norm > 0.0, "lr and max_grad_norm must be positive");
  require(!hidden.empty() && std::all_of(hidden.begin(), hidden.end(), [](int h) { return h > 0; }),
          "hidden layer sizes must be positive");
}

TrainConfig TrainConfig::effective() const {
  TrainConfig c = *this;
  if (algo == Algo::A2C) {
    c.epochs = 1;
    c.minibatches = 1;
    c.clip = std::numeric_limits<double>::infinity();
  }
  return c;
}

bool LevelSelection::trains(Level level) const noexcept {
  switch (level) {
    case Level::Top:
      return top;
    case Level::Low:
      return low;
    case Level::Cooling:
      return cooling;
  }
  return false;
}

double log_prob(const LevelPolicy& policy, std::span<const double> obs,
                std::span<const double> action) {
  const auto mu = policy.mean_action(obs);
  const auto log_std = policy.log_std();
  double lp = 0.0;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const double z = (action[j] - mu[j]) / std::exp(log_std[j]);
    lp += -0.5 * z * z - log_std[j] - kHalfLog2Pi;
  }
  return lp;
}

LossStats surrogate_gradient(const LevelPolicy& policy, const Batch& batch,
                             std::span<const int> idx, const TrainConfig& cfg,
                             std::span<float> grad) {
  const auto b = static_cast<Eigen::Index>(idx.size());
  const int k = policy.act_dim();
  nn::Mat obs(policy.obs_dim(), b), act(k, b);
  nn::Vec logp_old(b), adv(b), ret(b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const auto s = idx[static_cast<std::size_t>(c)];
    obs.col(c) = batch.obs.col(s);
    act.col(c) = batch.actions.col(s);
    logp_old(c) = batch.logp_old(s);
    adv(c) = batch.advantages(s);
    ret(c) = batch.returns(s);
  }

  const auto params = policy.params();
  nn::MlpLayout::Cache pcache, vcache;
  const nn::Mat pre = policy.policy_net().forward(params, obs, &pcache);
  const auto log_std = policy.log_std();

  LossStats stats;
  nn::Mat dpre(k, b);
  std::vector<double> dlog_std(static_cast<std::size_t>(k), 0.0);
  const double inv_b = 1.0 / static_cast<double>(b);
  for (Eigen::Index c = 0; c < b; ++c) {
    double lp = 0.0;
    std::vector<double> mu(k), z(k);
    for (int j = 0; j < k; ++j) {
      mu[j] = std::tanh(static_cast<double>(pre(j, c)));
      z[j] = (act(j, c) - mu[j]) / std::exp(log_std[j]);
      lp += -0.5 * z[j] * z[j] - log_std[j] - kHalfLog2Pi;
    }
    const double ratio = std::exp(lp - logp_old(c));
    const double a = adv(c);
    const double unclipped = ratio * a;
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * a;
    const bool through_ratio = unclipped <= clipped;
    stats.policy_loss -= std::min(unclipped, clipped) * inv_b;
    stats.approx_kl += (logp_old(c) - lp) * inv_b;

    const double g_logp = through_ratio ? -a * ratio * inv_b : 0.0;
    for (int j = 0; j < k; ++j) {
      const double sigma = std::exp(log_std[j]);
      const double dmu = g_logp * z[j] / sigma;
      dpre(j, c) = static_cast<float>(dmu * (1.0 - mu[j] * mu[j]));
      dlog_std[j] += g_logp * (z[j] * z[j] - 1.0);
    }
  }
  for (int j = 0; j < k; ++j) {
    stats.entropy += log_std[j] + 0.5 + kHalfLog2Pi;
    dlog_std[j] -= cfg.ent_coef;
  }
  policy.policy_net().backward(params, pcache, dpre, grad);
  for (int j = 0; j < k; ++j) grad[policy.log_std_offset() + j] += static_cast<float>(dlog_std[j]);

  const nn::Mat v = policy.value_net().forward(params, obs, &vcache);
  nn::Mat dv(1, b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const double err = static_cast<double>(v(0, c)) - ret(c);
    stats.value_loss += 0.5 * err * err * inv_b;
    dv(0, c) = static_cast<float>(cfg.vf_coef * err * inv_b);
  }
  policy.value_net().backward(params, vcache, dv, grad);
  return stats;
}

void compute_gae(std::span<const float> rewards, std::span<const float> values,
                 std::span<const std::uint8_t> done, float bootstrap, double gamma,
                 double lambda, std::span<float> advantages) {
  const auto n = rewards.size();
  double gae = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double next_value = k + 1 == n ? bootstrap : values[k + 1];
    const double live = done[k] ? 0.0 : 1.0;
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    gae = delta + gamma * lambda * live * gae;
    advantages[k] = static_cast<float>(gae);
  }
}

TrainResult ppo_train(const EnvFactory& make_env, LevelSelection train,
                      const PolicySet& pretrained, const TrainConfig& base_cfg, std::uint64_t seed,
                      const ProgressFn& progress) {
  base_cfg.validate();
  const auto cfg = base_cfg.effective();
  HierEnv env = make_env();
  const auto& dims = env.dims();
  const auto n = dims.n_dcs;
  const long episode_steps = env.config().episode_steps;

  TrainResult result;
  result.policies = pretrained;
  std::vector<nn::Adam> adams(3);
  std::vector<LevelBuffer> buffers(3);
  for (auto level : kLevels) {
    const auto li = static_cast<std::size_t>(level);
    if (!train.trains(level)) continue;
    auto& slot = result.policies.get(level);
    slot.emplace(level, static_cast<int>(obs_dim_of(level, dims)),
                 static_cast<int>(act_dim_of(level, dims)), cfg.hidden, cfg.log_std_init,
                 derive_seed(seed, 11 + li));
    adams[li] = nn::Adam(slot->params().size(), cfg.lr);
    buffers[li].obs_dim = slot->obs_dim();
    buffers[li].act_dim = slot->act_dim();
    buffers[li].streams = level == Level::Top ? 1 : n;
  }

  std::vector<ReturnScaler> scalers;
  for (const auto& b : buffers) scalers.emplace_back(b.streams, cfg.gamma);
  const auto shape = [&](Level level, std::size_t stream, double r, bool done) {
    if (!cfg.scale_rewards) return r;
    return scalers[static_cast<std::size_t>(level)].scale(stream, r, done);
  };
  double top_window_reward = 0.0;

  std::mt19937_64 rng(derive_seed(seed, 1));
  std::uint64_t episode = 0;
  auto obs = env.reset(derive_seed(seed, 1000 + episode));
  std::vector<double> latched_top;

  long env_steps = 0;
  int iteration = 0;
  while (env_steps < cfg.total_steps) {
    const PolicySet last_good = result.policies;
    for (auto& b : buffers) b.clear();
    double rollout_co2 = 0.0;
    long rollout_steps = 0;

    // Stop only on a top-level boundary so every top transition is complete.
    while (rollout_steps < cfg.rollout_len || !env.top_acts_now()) {
      RawActions raw;
      if (env.top_acts_now()) {
        latched_top.clear();
        if (train.top) {
          auto s = LevelActor(*result.policies.top, rng).sample({obs.top});
          push_sample(buffers[0], obs.top, s[0]);
          latched_top = to_raw_action(Level::Top, s[0].action);
        } else if (result.policies.top) {
          latched_top = to_raw_action(Level::Top, result.policies.top->mean_action(obs.top));
        }
      }
      raw.top = latched_top;

      const auto act_per_dc = [&](Level level, const std::vector<std::vector<double>>& level_obs,
                                  std::vector<std::vector<double>>& out) {
        const auto li = static_cast<std::size_t>(level);
        const auto& p = result.policies.get(level);
        if (train.trains(level)) {
          const auto s = LevelActor(*result.policies.get(level), rng).sample(level_obs);
          for (std::size_t i = 0; i < n; ++i) {
            push_sample(buffers[li], level_obs[i], s[i]);
            out.push_back(to_raw_action(level, s[i].action));
          }
        } else if (p) {
          for (const auto& o : level_obs) out.push_back(to_raw_action(level, p->mean_action(o)));
        }
      };
      act_per_dc(Level::Low, obs.low, raw.low);
      act_per_dc(Level::Cooling, obs.cooling, raw.cooling);

      auto step = env.step(raw);
      ++rollout_steps;
      ++env_steps;
      rollout_co2 += step.info.total_co2_kg;

      if (train.top) {
        top_window_reward += step.rewards.top;
        if (step.done || env.top_acts_now()) {
          buffers[0].reward.back() = static_cast<float>(shape(Level::Top, 0, top_window_reward, step.done));
          if (step.done) buffers[0].done.back() = 1;
          top_window_reward = 0.0;
        }
      }
      for (auto level : {Level::Low, Level::Cooling}) {
        if (!train.trains(level)) continue;
        auto& buf = buffers[static_cast<std::size_t>(level)];
        const auto& r = level == Level::Low ? step.rewards.low : step.rewards.cooling;
        for (std::size_t i = 0; i < n; ++i) {
          const auto idx = buf.size() - n + i;
          buf.reward[idx] = static_cast<float>(shape(level, i, r[i], step.done));
          buf.done[idx] = step.done ? 1 : 0;
        }
      }

      if (step.done) {
        ++episode;
        obs = env.reset(derive_seed(seed, 1000 + episode));
      } else {
        obs = std::move(step.obs);
      }
    }

    TrainLogRow row;
    row.iteration = iteration;
    row.env_steps = env_steps;
    row.episode_co2_kg = rollout_co2 / static_cast<double>(rollout_steps) * episode_steps;

    try {
      for (auto level : kLevels) {
        if (!train.trains(level)) continue;
        const auto li = static_cast<std::size_t>(level);
        auto& buf = buffers[li];
        if (buf.size() == 0) continue;
        auto& policy = *result.policies.get(level);
        LevelActor actor(policy, rng);
        std::vector<float> bootstrap(buf.streams, 0.0f);
        if (!buf.done.back()) {
          bootstrap = level == Level::Top ? actor.values({obs.top})
                                          : actor.values(level == Level::Low ? obs.low : obs.cooling);
        }
        const auto batch = make_batch(buf, bootstrap, cfg);
        auto log = update_level(policy, adams[li], batch, cfg, rng);
        (level == Level::Top ? row.top : level == Level::Low ? row.low : row.cooling) = log;
      }
    } catch (const std::range_error& e) {
      throw NumericalDivergence(e.what(), last_good, iteration);
    }

    result.log.push_back(row);
    if (progress && (iteration % 10 == 0)) {
      progress("iter " + std::to_string(iteration) + " steps " + std::to_string(env_steps) +
               " episode_co2_kg " + std::to_string(row.episode_co2_kg));
    }
    ++iteration;
  }
  return result;
}

EvalResult evaluate_policy(HierEnv env, const PolicySet& policies, std::uint64_t seed) {
  auto obs = env.reset(seed);
  while (!env.done()) {
    auto step = env.step(policy_actions(policies, obs));
    obs = std::move(step.obs);
  }
  EvalResult out;
  out.co2_kg = env.state().ledger.total_co2_kg();
  out.totals = env.state().ledger.cluster();
  out.log = env.state().ledger.log();
  return out;
}

std::string_view to_string(Configuration c) {
  switch (c) {
    case Configuration::Baseline:
      return "baseline";
    case Configuration::TopOnly:
      return "top_only";
    case Configuration::TopPlusPretrainedLow:
      return "top_plus_pretrained_low";
    case Configuration::JointHRL:
      return "joint_hrl";
  }
  return "unknown";
}

Configuration configuration_from_string(std::string_view name) {
  for (auto c : {Configuration::Baseline, Configuration::TopOnly,
                 Configuration::TopPlusPretrainedLow, Configuration::JointHRL}) {
    if (to_string(c) == name) return c;
  }
  throw ConfigError("unknown configuration '" + std::string(name) + "'");
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  // Shifted by the first sample so identical inputs give exactly zero spread.
  const double x0 = values.front();
  double shift = 0.0;
  for (double v : values) shift += v - x0;
  shift /= static_cast<double>(values.size());
  out.mean = x0 + shift;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - x0 - shift) * (v - x0 - shift);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

std::vector<double> ConfigurationResult::co2() const {
  std::vector<double> out;
  for (const auto& s : seeds) out.push_back(s.eval.co2_kg);
  return out;
}

MeanStd ConfigurationResult::summary() const { return mean_std(co2()); }

SeedResult run_configuration_seed(Configuration name, const EnvFactory& make_env,
                                  const TrainConfig& cfg, std::uint64_t seed,
                                  const ProgressFn& progress) {
  SeedResult r;
  r.seed = seed;
  switch (name) {
    case Configuration::Baseline:
      break;
    case Configuration::TopOnly: {
      auto trained = ppo_train(make_env, {true, false, false}, {}, cfg, seed, progress);
      r.policies = std::move(trained.policies);
      r.log = std::move(trained.log);
      break;
    }
    case Configuration::TopPlusPretrainedLow: {
      auto low = ppo_train(make_env, {false, true, true}, {}, cfg, derive_seed(seed, 77), progress);
      r.pretrained = low.policies;
      auto top = ppo_train(make_env, {true, false, false}, low.policies, cfg, seed, progress);
      r.policies = std::move(top.policies);
      r.log = std::move(low.log);
      for (auto row : top.log) {
        row.iteration += static_cast<int>(r.log.size());
        row.env_steps += cfg.total_steps;
        r.log.push_back(row);
      }
      break;
    }
    case Configuration::JointHRL: {
      auto joint_cfg = cfg;
      joint_cfg.total_steps = 2 * cfg.total_steps;
      auto trained = ppo_train(make_env, {true, true, true}, {}, joint_cfg, seed, progress);
      r.policies = std::move(trained.policies);
      r.log = std::move(trained.log);
      break;
    }
  }
  r.eval = evaluate_policy(make_env(), r.policies, derive_seed(seed, 5000));
  return r;
}

ConfigurationResult run_configuration(Configuration name, const EnvFactory& make_env,
                                      const TrainConfig& cfg,
                                      std::span<const std::uint64_t> seeds,
                                      const ProgressFn& progress) {
  ConfigurationResult out;
  out.name = name;
  for (auto seed : seeds) {
    if (progress) progress(std::string(to_string(name)) + " seed " + std::to_string(seed));
    out.seeds.push_back(run_configuration_seed(name, make_env, cfg, seed, progress));
  }
  return out;
}

}  // namespace dcc
