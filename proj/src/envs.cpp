#include "dcc/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "dcc/error.hpp"

namespace dcc {

namespace {

void require_finite(std::span<const double> raw, const char* what) {
  for (double x : raw) {
    if (!std::isfinite(x)) throw DomainError(std::string("non-finite ") + what + " action");
  }
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

struct TimeFeatures {
  double hour_sin, hour_cos, dow_sin, dow_cos;
};

TimeFeatures time_features(std::int64_t unix_seconds) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double day_seconds = 86400.0;
  const auto seconds_of_day = static_cast<double>(((unix_seconds % 86400) + 86400) % 86400);
  const double hour = seconds_of_day / 3600.0;
  // 1970-01-01 was a Thursday; shift so Monday is day 0.
  const double days = std::floor(static_cast<double>(unix_seconds) / day_seconds);
  const double dow = std::fmod(std::fmod(days + 3.0, 7.0) + 7.0, 7.0) + hour / 24.0;
  return {std::sin(kTwoPi * hour / 24.0), std::cos(kTwoPi * hour / 24.0),
          std::sin(kTwoPi * dow / 7.0), std::cos(kTwoPi * dow / 7.0)};
}

}  // namespace

LowAction decode_low(std::span<const double> raw) {
  if (raw.empty()) return LowAction{};
  if (raw.size() != kLowActDim) throw DomainError("low action needs 2 values");
  require_finite(raw, "low");
  return {clamp01(raw[0]), clamp01(raw[1])};
}

CoolingAction decode_cooling(std::span<const double> raw, const DcConfig& cfg) {
  if (raw.empty()) return CoolingAction::open_loop(cfg);
  const auto g = static_cast<std::size_t>(cfg.n_blade_groups);
  if (raw.size() != 2 + g) throw DomainError("cooling action needs 2 + G values");
  require_finite(raw, "cooling");
  CoolingAction a;
  a.pump_speed = clamp01(raw[0]);
  a.coolant_setpoint_c =
      cfg.setpoint_lo_c + clamp01(raw[1]) * (cfg.setpoint_hi_c - cfg.setpoint_lo_c);
  a.valve_open.resize(g);
  for (std::size_t i = 0; i < g; ++i) a.valve_open[i] = clamp01(raw[2 + i]);
  return a;
}

std::optional<DispatchWeights> decode_top(std::span<const double> raw, std::size_t n_dcs) {
  if (raw.empty()) return std::nullopt;
  if (raw.size() != n_dcs) throw DomainError("top action needs one logit per DC");
  require_finite(raw, "top");
  return DispatchWeights::softmax(raw);
}

double baseline_step_co2(const ClusterConfig& cluster, int episode_steps) {
  auto state = ClusterState::initial(cluster, 0, false);
  const auto action = HierAction::baseline(cluster);
  for (int t = 0; t < episode_steps; ++t) cluster_step(state, action, cluster, t + 1 == episode_steps);
  return state.ledger.total_co2_kg() / episode_steps;
}

HierEnv::HierEnv(std::shared_ptr<const ClusterConfig> cluster, EnvConfig cfg)
    : cluster_(std::move(cluster)), cfg_(cfg) {
  if (!cluster_) throw ConfigError("HierEnv needs a cluster");
  cluster_->validate(1);
  if (cfg_.top_period_steps < 1) throw ConfigError("top_period_steps must be >= 1");
  if (cfg_.episode_steps < 1) throw ConfigError("episode_steps must be >= 1");
  if (static_cast<std::size_t>(cfg_.episode_steps) > cluster_->horizon()) {
    throw ConfigError("traces cover " + std::to_string(cluster_->horizon()) +
                      " steps, episode needs " + std::to_string(cfg_.episode_steps));
  }
  if (!(cfg_.scales.ci_halfrange > 0.0 && cfg_.scales.ambient_halfrange > 0.0 &&
        cfg_.scales.temp_halfrange > 0.0)) {
    throw ConfigError("observation half-ranges must be positive");
  }
  const auto n = cluster_->size();
  const auto g = cluster_->dcs.front().config.n_blade_groups;
  for (const auto& site : cluster_->dcs) {
    if (site.config.n_blade_groups != g) {
      throw ConfigError("all data centers must share the blade-group count");
    }
  }
  dims_.n_dcs = n;
  dims_.blade_groups = static_cast<std::size_t>(g);
  dims_.top_obs = kTopFeaturesPerDc * n + kTimeFeatures;
  dims_.top_act = n;
  dims_.cooling_act = 2 + static_cast<std::size_t>(g);

  const double scale = baseline_step_co2(*cluster_, cfg_.episode_steps);
  reward_scale_ = scale > 0.0 ? scale : 1.0;
  state_ = ClusterState::initial(*cluster_, 0);
}

Observations HierEnv::reset(std::uint64_t seed) {
  std::int64_t offset = 0;
  const auto slack = cluster_->horizon() - static_cast<std::size_t>(cfg_.episode_steps);
  if (cfg_.random_start && slack > 0) {
    std::mt19937_64 rng(seed);
    offset = static_cast<std::int64_t>(
        std::uniform_int_distribution<std::size_t>(0, slack)(rng));
  }
  const bool record = state_.record_tasks;
  state_ = ClusterState::initial(*cluster_, offset);
  state_.record_tasks = record;
  latched_top_.reset();
  last_assigned_.assign(cluster_->size(), 0.0);
  started_ = true;
  return observe();
}

Observations HierEnv::observe() const {
  const auto& cl = *cluster_;
  const auto& sc = cfg_.scales;
  const auto n = cl.size();
  const auto horizon = static_cast<std::int64_t>(cl.horizon());
  const auto abs_t = std::min(state_.start_offset + state_.t, horizon - 1);
  const auto k = static_cast<std::size_t>(abs_t);
  const auto in = read_inputs(cl, abs_t);
  const auto tf = time_features(cl.dcs.front().ci.time_at(k));

  const auto ci_norm = [&](double ci) { return (ci - sc.ci_center) / sc.ci_halfrange; };
  const auto amb_norm = [&](double a) { return (a - sc.ambient_center) / sc.ambient_halfrange; };
  const auto temp_norm = [&](double t) { return (t - sc.temp_center) / sc.temp_halfrange; };

  Observations obs;
  obs.top.reserve(dims_.top_obs);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& site = cl.dcs[i];
    const auto& rt = state_.dcs[i];
    const double cap = site.config.capacity_units();
    const double qcap = rt.queue.capacity();
    const double occupancy = qcap > 0.0 ? rt.queue.occupancy() / qcap : 0.0;
    const auto forecast = forecast_window(site.ci, k, kForecastSteps);
    const double ci_now = ci_norm(in.ci[i]);
    const double util = rt.dc.utilization;

    obs.top.push_back(ci_now);
    for (double f : forecast) obs.top.push_back(ci_norm(f));
    obs.top.push_back(util);
    obs.top.push_back(in.headroom[i] / cap);
    obs.top.push_back(amb_norm(in.ambient_c[i]));
    obs.top.push_back(occupancy);

    std::vector<double> low;
    low.reserve(kLowObsDim);
    low.push_back(ci_now);
    for (double f : forecast) low.push_back(ci_norm(f));
    low.push_back(util);
    low.push_back(occupancy);
    low.push_back(last_assigned_.empty() ? 0.0 : last_assigned_[i] / cap);
    low.push_back(tf.hour_sin);
    low.push_back(tf.hour_cos);
    obs.low.push_back(std::move(low));

    const auto& temps = rt.dc.group_temps_c;
    const double t_max = *std::max_element(temps.begin(), temps.end());
    const double t_mean = std::accumulate(temps.begin(), temps.end(), 0.0) / temps.size();
    const auto& c = site.config;
    const auto& last = rt.dc.last_action;
    const double sp_frac = (last.coolant_setpoint_c - c.setpoint_lo_c) / (c.setpoint_hi_c - c.setpoint_lo_c);
    obs.cooling.push_back({temp_norm(t_max), temp_norm(t_mean), util, amb_norm(in.ambient_c[i]),
                           2.0 * sp_frac - 1.0, last.pump_speed});
  }
  obs.top.push_back(tf.hour_sin);
  obs.top.push_back(tf.hour_cos);
  obs.top.push_back(tf.dow_sin);
  obs.top.push_back(tf.dow_cos);
  return obs;
}

HierAction HierEnv::decode(const RawActions& actions) {
  const auto& cl = *cluster_;
  const auto n = cl.size();
  HierAction a;
  if (top_acts_now()) {
    latched_top_ = cfg_.mask.top ? std::nullopt : decode_top(actions.top, n);
  }
  a.top = latched_top_;

  const auto entry = [](const std::vector<std::vector<double>>& v, std::size_t i) {
    return i < v.size() ? std::span<const double>(v[i]) : std::span<const double>();
  };
  if (!cfg_.mask.low && !actions.low.empty() && actions.low.size() != n) {
    throw DomainError("low actions needed for every DC");
  }
  if (!cfg_.mask.cooling && !actions.cooling.empty() && actions.cooling.size() != n) {
    throw DomainError("cooling actions needed for every DC");
  }
  for (std::size_t i = 0; i < n; ++i) {
    a.low.push_back(cfg_.mask.low ? LowAction{} : decode_low(entry(actions.low, i)));
    const auto& dc = cl.dcs[i].config;
    a.cooling.push_back(cfg_.mask.cooling ? CoolingAction::open_loop(dc)
                                          : decode_cooling(entry(actions.cooling, i), dc));
  }
  return a;
}

EnvStep HierEnv::step(const RawActions& actions) {
  if (!started_) throw EpisodeFinished("step called before reset");
  if (done()) throw EpisodeFinished("episode already finished");
  const bool latched = top_acts_now();
  const auto action = decode(actions);
  const bool last = state_.t + 1 == cfg_.episode_steps;

  EnvStep out;
  out.top_latched = latched;
  out.info = cluster_step(state_, action, *cluster_, last);

  const auto n = cluster_->size();
  out.rewards.top = -out.info.total_co2_kg / reward_scale_;
  out.rewards.low.resize(n);
  out.rewards.cooling.resize(n);
  last_assigned_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = out.info.dcs[i];
    last_assigned_[i] = r.arrived_units;
    out.rewards.low[i] = -r.co2_kg / reward_scale_ - cfg_.lambda_sla * r.sla_units;
    out.rewards.cooling[i] =
        -co2_kg(r.cooling_kwh(), r.ci) / reward_scale_ - cfg_.lambda_temp * r.overtemp_groups;
  }
  out.done = done();
  out.obs = observe();
  return out;
}

}  // namespace dcc
