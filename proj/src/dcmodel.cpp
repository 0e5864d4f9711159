#include "dcc/dcmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dcc/error.hpp"

namespace dcc {

namespace {

constexpr double kFlowExponent = 0.8;
constexpr double kJoulesPerKwh = 3.6e6;

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("DcConfig: ") + what);
}

}  // namespace

void DcConfig::validate() const {
  require(n_servers > 0, "n_servers must be positive");
  require(p_idle_w >= 0.0 && p_peak_w > p_idle_w, "need p_peak_w > p_idle_w >= 0");
  require(n_blade_groups > 0, "n_blade_groups must be positive");
  require(heat_capacity_j_per_k > 0.0, "heat_capacity_j_per_k must be positive");
  require(h0_w_per_k > 0.0, "h0_w_per_k must be positive");
  require(pump_p_max_w >= 0.0, "pump_p_max_w must be nonnegative");
  require(flow_max_kg_s > 0.0, "flow_max_kg_s must be positive");
  require(setpoint_lo_c < setpoint_hi_c, "setpoint range must be increasing");
  require(cpu_temp_limit_c > setpoint_hi_c, "cpu_temp_limit_c must exceed setpoint_hi_c");
  require(cop_base > 0.0 && cop_ambient_slope >= 0.0 && cop_setpoint_slope >= 0.0,
          "COP coefficients must be nonnegative with cop_base > 0");
  require(max_substep_s > 0.0, "max_substep_s must be positive");
}

CoolingAction CoolingAction::open_loop(const DcConfig& cfg) {
  return {1.0, cfg.setpoint_lo_c,
          std::vector<double>(static_cast<std::size_t>(cfg.n_blade_groups), 1.0)};
}

CoolingAction CoolingAction::eco(const DcConfig& cfg) {
  return {0.5, cfg.setpoint_hi_c,
          std::vector<double>(static_cast<std::size_t>(cfg.n_blade_groups), 1.0)};
}

CoolingAction CoolingAction::clamped(const DcConfig& cfg) const {
  CoolingAction out;
  out.pump_speed = std::clamp(pump_speed, 0.0, 1.0);
  out.coolant_setpoint_c = std::clamp(coolant_setpoint_c, cfg.setpoint_lo_c, cfg.setpoint_hi_c);
  out.valve_open.assign(static_cast<std::size_t>(cfg.n_blade_groups), 1.0);
  for (std::size_t i = 0; i < out.valve_open.size() && i < valve_open.size(); ++i) {
    out.valve_open[i] = std::clamp(valve_open[i], 0.0, 1.0);
  }
  return out;
}

DcState DcState::at_equilibrium(const DcConfig& cfg, double ambient_c) {
  DcState s;
  s.group_temps_c.assign(static_cast<std::size_t>(cfg.n_blade_groups), ambient_c);
  s.last_action = CoolingAction::open_loop(cfg);
  return s;
}

double it_power(double utilization, const DcConfig& cfg) {
  if (!(utilization >= 0.0 && utilization <= 1.0)) {
    throw DomainError("utilization " + std::to_string(utilization) + " outside [0, 1]");
  }
  return cfg.n_servers * (cfg.p_idle_w + (cfg.p_peak_w - cfg.p_idle_w) * utilization);
}

std::vector<double> group_flow(const CoolingAction& action, const DcConfig& cfg) {
  const auto a = action.clamped(cfg);
  const auto g = a.valve_open.size();
  const double total = a.pump_speed * cfg.flow_max_kg_s;
  const double open = std::accumulate(a.valve_open.begin(), a.valve_open.end(), 0.0);
  std::vector<double> flow(g);
  for (std::size_t i = 0; i < g; ++i) {
    flow[i] = open < 1e-9 ? total / static_cast<double>(g) : total * a.valve_open[i] / open;
  }
  return flow;
}

double convective_coefficient(double flow_kg_s, const DcConfig& cfg) {
  if (flow_kg_s <= 0.0) return 0.0;
  const double ref = cfg.flow_max_kg_s / cfg.n_blade_groups;
  return cfg.h0_w_per_k * std::pow(flow_kg_s / ref, kFlowExponent);
}

std::vector<double> thermal_step(std::span<const double> temps_c,
                                 const CoolingAction& action,
                                 std::span<const double> heat_w, double dt_s,
                                 const DcConfig& cfg) {
  if (!(dt_s > 0.0)) throw DomainError("thermal_step needs dt_s > 0");
  if (temps_c.size() != heat_w.size()) throw DomainError("temps/heat size mismatch");
  const auto a = action.clamped(cfg);
  const auto flow = group_flow(a, cfg);

  const int substeps = std::max(1, static_cast<int>(std::ceil(dt_s / cfg.max_substep_s)));
  const double h = dt_s / substeps;
  const double c = cfg.heat_capacity_j_per_k;
  std::vector<double> temps(temps_c.begin(), temps_c.end());
  for (std::size_t i = 0; i < temps.size(); ++i) {
    const double hc = convective_coefficient(flow[i], cfg);
    const double q = heat_w[i];
    if (q < 0.0) throw DomainError("negative heat input");
    double t = temps[i];
    for (int k = 0; k < substeps; ++k) t += h / c * (q - hc * (t - a.coolant_setpoint_c));
    temps[i] = t;
  }
  return temps;
}

double coefficient_of_performance(double coolant_setpoint_c, double ambient_c,
                                  const DcConfig& cfg) {
  const double cop = cfg.cop_base - cfg.cop_ambient_slope * (ambient_c - 20.0) +
                     cfg.cop_setpoint_slope * (coolant_setpoint_c - cfg.setpoint_lo_c);
  return std::max(1.0, cop);
}

CoolingPower cooling_power(const CoolingAction& action, double heat_removed_w,
                           double ambient_c, const DcConfig& cfg) {
  if (heat_removed_w < 0.0) throw DomainError("negative heat removed");
  const auto a = action.clamped(cfg);
  const double s = a.pump_speed;
  return {cfg.pump_p_max_w * s * s * s,
          heat_removed_w / coefficient_of_performance(a.coolant_setpoint_c, ambient_c, cfg)};
}

int DcStepResult::overtemp_count() const noexcept {
  return static_cast<int>(std::count(overtemp.begin(), overtemp.end(), true));
}

DcStepResult dc_step(const DcState& state, double utilization,
                     const CoolingAction& action, double ambient_c, double dt_s,
                     const DcConfig& cfg) {
  const double it_w = it_power(utilization, cfg);
  const auto a = action.clamped(cfg);
  const auto g = static_cast<std::size_t>(cfg.n_blade_groups);
  const std::vector<double> heat(g, it_w / static_cast<double>(g));

  DcStepResult out;
  out.state.utilization = utilization;
  out.state.group_temps_c = thermal_step(state.group_temps_c, a, heat, dt_s, cfg);
  out.state.last_action = a;

  const auto flow = group_flow(a, cfg);
  double removed = 0.0;
  out.overtemp.resize(g);
  for (std::size_t i = 0; i < g; ++i) {
    const double t = out.state.group_temps_c[i];
    removed += convective_coefficient(flow[i], cfg) * std::max(0.0, t - a.coolant_setpoint_c);
    out.overtemp[i] = t > cfg.cpu_temp_limit_c;
  }
  const auto cp = cooling_power(a, removed, ambient_c, cfg);
  out.state.power_w = {it_w, cp.pump_w, cp.chiller_w};
  out.energy_kwh = {it_w * dt_s / kJoulesPerKwh, cp.pump_w * dt_s / kJoulesPerKwh,
                    cp.chiller_w * dt_s / kJoulesPerKwh};
  out.state.last_energy_kwh = out.energy_kwh;
  out.heat_generated_w = it_w;
  out.heat_removed_w = removed;
  return out;
}

double pue(const EnergyBreakdown& energy) {
  if (!(energy.it > 0.0)) throw UndefinedMetric("PUE undefined with zero IT energy");
  return energy.total() / energy.it;
}

}  // namespace dcc
