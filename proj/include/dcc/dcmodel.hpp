#pragma once

#include <span>
#include <vector>

namespace dcc {

/// Physical parameters of one liquid-cooled data center. Units are in the
/// field names; blade groups are identical lumped thermal nodes.
struct DcConfig {
  int n_servers = 1000;
  double p_idle_w = 120.0;
  double p_peak_w = 320.0;
  int n_blade_groups = 4;
  double heat_capacity_j_per_k = 1.2e7;  // per group
  double h0_w_per_k = 2000.0;            // per group at reference flow
  double pump_p_max_w = 20000.0;
  double flow_max_kg_s = 40.0;
  double setpoint_lo_c = 18.0;
  double setpoint_hi_c = 40.0;
  double cpu_temp_limit_c = 85.0;
  double cop_base = 3.5;
  double cop_ambient_slope = 0.06;
  double cop_setpoint_slope = 0.05;
  double max_substep_s = 60.0;

  /// Throws ConfigError.
  void validate() const;
  double capacity_units() const noexcept { return static_cast<double>(n_servers); }
};

struct CoolingAction {
  double pump_speed = 1.0;
  double coolant_setpoint_c = 18.0;
  std::vector<double> valve_open;

  /// Fixed industry-style setting: full pump, coldest setpoint, valves open.
  static CoolingAction open_loop(const DcConfig& cfg);
  /// Half pump, warmest setpoint, valves open.
  static CoolingAction eco(const DcConfig& cfg);

  CoolingAction clamped(const DcConfig& cfg) const;
};

struct PowerBreakdown {
  double it = 0.0;
  double pump = 0.0;
  double chiller = 0.0;

  double total() const noexcept { return it + pump + chiller; }
};

// Same layout as PowerBreakdown, in kWh.
struct EnergyBreakdown {
  double it = 0.0;
  double pump = 0.0;
  double chiller = 0.0;

  double cooling() const noexcept { return pump + chiller; }
  double total() const noexcept { return it + pump + chiller; }
};

struct DcState {
  double utilization = 0.0;
  std::vector<double> group_temps_c;
  PowerBreakdown power_w;
  EnergyBreakdown last_energy_kwh;
  CoolingAction last_action;

  /// Idle DC whose blades sit at the ambient temperature.
  static DcState at_equilibrium(const DcConfig& cfg, double ambient_c);
};

double it_power(double utilization, const DcConfig& cfg);

/// Coolant mass flow per blade group, split by valve opening.
std::vector<double> group_flow(const CoolingAction& action, const DcConfig& cfg);

/// h(m) = h0 * (m / m_ref)^0.8 with m_ref = flow_max / G.
double convective_coefficient(double flow_kg_s, const DcConfig& cfg);

/// Explicit Euler on C dT/dt = q - h(m)(T - T_cool), sub-stepped to at most
/// cfg.max_substep_s.
std::vector<double> thermal_step(std::span<const double> temps_c,
                                 const CoolingAction& action,
                                 std::span<const double> heat_w, double dt_s,
                                 const DcConfig& cfg);

double coefficient_of_performance(double coolant_setpoint_c, double ambient_c,
                                  const DcConfig& cfg);

struct CoolingPower {
  double pump_w = 0.0;
  double chiller_w = 0.0;
};

CoolingPower cooling_power(const CoolingAction& action, double heat_removed_w,
                           double ambient_c, const DcConfig& cfg);

struct DcStepResult {
  DcState state;
  EnergyBreakdown energy_kwh;
  std::vector<bool> overtemp;
  double heat_generated_w = 0.0;
  double heat_removed_w = 0.0;

  int overtemp_count() const noexcept;
};

DcStepResult dc_step(const DcState& state, double utilization,
                     const CoolingAction& action, double ambient_c, double dt_s,
                     const DcConfig& cfg);

/// Total over IT energy. Throws UndefinedMetric when IT energy is zero.
double pue(const EnergyBreakdown& energy);

}  // namespace dcc
