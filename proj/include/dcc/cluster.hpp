#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcc/dcmodel.hpp"
#include "dcc/dtq.hpp"
#include "dcc/traces.hpp"

namespace dcc {

using Matrix = std::vector<std::vector<double>>;

Matrix zeros(std::size_t n);

struct DcSite {
  std::string name;
  DcConfig config;
  TimeTrace ci;
  TimeTrace ambient;
  TimeTrace workload;
};

struct ClusterConfig {
  std::vector<DcSite> dcs;
  Matrix distance_km;
  Matrix transfer_cap_units;  // per ordered pair per step
  double kappa_kwh_per_unit_km = 0.0;
  double flexible_fraction = 0.5;
  double task_granularity_units = 10.0;
  int max_defer_steps = 96;
  // Queue capacity as a fraction of one full-DC step, times max_defer_steps.
  double dtq_capacity_fraction = 0.25;
  int step_seconds = 900;

  /// Throws ConfigError. `min_dcs` is 2 for a cluster; single-DC studies pass 1.
  void validate(std::size_t min_dcs = 2) const;
  std::size_t size() const noexcept { return dcs.size(); }
  /// Shortest trace length over all sites.
  std::size_t horizon() const noexcept;
  double dtq_capacity_units(std::size_t dc) const;
};

/// Top-level action: a point on the probability simplex over data centers.
class DispatchWeights {
 public:
  /// Throws DomainError unless w >= 0 and sum(w) = 1 within 1e-9.
  explicit DispatchWeights(std::vector<double> w);

  static DispatchWeights uniform(std::size_t n);
  static DispatchWeights softmax(std::span<const double> logits);
  static DispatchWeights one_hot(std::size_t n, std::size_t index);

  const std::vector<double>& values() const noexcept { return w_; }
  double operator[](std::size_t i) const { return w_.at(i); }
  std::size_t size() const noexcept { return w_.size(); }

 private:
  std::vector<double> w_;
};

struct TransferResult {
  double energy_kwh = 0.0;
  std::vector<double> energy_by_origin_kwh;
  Matrix clipped;
};

/// Clips each pair to its cap and charges kappa * distance per moved unit to
/// the origin.
TransferResult transfer_cost(const Matrix& moved_units, const ClusterConfig& cfg);

struct DispatchResult {
  std::vector<double> assigned;           // total load per DC after moves
  std::vector<double> assigned_flexible;  // flexible share of `assigned`
  std::vector<double> inflexible;
  Matrix moves;                           // after caps
  std::vector<double> rejected_to_origin; // cap-clipped load kept at origin
  std::vector<double> transfer_kwh;       // charged per origin
};

/// Converts simplex weights over the global flexible pool into feasible moves.
/// `weights == nullopt` keeps all load at its origin.
DispatchResult dispatch(std::span<const double> arrivals,
                        const std::optional<DispatchWeights>& weights,
                        std::span<const double> headroom, const ClusterConfig& cfg);

struct Co2Result {
  std::vector<double> per_dc_kg;
  double total_kg = 0.0;
};

double co2_kg(double energy_kwh, double ci_g_per_kwh) noexcept;
Co2Result co2(std::span<const double> energy_kwh, std::span<const double> ci);

struct LowAction {
  double defer_fraction = 0.0;
  double release_fraction = 1.0;
};

/// Joint decoded action of the three control levels.
struct HierAction {
  std::optional<DispatchWeights> top;  // nullopt: origin dispatch
  std::vector<LowAction> low;
  std::vector<CoolingAction> cooling;

  static HierAction baseline(const ClusterConfig& cfg);
};

struct ExecutedTask {
  std::uint64_t id;
  std::int64_t arrival_step;
  std::int64_t deadline_step;
  std::int64_t executed_step;
  double load;
};

struct DcStepRecord {
  double ci = 0.0;
  double ambient_c = 0.0;
  double arrived_units = 0.0;   // tasks created at this DC this step
  double executed_units = 0.0;  // run now + released
  double utilization = 0.0;
  double headroom_units = 0.0;
  double sla_units = 0.0;
  double dtq_occupancy = 0.0;
  int overtemp_groups = 0;
  double it_kwh = 0.0;
  double pump_kwh = 0.0;
  double chiller_kwh = 0.0;
  double transfer_kwh = 0.0;
  double co2_kg = 0.0;
  std::vector<ExecutedTask> executed;  // only when task recording is on

  double energy_kwh() const noexcept { return it_kwh + pump_kwh + chiller_kwh + transfer_kwh; }
  double cooling_kwh() const noexcept { return pump_kwh + chiller_kwh; }
};

struct StepReport {
  std::int64_t t = 0;
  std::vector<DcStepRecord> dcs;
  double total_co2_kg = 0.0;  // sum over dcs in index order
};

struct LedgerTotals {
  double it_kwh = 0.0;
  double pump_kwh = 0.0;
  double chiller_kwh = 0.0;
  double transfer_kwh = 0.0;
  double co2_kg = 0.0;
  double sla_units = 0.0;
  double arrived_units = 0.0;
  double executed_units = 0.0;
  long overtemp_steps = 0;

  double energy_kwh() const noexcept { return it_kwh + pump_kwh + chiller_kwh + transfer_kwh; }
  double cooling_kwh() const noexcept { return pump_kwh + chiller_kwh; }
  void add(const DcStepRecord& r) noexcept;
};

/// Energy, CO2, SLA and thermal accounting. Per-DC totals accumulate in step
/// order; the cluster CO2 total accumulates the per-step totals in step order.
class EmissionsLedger {
 public:
  EmissionsLedger() = default;
  explicit EmissionsLedger(std::size_t n_dcs, bool keep_log = true);

  void record(StepReport report);

  const std::vector<LedgerTotals>& per_dc() const noexcept { return per_dc_; }
  LedgerTotals cluster() const;  // sum of per-DC totals
  double total_co2_kg() const noexcept { return total_co2_kg_; }
  const std::vector<StepReport>& log() const noexcept { return log_; }
  std::size_t steps() const noexcept { return steps_; }

 private:
  std::vector<LedgerTotals> per_dc_;
  std::vector<StepReport> log_;
  double total_co2_kg_ = 0.0;
  std::size_t steps_ = 0;
  bool keep_log_ = true;
};

struct DcRuntime {
  DcState dc;
  DeferredQueue queue;
  std::uint64_t next_task_seq = 0;
};

struct ClusterState {
  std::int64_t t = 0;  // next step to simulate, relative to start_offset
  std::int64_t start_offset = 0;
  std::vector<DcRuntime> dcs;
  EmissionsLedger ledger;
  bool record_tasks = false;

  static ClusterState initial(const ClusterConfig& cfg, std::int64_t start_offset = 0,
                              bool keep_log = true);
};

/// Per-step exogenous inputs read from the traces at absolute index t.
struct StepInputs {
  std::vector<double> ci;
  std::vector<double> ambient_c;
  std::vector<double> arrivals;
  std::vector<double> headroom;
};

StepInputs read_inputs(const ClusterConfig& cfg, std::int64_t absolute_step);

/// Everything that happens inside one DC after dispatch: task generation, DTQ
/// split/enqueue/release, utilization, physics. Mutates `rt`.
DcStepRecord dc_tick(DcRuntime& rt, std::size_t dc_index, std::int64_t t,
                     double inflexible_units, double flexible_units, double ci,
                     double ambient_c, double transfer_kwh, const LowAction& low,
                     const CoolingAction& cooling, const ClusterConfig& cfg, bool flush,
                     bool record_tasks);

/// One tick of the whole cluster. With `flush`, every queued task is released
/// (end of episode). Throws TraceExhausted past the traces.
StepReport cluster_step(ClusterState& state, const HierAction& action,
                        const ClusterConfig& cfg, bool flush = false);

}  // namespace dcc
