#include "dcc/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dcc/error.hpp"

namespace dcc {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("ClusterConfig: " + what);
}

bool square(const Matrix& m, std::size_t n) {
  return m.size() == n &&
         std::all_of(m.begin(), m.end(), [n](const auto& row) { return row.size() == n; });
}

constexpr int kTaskIdShift = 48;

}  // namespace

Matrix zeros(std::size_t n) { return Matrix(n, std::vector<double>(n, 0.0)); }

void ClusterConfig::validate(std::size_t min_dcs) const {
  const auto n = dcs.size();
  require(n >= min_dcs, "needs at least " + std::to_string(min_dcs) + " data centers");
  require(square(distance_km, n), "distance_km must be N x N");
  require(square(transfer_cap_units, n), "transfer_cap_units must be N x N");
  for (std::size_t i = 0; i < n; ++i) {
    require(distance_km[i][i] == 0.0, "distance diagonal must be zero");
    for (std::size_t j = 0; j < n; ++j) {
      require(distance_km[i][j] >= 0.0, "distances must be nonnegative");
      require(distance_km[i][j] == distance_km[j][i], "distance_km must be symmetric");
      require(transfer_cap_units[i][j] >= 0.0, "transfer caps must be nonnegative");
    }
  }
  require(kappa_kwh_per_unit_km >= 0.0, "kappa must be nonnegative");
  require(flexible_fraction >= 0.0 && flexible_fraction <= 1.0,
          "flexible_fraction must lie in [0, 1]");
  require(task_granularity_units > 0.0, "task_granularity_units must be positive");
  require(max_defer_steps >= 0, "max_defer_steps must be nonnegative");
  require(dtq_capacity_fraction >= 0.0, "dtq_capacity_fraction must be nonnegative");
  require(step_seconds > 0 && 3600 % step_seconds == 0, "step_seconds must divide 3600");
  for (const auto& site : dcs) {
    site.config.validate();
    const std::pair<const TimeTrace*, TraceKind> traces[] = {
        {&site.ci, TraceKind::CarbonIntensity},
        {&site.ambient, TraceKind::AmbientTemp},
        {&site.workload, TraceKind::Workload}};
    for (const auto& [trace, kind] : traces) {
      require(trace->kind == kind, site.name + ": trace kind mismatch");
      require(trace->step_seconds == step_seconds,
              site.name + ": trace step differs from cluster step");
      dcc::validate(*trace);
    }
  }
}

std::size_t ClusterConfig::horizon() const noexcept {
  std::size_t h = dcs.empty() ? 0 : std::numeric_limits<std::size_t>::max();
  for (const auto& s : dcs) h = std::min({h, s.ci.size(), s.ambient.size(), s.workload.size()});
  return h;
}

double ClusterConfig::dtq_capacity_units(std::size_t dc) const {
  return dtq_capacity_fraction * dcs.at(dc).config.capacity_units() * max_defer_steps;
}

DispatchWeights::DispatchWeights(std::vector<double> w) : w_(std::move(w)) {
  if (w_.empty()) throw DomainError("dispatch weights are empty");
  double sum = 0.0;
  for (double x : w_) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("dispatch weight negative or non-finite");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DomainError("dispatch weights do not sum to 1");
}

DispatchWeights DispatchWeights::uniform(std::size_t n) {
  return DispatchWeights(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

DispatchWeights DispatchWeights::softmax(std::span<const double> logits) {
  if (logits.empty()) throw DomainError("softmax of empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  if (!std::isfinite(m)) throw DomainError("non-finite logits");
  std::vector<double> w(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(logits[i])) throw DomainError("non-finite logits");
    w[i] = std::exp(logits[i] - m);
    sum += w[i];
  }
  for (double& x : w) x /= sum;
  return DispatchWeights(std::move(w));
}

DispatchWeights DispatchWeights::one_hot(std::size_t n, std::size_t index) {
  std::vector<double> w(n, 0.0);
  w.at(index) = 1.0;
  return DispatchWeights(std::move(w));
}

TransferResult transfer_cost(const Matrix& moved_units, const ClusterConfig& cfg) {
  const auto n = cfg.size();
  if (!square(moved_units, n)) throw DomainError("moves must be N x N");
  TransferResult out{0.0, std::vector<double>(n, 0.0), zeros(n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double m = moved_units[i][j];
      if (i == j) {
        if (m != 0.0) throw DomainError("moves must have a zero diagonal");
        continue;
      }
      if (!(m >= 0.0)) throw DomainError("moves must be nonnegative");
      const double kept = std::min(m, cfg.transfer_cap_units[i][j]);
      out.clipped[i][j] = kept;
      out.energy_by_origin_kwh[i] += cfg.kappa_kwh_per_unit_km * cfg.distance_km[i][j] * kept;
    }
  }
  for (double e : out.energy_by_origin_kwh) out.energy_kwh += e;
  return out;
}

DispatchResult dispatch(std::span<const double> arrivals,
                        const std::optional<DispatchWeights>& weights,
                        std::span<const double> headroom, const ClusterConfig& cfg) {
  const auto n = cfg.size();
  if (arrivals.size() != n || headroom.size() != n) throw DomainError("dispatch size mismatch");
  for (double a : arrivals) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("arrivals must be finite and >= 0");
  }
  if (weights && weights->size() != n) throw DomainError("weights size mismatch");

  DispatchResult out;
  out.inflexible.resize(n);
  std::vector<double> flex(n);
  for (std::size_t i = 0; i < n; ++i) {
    flex[i] = cfg.flexible_fraction * arrivals[i];
    out.inflexible[i] = arrivals[i] - flex[i];
  }
  out.moves = zeros(n);
  out.rejected_to_origin.assign(n, 0.0);
  out.transfer_kwh.assign(n, 0.0);

  const double pool = std::accumulate(flex.begin(), flex.end(), 0.0);
  if (!weights || pool <= 0.0) {
    out.assigned_flexible = flex;
  } else {
    // Targets over the pool, clamped by headroom; excess spread over what
    // headroom remains, the final remainder goes back to the origins.
    std::vector<double> target(n);
    double excess = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      target[i] = (*weights)[i] * pool;
      const double room = std::max(0.0, headroom[i]);
      if (target[i] > room) {
        excess += target[i] - room;
        target[i] = room;
      }
    }
    if (excess > 0.0) {
      std::vector<double> remaining(n);
      double room_left = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        remaining[i] = std::max(0.0, std::max(0.0, headroom[i]) - target[i]);
        room_left += remaining[i];
      }
      const double spread = std::min(excess, room_left);
      if (room_left > 0.0) {
        for (std::size_t i = 0; i < n; ++i) target[i] += spread * remaining[i] / room_left;
      }
      const double leftover = excess - spread;
      for (std::size_t i = 0; i < n; ++i) target[i] += leftover * flex[i] / pool;
    }

    std::vector<double> surplus(n), deficit(n);
    double total_deficit = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      surplus[i] = std::max(0.0, flex[i] - target[i]);
      deficit[i] = std::max(0.0, target[i] - flex[i]);
      total_deficit += deficit[i];
    }
    Matrix wanted = zeros(n);
    if (total_deficit > 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i != j) wanted[i][j] = surplus[i] * deficit[j] / total_deficit;
        }
      }
    }
    auto transfer = transfer_cost(wanted, cfg);
    out.assigned_flexible = flex;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double m = transfer.clipped[i][j];
        out.assigned_flexible[i] -= m;
        out.assigned_flexible[j] += m;
        out.rejected_to_origin[i] += wanted[i][j] - m;
      }
    }
    for (double& x : out.assigned_flexible) x = std::max(0.0, x);
    out.moves = std::move(transfer.clipped);
    out.transfer_kwh = std::move(transfer.energy_by_origin_kwh);
  }

  out.assigned.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.assigned[i] = out.inflexible[i] + out.assigned_flexible[i];
  return out;
}

double co2_kg(double energy_kwh, double ci_g_per_kwh) noexcept {
  return energy_kwh * ci_g_per_kwh / 1000.0;
}

Co2Result co2(std::span<const double> energy_kwh, std::span<const double> ci) {
  if (energy_kwh.size() != ci.size()) throw DomainError("co2 size mismatch");
  Co2Result out;
  out.per_dc_kg.resize(ci.size());
  for (std::size_t i = 0; i < ci.size(); ++i) {
    if (!(energy_kwh[i] >= 0.0) || !(ci[i] >= 0.0)) throw DomainError("co2 inputs must be >= 0");
    out.per_dc_kg[i] = co2_kg(energy_kwh[i], ci[i]);
    out.total_kg += out.per_dc_kg[i];
  }
  return out;
}

HierAction HierAction::baseline(const ClusterConfig& cfg) {
  HierAction a;
  a.low.assign(cfg.size(), LowAction{});
  for (const auto& site : cfg.dcs) a.cooling.push_back(CoolingAction::open_loop(site.config));
  return a;
}

void LedgerTotals::add(const DcStepRecord& r) noexcept {
  it_kwh += r.it_kwh;
  pump_kwh += r.pump_kwh;
  chiller_kwh += r.chiller_kwh;
  transfer_kwh += r.transfer_kwh;
  co2_kg += r.co2_kg;
  sla_units += r.sla_units;
  arrived_units += r.arrived_units;
  executed_units += r.executed_units;
  overtemp_steps += r.overtemp_groups;
}

EmissionsLedger::EmissionsLedger(std::size_t n_dcs, bool keep_log)
    : per_dc_(n_dcs), keep_log_(keep_log) {}

void EmissionsLedger::record(StepReport report) {
  for (std::size_t i = 0; i < per_dc_.size(); ++i) per_dc_[i].add(report.dcs.at(i));
  total_co2_kg_ += report.total_co2_kg;
  ++steps_;
  if (keep_log_) log_.push_back(std::move(report));
}

LedgerTotals EmissionsLedger::cluster() const {
  LedgerTotals sum;
  for (const auto& d : per_dc_) {
    sum.it_kwh += d.it_kwh;
    sum.pump_kwh += d.pump_kwh;
    sum.chiller_kwh += d.chiller_kwh;
    sum.transfer_kwh += d.transfer_kwh;
    sum.co2_kg += d.co2_kg;
    sum.sla_units += d.sla_units;
    sum.arrived_units += d.arrived_units;
    sum.executed_units += d.executed_units;
    sum.overtemp_steps += d.overtemp_steps;
  }
  return sum;
}

ClusterState ClusterState::initial(const ClusterConfig& cfg, std::int64_t start_offset,
                                   bool keep_log) {
  ClusterState s;
  s.start_offset = start_offset;
  s.ledger = EmissionsLedger(cfg.size(), keep_log);
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    const auto& site = cfg.dcs[i];
    const double ambient = site.ambient.values.at(static_cast<std::size_t>(start_offset));
    s.dcs.push_back({DcState::at_equilibrium(site.config, ambient),
                     DeferredQueue(cfg.dtq_capacity_units(i)), 0});
  }
  return s;
}

StepInputs read_inputs(const ClusterConfig& cfg, std::int64_t absolute_step) {
  if (absolute_step < 0 || static_cast<std::size_t>(absolute_step) >= cfg.horizon()) {
    throw TraceExhausted("step " + std::to_string(absolute_step) + " beyond trace horizon " +
                         std::to_string(cfg.horizon()));
  }
  const auto k = static_cast<std::size_t>(absolute_step);
  StepInputs in;
  for (const auto& site : cfg.dcs) {
    in.ci.push_back(site.ci.values[k]);
    in.ambient_c.push_back(site.ambient.values[k]);
    const double arrivals = site.workload.values[k] * site.config.capacity_units();
    in.arrivals.push_back(arrivals);
    const double inflexible = arrivals - cfg.flexible_fraction * arrivals;
    in.headroom.push_back(std::max(0.0, site.config.capacity_units() - inflexible));
  }
  return in;
}

DcStepRecord dc_tick(DcRuntime& rt, std::size_t dc_index, std::int64_t t,
                     double inflexible_units, double flexible_units, double ci,
                     double ambient_c, double transfer_kwh, const LowAction& low,
                     const CoolingAction& cooling, const ClusterConfig& cfg, bool flush,
                     bool record_tasks) {
  const auto& dc_cfg = cfg.dcs.at(dc_index).config;
  const auto next_id = [&] {
    return (static_cast<std::uint64_t>(dc_index) << kTaskIdShift) | rt.next_task_seq++;
  };
  const std::int64_t deadline = t + cfg.max_defer_steps;

  std::vector<Task> arrivals;
  if (inflexible_units > 0.0) arrivals.push_back({next_id(), t, inflexible_units, deadline, false});
  if (flexible_units > 0.0) {
    const double g = cfg.task_granularity_units;
    const auto whole = static_cast<std::size_t>(std::floor(flexible_units / g));
    for (std::size_t k = 0; k < whole; ++k) arrivals.push_back({next_id(), t, g, deadline, true});
    const double rem = flexible_units - static_cast<double>(whole) * g;
    if (rem > 1e-9 || (whole == 0 && rem > 0.0)) {
      arrivals.push_back({next_id(), t, rem, deadline, true});
    } else if (rem > 0.0) {
      arrivals.back().load += rem;
    }
  }

  DcStepRecord rec;
  rec.ci = ci;
  rec.ambient_c = ambient_c;
  rec.arrived_units = total_load(arrivals);

  auto split = split_arrivals(arrivals, low.defer_fraction);
  auto rejected = rt.queue.enqueue(std::move(split.to_defer));
  auto& run_now = split.to_run_now;
  run_now.insert(run_now.end(), rejected.begin(), rejected.end());

  const double capacity = dc_cfg.capacity_units();
  const double run_now_load = total_load(run_now);
  const double headroom = std::max(0.0, capacity - run_now_load);
  const auto released = flush ? rt.queue.drain()
                              : rt.queue.release(t, headroom, low.release_fraction);

  rec.executed_units = run_now_load + total_load(released);
  rec.headroom_units = headroom;
  rec.utilization = std::min(1.0, rec.executed_units / capacity);
  rec.sla_units = std::max(0.0, rec.executed_units - capacity);
  rec.dtq_occupancy = rt.queue.occupancy();
  if (record_tasks) {
    for (const std::vector<Task>* group : std::initializer_list<const std::vector<Task>*>{&run_now, &released}) {
      for (const auto& task : *group) {
        rec.executed.push_back({task.id, task.arrival_step, task.deadline_step, t, task.load});
      }
    }
  }

  const auto step = dc_step(rt.dc, rec.utilization, cooling, ambient_c,
                            static_cast<double>(cfg.step_seconds), dc_cfg);
  rt.dc = step.state;
  rec.overtemp_groups = step.overtemp_count();
  rec.it_kwh = step.energy_kwh.it;
  rec.pump_kwh = step.energy_kwh.pump;
  rec.chiller_kwh = step.energy_kwh.chiller;
  rec.transfer_kwh = transfer_kwh;
  rec.co2_kg = co2_kg(rec.energy_kwh(), ci);
  return rec;
}

StepReport cluster_step(ClusterState& state, const HierAction& action,
                        const ClusterConfig& cfg, bool flush) {
  const auto n = cfg.size();
  if (action.low.size() != n || action.cooling.size() != n) {
    throw DomainError("HierAction sized for " + std::to_string(action.low.size()) +
                      " DCs, cluster has " + std::to_string(n));
  }
  const auto in = read_inputs(cfg, state.start_offset + state.t);
  const auto routed = dispatch(in.arrivals, action.top, in.headroom, cfg);

  StepReport report;
  report.t = state.t;
  report.dcs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    report.dcs.push_back(dc_tick(state.dcs[i], i, state.t, routed.inflexible[i],
                                 routed.assigned_flexible[i], in.ci[i], in.ambient_c[i],
                                 routed.transfer_kwh[i], action.low[i], action.cooling[i], cfg,
                                 flush, state.record_tasks));
    report.total_co2_kg += report.dcs.back().co2_kg;
  }
  state.ledger.record(report);
  ++state.t;
  return report;
}

}  // namespace dcc
