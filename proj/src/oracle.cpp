#include "dcc/oracle.hpp"

#include <cmath>
#include <limits>

#include "dcc/error.hpp"

namespace dcc {

namespace {

std::optional<DispatchWeights> top_weights(TopChoice choice, const ClusterConfig& cfg,
                                           std::int64_t t) {
  const auto n = cfg.size();
  switch (choice) {
    case TopChoice::Origin:
      return std::nullopt;
    case TopChoice::Uniform:
      return DispatchWeights::uniform(n);
    case TopChoice::LowestCi: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (cfg.dcs[i].ci.values.at(t) < cfg.dcs[best].ci.values.at(t)) best = i;
      }
      return DispatchWeights::one_hot(n, best);
    }
  }
  return std::nullopt;
}

LowAction low_of(const DcChoice& c) { return c.defer ? LowAction{1.0, 0.0} : LowAction{0.0, 1.0}; }

CoolingAction cooling_of(const DcChoice& c, const DcConfig& cfg) {
  return c.eco ? CoolingAction::eco(cfg) : CoolingAction::open_loop(cfg);
}

DcChoice choice_of(int code) { return {(code & 1) != 0, (code & 2) != 0}; }

/// Per-DC inputs fixed by a top sequence.
struct DcPlan {
  std::vector<double> inflexible, flexible, transfer_kwh, ci, ambient;
};

struct DcSearch {
  const ClusterConfig& cfg;
  std::size_t dc;
  const DcPlan& plan;
  int steps;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_codes;
  std::vector<int> codes;
  std::uint64_t leaves = 0;

  DcSearch(const ClusterConfig& c, std::size_t i, const DcPlan& p, int s)
      : cfg(c), dc(i), plan(p), steps(s) {}

  void run(const DcRuntime& rt, int t, double acc) {
    if (t == steps) {
      ++leaves;
      if (acc < best) {
        best = acc;
        best_codes = codes;
      }
      return;
    }
    for (int code = 0; code < 4; ++code) {
      DcRuntime next = rt;
      const auto c = choice_of(code);
      const auto rec = dc_tick(next, dc, t, plan.inflexible[t], plan.flexible[t], plan.ci[t],
                               plan.ambient[t], plan.transfer_kwh[t], low_of(c),
                               cooling_of(c, cfg.dcs[dc].config), cfg, t + 1 == steps, false);
      codes.push_back(code);
      run(next, t + 1, acc + rec.co2_kg);
      codes.pop_back();
    }
  }
};

}  // namespace

HierAction oracle_action(const OracleStep& step, const ClusterConfig& cfg, std::int64_t t) {
  HierAction a;
  a.top = top_weights(step.top, cfg, t);
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    a.low.push_back(low_of(step.dcs.at(i)));
    a.cooling.push_back(cooling_of(step.dcs.at(i), cfg.dcs[i].config));
  }
  return a;
}

double replay_co2(const ClusterConfig& cfg, const std::vector<OracleStep>& actions) {
  auto state = ClusterState::initial(cfg, 0, false);
  const auto s = actions.size();
  for (std::size_t t = 0; t < s; ++t) {
    cluster_step(state, oracle_action(actions[t], cfg, static_cast<std::int64_t>(t)), cfg,
                 t + 1 == s);
  }
  return state.ledger.total_co2_kg();
}

OracleResult brute_force_optimum(const ClusterConfig& cfg, int steps) {
  cfg.validate(1);
  const auto n = cfg.size();
  if (steps <= 0) throw InvalidStep("oracle needs at least one step");
  if (static_cast<std::size_t>(steps) > cfg.horizon()) {
    throw TraceExhausted("oracle horizon exceeds traces");
  }
  const double space = std::pow(3.0, steps) * static_cast<double>(n) * std::pow(4.0, steps);
  if (space > kOracleSearchLimit) {
    throw SearchSpaceTooLarge("oracle grid of " + std::to_string(space) + " leaves exceeds " +
                              std::to_string(kOracleSearchLimit));
  }

  std::vector<StepInputs> inputs;
  for (int t = 0; t < steps; ++t) inputs.push_back(read_inputs(cfg, t));
  const auto initial = ClusterState::initial(cfg, 0, false);

  OracleResult best;
  best.co2_kg = std::numeric_limits<double>::infinity();
  std::vector<TopChoice> tops(static_cast<std::size_t>(steps), TopChoice::Origin);
  const auto top_count = static_cast<std::uint64_t>(std::llround(std::pow(3.0, steps)));
  for (std::uint64_t code = 0; code < top_count; ++code) {
    auto rest = code;
    for (int t = 0; t < steps; ++t) {
      tops[t] = static_cast<TopChoice>(rest % 3);
      rest /= 3;
    }
    std::vector<DcPlan> plans(n);
    for (int t = 0; t < steps; ++t) {
      const auto routed = dispatch(inputs[t].arrivals, top_weights(tops[t], cfg, t),
                                   inputs[t].headroom, cfg);
      for (std::size_t i = 0; i < n; ++i) {
        plans[i].inflexible.push_back(routed.inflexible[i]);
        plans[i].flexible.push_back(routed.assigned_flexible[i]);
        plans[i].transfer_kwh.push_back(routed.transfer_kwh[i]);
        plans[i].ci.push_back(inputs[t].ci[i]);
        plans[i].ambient.push_back(inputs[t].ambient_c[i]);
      }
    }
    double total = 0.0;
    std::vector<std::vector<int>> dc_codes(n);
    std::uint64_t leaves = 0;
    for (std::size_t i = 0; i < n; ++i) {
      DcSearch search(cfg, i, plans[i], steps);
      search.run(initial.dcs[i], 0, 0.0);
      total += search.best;
      dc_codes[i] = search.best_codes;
      leaves += search.leaves;
    }
    best.evaluated += leaves;
    if (total < best.co2_kg) {
      best.co2_kg = total;
      best.actions.assign(static_cast<std::size_t>(steps), {});
      for (int t = 0; t < steps; ++t) {
        best.actions[t].top = tops[t];
        for (std::size_t i = 0; i < n; ++i) best.actions[t].dcs.push_back(choice_of(dc_codes[i][t]));
      }
    }
  }
  // Report the exact cluster_step value of the chosen sequence.
  best.co2_kg = replay_co2(cfg, best.actions);
  return best;
}

}  // namespace dcc
