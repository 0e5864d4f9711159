#pragma once

#include <cstdint>
#include <vector>

#include "dcc/cluster.hpp"

namespace dcc {

/// Discrete top options of the oracle grid.
enum class TopChoice { Origin, Uniform, LowestCi };

/// Discrete per-DC options: defer everything or nothing, open-loop or eco cooling.
struct DcChoice {
  bool defer = false;
  bool eco = false;
};

struct OracleStep {
  TopChoice top = TopChoice::Origin;
  std::vector<DcChoice> dcs;
};

struct OracleResult {
  std::vector<OracleStep> actions;
  double co2_kg = 0.0;
  std::uint64_t evaluated = 0;  // leaf sequences examined
};

inline constexpr double kOracleSearchLimit = 1e7;

/// Decodes one grid point into a cluster action at absolute step `t`.
HierAction oracle_action(const OracleStep& step, const ClusterConfig& cfg, std::int64_t t);

/// Exhaustive minimum over the discrete grid for the first `steps` steps from
/// trace offset 0, with the queue flushed on the last step. Enumerates every
/// top sequence and, for each, every per-DC sequence; the DCs are independent
/// once the top sequence fixes the dispatch. Throws SearchSpaceTooLarge when
/// 3^S * N * 4^S exceeds kOracleSearchLimit.
OracleResult brute_force_optimum(const ClusterConfig& cfg, int steps);

/// Replays a grid sequence through cluster_step and returns the ledger CO2.
double replay_co2(const ClusterConfig& cfg, const std::vector<OracleStep>& actions);

}  // namespace dcc
