#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcc/envs.hpp"
#include "dcc/ppo.hpp"

namespace dcc {

inline constexpr int kScenarioSchema = 1;

struct GreedyParams {
  double beta = 5.0;
  double quantile = 0.5;
};

/// A fully resolved experiment description: cluster, traces, env and trainer
/// settings. `resolved` echoes every field with defaults filled in.
struct Scenario {
  std::string name;
  std::filesystem::path source;
  std::shared_ptr<const ClusterConfig> cluster;
  EnvConfig env;
  TrainConfig train;
  GreedyParams greedy;
  std::vector<std::uint64_t> seeds;
  nlohmann::json resolved;

  HierEnv make_env() const { return HierEnv(cluster, env); }
  EnvFactory env_factory() const;
};

/// Parses a schema-1 scenario. Relative trace paths resolve against the
/// scenario file's directory. Throws ConfigError (or the trace loader's
/// errors) on any invalid or missing input.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir);

nlohmann::json to_json(const DcConfig& cfg);
nlohmann::json to_json(const EnvConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);

/// Parses a comma-separated seed list such as "1,2,3" or a range "1-10".
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

}  // namespace dcc
