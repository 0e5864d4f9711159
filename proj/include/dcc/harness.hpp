#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcc/ppo.hpp"
#include "dcc/scenario.hpp"

namespace dcc {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitRuntime = 3, kExitDivergence = 4 };

using Controller = std::function<RawActions(const Observations&, const HierEnv&)>;

/// Runs one episode with `controller` from reset(seed).
EvalResult run_episode(HierEnv env, const Controller& controller, std::uint64_t seed);

Controller baseline_controller();
Controller greedy_controller(const GreedyParams& params);
Controller policy_controller(PolicySet policies);

/// One row per step per DC.
void write_metrics_csv(const std::vector<StepReport>& log, const ClusterConfig& cluster,
                       const std::filesystem::path& path);
void write_train_log_csv(const std::vector<TrainLogRow>& log, const std::filesystem::path& path);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

struct SeedReport {
  std::uint64_t seed = 0;
  LedgerTotals totals;
  double co2_kg = 0.0;
  std::string metrics_file;  // relative to the report directory
  std::string metrics_sha256;
};

struct RunReport {
  std::string scenario;
  std::string configuration;
  std::string algo;
  std::vector<SeedReport> seeds;
  double wall_clock_s = 0.0;
  nlohmann::json config;

  MeanStd co2() const;
  nlohmann::json to_json() const;
  /// Throws ParseError on a malformed report.
  static RunReport from_json(const nlohmann::json& j);
};

/// Writes summary.json with a content hash over everything else in it.
void write_summary(const RunReport& report, const std::filesystem::path& dir);
RunReport read_summary(const std::filesystem::path& dir_or_file);

/// "X ± Y" with `decimals` places.
std::string format_mean_std(const MeanStd& m, int decimals = 1);

struct ComparisonRow {
  std::string label;
  MeanStd co2;
  double delta_pct = 0.0;  // vs the first row
};

std::vector<ComparisonRow> compare_reports(const std::vector<RunReport>& reports);
std::string format_comparison(const std::vector<ComparisonRow>& rows);

/// Number of seeds run concurrently: DCC_SIM_THREADS when set, else 1.
unsigned seed_threads();

struct SimulateOptions {
  std::filesystem::path scenario;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir;
  std::string controller = "baseline";  // baseline | greedy
};

struct TrainOptions {
  std::filesystem::path scenario;
  std::string configuration = "joint_hrl";
  std::string algo;  // empty: scenario default
  std::string seeds; // empty: scenario seeds
  long total_steps = 0;  // 0: scenario default
  std::filesystem::path out_dir;
  bool quiet = false;
};

struct EvaluateOptions {
  std::filesystem::path scenario;
  std::filesystem::path policy_dir;  // a train output directory; empty with controller
  std::string controller;            // baseline | greedy, when no policy_dir
  std::string seeds;
  std::filesystem::path out_dir;
};

struct CompareOptions {
  std::vector<std::filesystem::path> runs;
  std::filesystem::path out;  // comparison.json path; empty: ./comparison.json
};

int cli_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err);
int cli_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);
int cli_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err);
int cli_compare(const CompareOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace dcc
