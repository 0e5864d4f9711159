// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Pass criterion names to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dcc/dcmodel.hpp"
#include "dcc/harness.hpp"
#include "dcc/oracle.hpp"
#include "test_support.hpp"

using namespace dcc;
namespace fs = std::filesystem;

namespace {

// Tolerances and thresholds.
constexpr double kLadderMinReductionPct = 5.0;
constexpr double kLadderJointSlack = 0.01;
constexpr double kCoolingMinReduction = 0.15;
constexpr double kGreedyOracleGap = 0.20;
constexpr double kJointOracleGap = 0.10;
constexpr double kOracleSlackKg = 1e-9;
constexpr int kConservationScenarios = 100;
constexpr double kConservationRelTol = 1e-9;
constexpr double kClosedFormRelTol = 0.01;
constexpr double kHeatBalanceRelTol = 0.02;
constexpr double kCubicRelTol = 1e-12;
constexpr double kToyDeferMin = 0.9;
constexpr int kToyIterations = 200;
constexpr double kVanillaCosineMin = 0.999;

fs::path scenario_file(const std::string& name) {
  return fs::path(DCC_SOURCE_DIR) / "scenarios" / name;
}

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "dcc_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

void log(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

// Reports shared between the ladder and reporting criteria.
std::map<std::string, RunReport> g_ladder;
std::string g_compare_text;

Outcome ladder() {
  const auto root = work_dir() / "ladder";
  const auto scenario = scenario_file("three_dc.json");
  std::vector<fs::path> dirs;
  for (const char* c : {"baseline", "top_only", "top_plus_pretrained_low", "joint_hrl"}) {
    log(std::string("training ") + c);
    TrainOptions opt;
    opt.scenario = scenario;
    opt.configuration = c;
    opt.out_dir = root / c;
    opt.quiet = true;
    std::ostringstream out, err;
    if (cli_train(opt, out, err) != kExitOk) return {false, std::string(c) + ": " + err.str()};
    g_ladder[c] = read_summary(opt.out_dir);
    dirs.push_back(opt.out_dir);
    log(out.str().substr(0, out.str().find('\n')));
  }
  std::ostringstream table, err;
  if (cli_compare({dirs, root / "comparison.json"}, table, err) != kExitOk) return {false, err.str()};
  g_compare_text = table.str();
  std::cerr << g_compare_text;

  const double b = g_ladder["baseline"].co2().mean;
  const double top = g_ladder["top_only"].co2().mean;
  const double pre = g_ladder["top_plus_pretrained_low"].co2().mean;
  const double joint = g_ladder["joint_hrl"].co2().mean;
  const double reduction = 100.0 * (b - joint) / b;
  bool seeds_ok = true;
  for (const auto& [name, r] : g_ladder) seeds_ok = seeds_ok && r.seeds.size() == 10;
  const bool ok = seeds_ok && b > top && top > joint && joint <= pre * (1.0 + kLadderJointSlack) &&
                  reduction >= kLadderMinReductionPct;
  return {ok, fmt("baseline %.1f > top_only %.1f > joint_hrl %.1f; pretrained %.1f", b, top, joint, pre) +
                  fmt("; reduction %.2f%%", reduction)};
}

Outcome losses_finite() {
  const auto root = work_dir() / "ladder";
  long rows = 0;
  for (const char* c : {"top_only", "top_plus_pretrained_low", "joint_hrl"}) {
    if (!fs::exists(root / c)) return {false, "ladder runs missing"};
    for (const auto& entry : fs::recursive_directory_iterator(root / c)) {
      if (entry.path().filename() != "train_log.csv") continue;
      std::ifstream in(entry.path());
      std::string line;
      std::getline(in, line);
      std::vector<std::string> header;
      std::stringstream hs(line);
      for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
      while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::size_t i = 0;
        for (std::string cell; std::getline(ls, cell, ','); ++i) {
          const auto& col = header.at(i);
          const bool loss = col.ends_with("_policy_loss") || col.ends_with("_value_loss");
          if (loss && !std::isfinite(std::stod(cell))) return {false, entry.path().string() + " " + col};
        }
        ++rows;
      }
    }
  }
  return {rows > 0, fmt("%.0f logged iterations checked", static_cast<double>(rows))};
}

Outcome cooling() {
  const auto sc = load_scenario(scenario_file("single_dc.json"));
  const auto seed = sc.seeds.front();
  const auto base = run_episode(sc.make_env(), baseline_controller(), seed);
  const auto greedy = run_episode(sc.make_env(), greedy_controller(sc.greedy), seed);
  const double b = base.totals.cooling_kwh();
  const double g = greedy.totals.cooling_kwh();
  const double reduction = (b - g) / b;
  const bool ok = reduction >= kCoolingMinReduction && greedy.totals.overtemp_steps == 0;
  return {ok, fmt("cooling %.1f -> %.1f kWh (%.1f%%), overtemp steps %.0f", b, g, 100 * reduction,
                  static_cast<double>(greedy.totals.overtemp_steps))};
}

Outcome oracle() {
  std::ostringstream detail;
  bool ok = true;
  for (const char* name : {"tiny_a.json", "tiny_b.json"}) {
    const auto sc = load_scenario(scenario_file(name));
    const auto best = brute_force_optimum(*sc.cluster, sc.env.episode_steps);
    std::map<std::string, double> worst;
    auto note = [&](const std::string& who, double co2) {
      worst[who] = std::max(worst.count(who) ? worst[who] : 0.0, co2);
      if (best.co2_kg > co2 + kOracleSlackKg) ok = false;
    };
    for (auto seed : sc.seeds) {
      note("baseline", run_episode(sc.make_env(), baseline_controller(), seed).co2_kg);
      note("greedy", run_episode(sc.make_env(), greedy_controller(sc.greedy), seed).co2_kg);
    }
    for (auto c : {Configuration::TopOnly, Configuration::TopPlusPretrainedLow, Configuration::JointHRL}) {
      log(std::string(name) + " " + std::string(to_string(c)));
      const auto r = run_configuration(c, sc.env_factory(), sc.train, sc.seeds);
      for (const auto& s : r.seeds) note(std::string(to_string(c)), s.eval.co2_kg);
    }
    const double g_gap = worst["greedy"] / best.co2_kg - 1.0;
    const double j_gap = worst["joint_hrl"] / best.co2_kg - 1.0;
    ok = ok && g_gap <= kGreedyOracleGap && j_gap <= kJointOracleGap;
    detail << (detail.tellp() > 0 ? "; " : "") << name << fmt(": oracle %.4f, greedy +%.2f%%, joint_hrl +%.2f%%", best.co2_kg,
                          100 * g_gap, 100 * j_gap);
  }
  return {ok, detail.str()};
}

Outcome conservation() {
  std::mt19937_64 rng(2024);
  double worst_rel = 0.0;
  long tasks = 0;
  for (int k = 0; k < kConservationScenarios; ++k) {
    const std::size_t steps = 24 + rng() % 72;
    auto cl = std::make_shared<const ClusterConfig>(dcc::testing::random_cluster(rng, steps));
    EnvConfig e;
    e.episode_steps = static_cast<int>(steps);
    e.top_period_steps = 1 + static_cast<int>(rng() % 4);
    HierEnv env(cl, e);
    env.reset(rng());
    env.set_record_tasks(true);
    std::set<std::uint64_t> seen_ids;
    double arrived = 0.0, executed = 0.0, task_load = 0.0;
    while (!env.done()) {
      const auto s = env.step(dcc::testing::random_actions(rng, env.dims()));
      for (std::size_t i = 0; i < s.info.dcs.size(); ++i) {
        const auto& d = s.info.dcs[i];
        arrived += d.arrived_units;
        executed += d.executed_units;
        for (const auto& task : d.executed) {
          if (task.executed_step < task.arrival_step || task.executed_step > task.deadline_step) {
            return {false, fmt("scenario %.0f: task outside its window", k)};
          }
          if (!seen_ids.insert(task.id).second) return {false, fmt("scenario %.0f: task ran twice", k)};
          task_load += task.load;
          ++tasks;
        }
      }
    }
    const double rel = std::abs(executed - arrived) / std::max(1.0, arrived);
    worst_rel = std::max({worst_rel, rel, std::abs(task_load - executed) / std::max(1.0, executed)});
    if (rel > kConservationRelTol) return {false, fmt("scenario %.0f: executed %.12g vs arrived %.12g", k, executed, arrived)};

    const auto& ledger = env.state().ledger;
    std::vector<LedgerTotals> per_dc(cl->size());
    double total = 0.0;
    for (const auto& report : ledger.log()) {
      for (std::size_t i = 0; i < report.dcs.size(); ++i) per_dc[i].add(report.dcs[i]);
      total += report.total_co2_kg;
    }
    if (total != ledger.total_co2_kg()) return {false, fmt("scenario %.0f: cluster CO2 mismatch", k)};
    for (std::size_t i = 0; i < per_dc.size(); ++i) {
      const auto& a = per_dc[i];
      const auto& b = ledger.per_dc()[i];
      const bool same = a.it_kwh == b.it_kwh && a.pump_kwh == b.pump_kwh && a.chiller_kwh == b.chiller_kwh &&
                        a.transfer_kwh == b.transfer_kwh && a.co2_kg == b.co2_kg &&
                        a.sla_units == b.sla_units && a.arrived_units == b.arrived_units &&
                        a.executed_units == b.executed_units && a.overtemp_steps == b.overtemp_steps;
      if (!same) return {false, fmt("scenario %.0f dc %.0f: ledger differs from step log", k, i)};
    }
  }
  return {worst_rel <= kConservationRelTol,
          fmt("%.0f scenarios, %.0f tasks, worst relative imbalance %.2e", kConservationScenarios,
              static_cast<double>(tasks), worst_rel)};
}

Outcome physics() {
  DcConfig scalar;
  scalar.n_blade_groups = 1;
  scalar.heat_capacity_j_per_k = 5000;
  scalar.h0_w_per_k = 20;
  scalar.flow_max_kg_s = 2.0;
  const double exact = 25.0 + (200.0 / 20.0) * (1.0 - std::exp(-900.0 * 20.0 / 5000.0));
  const auto t = thermal_step(std::vector<double>{25.0}, CoolingAction{1.0, 25.0, {1.0}},
                              std::vector<double>{200.0}, 900, scalar);
  const double closed_err = std::abs(t[0] - exact) / exact;

  DcConfig c;
  double balance_err = 0.0;
  for (double u : {0.2, 0.6, 1.0}) {
    auto s = DcState::at_equilibrium(c, 25.0);
    DcStepResult r;
    for (int k = 0; k < 200; ++k) {
      r = dc_step(s, u, CoolingAction::open_loop(c), 25.0, 900, c);
      s = r.state;
    }
    balance_err = std::max(balance_err, std::abs(r.heat_generated_w - r.heat_removed_w) / r.heat_generated_w);
  }

  double cubic_err = 0.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int k = 0; k < 100; ++k) {
    const double s = u(rng);
    const auto p = cooling_power({s, c.setpoint_lo_c, {}}, 0.0, 20, c);
    cubic_err = std::max(cubic_err, std::abs(p.pump_w - c.pump_p_max_w * s * s * s) / (c.pump_p_max_w * s * s * s));
  }
  const bool ok = closed_err <= kClosedFormRelTol && balance_err <= kHeatBalanceRelTol && cubic_err <= kCubicRelTol;
  return {ok, fmt("closed form %.3f%%, heat balance %.3f%%, cubic %.1e", 100 * closed_err, 100 * balance_err,
                  cubic_err)};
}

Outcome determinism() {
  const auto root = work_dir() / "determinism";
  std::ostringstream out, err;
  const auto scenario = scenario_file("three_dc.json");
  for (const char* run : {"a", "b"}) {
    if (cli_simulate({scenario, 7, root / run, "greedy"}, out, err) != kExitOk) return {false, err.str()};
  }
  const bool same_csv = slurp(root / "a" / "metrics.csv") == slurp(root / "b" / "metrics.csv");

  const auto sc = load_scenario(scenario_file("three_dc.json"));
  auto cfg = sc.train;
  cfg.total_steps = 4 * cfg.rollout_len;
  const auto x = ppo_train(sc.env_factory(), {true, true, true}, {}, cfg, 11);
  const auto y = ppo_train(sc.env_factory(), {true, true, true}, {}, cfg, 11);
  write_train_log_csv(x.log, root / "log_a.csv");
  write_train_log_csv(y.log, root / "log_b.csv");
  const bool same_log = !x.log.empty() && slurp(root / "log_a.csv") == slurp(root / "log_b.csv") &&
                        x.policies.top->param_vector() == y.policies.top->param_vector();
  return {same_csv && same_log, std::string("metrics.csv ") + (same_csv ? "identical" : "differs") +
                                    ", training log " + (same_log ? "identical" : "differs")};
}

Outcome ppo_toy() {
  const auto sc = load_scenario(scenario_file("toy_alternating.json"));
  auto cfg = sc.train;
  cfg.total_steps = static_cast<long>(kToyIterations) * cfg.rollout_len;
  const auto& ci = sc.cluster->dcs[0].ci.values;
  double worst = 1.0;
  std::ostringstream per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto r = ppo_train(sc.env_factory(), {false, true, false}, {}, cfg, seed);
    auto env = sc.make_env();
    auto obs = env.reset(seed);
    double hi = 0.0;
    int n_hi = 0;
    while (!env.done()) {
      const auto t = env.t();
      if (ci.at(static_cast<std::size_t>(t)) > 400.0) {
        const auto mu = r.policies.low->mean_action(obs.low[0]);
        hi += expected_unit_fraction(mu[0], std::exp(r.policies.low->log_std()[0]));
        ++n_hi;
      }
      obs = env.step(policy_actions(r.policies, obs)).obs;
    }
    const double p = hi / n_hi;
    worst = std::min(worst, p);
    per_seed << fmt(" %.3f", p);
  }
  return {worst >= kToyDeferMin, "defer probability at high CI per seed:" + per_seed.str() +
                                     fmt(" after %.0f iterations", kToyIterations)};
}

Outcome vanilla_gradient() {
  LevelPolicy p(Level::Low, 10, 2, {64, 64}, -0.5, 4);
  std::mt19937_64 rng(12);
  std::normal_distribution<float> z;
  for (float& w : p.params()) w += 0.05f * z(rng);
  const int m = 64;
  Batch b{nn::Mat(10, m), nn::Mat(2, m), nn::Vec(m), nn::Vec(m), nn::Vec(m)};
  std::vector<std::vector<double>> obs(m, std::vector<double>(10)), act(m, std::vector<double>(2));
  for (int c = 0; c < m; ++c) {
    for (int i = 0; i < 10; ++i) b.obs(i, c) = static_cast<float>(obs[c][i] = z(rng));
    for (int j = 0; j < 2; ++j) b.actions(j, c) = static_cast<float>(act[c][j] = 0.6 * z(rng));
    b.logp_old(c) = static_cast<float>(log_prob(p, obs[c], act[c]));
    b.advantages(c) = z(rng);
    b.returns(c) = 0.0f;
  }
  std::vector<int> idx(m);
  for (int c = 0; c < m; ++c) idx[c] = c;
  TrainConfig cfg;
  cfg.algo = Algo::A2C;
  cfg.ent_coef = 0.0;
  cfg.vf_coef = 0.0;
  std::vector<float> grad(p.params().size(), 0.0f);
  surrogate_gradient(p, b, idx, cfg.effective(), grad);

  // Vanilla estimator: -mean(A * grad log pi), by central differences.
  const std::size_t n_policy = p.log_std_offset() + 2;
  const float eps = 1e-2f;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < n_policy; ++k) {
    LevelPolicy plus = p, minus = p;
    plus.params()[k] += eps;
    minus.params()[k] -= eps;
    double g = 0.0;
    for (int c = 0; c < m; ++c) {
      g -= b.advantages(c) * (log_prob(plus, obs[c], act[c]) - log_prob(minus, obs[c], act[c])) / (2.0 * eps) / m;
    }
    dot += g * grad[k];
    na += g * g;
    nb += static_cast<double>(grad[k]) * grad[k];
  }
  const double cosine = dot / std::sqrt(na * nb);
  return {cosine >= kVanillaCosineMin, fmt("cosine %.6f over %.0f policy parameters", cosine,
                                           static_cast<double>(n_policy))};
}

Outcome reporting() {
  if (g_ladder.size() != 4 || g_compare_text.empty()) return {false, "ladder did not run"};
  const auto j = nlohmann::json::parse(slurp(work_dir() / "ladder" / "comparison.json"));
  int checked = 0;
  for (const auto& row : j.at("rows")) {
    const auto& report = g_ladder.at(row.at("configuration").get<std::string>());
    std::vector<double> co2;
    for (const auto& s : report.seeds) co2.push_back(s.co2_kg);
    const auto ms = mean_std(co2);
    const auto text = format_mean_std(ms);
    const bool in_table = g_compare_text.find(text) != std::string::npos;
    const bool in_json = row.at("co2_kg_formatted").get<std::string>() == text &&
                         row.at("n_seeds").get<int>() == static_cast<int>(co2.size());
    if (!in_table || !in_json || text.find(" ± ") == std::string::npos) {
      return {false, "row " + row.at("configuration").get<std::string>() + " lacks " + text};
    }
    ++checked;
  }
  return {checked == 4, fmt("%.0f rows carry mean ± std over seeds", checked)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ladder", ladder},           {"ppo-losses-finite", losses_finite},
      {"reporting", reporting},     {"cooling", cooling},
      {"oracle", oracle},           {"conservation", conservation},
      {"physics", physics},         {"determinism", determinism},
      {"ppo-toy-defer", ppo_toy},   {"ppo-vanilla-gradient", vanilla_gradient},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << fmt(" [%.0fs]", secs)
              << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
