#include "dcc/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "dcc/error.hpp"

namespace dcc {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

json totals_json(const LedgerTotals& t) {
  return {{"it_kwh", t.it_kwh},
          {"pump_kwh", t.pump_kwh},
          {"chiller_kwh", t.chiller_kwh},
          {"transfer_kwh", t.transfer_kwh},
          {"energy_kwh", t.energy_kwh()},
          {"co2_kg", t.co2_kg},
          {"sla_units", t.sla_units},
          {"arrived_units", t.arrived_units},
          {"executed_units", t.executed_units},
          {"overtemp_steps", t.overtemp_steps}};
}

LedgerTotals totals_from_json(const json& j) {
  LedgerTotals t;
  t.it_kwh = j.at("it_kwh").get<double>();
  t.pump_kwh = j.at("pump_kwh").get<double>();
  t.chiller_kwh = j.at("chiller_kwh").get<double>();
  t.transfer_kwh = j.at("transfer_kwh").get<double>();
  t.co2_kg = j.at("co2_kg").get<double>();
  t.sla_units = j.at("sla_units").get<double>();
  t.arrived_units = j.value("arrived_units", 0.0);
  t.executed_units = j.value("executed_units", 0.0);
  t.overtemp_steps = j.at("overtemp_steps").get<long>();
  return t;
}

SeedReport seed_report(std::uint64_t seed, const EvalResult& eval, const fs::path& dir,
                       const std::string& metrics_rel, const ClusterConfig& cluster) {
  write_metrics_csv(eval.log, cluster, dir / metrics_rel);
  SeedReport r;
  r.seed = seed;
  r.totals = eval.totals;
  r.co2_kg = eval.co2_kg;
  r.metrics_file = metrics_rel;
  r.metrics_sha256 = sha256_file(dir / metrics_rel);
  return r;
}

/// Runs `job(i)` for i in [0, n) on up to seed_threads() workers.
void for_each_seed(std::size_t n, const std::function<void(std::size_t)>& job) {
  const auto workers = std::min<std::size_t>(seed_threads(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericalDivergence& e) {
    err << "error: " << e.what() << " (iteration " << e.iteration() << ")\n";
    return kExitDivergence;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const RangeViolation& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NonUniformInterval& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const EmptyTrace& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidParams& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    err << "error: malformed JSON: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

Controller controller_by_name(const std::string& name, const Scenario& s) {
  if (name == "baseline") return baseline_controller();
  if (name == "greedy") return greedy_controller(s.greedy);
  throw ConfigError("unknown controller '" + name + "' (expected baseline or greedy)");
}

json versions_json() {
  return {{"dcc", kVersion},
          {"summary_schema", 1},
          {"scenario_schema", kScenarioSchema},
          {"policy_format", "DCCPOL01"},
          {"binding_api", "dcc_env_v1"}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

EvalResult run_episode(HierEnv env, const Controller& controller, std::uint64_t seed) {
  auto obs = env.reset(seed);
  while (!env.done()) {
    auto step = env.step(controller(obs, env));
    obs = std::move(step.obs);
  }
  return {env.state().ledger.total_co2_kg(), env.state().ledger.cluster(), env.state().ledger.log()};
}

Controller baseline_controller() {
  return [](const Observations& obs, const HierEnv&) { return baseline_policy(obs); };
}

Controller greedy_controller(const GreedyParams& params) {
  return [params](const Observations& obs, const HierEnv& env) {
    return greedy_policy(obs, env.dims(), params.beta, params.quantile);
  };
}

Controller policy_controller(PolicySet policies) {
  return [p = std::move(policies)](const Observations& obs, const HierEnv&) {
    return policy_actions(p, obs);
  };
}

void write_metrics_csv(const std::vector<StepReport>& log, const ClusterConfig& cluster,
                       const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,dc,ci_g_per_kwh,ambient_c,it_kwh,pump_kwh,chiller_kwh,transfer_kwh,energy_kwh,"
         "co2_kg,utilization,dtq_occupancy,arrived_units,executed_units,sla_units,"
         "overtemp_groups\n";
  for (const auto& step : log) {
    for (std::size_t i = 0; i < step.dcs.size(); ++i) {
      const auto& r = step.dcs[i];
      out << step.t << ',' << cluster.dcs.at(i).name << ',' << num(r.ci) << ',' << num(r.ambient_c)
          << ',' << num(r.it_kwh) << ',' << num(r.pump_kwh) << ',' << num(r.chiller_kwh) << ','
          << num(r.transfer_kwh) << ',' << num(r.energy_kwh()) << ',' << num(r.co2_kg) << ','
          << num(r.utilization) << ',' << num(r.dtq_occupancy) << ',' << num(r.arrived_units)
          << ',' << num(r.executed_units) << ',' << num(r.sla_units) << ',' << r.overtemp_groups
          << '\n';
    }
  }
}

void write_train_log_csv(const std::vector<TrainLogRow>& log, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iteration,env_steps,episode_co2_kg";
  for (const char* level : {"top", "low", "cooling"}) {
    out << ',' << level << "_policy_loss," << level << "_value_loss," << level << "_entropy,"
        << level << "_approx_kl";
  }
  out << '\n';
  for (const auto& row : log) {
    out << row.iteration << ',' << row.env_steps << ',' << num(row.episode_co2_kg);
    for (const auto* l : {&row.top, &row.low, &row.cooling}) {
      out << ',' << num(l->stats.policy_loss) << ',' << num(l->stats.value_loss) << ','
          << num(l->stats.entropy) << ',' << num(l->stats.approx_kl);
    }
    out << '\n';
  }
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

MeanStd RunReport::co2() const {
  std::vector<double> v;
  for (const auto& s : seeds) v.push_back(s.co2_kg);
  return mean_std(v);
}

json RunReport::to_json() const {
  json seeds_json = json::array();
  for (const auto& s : seeds) {
    seeds_json.push_back({{"seed", s.seed},
                          {"co2_kg", s.co2_kg},
                          {"totals", totals_json(s.totals)},
                          {"metrics_file", s.metrics_file},
                          {"metrics_sha256", s.metrics_sha256}});
  }
  const auto m = co2();
  return {{"scenario", scenario},
          {"configuration", configuration},
          {"algo", algo},
          {"seeds", seeds_json},
          {"co2_kg", {{"mean", m.mean}, {"std", m.std}, {"n", seeds.size()}}},
          {"co2_kg_formatted", format_mean_std(m)},
          {"wall_clock_s", wall_clock_s},
          {"versions", versions_json()},
          {"config", config}};
}

RunReport RunReport::from_json(const json& j) {
  try {
    RunReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.configuration = j.at("configuration").get<std::string>();
    r.algo = j.value("algo", std::string());
    for (const auto& s : j.at("seeds")) {
      SeedReport sr;
      sr.seed = s.at("seed").get<std::uint64_t>();
      sr.co2_kg = s.at("co2_kg").get<double>();
      sr.totals = totals_from_json(s.at("totals"));
      sr.metrics_file = s.value("metrics_file", std::string());
      sr.metrics_sha256 = s.value("metrics_sha256", std::string());
      r.seeds.push_back(sr);
    }
    if (r.seeds.empty()) throw ParseError("report has no seeds");
    r.wall_clock_s = j.value("wall_clock_s", 0.0);
    r.config = j.value("config", json::object());
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed run report: ") + e.what());
  }
}

void write_summary(const RunReport& report, const fs::path& dir) {
  auto j = report.to_json();
  j["content_sha256"] = sha256_hex(j.dump());
  std::ofstream out(dir / "summary.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
  out << j.dump(2) << '\n';
}

RunReport read_summary(const fs::path& dir_or_file) {
  const auto path = fs::is_directory(dir_or_file) ? dir_or_file / "summary.json" : dir_or_file;
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read run report " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return RunReport::from_json(j);
}

std::string format_mean_std(const MeanStd& m, int decimals) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(decimals) << m.mean << " ± " << m.std;
  return s.str();
}

std::vector<ComparisonRow> compare_reports(const std::vector<RunReport>& reports) {
  std::vector<ComparisonRow> rows;
  for (const auto& r : reports) {
    ComparisonRow row;
    row.label = r.configuration;
    row.co2 = r.co2();
    rows.push_back(row);
  }
  if (!rows.empty()) {
    const double ref = rows.front().co2.mean;
    for (auto& row : rows) row.delta_pct = ref != 0.0 ? 100.0 * (row.co2.mean - ref) / ref : 0.0;
  }
  return rows;
}

std::string format_comparison(const std::vector<ComparisonRow>& rows) {
  std::vector<std::string> col1{"configuration"}, col2{"CO2 kg (mean ± std)"}, col3{"delta %"};
  for (const auto& r : rows) {
    col1.push_back(r.label);
    col2.push_back(format_mean_std(r.co2));
    std::ostringstream d;
    d << std::showpos << std::fixed << std::setprecision(2) << r.delta_pct;
    col3.push_back(d.str());
  }
  // "±" is two bytes but one column.
  const auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::size_t w1 = 0, w2 = 0, w3 = 0;
  for (std::size_t i = 0; i < col1.size(); ++i) {
    w1 = std::max(w1, width(col1[i]));
    w2 = std::max(w2, width(col2[i]));
    w3 = std::max(w3, width(col3[i]));
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < col1.size(); ++i) {
    out << col1[i] << std::string(w1 - width(col1[i]) + 2, ' ');
    out << std::string(w2 - width(col2[i]), ' ') << col2[i] << "  ";
    out << std::string(w3 - width(col3[i]), ' ') << col3[i] << '\n';
  }
  return out.str();
}

unsigned seed_threads() {
  const char* v = std::getenv("DCC_SIM_THREADS");
  if (!v || !*v) return 1;
  unsigned n = 0;
  const auto [ptr, ec] = std::from_chars(v, v + std::strlen(v), n);
  if (ec != std::errc{} || n == 0) return 1;
  return n;
}

int cli_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto scenario = load_scenario(opt.scenario);
    const auto controller = controller_by_name(opt.controller, scenario);
    fs::create_directories(opt.out_dir);
    const auto eval = run_episode(scenario.make_env(), controller, opt.seed);

    RunReport report;
    report.scenario = scenario.name;
    report.configuration = opt.controller;
    report.seeds.push_back(seed_report(opt.seed, eval, opt.out_dir, "metrics.csv", *scenario.cluster));
    report.wall_clock_s = seconds_since(t0);
    report.config = scenario.resolved;
    write_summary(report, opt.out_dir);
    out << scenario.name << ' ' << opt.controller << " seed " << opt.seed << ": "
        << num(eval.co2_kg) << " kg CO2\n";
    return static_cast<int>(kExitOk);
  });
}

int cli_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto scenario = load_scenario(opt.scenario);
    const auto name = configuration_from_string(opt.configuration);
    auto cfg = scenario.train;
    if (!opt.algo.empty()) cfg.algo = algo_from_string(opt.algo);
    if (opt.total_steps > 0) cfg.total_steps = opt.total_steps;
    cfg.validate();
    const auto seeds = opt.seeds.empty() ? scenario.seeds : parse_seed_list(opt.seeds);
    fs::create_directories(opt.out_dir);

    std::mutex io;
    const ProgressFn progress = opt.quiet ? ProgressFn{} : ProgressFn([&](const std::string& msg) {
      std::lock_guard lock(io);
      err << msg << '\n';
    });

    std::vector<SeedReport> reports(seeds.size());
    for_each_seed(seeds.size(), [&](std::size_t k) {
      const auto seed = seeds[k];
      const auto dir = opt.out_dir / ("seed_" + std::to_string(seed));
      fs::create_directories(dir);
      const auto result = run_configuration_seed(name, scenario.env_factory(), cfg, seed, progress);
      if (name != Configuration::Baseline) {
        save_policies(result.policies, dir / ("policy_seed" + std::to_string(seed) + ".bin"));
        if (result.pretrained) {
          save_policies(*result.pretrained, dir / ("pretrained_low_seed" + std::to_string(seed) + ".bin"));
        }
        write_train_log_csv(result.log, dir / "train_log.csv");
      }
      const auto rel = "seed_" + std::to_string(seed) + "/metrics.csv";
      reports[k] = seed_report(seed, result.eval, opt.out_dir, rel, *scenario.cluster);
    });

    RunReport report;
    report.scenario = scenario.name;
    report.configuration = std::string(to_string(name));
    report.algo = std::string(to_string(cfg.algo));
    report.seeds = std::move(reports);
    report.wall_clock_s = seconds_since(t0);
    report.config = scenario.resolved;
    report.config["train"] = to_json(cfg);
    write_summary(report, opt.out_dir);
    out << report.configuration << ": " << format_mean_std(report.co2()) << " kg CO2 over "
        << report.seeds.size() << " seeds\n";
    return static_cast<int>(kExitOk);
  });
}

int cli_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto scenario = load_scenario(opt.scenario);
    const auto seeds = opt.seeds.empty() ? scenario.seeds : parse_seed_list(opt.seeds);
    if (opt.policy_dir.empty() == opt.controller.empty()) {
      throw ConfigError("evaluate needs exactly one of --policies or --controller");
    }
    fs::create_directories(opt.out_dir);
    std::vector<SeedReport> reports(seeds.size());
    for_each_seed(seeds.size(), [&](std::size_t k) {
      const auto seed = seeds[k];
      Controller controller;
      if (!opt.policy_dir.empty()) {
        const auto file = opt.policy_dir / ("seed_" + std::to_string(seed)) /
                          ("policy_seed" + std::to_string(seed) + ".bin");
        if (!fs::exists(file)) throw ConfigError("missing policy file " + file.string());
        controller = policy_controller(load_policies(file));
      } else {
        controller = controller_by_name(opt.controller, scenario);
      }
      const auto eval = run_episode(scenario.make_env(), controller, seed);
      const auto rel = "seed_" + std::to_string(seed) + "/metrics.csv";
      fs::create_directories(opt.out_dir / ("seed_" + std::to_string(seed)));
      reports[k] = seed_report(seed, eval, opt.out_dir, rel, *scenario.cluster);
    });
    RunReport report;
    report.scenario = scenario.name;
    if (!opt.policy_dir.empty()) {
      try {
        report.configuration = read_summary(opt.policy_dir).configuration;
      } catch (const ParseError&) {
        report.configuration = opt.policy_dir.filename().string();
      }
    } else {
      report.configuration = opt.controller;
    }
    report.seeds = std::move(reports);
    report.wall_clock_s = seconds_since(t0);
    report.config = scenario.resolved;
    write_summary(report, opt.out_dir);
    out << report.configuration << ": " << format_mean_std(report.co2()) << " kg CO2\n";
    return static_cast<int>(kExitOk);
  });
}

int cli_compare(const CompareOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opt.runs.size() < 2) throw ConfigError("compare needs at least two run directories");
    std::vector<RunReport> reports;
    for (const auto& r : opt.runs) reports.push_back(read_summary(r));
    const auto rows = compare_reports(reports);
    out << format_comparison(rows);

    json j;
    j["reference"] = rows.front().label;
    j["rows"] = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      j["rows"].push_back({{"configuration", rows[i].label},
                           {"run", opt.runs[i].string()},
                           {"co2_mean_kg", rows[i].co2.mean},
                           {"co2_std_kg", rows[i].co2.std},
                           {"n_seeds", reports[i].seeds.size()},
                           {"co2_kg_formatted", format_mean_std(rows[i].co2)},
                           {"delta_pct", rows[i].delta_pct}});
    }
    const auto path = opt.out.empty() ? fs::path("comparison.json") : opt.out;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << j.dump(2) << '\n';
    return static_cast<int>(kExitOk);
  });
}

}  // namespace dcc
