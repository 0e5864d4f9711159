#include "dcc/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>

#include "dcc/error.hpp"

namespace dcc {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

DcConfig parse_dc_config(const json& j) {
  DcConfig c;
  check_keys(j,
             {"n_servers", "p_idle_w", "p_peak_w", "n_blade_groups", "heat_capacity_j_per_k",
              "h0_w_per_k", "pump_p_max_w", "flow_max_kg_s", "setpoint_lo_c", "setpoint_hi_c",
              "cpu_temp_limit_c", "cop_base", "cop_ambient_slope", "cop_setpoint_slope",
              "max_substep_s"},
             "dc config");
  read(j, "n_servers", c.n_servers);
  read(j, "p_idle_w", c.p_idle_w);
  read(j, "p_peak_w", c.p_peak_w);
  read(j, "n_blade_groups", c.n_blade_groups);
  read(j, "heat_capacity_j_per_k", c.heat_capacity_j_per_k);
  read(j, "h0_w_per_k", c.h0_w_per_k);
  read(j, "pump_p_max_w", c.pump_p_max_w);
  read(j, "flow_max_kg_s", c.flow_max_kg_s);
  read(j, "setpoint_lo_c", c.setpoint_lo_c);
  read(j, "setpoint_hi_c", c.setpoint_hi_c);
  read(j, "cpu_temp_limit_c", c.cpu_temp_limit_c);
  read(j, "cop_base", c.cop_base);
  read(j, "cop_ambient_slope", c.cop_ambient_slope);
  read(j, "cop_setpoint_slope", c.cop_setpoint_slope);
  read(j, "max_substep_s", c.max_substep_s);
  return c;
}

TimeTrace parse_trace(const json& j, TraceKind kind, const std::filesystem::path& base,
                      std::size_t default_length, int step_seconds, std::int64_t start) {
  if (!j.is_object()) throw ConfigError(std::string(to_string(kind)) + " trace must be an object");
  if (j.contains("file")) {
    check_keys(j, {"file"}, std::string(to_string(kind)) + " trace");
    std::filesystem::path p = j.at("file").get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!std::filesystem::exists(p)) throw ConfigError("trace file not found: " + p.string());
    return load_trace(p, kind);
  }
  if (j.contains("values")) {
    check_keys(j, {"values"}, std::string(to_string(kind)) + " trace");
    return make_trace(kind, start, step_seconds, j.at("values").get<std::vector<double>>());
  }
  if (j.contains("synth")) {
    check_keys(j, {"synth"}, std::string(to_string(kind)) + " trace");
    const auto& s = j.at("synth");
    check_keys(s, {"seed", "mean", "amplitude", "period_steps", "noise_std", "length", "phase_rad"},
               "synth");
    SynthParams p;
    p.length = default_length;
    p.step_seconds = step_seconds;
    p.start = start;
    std::uint64_t seed = 0;
    read(s, "seed", seed);
    read(s, "mean", p.mean);
    read(s, "amplitude", p.amplitude);
    read(s, "period_steps", p.period_steps);
    read(s, "noise_std", p.noise_std);
    read(s, "length", p.length);
    if (s.contains("phase_rad")) p.phase_rad = s.at("phase_rad").get<double>();
    return synth_trace(kind, seed, p);
  }
  throw ConfigError(std::string(to_string(kind)) + " trace needs 'file', 'values' or 'synth'");
}

Matrix parse_matrix(const json& j, std::size_t n, const char* what) {
  if (j.is_number()) {
    Matrix m(n, std::vector<double>(n, j.get<double>()));
    for (std::size_t i = 0; i < n; ++i) m[i][i] = 0.0;
    return m;
  }
  Matrix m;
  try {
    m = j.get<Matrix>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
  if (m.size() != n) throw ConfigError(std::string(what) + " must be " + std::to_string(n) + "x" + std::to_string(n));
  return m;
}

TrainConfig parse_train(const json& j) {
  TrainConfig c;
  check_keys(j,
             {"algo", "total_steps", "rollout_len", "minibatches", "epochs", "clip", "gamma",
              "gae_lambda", "ent_coef", "vf_coef", "lr", "max_grad_norm", "normalize_advantages", "scale_rewards",
              "hidden", "log_std_init"},
             "train");
  if (j.contains("algo")) c.algo = algo_from_string(j.at("algo").get<std::string>());
  read(j, "total_steps", c.total_steps);
  read(j, "rollout_len", c.rollout_len);
  read(j, "minibatches", c.minibatches);
  read(j, "epochs", c.epochs);
  read(j, "clip", c.clip);
  read(j, "gamma", c.gamma);
  read(j, "gae_lambda", c.gae_lambda);
  read(j, "ent_coef", c.ent_coef);
  read(j, "vf_coef", c.vf_coef);
  read(j, "lr", c.lr);
  read(j, "max_grad_norm", c.max_grad_norm);
  read(j, "normalize_advantages", c.normalize_advantages);
  read(j, "scale_rewards", c.scale_rewards);
  read(j, "hidden", c.hidden);
  read(j, "log_std_init", c.log_std_init);
  c.validate();
  return c;
}

EnvConfig parse_env(const json& j, int episode_steps) {
  EnvConfig c;
  c.episode_steps = episode_steps;
  check_keys(j, {"top_period_steps", "lambda_sla", "lambda_temp", "random_start", "scales"}, "env");
  read(j, "top_period_steps", c.top_period_steps);
  read(j, "lambda_sla", c.lambda_sla);
  read(j, "lambda_temp", c.lambda_temp);
  read(j, "random_start", c.random_start);
  if (j.contains("scales")) {
    const auto& s = j.at("scales");
    check_keys(s, {"ci_center", "ci_halfrange", "ambient_center", "ambient_halfrange", "temp_center",
                   "temp_halfrange"},
               "env.scales");
    read(s, "ci_center", c.scales.ci_center);
    read(s, "ci_halfrange", c.scales.ci_halfrange);
    read(s, "ambient_center", c.scales.ambient_center);
    read(s, "ambient_halfrange", c.scales.ambient_halfrange);
    read(s, "temp_center", c.scales.temp_center);
    read(s, "temp_halfrange", c.scales.temp_halfrange);
  }
  return c;
}

}  // namespace

json to_json(const DcConfig& c) {
  return {{"n_servers", c.n_servers},
          {"p_idle_w", c.p_idle_w},
          {"p_peak_w", c.p_peak_w},
          {"n_blade_groups", c.n_blade_groups},
          {"heat_capacity_j_per_k", c.heat_capacity_j_per_k},
          {"h0_w_per_k", c.h0_w_per_k},
          {"pump_p_max_w", c.pump_p_max_w},
          {"flow_max_kg_s", c.flow_max_kg_s},
          {"setpoint_lo_c", c.setpoint_lo_c},
          {"setpoint_hi_c", c.setpoint_hi_c},
          {"cpu_temp_limit_c", c.cpu_temp_limit_c},
          {"cop_base", c.cop_base},
          {"cop_ambient_slope", c.cop_ambient_slope},
          {"cop_setpoint_slope", c.cop_setpoint_slope},
          {"max_substep_s", c.max_substep_s}};
}

json to_json(const EnvConfig& c) {
  return {{"top_period_steps", c.top_period_steps},
          {"episode_steps", c.episode_steps},
          {"lambda_sla", c.lambda_sla},
          {"lambda_temp", c.lambda_temp},
          {"random_start", c.random_start},
          {"scales",
           {{"ci_center", c.scales.ci_center},
            {"ci_halfrange", c.scales.ci_halfrange},
            {"ambient_center", c.scales.ambient_center},
            {"ambient_halfrange", c.scales.ambient_halfrange},
            {"temp_center", c.scales.temp_center},
            {"temp_halfrange", c.scales.temp_halfrange}}}};
}

json to_json(const TrainConfig& c) {
  return {{"algo", to_string(c.algo)},
          {"total_steps", c.total_steps},
          {"rollout_len", c.rollout_len},
          {"minibatches", c.minibatches},
          {"epochs", c.epochs},
          {"clip", c.clip},
          {"gamma", c.gamma},
          {"gae_lambda", c.gae_lambda},
          {"ent_coef", c.ent_coef},
          {"vf_coef", c.vf_coef},
          {"lr", c.lr},
          {"max_grad_norm", c.max_grad_norm},
          {"normalize_advantages", c.normalize_advantages},
          {"scale_rewards", c.scale_rewards},
          {"hidden", c.hidden},
          {"log_std_init", c.log_std_init}};
}

EnvFactory Scenario::env_factory() const {
  return [cluster = cluster, env = env] { return HierEnv(cluster, env); };
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  const auto parse_one = [&](std::string_view s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
      throw ConfigError("bad seed '" + std::string(s) + "'");
    }
    return v;
  };
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    const auto dash = item.find('-');
    if (dash != std::string_view::npos) {
      const auto lo = parse_one(item.substr(0, dash));
      const auto hi = parse_one(item.substr(dash + 1));
      if (hi < lo) throw ConfigError("bad seed range '" + std::string(item) + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(parse_one(item));
    }
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (seeds.empty()) throw ConfigError("empty seed list");
  return seeds;
}

Scenario parse_scenario(const json& doc, const std::filesystem::path& base_dir) {
  check_keys(doc,
             {"schema", "name", "description", "episode_steps", "step_seconds", "start", "seeds",
              "cluster", "env", "train", "greedy", "dcs"},
             "scenario");
  if (!doc.contains("schema") || doc.at("schema") != kScenarioSchema) {
    throw ConfigError("scenario must declare \"schema\": 1");
  }
  Scenario s;
  s.name = doc.value("name", std::string("unnamed"));
  int episode_steps = 672;
  int step_seconds = 900;
  read(doc, "episode_steps", episode_steps);
  read(doc, "step_seconds", step_seconds);
  if (episode_steps <= 0) throw ConfigError("episode_steps must be positive");
  std::int64_t start = 0;
  if (doc.contains("start")) start = parse_iso8601(doc.at("start").get<std::string>());

  s.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  read(doc, "seeds", s.seeds);
  if (s.seeds.empty()) throw ConfigError("seeds must not be empty");

  if (!doc.contains("dcs") || !doc.at("dcs").is_array() || doc.at("dcs").empty()) {
    throw ConfigError("scenario needs a non-empty 'dcs' array");
  }
  auto cluster = std::make_shared<ClusterConfig>();
  cluster->step_seconds = step_seconds;
  json resolved_dcs = json::array();
  for (const auto& d : doc.at("dcs")) {
    check_keys(d, {"name", "config", "traces"}, "dc");
    DcSite site;
    site.name = d.value("name", "dc" + std::to_string(cluster->dcs.size()));
    site.config = parse_dc_config(d.value("config", json::object()));
    if (!d.contains("traces")) throw ConfigError("dc '" + site.name + "' has no traces");
    const auto& t = d.at("traces");
    check_keys(t, {"ci", "ambient", "workload"}, "traces");
    for (const char* key : {"ci", "ambient", "workload"}) {
      if (!t.contains(key)) throw ConfigError("dc '" + site.name + "' lacks a '" + key + "' trace");
    }
    const auto len = static_cast<std::size_t>(episode_steps);
    site.ci = parse_trace(t.at("ci"), TraceKind::CarbonIntensity, base_dir, len, step_seconds, start);
    site.ambient = parse_trace(t.at("ambient"), TraceKind::AmbientTemp, base_dir, len, step_seconds, start);
    site.workload = parse_trace(t.at("workload"), TraceKind::Workload, base_dir, len, step_seconds, start);
    for (const auto* tr : {&site.ci, &site.ambient, &site.workload}) {
      if (tr->step_seconds != step_seconds) {
        throw ConfigError("dc '" + site.name + "': trace step " + std::to_string(tr->step_seconds) +
                          " s differs from scenario step " + std::to_string(step_seconds) + " s");
      }
    }
    resolved_dcs.push_back({{"name", site.name}, {"config", to_json(site.config)}, {"traces", t}});
    cluster->dcs.push_back(std::move(site));
  }

  const auto n = cluster->size();
  const json cj = doc.value("cluster", json::object());
  check_keys(cj,
             {"distance_km", "transfer_cap_units", "kappa_kwh_per_unit_km", "flexible_fraction",
              "task_granularity_units", "max_defer_steps", "dtq_capacity_fraction"},
             "cluster");
  cluster->distance_km = cj.contains("distance_km") ? parse_matrix(cj.at("distance_km"), n, "distance_km") : zeros(n);
  cluster->transfer_cap_units = cj.contains("transfer_cap_units")
                                    ? parse_matrix(cj.at("transfer_cap_units"), n, "transfer_cap_units")
                                    : zeros(n);
  read(cj, "kappa_kwh_per_unit_km", cluster->kappa_kwh_per_unit_km);
  read(cj, "flexible_fraction", cluster->flexible_fraction);
  read(cj, "task_granularity_units", cluster->task_granularity_units);
  read(cj, "max_defer_steps", cluster->max_defer_steps);
  read(cj, "dtq_capacity_fraction", cluster->dtq_capacity_fraction);
  cluster->validate(1);
  if (cluster->horizon() < static_cast<std::size_t>(episode_steps)) {
    throw ConfigError("traces cover " + std::to_string(cluster->horizon()) + " steps, episode needs " +
                      std::to_string(episode_steps));
  }

  s.env = parse_env(doc.value("env", json::object()), episode_steps);
  s.train = parse_train(doc.value("train", json::object()));
  if (doc.contains("greedy")) {
    const auto& g = doc.at("greedy");
    check_keys(g, {"beta", "quantile"}, "greedy");
    read(g, "beta", s.greedy.beta);
    read(g, "quantile", s.greedy.quantile);
  }
  s.cluster = cluster;

  s.resolved = {{"schema", kScenarioSchema},
                {"name", s.name},
                {"episode_steps", episode_steps},
                {"step_seconds", step_seconds},
                {"start", format_iso8601(start)},
                {"seeds", s.seeds},
                {"cluster",
                 {{"distance_km", cluster->distance_km},
                  {"transfer_cap_units", cluster->transfer_cap_units},
                  {"kappa_kwh_per_unit_km", cluster->kappa_kwh_per_unit_km},
                  {"flexible_fraction", cluster->flexible_fraction},
                  {"task_granularity_units", cluster->task_granularity_units},
                  {"max_defer_steps", cluster->max_defer_steps},
                  {"dtq_capacity_fraction", cluster->dtq_capacity_fraction}}},
                {"env", to_json(s.env)},
                {"train", to_json(s.train)},
                {"greedy", {{"beta", s.greedy.beta}, {"quantile", s.greedy.quantile}}},
                {"dcs", resolved_dcs}};
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  auto s = parse_scenario(doc, path.parent_path());
  s.source = path;
  return s;
}

}  // namespace dcc
