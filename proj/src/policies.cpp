#include "dcc/policies.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "dcc/error.hpp"

namespace dcc {

namespace {

using nlohmann::json;

constexpr Level kLevels[] = {Level::Top, Level::Low, Level::Cooling};

std::vector<int> with_io(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

void write_le_floats(std::ostream& out, std::span<const float> values) {
  for (float v : values) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    unsigned char bytes[4];
    for (int k = 0; k < 4; ++k) bytes[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xFFu);
    out.write(reinterpret_cast<const char*>(bytes), 4);
  }
}

void read_le_floats(std::istream& in, std::span<float> values) {
  for (float& v : values) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw ParseError("policy file truncated");
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(bytes[k]) << (8 * k);
    v = std::bit_cast<float>(bits);
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

}  // namespace

std::string_view to_string(Level level) {
  switch (level) {
    case Level::Top:
      return "top";
    case Level::Low:
      return "low";
    case Level::Cooling:
      return "cooling";
  }
  return "unknown";
}

Level level_from_string(std::string_view name) {
  for (auto level : kLevels) {
    if (to_string(level) == name) return level;
  }
  throw ParseError("unknown level '" + std::string(name) + "'");
}

std::vector<double> to_raw_action(Level level, std::span<const double> a) {
  std::vector<double> raw(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    raw[i] = level == Level::Top ? kTopLogitScale * a[i]
                                 : kUnitActionCenter + kUnitActionHalfWidth * a[i];
  }
  return raw;
}

LevelPolicy::LevelPolicy(Level level, int obs_dim, int act_dim, std::vector<int> hidden,
                         double log_std_init, std::uint64_t seed)
    : level_(level), obs_dim_(obs_dim), act_dim_(act_dim), hidden_(std::move(hidden)) {
  policy_ = nn::MlpLayout(with_io(obs_dim, hidden_, act_dim), 0);
  log_std_offset_ = policy_.end();
  value_ = nn::MlpLayout(with_io(obs_dim, hidden_, 1), log_std_offset_ + act_dim);
  params_.assign(value_.end(), 0.0f);

  std::mt19937_64 rng(seed);
  policy_.init(params_, rng, 0.01f);
  value_.init(params_, rng, 1.0f);
  for (int j = 0; j < act_dim; ++j) params_[log_std_offset_ + j] = static_cast<float>(log_std_init);
}

std::vector<double> LevelPolicy::log_std() const {
  return {params_.begin() + static_cast<std::ptrdiff_t>(log_std_offset_),
          params_.begin() + static_cast<std::ptrdiff_t>(log_std_offset_ + act_dim_)};
}

std::vector<double> LevelPolicy::mean_action(std::span<const double> obs) const {
  nn::Mat x(obs_dim_, 1);
  for (int i = 0; i < obs_dim_; ++i) x(i, 0) = static_cast<float>(obs[i]);
  const nn::Mat out = policy_.forward(params_, x);
  std::vector<double> a(act_dim_);
  for (int j = 0; j < act_dim_; ++j) a[j] = std::tanh(static_cast<double>(out(j, 0)));
  return a;
}

double LevelPolicy::value(std::span<const double> obs) const {
  nn::Mat x(obs_dim_, 1);
  for (int i = 0; i < obs_dim_; ++i) x(i, 0) = static_cast<float>(obs[i]);
  return value_.forward(params_, x)(0, 0);
}

std::optional<LevelPolicy>& PolicySet::get(Level level) {
  switch (level) {
    case Level::Top:
      return top;
    case Level::Low:
      return low;
    case Level::Cooling:
      return cooling;
  }
  return top;
}

const std::optional<LevelPolicy>& PolicySet::get(Level level) const {
  return const_cast<PolicySet*>(this)->get(level);
}

void save_policies(const PolicySet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write policy file " + path.string());
  out.write(kPolicyMagic, sizeof kPolicyMagic);

  json sidecar;
  sidecar["format"] = "DCCPOL01";
  sidecar["dtype"] = "float32-le";
  sidecar["levels"] = json::array();
  std::size_t offset = 0;
  for (auto level : kLevels) {
    const auto& p = set.get(level);
    if (!p) continue;
    write_le_floats(out, p->params());
    sidecar["levels"].push_back({{"level", to_string(level)},
                                 {"obs_dim", p->obs_dim()},
                                 {"act_dim", p->act_dim()},
                                 {"hidden", p->hidden()},
                                 {"policy_sizes", p->policy_net().sizes()},
                                 {"value_sizes", p->value_net().sizes()},
                                 {"log_std_offset", p->log_std_offset()},
                                 {"offset", offset},
                                 {"count", p->params().size()}});
    offset += p->params().size();
  }
  sidecar["total_params"] = offset;
  if (!out) throw ParseError("failed writing " + path.string());
  std::ofstream side(sidecar_path(path));
  side << sidecar.dump(2) << '\n';
}

PolicySet load_policies(const std::filesystem::path& path) {
  std::ifstream side(sidecar_path(path));
  if (!side) throw ParseError("missing policy sidecar " + sidecar_path(path).string());
  json sidecar;
  try {
    side >> sidecar;
  } catch (const json::exception& e) {
    throw ParseError(std::string("policy sidecar: ") + e.what());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open policy file " + path.string());
  char magic[sizeof kPolicyMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kPolicyMagic, sizeof magic) != 0) {
    throw ParseError(path.string() + ": bad magic, expected DCCPOL01");
  }
  PolicySet set;
  try {
    for (const auto& entry : sidecar.at("levels")) {
      const auto level = level_from_string(entry.at("level").get<std::string>());
      LevelPolicy p(level, entry.at("obs_dim").get<int>(), entry.at("act_dim").get<int>(),
                    entry.at("hidden").get<std::vector<int>>(), 0.0, 0);
      if (p.params().size() != entry.at("count").get<std::size_t>()) {
        throw ParseError("policy sidecar count does not match shapes");
      }
      read_le_floats(in, p.params());
      set.get(level) = std::move(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("policy sidecar: ") + e.what());
  }
  return set;
}

RawActions policy_actions(const PolicySet& set, const Observations& obs) {
  RawActions raw;
  if (set.top) raw.top = to_raw_action(Level::Top, set.top->mean_action(obs.top));
  if (set.low) {
    for (const auto& o : obs.low) raw.low.push_back(to_raw_action(Level::Low, set.low->mean_action(o)));
  }
  if (set.cooling) {
    for (const auto& o : obs.cooling) {
      raw.cooling.push_back(to_raw_action(Level::Cooling, set.cooling->mean_action(o)));
    }
  }
  return raw;
}

RawActions baseline_policy(const Observations&) { return RawActions{}; }

const std::array<CoolingLookupRow, 5>& greedy_cooling_table() {
  static const std::array<CoolingLookupRow, 5> table{{
      {0.2, 0.50, 1.00},
      {0.4, 0.62, 0.88},
      {0.6, 0.70, 0.77},
      {0.8, 0.78, 0.63},
      {1.0, 0.85, 0.50},
  }};
  return table;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

RawActions greedy_policy(const Observations& obs, const EnvDims& dims, double beta, double q) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("greedy beta must be >= 0");
  if (!(q > 0.0 && q < 1.0)) throw DomainError("greedy quantile must lie in (0, 1)");
  const auto n = dims.n_dcs;
  RawActions raw;
  raw.top.resize(n);
  for (std::size_t i = 0; i < n; ++i) raw.top[i] = -beta * obs.top.at(i * kTopFeaturesPerDc);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = obs.low.at(i);
    const std::vector<double> window(o.begin(), o.begin() + 1 + kForecastSteps);
    const double defer = o[0] >= quantile(window, q) ? 1.0 : 0.0;
    raw.low.push_back({defer, 1.0 - defer});
  }

  const auto& table = greedy_cooling_table();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = obs.cooling.at(i).at(2);
    const auto row = std::find_if(table.begin(), table.end(), [u](const CoolingLookupRow& r) {
      return u < r.utilization_upper;
    });
    const auto& pick = row == table.end() ? table.back() : *row;
    std::vector<double> a{pick.pump_speed, pick.setpoint_fraction};
    a.resize(2 + dims.blade_groups, 1.0);
    raw.cooling.push_back(std::move(a));
  }
  return raw;
}

double expected_unit_fraction(double mean, double std) {
  const double m = kUnitActionCenter + kUnitActionHalfWidth * mean;
  const double s = kUnitActionHalfWidth * std;
  if (s <= 0.0) return std::clamp(m, 0.0, 1.0);
  // E[clamp(X, 0, 1)] = integral over [0, 1] of P(X > x), Simpson's rule.
  constexpr int kIntervals = 400;
  const auto survival = [&](double x) { return 0.5 * std::erfc((x - m) / (s * std::sqrt(2.0))); };
  double sum = survival(0.0) + survival(1.0);
  for (int k = 1; k < kIntervals; ++k) {
    sum += (k % 2 ? 4.0 : 2.0) * survival(static_cast<double>(k) / kIntervals);
  }
  return sum / (3.0 * kIntervals);
}

}  // namespace dcc
