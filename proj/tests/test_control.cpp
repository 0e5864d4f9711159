#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "dcc/error.hpp"
#include "dcc/policies.hpp"
#include "dcc/ppo.hpp"
#include "test_support.hpp"

using namespace dcc;
using dcc::testing::constant_site;
using dcc::testing::make_cluster;

namespace {

Observations two_dc_obs(double ci0, double ci1) {
  Observations o;
  o.top.assign(2 * kTopFeaturesPerDc + kTimeFeatures, 0.0);
  o.top[0] = ci0;
  o.top[kTopFeaturesPerDc] = ci1;
  o.low = {{ci0, ci0, ci0, ci0, ci0, 0.5, 0, 0, 0, 1}, {ci1, ci1, ci1, ci1, ci1, 0.5, 0, 0, 0, 1}};
  o.cooling = {{0, 0, 0.5, 0, -1, 1}, {0, 0, 0.5, 0, -1, 1}};
  return o;
}

EnvDims two_dc_dims() {
  EnvDims d;
  d.n_dcs = 2;
  d.blade_groups = 4;
  d.top_obs = 22;
  d.top_act = 2;
  d.cooling_act = 6;
  return d;
}

EnvFactory small_factory(int steps = 32) {
  std::vector<DcSite> sites;
  for (int i = 0; i < 2; ++i) {
    SynthParams ci{350, 200, 16, 5, 64, 2.0 * i, 900, 0};
    DcConfig dc;
    dc.n_servers = 100;
    sites.push_back({"dc" + std::to_string(i), dc,
                     synth_trace(TraceKind::CarbonIntensity, 1 + i, ci),
                     make_trace(TraceKind::AmbientTemp, 0, 900, std::vector<double>(64, 22.0)),
                     make_trace(TraceKind::Workload, 0, 900, std::vector<double>(64, 0.4))});
  }
  auto cl = std::make_shared<const ClusterConfig>(make_cluster(std::move(sites)));
  EnvConfig e;
  e.episode_steps = steps;
  e.top_period_steps = 2;
  return [cl, e] { return HierEnv(cl, e); };
}

TrainConfig quick_config(long steps = 256) {
  TrainConfig c;
  c.total_steps = steps;
  c.rollout_len = 64;
  c.hidden = {16, 16};
  return c;
}

// A^GAE_t = sum_l (gamma lambda)^l delta_{t+l}, truncated at episode ends.
std::vector<double> gae_by_definition(const std::vector<float>& r, const std::vector<float>& v,
                                      const std::vector<std::uint8_t>& done, float bootstrap,
                                      double gamma, double lambda) {
  const auto n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = done[t] ? 0.0 : (t + 1 < n ? v[t + 1] : bootstrap);
    delta[t] = r[t] + gamma * next - v[t];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double w = 1.0;
    for (std::size_t l = t; l < n; ++l) {
      adv[t] += w * delta[l];
      if (done[l]) break;
      w *= gamma * lambda;
    }
  }
  return adv;
}

}  // namespace

TEST(BaselinePolicy, DefaultsEverywhere) {
  const auto a = baseline_policy(two_dc_obs(0.1, 0.2));
  EXPECT_TRUE(a.top.empty());
  EXPECT_TRUE(a.low.empty());
  EXPECT_TRUE(a.cooling.empty());
  EXPECT_EQ(decode_low({}).defer_fraction, 0.0);
  EXPECT_EQ(decode_low({}).release_fraction, 1.0);
}

TEST(GreedyPolicy, ZeroBetaIsUniform) {
  const auto a = greedy_policy(two_dc_obs(0.2, 0.8), two_dc_dims(), 0.0, 0.5);
  const auto w = decode_top(a.top, 2);
  EXPECT_DOUBLE_EQ((*w)[0], 0.5);
  EXPECT_DOUBLE_EQ((*w)[1], 0.5);
}

TEST(GreedyPolicy, SoftmaxWeights) {
  const auto a = greedy_policy(two_dc_obs(0.2, 0.8), two_dc_dims(), 5.0, 0.5);
  const auto w = decode_top(a.top, 2);
  const double e1 = std::exp(-1.0), e4 = std::exp(-4.0);
  EXPECT_NEAR((*w)[0], e1 / (e1 + e4), 1e-12);
  EXPECT_NEAR((*w)[0], 0.953, 5e-4);
  EXPECT_NEAR((*w)[1], 0.047, 5e-4);
}

TEST(GreedyPolicy, QuantileRule) {
  auto o = two_dc_obs(0.0, 0.0);
  o.low[0] = {-0.5, 0.1, 0.2, 0.3, 0.4, 0.5, 0, 0, 0, 1};  // current below every forecast
  o.low[1] = {0.9, 0.1, 0.2, 0.3, 0.4, 0.5, 0, 0, 0, 1};   // current above every forecast
  const auto a = greedy_policy(o, two_dc_dims(), 5.0, 0.5);
  EXPECT_EQ(a.low[0], (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(a.low[1], (std::vector<double>{1.0, 0.0}));
}

TEST(GreedyPolicy, CoolingFromTable) {
  auto o = two_dc_obs(0.0, 0.0);
  o.cooling[0][2] = 0.1;
  o.cooling[1][2] = 0.95;
  const auto a = greedy_policy(o, two_dc_dims(), 5.0, 0.5);
  const auto& t = greedy_cooling_table();
  EXPECT_EQ(a.cooling[0][0], t[0].pump_speed);
  EXPECT_EQ(a.cooling[1][0], t[4].pump_speed);
  EXPECT_EQ(a.cooling[0].size(), 6u);
}

TEST(GreedyPolicy, InvalidParameters) {
  EXPECT_THROW(greedy_policy(two_dc_obs(0, 0), two_dc_dims(), -1.0, 0.5), DomainError);
  EXPECT_THROW(greedy_policy(two_dc_obs(0, 0), two_dc_dims(), 1.0, 1.0), DomainError);
  EXPECT_THROW(greedy_policy(two_dc_obs(0, 0), two_dc_dims(), 1.0, 0.0), DomainError);
}

TEST(GreedyPolicy, LowerCiAttractsMoreWeight) {
  for (double drop : {0.05, 0.3, 0.9}) {
    const auto uniform = decode_top(greedy_policy(two_dc_obs(0.4, 0.4), two_dc_dims(), 5, 0.5).top, 2);
    const auto cheaper = decode_top(greedy_policy(two_dc_obs(0.4 - drop, 0.4), two_dc_dims(), 5, 0.5).top, 2);
    EXPECT_GE((*cheaper)[0], (*uniform)[0]);
  }
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(quantile({1, 2, 3, 4, 5}, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({10, 20}, 0.25), 12.5);
  EXPECT_THROW(quantile({}, 0.5), DomainError);
}

TEST(LevelPolicy, SaveLoadBitExact) {
  PolicySet set;
  set.top.emplace(Level::Top, 31, 3, std::vector<int>{64, 64}, -0.5, 7);
  set.cooling.emplace(Level::Cooling, 6, 6, std::vector<int>{8}, -0.3, 9);
  std::mt19937_64 rng(1);
  std::normal_distribution<float> z;
  for (float& p : set.top->params()) p += z(rng);
  const auto dir = std::filesystem::temp_directory_path() / "dcc_control_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / "policy.bin";
  save_policies(set, path);

  std::ifstream in(path, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  EXPECT_EQ(std::string(magic, 8), "DCCPOL01");
  EXPECT_EQ(std::filesystem::file_size(path),
            8 + 4 * (set.top->params().size() + set.cooling->params().size()));

  const auto back = load_policies(path);
  ASSERT_TRUE(back.top && back.cooling);
  EXPECT_FALSE(back.low);
  ASSERT_EQ(back.top->params().size(), set.top->params().size());
  for (std::size_t k = 0; k < set.top->params().size(); ++k) {
    EXPECT_EQ(std::bit_cast<std::uint32_t>(back.top->params()[k]),
              std::bit_cast<std::uint32_t>(set.top->params()[k]));
  }
  EXPECT_EQ(back.cooling->hidden(), std::vector<int>{8});
}

TEST(LevelPolicy, BadMagicRejected) {
  PolicySet set;
  set.low.emplace(Level::Low, 10, 2, std::vector<int>{4}, -0.5, 1);
  const auto path = std::filesystem::temp_directory_path() / "dcc_control_tests" / "bad.bin";
  std::filesystem::create_directories(path.parent_path());
  save_policies(set, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXXXXXX", 8);
  }
  EXPECT_THROW(load_policies(path), ParseError);
}

TEST(LevelPolicy, InitialLogStd) {
  const LevelPolicy p(Level::Low, 10, 2, {64, 64}, -0.5, 3);
  for (double s : p.log_std()) EXPECT_EQ(s, -0.5);
}

TEST(ComputeGae, MatchesDefinition) {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> z;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 30;
    std::vector<float> r(n), v(n), adv(n);
    std::vector<std::uint8_t> done(n, 0);
    for (std::size_t t = 0; t < n; ++t) {
      r[t] = z(rng);
      v[t] = z(rng);
      done[t] = (rng() % 7 == 0) ? 1 : 0;
    }
    const float boot = z(rng);
    compute_gae(r, v, done, boot, 0.97, 0.9, adv);
    const auto want = gae_by_definition(r, v, done, boot, 0.97, 0.9);
    for (std::size_t t = 0; t < n; ++t) EXPECT_NEAR(adv[t], want[t], 1e-4);
  }
}

TEST(ComputeGae, LambdaOneIsDiscountedReturnMinusValue) {
  const std::vector<float> r{1, 2, 3}, v{0.5f, 0.25f, 0.0f};
  const std::vector<std::uint8_t> done{0, 0, 1};
  std::vector<float> adv(3);
  compute_gae(r, v, done, 99.0f, 0.5, 1.0, adv);
  EXPECT_NEAR(adv[0], 1 + 0.5 * 2 + 0.25 * 3 - 0.5, 1e-6);
  EXPECT_NEAR(adv[2], 3.0, 1e-6);
}

TEST(SurrogateGradient, ValueBlockMatchesFiniteDifferences) {
  LevelPolicy p(Level::Low, 4, 2, {8}, -0.5, 2);
  std::mt19937_64 rng(9);
  std::normal_distribution<float> z;
  const int m = 6;
  Batch b{nn::Mat(4, m), nn::Mat(2, m), nn::Vec(m), nn::Vec(m), nn::Vec(m)};
  for (int i = 0; i < b.obs.size(); ++i) b.obs.data()[i] = z(rng);
  for (int i = 0; i < b.actions.size(); ++i) b.actions.data()[i] = z(rng) * 0.3f;
  for (int c = 0; c < m; ++c) {
    b.advantages(c) = z(rng);
    b.returns(c) = z(rng);
  }
  std::vector<int> idx(m);
  for (int c = 0; c < m; ++c) idx[c] = c;
  TrainConfig cfg;
  cfg.vf_coef = 1.0;
  std::vector<float> grad(p.params().size(), 0.0f);
  for (int c = 0; c < m; ++c) {
    std::vector<double> o(4), a(2);
    for (int i = 0; i < 4; ++i) o[i] = b.obs(i, c);
    for (int j = 0; j < 2; ++j) a[j] = b.actions(j, c);
    b.logp_old(c) = static_cast<float>(log_prob(p, o, a));
  }
  surrogate_gradient(p, b, idx, cfg, grad);

  const auto value_loss = [&](const LevelPolicy& q) {
    double loss = 0.0;
    for (int c = 0; c < m; ++c) {
      std::vector<double> o(4);
      for (int i = 0; i < 4; ++i) o[i] = b.obs(i, c);
      const double e = q.value(o) - b.returns(c);
      loss += 0.5 * e * e / m;
    }
    return loss;
  };
  const float eps = 1e-2f;
  const auto& vn = p.value_net();
  for (std::size_t k = vn.offset(); k < vn.end(); ++k) {
    LevelPolicy plus = p, minus = p;
    plus.params()[k] += eps;
    minus.params()[k] -= eps;
    const double fd = (value_loss(plus) - value_loss(minus)) / (2.0 * eps);
    EXPECT_NEAR(grad[k], fd, 2e-3 + 2e-2 * std::abs(fd)) << k;
  }
}

// With unlimited clipping, one epoch and one minibatch, the update direction
// must equal -1/B sum A grad log pi, estimated here by finite differences of
// log_prob on every policy parameter.
TEST(SurrogateGradient, UnclippedEqualsVanillaPolicyGradient) {
  LevelPolicy p(Level::Low, 5, 2, {16, 16}, -0.5, 4);
  std::mt19937_64 rng(12);
  std::normal_distribution<float> z;
  for (float& w : p.params()) w += 0.05f * z(rng);
  const int m = 32;
  Batch b{nn::Mat(5, m), nn::Mat(2, m), nn::Vec(m), nn::Vec(m), nn::Vec(m)};
  std::vector<std::vector<double>> obs(m, std::vector<double>(5)), act(m, std::vector<double>(2));
  for (int c = 0; c < m; ++c) {
    for (int i = 0; i < 5; ++i) b.obs(i, c) = static_cast<float>(obs[c][i] = z(rng));
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
  const auto eff = cfg.effective();
  EXPECT_EQ(eff.epochs, 1);
  EXPECT_EQ(eff.minibatches, 1);
  std::vector<float> grad(p.params().size(), 0.0f);
  surrogate_gradient(p, b, idx, eff, grad);

  const std::size_t n_policy = p.log_std_offset() + 2;
  const float eps = 1e-2f;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < n_policy; ++k) {
    LevelPolicy plus = p, minus = p;
    plus.params()[k] += eps;
    minus.params()[k] -= eps;
    double g = 0.0;
    for (int c = 0; c < m; ++c) {
      const double dlogp = (log_prob(plus, obs[c], act[c]) - log_prob(minus, obs[c], act[c])) / (2.0 * eps);
      g -= b.advantages(c) * dlogp / m;
    }
    dot += g * grad[k];
    na += g * g;
    nb += static_cast<double>(grad[k]) * grad[k];
  }
  EXPECT_GE(dot / std::sqrt(na * nb), 0.999);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.clip = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.gamma = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.rollout_len = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(algo_from_string("a2c"), Algo::A2C);
  EXPECT_THROW(algo_from_string("appo"), ConfigError);
}

TEST(PpoTrain, DeterministicLogs) {
  const auto factory = small_factory();
  const auto cfg = quick_config();
  const auto a = ppo_train(factory, {true, true, true}, {}, cfg, 3);
  const auto b = ppo_train(factory, {true, true, true}, {}, cfg, 3);
  ASSERT_EQ(a.log.size(), b.log.size());
  ASSERT_FALSE(a.log.empty());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].episode_co2_kg, b.log[i].episode_co2_kg);
    EXPECT_EQ(a.log[i].top.stats.policy_loss, b.log[i].top.stats.policy_loss);
    EXPECT_EQ(a.log[i].low.stats.value_loss, b.log[i].low.stats.value_loss);
  }
  EXPECT_EQ(a.policies.top->param_vector(), b.policies.top->param_vector());
}

TEST(PpoTrain, LossesFinite) {
  const auto r = ppo_train(small_factory(), {true, true, true}, {}, quick_config(), 4);
  for (const auto& row : r.log) {
    for (const auto* l : {&row.top, &row.low, &row.cooling}) {
      EXPECT_TRUE(std::isfinite(l->stats.policy_loss));
      EXPECT_TRUE(std::isfinite(l->stats.value_loss));
    }
    EXPECT_TRUE(std::isfinite(row.episode_co2_kg));
  }
}

TEST(PpoTrain, OnlySelectedLevelsTrained) {
  const auto r = ppo_train(small_factory(), {true, false, false}, {}, quick_config(128), 1);
  EXPECT_TRUE(r.policies.top.has_value());
  EXPECT_FALSE(r.policies.low.has_value());
  EXPECT_FALSE(r.policies.cooling.has_value());
}

TEST(RunConfiguration, BaselineHasZeroSpread) {
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto r = run_configuration(Configuration::Baseline, small_factory(), quick_config(), seeds);
  EXPECT_EQ(r.seeds.size(), 10u);
  EXPECT_EQ(r.summary().std, 0.0);
}

TEST(RunConfiguration, PretrainedLowStaysFrozen) {
  const auto r = run_configuration_seed(Configuration::TopPlusPretrainedLow, small_factory(),
                                        quick_config(128), 2);
  ASSERT_TRUE(r.pretrained && r.pretrained->low && r.policies.low);
  EXPECT_EQ(r.pretrained->low->param_vector(), r.policies.low->param_vector());
  EXPECT_EQ(r.pretrained->cooling->param_vector(), r.policies.cooling->param_vector());
  EXPECT_TRUE(r.policies.top.has_value());
}

TEST(RunConfiguration, NamesRoundTrip) {
  for (auto c : {Configuration::Baseline, Configuration::TopOnly, Configuration::TopPlusPretrainedLow,
                 Configuration::JointHRL}) {
    EXPECT_EQ(configuration_from_string(to_string(c)), c);
  }
  EXPECT_THROW(configuration_from_string("hrl"), ConfigError);
}

TEST(MeanStd, SampleStandardDeviation) {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const auto m = mean_std(v);
  EXPECT_DOUBLE_EQ(m.mean, 5.0);
  EXPECT_NEAR(m.std, std::sqrt(32.0 / 7.0), 1e-12);
}
