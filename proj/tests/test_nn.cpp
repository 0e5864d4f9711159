#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dcc/error.hpp"
#include "dcc/nn.hpp"

using namespace dcc::nn;

namespace {

// L = sum(R .* f(x)) so that dL/dout = R.
double weighted_output(const MlpLayout& net, std::span<const float> p, const Mat& x, const Mat& r) {
  const Mat out = net.forward(p, x);
  double sum = 0.0;
  for (int i = 0; i < out.rows(); ++i) {
    for (int j = 0; j < out.cols(); ++j) sum += static_cast<double>(out(i, j)) * r(i, j);
  }
  return sum;
}

}  // namespace

TEST(Mlp, ParameterCount) {
  const MlpLayout net({3, 5, 2}, 7);
  EXPECT_EQ(net.num_params(), 3u * 5 + 5 + 5 * 2 + 2);
  EXPECT_EQ(net.offset(), 7u);
  EXPECT_EQ(net.end(), 7u + net.num_params());
}

TEST(Mlp, ForwardMatchesHandComputation) {
  const MlpLayout net({2, 2, 1}, 0);
  // W1 column-major [[1, 2], [3, 4]] -> stored 1, 3, 2, 4; b1 = [0.1, -0.2];
  // W2 = [0.5, -1]; b2 = 0.3.
  const std::vector<float> p{1, 3, 2, 4, 0.1f, -0.2f, 0.5f, -1.0f, 0.3f};
  Mat x(2, 1);
  x << 0.2f, -0.1f;
  const double h0 = std::tanh(1 * 0.2 + 2 * -0.1 + 0.1);
  const double h1 = std::tanh(3 * 0.2 + 4 * -0.1 - 0.2);
  const double want = 0.5 * h0 - 1.0 * h1 + 0.3;
  EXPECT_NEAR(net.forward(p, x)(0, 0), want, 1e-6);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  const MlpLayout net({3, 6, 5, 2}, 0);
  std::vector<float> p(net.num_params());
  std::mt19937_64 rng(1);
  net.init(p, rng, 1.0f);
  std::normal_distribution<float> z(0.0f, 1.0f);
  for (float& v : p) v += 0.1f * z(rng);  // non-zero biases
  Mat x(3, 4), r(2, 4);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
  for (int i = 0; i < r.size(); ++i) r.data()[i] = z(rng);

  MlpLayout::Cache cache;
  net.forward(p, x, &cache);
  std::vector<float> grad(p.size(), 0.0f);
  net.backward(p, cache, r, grad);

  const float eps = 1e-2f;
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto plus = p, minus = p;
    plus[k] += eps;
    minus[k] -= eps;
    const double fd = (weighted_output(net, plus, x, r) - weighted_output(net, minus, x, r)) / (2.0 * eps);
    EXPECT_NEAR(grad[k], fd, 2e-3 + 2e-2 * std::abs(fd)) << "param " << k;
  }
}

TEST(Mlp, BackwardAccumulates) {
  const MlpLayout net({2, 3, 1}, 0);
  std::vector<float> p(net.num_params());
  std::mt19937_64 rng(2);
  net.init(p, rng, 1.0f);
  Mat x = Mat::Ones(2, 1), dout = Mat::Ones(1, 1);
  MlpLayout::Cache cache;
  net.forward(p, x, &cache);
  std::vector<float> once(p.size(), 0.0f), twice(p.size(), 0.0f);
  net.backward(p, cache, dout, once);
  net.backward(p, cache, dout, twice);
  net.backward(p, cache, dout, twice);
  for (std::size_t k = 0; k < p.size(); ++k) EXPECT_FLOAT_EQ(twice[k], 2 * once[k]);
}

TEST(Mlp, RejectsWrongInput) {
  const MlpLayout net({2, 3, 1}, 0);
  std::vector<float> p(net.num_params(), 0.0f);
  EXPECT_THROW(net.forward(p, Mat::Zero(3, 1)), dcc::DomainError);
  EXPECT_THROW(MlpLayout({4}, 0), dcc::ConfigError);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam opt(3, 0.01);
  std::vector<float> p{1.0f, -2.0f, 0.5f};
  const std::vector<float> g{0.3f, -4.0f, 1e-3f};
  opt.step(p, g);
  EXPECT_NEAR(p[0], 1.0 - 0.01, 1e-6);
  EXPECT_NEAR(p[1], -2.0 + 0.01, 1e-6);
  EXPECT_NEAR(p[2], 0.5 - 0.01, 1e-4);
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, MinimizesQuadratic) {
  Adam opt(2, 0.05);
  std::vector<float> p{3.0f, -4.0f};
  for (int k = 0; k < 2000; ++k) {
    const std::vector<float> g{2 * p[0], 2 * (p[1] - 1)};
    opt.step(p, g);
  }
  EXPECT_NEAR(p[0], 0.0, 1e-2);
  EXPECT_NEAR(p[1], 1.0, 1e-2);
}

TEST(ClipGradNorm, ScalesOnlyWhenAbove) {
  std::vector<float> g{3.0f, 4.0f};
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 10.0), 5.0);
  EXPECT_EQ(g, (std::vector<float>{3.0f, 4.0f}));
  EXPECT_DOUBLE_EQ(clip_grad_norm(g, 0.5), 5.0);
  EXPECT_NEAR(g[0], 0.3, 1e-6);
  EXPECT_NEAR(g[1], 0.4, 1e-6);
}
