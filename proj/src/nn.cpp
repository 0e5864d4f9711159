#include "dcc/nn.hpp"

#include <cmath>

#include "dcc/error.hpp"

namespace dcc::nn {

namespace {

using ConstMatMap = Eigen::Map<const Mat>;
using ConstVecMap = Eigen::Map<const Vec>;
using MatMap = Eigen::Map<Mat>;
using VecMap = Eigen::Map<Vec>;

}  // namespace

MlpLayout::MlpLayout(std::vector<int> sizes, std::size_t offset)
    : sizes_(std::move(sizes)), offset_(offset) {
  if (sizes_.size() < 2) throw ConfigError("an MLP needs at least input and output sizes");
  std::size_t at = offset_;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw ConfigError("layer sizes must be positive");
    w_offsets_.push_back(at);
    at += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]);
    b_offsets_.push_back(at);
    at += static_cast<std::size_t>(sizes_[l + 1]);
  }
  count_ = at - offset_;
}

void MlpLayout::init(std::span<float> params, std::mt19937_64& rng, float out_gain) const {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  const auto layers = w_offsets_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const float gain = l + 1 == layers ? out_gain : std::sqrt(2.0f);
    const float std = gain / std::sqrt(static_cast<float>(in));
    for (int k = 0; k < in * out; ++k) params[w_offsets_[l] + k] = std * normal(rng);
    for (int k = 0; k < out; ++k) params[b_offsets_[l] + k] = 0.0f;
  }
}

Mat MlpLayout::forward(std::span<const float> params, const Mat& x, Cache* cache) const {
  if (x.rows() != in_dim()) throw DomainError("MLP input has wrong dimension");
  const auto layers = w_offsets_.size();
  if (cache) {
    cache->activations.clear();
    cache->activations.reserve(layers);
  }
  Mat h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    const ConstMatMap w(params.data() + w_offsets_[l], sizes_[l + 1], sizes_[l]);
    const ConstVecMap b(params.data() + b_offsets_[l], sizes_[l + 1]);
    if (cache) cache->activations.push_back(h);
    Mat z = w * h;
    z.colwise() += b;
    if (l + 1 < layers) z = z.array().tanh();
    h = std::move(z);
  }
  return h;
}

void MlpLayout::backward(std::span<const float> params, const Cache& cache, const Mat& dout,
                         std::span<float> grad) const {
  const auto layers = w_offsets_.size();
  Mat delta = dout;
  for (std::size_t l = layers; l-- > 0;) {
    const Mat& input = cache.activations[l];
    MatMap gw(grad.data() + w_offsets_[l], sizes_[l + 1], sizes_[l]);
    VecMap gb(grad.data() + b_offsets_[l], sizes_[l + 1]);
    gw.noalias() += delta * input.transpose();
    gb += delta.rowwise().sum();
    if (l == 0) break;
    const ConstMatMap w(params.data() + w_offsets_[l], sizes_[l + 1], sizes_[l]);
    Mat back = w.transpose() * delta;
    // input of layer l is tanh output of layer l-1
    delta = back.array() * (1.0f - input.array().square());
  }
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : m_(n, 0.0), v_(n, 0.0), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(std::span<float> params, std::span<const float> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw DomainError("Adam state size mismatch");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    const double update = lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    params[i] = static_cast<float>(params[i] - update);
  }
}

double clip_grad_norm(std::span<float> grad, double max_norm) {
  double sq = 0.0;
  for (float g : grad) sq += static_cast<double>(g) * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const auto scale = static_cast<float>(max_norm / norm);
    for (float& g : grad) g *= scale;
  }
  return norm;
}

}  // namespace dcc::nn
