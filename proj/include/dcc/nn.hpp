#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace dcc::nn {

using Mat = Eigen::MatrixXf;
using Vec = Eigen::VectorXf;

/// Fully connected tanh network whose parameters live in an external flat
/// buffer. Per layer: weights (out x in, column-major), then bias.
class MlpLayout {
 public:
  MlpLayout() = default;
  MlpLayout(std::vector<int> sizes, std::size_t offset);

  struct Cache {
    std::vector<Mat> activations;  // [0] is the input, last is pre-output hidden
  };

  std::size_t num_params() const noexcept { return count_; }
  std::size_t offset() const noexcept { return offset_; }
  std::size_t end() const noexcept { return offset_ + count_; }
  const std::vector<int>& sizes() const noexcept { return sizes_; }
  int in_dim() const { return sizes_.front(); }
  int out_dim() const { return sizes_.back(); }

  /// Scaled-normal init: hidden layers with gain sqrt(2), output with `out_gain`.
  void init(std::span<float> params, std::mt19937_64& rng, float out_gain) const;

  /// x is (in_dim x batch). Returns (out_dim x batch), linear output.
  Mat forward(std::span<const float> params, const Mat& x, Cache* cache = nullptr) const;

  /// Accumulates dL/dparams into grad given dL/doutput (out_dim x batch).
  void backward(std::span<const float> params, const Cache& cache, const Mat& dout,
                std::span<float> grad) const;

 private:
  std::vector<int> sizes_;
  std::size_t offset_ = 0;
  std::size_t count_ = 0;
  std::vector<std::size_t> w_offsets_;
  std::vector<std::size_t> b_offsets_;
};

/// Adaptive-moment optimizer over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(std::span<float> params, std::span<const float> grad);
  std::int64_t steps() const noexcept { return t_; }

 private:
  std::vector<double> m_, v_;
  double lr_ = 3e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::int64_t t_ = 0;
};

/// Scales grad in place so its L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(std::span<float> grad, double max_norm);

}  // namespace dcc::nn
