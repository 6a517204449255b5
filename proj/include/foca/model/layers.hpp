#pragma once

// Dense building blocks with explicit backward passes: valid 1-D convolution
// via im2col, ReLU, width-2 max pooling, softmax cross-entropy and inverted
// dropout.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace foca::model {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// (L - k + 1) x (C k) patch matrix of an L x C signal; column c*k + o holds x(t + o, c).
inline Matrix im2col(const Matrix& x, int k) {
  const Eigen::Index out_len = x.rows() - k + 1;
  const Eigen::Index channels = x.cols();
  Matrix p(out_len, channels * k);
  for (Eigen::Index t = 0; t < out_len; ++t)
    for (Eigen::Index c = 0; c < channels; ++c)
      for (int o = 0; o < k; ++o) p(t, c * k + o) = x(t + o, c);
  return p;
}

inline Matrix col2im(const Matrix& dp, Eigen::Index len, Eigen::Index channels, int k) {
  Matrix dx = Matrix::Zero(len, channels);
  for (Eigen::Index t = 0; t < dp.rows(); ++t)
    for (Eigen::Index c = 0; c < channels; ++c)
      for (int o = 0; o < k; ++o) dx(t + o, c) += dp(t, c * k + o);
  return dx;
}

struct PoolResult {
  Matrix out;
  std::vector<Eigen::Index> argmax;  // source row for every output entry, row-major
};

/// Width 2, stride 2, trailing odd row dropped. Ties pick the earlier row.
inline PoolResult max_pool2(const Matrix& x) {
  PoolResult r;
  const Eigen::Index len = x.rows() / 2;
  r.out.resize(len, x.cols());
  r.argmax.resize(static_cast<std::size_t>(len * x.cols()));
  for (Eigen::Index t = 0; t < len; ++t) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const bool second = x(2 * t + 1, c) > x(2 * t, c);
      const Eigen::Index src = 2 * t + (second ? 1 : 0);
      r.out(t, c) = x(src, c);
      r.argmax[static_cast<std::size_t>(t * x.cols() + c)] = src;
    }
  }
  return r;
}

inline Matrix max_pool2_backward(const Matrix& d_out, const std::vector<Eigen::Index>& argmax,
                                 Eigen::Index in_rows) {
  Matrix dx = Matrix::Zero(in_rows, d_out.cols());
  for (Eigen::Index t = 0; t < d_out.rows(); ++t)
    for (Eigen::Index c = 0; c < d_out.cols(); ++c)
      dx(argmax[static_cast<std::size_t>(t * d_out.cols() + c)], c) += d_out(t, c);
  return dx;
}

template <class Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(0.0);
}

/// Mask of zeros and 1/(1-rate); all ones when rate is zero.
template <class Rng>
Vector dropout_mask(Eigen::Index n, double rate, Rng& rng) {
  Vector m = Vector::Ones(n);
  if (rate <= 0.0) return m;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 - rate;
  for (Eigen::Index i = 0; i < n; ++i) m[i] = u(rng) < keep ? 1.0 / keep : 0.0;
  return m;
}

inline Vector softmax(const Vector& logits) {
  const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// -log softmax(logits)[label], via log-sum-exp.
inline double cross_entropy(const Vector& logits, int label) {
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  return lse - logits[label];
}

}  // namespace foca::model
