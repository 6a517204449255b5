#pragma once

// Hyperbolic cross-attention between an audio and a visual token sequence.
//
// Both n x d sequences are lifted into the ball, turned into queries, keys and
// values by Mobius-linear maps exp0(W log0(.)), attended in both directions
// with softmax(-distance) weights, aggregated with Mobius operations, fused by
// Mobius addition and mapped back with log0.

#include "foca/poincare.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace foca::hca {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// n x d Euclidean tokens, one token per row.
using TokenSequence = Matrix;
/// n x d points of the Poincare ball, one point per row.
using BallBatch = Matrix;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Direction { AudioToVisual, VisualToAudio };
enum class Modality { Audio, Visual };

inline std::string_view to_string(Direction d) {
  return d == Direction::AudioToVisual ? "a->v" : "v->a";
}

struct AttentionWeights {
  Matrix alpha;  // n_q x n_k, rows sum to one
  Direction direction = Direction::AudioToVisual;
};

/// Six square projection matrices, applied as column-vector maps W x.
struct HcaParams {
  Matrix wq_a, wk_a, wv_a;
  Matrix wq_v, wk_v, wv_v;

  static HcaParams zeros(int d) {
    HcaParams p;
    for (Matrix* m : p.all()) *m = Matrix::Zero(d, d);
    return p;
  }

  static HcaParams identity(int d) {
    HcaParams p;
    for (Matrix* m : p.all()) *m = Matrix::Identity(d, d);
    return p;
  }

  /// Entries uniform in [-1/sqrt(d), 1/sqrt(d)].
  template <class Rng>
  static HcaParams random(int d, Rng& rng) {
    HcaParams p;
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    std::uniform_real_distribution<double> dist(-s, s);
    for (Matrix* m : p.all()) {
      *m = Matrix(d, d);
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = dist(rng);
    }
    return p;
  }

  std::array<Matrix*, 6> all() { return {&wq_a, &wk_a, &wv_a, &wq_v, &wk_v, &wv_v}; }
  std::array<const Matrix*, 6> all() const { return {&wq_a, &wk_a, &wv_a, &wq_v, &wk_v, &wv_v}; }
  int dim() const { return static_cast<int>(wq_a.rows()); }
};

struct Qkv {
  BallBatch q, k, v;
};

// ---------------------------------------------------------------------------
// Forward operations

inline BallBatch project_to_ball(const TokenSequence& h) {
  if (!h.allFinite()) throw poincare::DomainError("project_to_ball: non-finite token");
  BallBatch out(h.rows(), h.cols());
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    out.row(i) = poincare::exp_origin(h.row(i).transpose()).transpose();
  }
  return out;
}

/// Row-wise exp0(W log0(x)).
inline BallBatch mobius_linear(const BallBatch& x, const Matrix& w) {
  if (w.cols() != x.cols()) throw ShapeError("mobius_linear: weight/input width mismatch");
  BallBatch out(x.rows(), w.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector t = poincare::log_origin(x.row(i).transpose());
    out.row(i) = poincare::exp_origin(w * t).transpose();
  }
  return out;
}

inline Qkv make_qkv(const BallBatch& h_ball, const HcaParams& p, Modality m) {
  const bool audio = m == Modality::Audio;
  return Qkv{mobius_linear(h_ball, audio ? p.wq_a : p.wq_v),
             mobius_linear(h_ball, audio ? p.wk_a : p.wk_v),
             mobius_linear(h_ball, audio ? p.wv_a : p.wv_v)};
}

/// Row-wise softmax of negative distances, shifted by the row maximum.
inline Matrix attention_weights(const BallBatch& q, const BallBatch& k) {
  if (q.cols() != k.cols()) throw ShapeError("attention_weights: query/key width mismatch");
  if (k.rows() < 1) throw ShapeError("attention_weights: no keys");
  Matrix alpha(q.rows(), k.rows());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.rows(); ++j) {
      alpha(i, j) = -poincare::distance(q.row(i).transpose(), k.row(j).transpose());
    }
    const double mx = alpha.row(i).maxCoeff();
    alpha.row(i) = (alpha.row(i).array() - mx).exp().matrix();
    alpha.row(i) /= alpha.row(i).sum();
  }
  return alpha;
}

/// out_i = (((a_i0 (x) v_0) (+) a_i1 (x) v_1) (+) ...), a strict left fold.
inline BallBatch aggregate(const Matrix& alpha, const BallBatch& v) {
  if (alpha.cols() != v.rows()) throw ShapeError("aggregate: weight columns != value rows");
  if (v.rows() < 1) throw ShapeError("aggregate: no values");
  BallBatch out(alpha.rows(), v.cols());
  for (Eigen::Index i = 0; i < alpha.rows(); ++i) {
    Vector acc = poincare::mobius_scalar(alpha(i, 0), v.row(0).transpose());
    for (Eigen::Index j = 1; j < v.rows(); ++j) {
      acc = poincare::mobius_add(acc, poincare::mobius_scalar(alpha(i, j), v.row(j).transpose()));
    }
    out.row(i) = acc.transpose();
  }
  return out;
}

/// Row-wise log0(o_av (+) o_va).
inline TokenSequence fuse(const BallBatch& o_av, const BallBatch& o_va) {
  if (o_av.rows() != o_va.rows() || o_av.cols() != o_va.cols()) {
    throw ShapeError("fuse: operand shapes differ");
  }
  TokenSequence out(o_av.rows(), o_av.cols());
  for (Eigen::Index i = 0; i < o_av.rows(); ++i) {
    out.row(i) =
        poincare::log_origin(poincare::mobius_add(o_av.row(i).transpose(), o_va.row(i).transpose()))
            .transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// End to end

/// Intermediates kept by hca_forward for the backward pass.
struct HcaTrace {
  TokenSequence h_a, h_v;
  BallBatch b_a, b_v;
  Qkv qkv_a, qkv_v;
  BallBatch o_av, o_va;
};

struct HcaOutput {
  TokenSequence fused;
  AttentionWeights av;
  AttentionWeights va;
};

inline HcaOutput hca_forward(const TokenSequence& h_a, const TokenSequence& h_v, const HcaParams& p,
                             HcaTrace* trace = nullptr) {
  if (h_a.rows() != h_v.rows() || h_a.cols() != h_v.cols()) {
    throw ShapeError("hca_forward: audio is " + std::to_string(h_a.rows()) + "x" +
                     std::to_string(h_a.cols()) + " but visual is " + std::to_string(h_v.rows()) +
                     "x" + std::to_string(h_v.cols()));
  }
  if (h_a.rows() < 1 || h_a.cols() < 1) throw ShapeError("hca_forward: empty sequence");
  if (p.dim() != h_a.cols()) throw ShapeError("hca_forward: parameter width != token width");

  BallBatch b_a = project_to_ball(h_a);
  BallBatch b_v = project_to_ball(h_v);
  Qkv a = make_qkv(b_a, p, Modality::Audio);
  Qkv v = make_qkv(b_v, p, Modality::Visual);

  HcaOutput out;
  out.av = {attention_weights(a.q, v.k), Direction::AudioToVisual};
  out.va = {attention_weights(v.q, a.k), Direction::VisualToAudio};
  BallBatch o_av = aggregate(out.av.alpha, v.v);
  BallBatch o_va = aggregate(out.va.alpha, a.v);
  out.fused = fuse(o_av, o_va);

  if (trace) {
    trace->h_a = h_a;
    trace->h_v = h_v;
    trace->b_a = std::move(b_a);
    trace->b_v = std::move(b_v);
    trace->qkv_a = std::move(a);
    trace->qkv_v = std::move(v);
    trace->o_av = std::move(o_av);
    trace->o_va = std::move(o_va);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backward

struct HcaGrad {
  TokenSequence d_h_a, d_h_v;
  HcaParams d_params;
};

namespace detail {

/// Pulls d_out back through aggregate(), recomputing the fold prefix.
inline void aggregate_vjp(const Matrix& alpha, const BallBatch& v, const BallBatch& d_out,
                          Matrix& d_alpha, BallBatch& d_v) {
  const Eigen::Index nk = v.rows();
  d_alpha = Matrix::Zero(alpha.rows(), alpha.cols());
  d_v = BallBatch::Zero(v.rows(), v.cols());
  std::vector<Vector> scaled(nk);
  std::vector<Vector> prefix(nk);
  for (Eigen::Index i = 0; i < alpha.rows(); ++i) {
    for (Eigen::Index j = 0; j < nk; ++j) {
      scaled[j] = poincare::mobius_scalar(alpha(i, j), v.row(j).transpose());
      prefix[j] = j == 0 ? scaled[0] : poincare::mobius_add(prefix[j - 1], scaled[j]);
    }
    Vector d_acc = d_out.row(i).transpose();
    for (Eigen::Index j = nk - 1; j >= 0; --j) {
      Vector d_scaled;
      if (j == 0) {
        d_scaled = d_acc;
      } else {
        poincare::AddGrad g = poincare::mobius_add_vjp(prefix[j - 1], scaled[j], d_acc);
        d_acc = std::move(g.dx);
        d_scaled = std::move(g.dy);
      }
      poincare::ScalarGrad sg = poincare::mobius_scalar_vjp(alpha(i, j), v.row(j).transpose(), d_scaled);
      d_alpha(i, j) += sg.dr;
      d_v.row(j) += sg.dx.transpose();
    }
  }
}

/// Pulls d_alpha back to queries and keys through the softmax of -distance.
inline void attention_vjp(const BallBatch& q, const BallBatch& k, const Matrix& alpha,
                          const Matrix& d_alpha, BallBatch& d_q, BallBatch& d_k) {
  d_q = BallBatch::Zero(q.rows(), q.cols());
  d_k = BallBatch::Zero(k.rows(), k.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const double inner = alpha.row(i).dot(d_alpha.row(i));
    for (Eigen::Index j = 0; j < k.rows(); ++j) {
      const double d_logit = alpha(i, j) * (d_alpha(i, j) - inner);
      poincare::DistanceGrad g =
          poincare::distance_vjp(q.row(i).transpose(), k.row(j).transpose(), -d_logit);
      d_q.row(i) += g.dx.transpose();
      d_k.row(j) += g.dy.transpose();
    }
  }
}

/// Backward of mobius_linear; accumulates into d_w and d_x.
inline void mobius_linear_vjp(const BallBatch& x, const Matrix& w, const BallBatch& d_out,
                              Matrix& d_w, BallBatch& d_x) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Vector t = poincare::log_origin(x.row(i).transpose());
    const Vector z = w * t;
    const Vector d_z = poincare::exp_origin_vjp(z, d_out.row(i).transpose());
    d_w.noalias() += d_z * t.transpose();
    const Vector d_t = w.transpose() * d_z;
    d_x.row(i) += poincare::log_origin_vjp(x.row(i).transpose(), d_t).transpose();
  }
}

}  // namespace detail

/// Gradient of <d_fused, fused> with respect to both inputs and all six weights.
inline HcaGrad hca_backward(const HcaTrace& tr, const HcaOutput& fwd, const HcaParams& p,
                            const TokenSequence& d_fused) {
  const Eigen::Index n = tr.h_a.rows();
  const Eigen::Index d = tr.h_a.cols();

  BallBatch d_o_av(n, d), d_o_va(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector x = tr.o_av.row(i).transpose();
    const Vector y = tr.o_va.row(i).transpose();
    const Vector sum = poincare::mobius_add(x, y);
    const Vector d_sum = poincare::log_origin_vjp(sum, d_fused.row(i).transpose());
    poincare::AddGrad g = poincare::mobius_add_vjp(x, y, d_sum);
    d_o_av.row(i) = g.dx.transpose();
    d_o_va.row(i) = g.dy.transpose();
  }

  HcaGrad out;
  out.d_params = HcaParams::zeros(static_cast<int>(d));
  Matrix d_alpha_av, d_alpha_va;
  BallBatch d_vv, d_va;
  detail::aggregate_vjp(fwd.av.alpha, tr.qkv_v.v, d_o_av, d_alpha_av, d_vv);
  detail::aggregate_vjp(fwd.va.alpha, tr.qkv_a.v, d_o_va, d_alpha_va, d_va);

  BallBatch d_qa, d_kv, d_qv, d_ka;
  detail::attention_vjp(tr.qkv_a.q, tr.qkv_v.k, fwd.av.alpha, d_alpha_av, d_qa, d_kv);
  detail::attention_vjp(tr.qkv_v.q, tr.qkv_a.k, fwd.va.alpha, d_alpha_va, d_qv, d_ka);

  BallBatch d_ba = BallBatch::Zero(n, d);
  BallBatch d_bv = BallBatch::Zero(n, d);
  HcaParams& dp = out.d_params;
  detail::mobius_linear_vjp(tr.b_a, p.wq_a, d_qa, dp.wq_a, d_ba);
  detail::mobius_linear_vjp(tr.b_a, p.wk_a, d_ka, dp.wk_a, d_ba);
  detail::mobius_linear_vjp(tr.b_a, p.wv_a, d_va, dp.wv_a, d_ba);
  detail::mobius_linear_vjp(tr.b_v, p.wq_v, d_qv, dp.wq_v, d_bv);
  detail::mobius_linear_vjp(tr.b_v, p.wk_v, d_kv, dp.wk_v, d_bv);
  detail::mobius_linear_vjp(tr.b_v, p.wv_v, d_vv, dp.wv_v, d_bv);

  out.d_h_a.resize(n, d);
  out.d_h_v.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.d_h_a.row(i) =
        poincare::exp_origin_vjp(tr.h_a.row(i).transpose(), d_ba.row(i).transpose()).transpose();
    out.d_h_v.row(i) =
        poincare::exp_origin_vjp(tr.h_v.row(i).transpose(), d_bv.row(i).transpose()).transpose();
  }
  return out;
}

}  // namespace foca::hca
