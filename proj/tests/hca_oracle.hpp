#pragma once

// Straight-line transcription of the hyperbolic cross-attention formulas on
// plain std::vector<double>. It shares no code with the library (no Eigen, no
// clamping) and serves as the reference for oracle-equivalence tests.

#include <cmath>
#include <cstddef>
#include <vector>

namespace foca::oracle {

using V = std::vector<double>;
using M = std::vector<V>;  // row-major, M[i] is row i

inline double dot(const V& a, const V& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const V& a) { return std::sqrt(dot(a, a)); }

inline V scale(double s, const V& a) {
  V o(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = s * a[i];
  return o;
}

inline V exp0(const V& x) {
  const double n = norm(x);
  if (n == 0.0) return x;
  return scale(std::tanh(n) / n, x);
}

inline V log0(const V& x) {
  const double n = norm(x);
  if (n == 0.0) return x;
  return scale(std::atanh(n) / n, x);
}

inline V mobius_add(const V& x, const V& y) {
  const double xy = dot(x, y), x2 = dot(x, x), y2 = dot(y, y);
  const double den = 1.0 + 2.0 * xy + x2 * y2;
  V o(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    o[i] = ((1.0 + 2.0 * xy + y2) * x[i] + (1.0 - x2) * y[i]) / den;
  }
  return o;
}

inline V mobius_scalar(double r, const V& x) {
  const double n = norm(x);
  if (n == 0.0) return x;
  return scale(std::tanh(r * std::atanh(n)) / n, x);
}

inline double dist(const V& x, const V& y) {
  double u = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) u += (x[i] - y[i]) * (x[i] - y[i]);
  return std::acosh(1.0 + 2.0 * u / ((1.0 - dot(x, x)) * (1.0 - dot(y, y))));
}

/// W (d_out x d_in) times column vector x.
inline V matvec(const M& w, const V& x) {
  V o(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) o[i] = dot(w[i], x);
  return o;
}

inline M attention(const M& q, const M& k) {
  M a(q.size(), V(k.size()));
  for (std::size_t i = 0; i < q.size(); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) z += std::exp(-dist(q[i], k[j]));
    for (std::size_t j = 0; j < k.size(); ++j) a[i][j] = std::exp(-dist(q[i], k[j])) / z;
  }
  return a;
}

inline M aggregate(const M& alpha, const M& v) {
  M out;
  for (const V& row : alpha) {
    V acc = mobius_scalar(row[0], v[0]);
    for (std::size_t j = 1; j < v.size(); ++j) acc = mobius_add(acc, mobius_scalar(row[j], v[j]));
    out.push_back(acc);
  }
  return out;
}

struct Weights {
  M wq_a, wk_a, wv_a, wq_v, wk_v, wv_v;
};

struct Result {
  M fused, alpha_av, alpha_va;
};

inline Result hca(const M& h_a, const M& h_v, const Weights& w) {
  M qa, ka, va, qv, kv, vv;
  for (const V& row : h_a) {
    const V b = exp0(row);
    qa.push_back(exp0(matvec(w.wq_a, log0(b))));
    ka.push_back(exp0(matvec(w.wk_a, log0(b))));
    va.push_back(exp0(matvec(w.wv_a, log0(b))));
  }
  for (const V& row : h_v) {
    const V b = exp0(row);
    qv.push_back(exp0(matvec(w.wq_v, log0(b))));
    kv.push_back(exp0(matvec(w.wk_v, log0(b))));
    vv.push_back(exp0(matvec(w.wv_v, log0(b))));
  }
  Result r;
  r.alpha_av = attention(qa, kv);
  r.alpha_va = attention(qv, ka);
  const M o_av = aggregate(r.alpha_av, vv);
  const M o_va = aggregate(r.alpha_va, va);
  for (std::size_t i = 0; i < o_av.size(); ++i) r.fused.push_back(log0(mobius_add(o_av[i], o_va[i])));
  return r;
}

}  // namespace foca::oracle
