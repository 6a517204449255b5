#pragma once

// Arithmetic on the unit Poincare ball (curvature -1).
//
// Every map returns points with norm <= kMaxNorm. Each forward operation has a
// matching *_vjp function that pulls an output cotangent back to the inputs;
// the clamp is differentiated as the projection it is (identity inside,
// radial component removed when engaged).

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace foca::poincare {

inline constexpr double kBallEps = 1e-5;
inline constexpr double kZeroEps = 1e-12;
inline constexpr double kMaxNorm = 1.0 - kBallEps;

using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

inline void require_finite(const VectorRef& v, const char* what) {
  if (!v.allFinite()) {
    throw DomainError(std::string(what) + ": non-finite input");
  }
}

inline void require_inside(const VectorRef& p, const char* what) {
  require_finite(p, what);
  if (p.squaredNorm() >= 1.0) {
    throw DomainError(std::string(what) + ": point is not inside the unit ball");
  }
}

/// Radial projection onto the closed ball of radius kMaxNorm.
inline Vector project(Vector z) {
  const double n = z.norm();
  if (n > kMaxNorm) z *= kMaxNorm / n;
  return z;
}

/// Pullback through project(z); the Jacobian is symmetric.
inline Vector project_vjp(const VectorRef& z, const VectorRef& g) {
  const double n = z.norm();
  if (n <= kMaxNorm) return g;
  const Vector u = z / n;
  return (kMaxNorm / n) * (g - u * u.dot(g));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// exp / log at the origin

/// tanh(|v|) v/|v|, with the norm clamped to kMaxNorm.
inline Vector exp_origin(const VectorRef& v) {
  detail::require_finite(v, "exp_origin");
  const double n = v.norm();
  if (n < kZeroEps) return v;
  const double t = std::min(std::tanh(n), kMaxNorm);
  return (t / n) * v;
}

inline Vector exp_origin_vjp(const VectorRef& v, const VectorRef& g) {
  const double n = v.norm();
  if (n < kZeroEps) return g;
  const double th = std::tanh(n);
  const bool clamped = th > kMaxNorm;
  const double t = clamped ? kMaxNorm : th;
  const double dt = clamped ? 0.0 : 1.0 - th * th;
  const double s = t / n;
  const double ds = (dt * n - t) / (n * n);
  return s * g + (ds * v.dot(g) / n) * v;
}

/// artanh(|p|) p/|p|. Throws for |p| >= 1.
inline Vector log_origin(const VectorRef& p) {
  detail::require_inside(p, "log_origin");
  const double n = p.norm();
  if (n < kZeroEps) return p;
  return (std::atanh(n) / n) * p;
}

inline Vector log_origin_vjp(const VectorRef& p, const VectorRef& g) {
  const double n = p.norm();
  if (n < kZeroEps) return g;
  const double a = std::atanh(n);
  const double s = a / n;
  const double ds = (n / (1.0 - n * n) - a) / (n * n);
  return s * g + (ds * p.dot(g) / n) * p;
}

// ---------------------------------------------------------------------------
// Mobius addition

inline Vector mobius_add(const VectorRef& x, const VectorRef& y) {
  detail::require_inside(x, "mobius_add");
  detail::require_inside(y, "mobius_add");
  const double xy = x.dot(y);
  const double x2 = x.squaredNorm();
  const double y2 = y.squaredNorm();
  const double den = 1.0 + 2.0 * xy + x2 * y2;
  Vector num = (1.0 + 2.0 * xy + y2) * x + (1.0 - x2) * y;
  return detail::project(num / den);
}

struct AddGrad {
  Vector dx;
  Vector dy;
};

inline AddGrad mobius_add_vjp(const VectorRef& x, const VectorRef& y, const VectorRef& g_out) {
  const double xy = x.dot(y);
  const double x2 = x.squaredNorm();
  const double y2 = y.squaredNorm();
  const double a = 1.0 + 2.0 * xy + y2;
  const double b = 1.0 - x2;
  const double den = 1.0 + 2.0 * xy + x2 * y2;
  const Vector num = a * x + b * y;
  const Vector g = detail::project_vjp(num / den, g_out);

  const double xg = x.dot(g);
  const double yg = y.dot(g);
  const double ng = num.dot(g) / (den * den);
  AddGrad out;
  out.dx = (a * g + 2.0 * xg * y - 2.0 * yg * x) / den - ng * (2.0 * y + 2.0 * y2 * x);
  out.dy = (2.0 * xg * (x + y) + b * g) / den - ng * (2.0 * x + 2.0 * x2 * y);
  return out;
}

// ---------------------------------------------------------------------------
// Mobius scalar multiplication

/// tanh(r artanh|x|) x/|x|. For |x| below kZeroEps this is the linear limit r*x.
inline Vector mobius_scalar(double r, const VectorRef& x) {
  if (!std::isfinite(r)) throw DomainError("mobius_scalar: non-finite scalar");
  detail::require_inside(x, "mobius_scalar");
  const double n = x.norm();
  if (n < kZeroEps) return r * x;
  double t = std::tanh(r * std::atanh(n));
  if (std::abs(t) > kMaxNorm) t = std::copysign(kMaxNorm, t);
  return (t / n) * x;
}

struct ScalarGrad {
  double dr = 0.0;
  Vector dx;
};

inline ScalarGrad mobius_scalar_vjp(double r, const VectorRef& x, const VectorRef& g) {
  const double n = x.norm();
  ScalarGrad out;
  if (n < kZeroEps) {
    out.dr = x.dot(g);
    out.dx = r * g;
    return out;
  }
  const double a = std::atanh(n);
  const double th = std::tanh(r * a);
  const bool clamped = std::abs(th) > kMaxNorm;
  const double t = clamped ? std::copysign(kMaxNorm, th) : th;
  const double sech2 = clamped ? 0.0 : 1.0 - th * th;
  const double xg = x.dot(g);
  out.dr = sech2 * a * xg / n;
  const double dt_dn = sech2 * r / (1.0 - n * n);
  const double s = t / n;
  const double ds = (dt_dn * n - t) / (n * n);
  out.dx = s * g + (ds * xg / n) * x;
  return out;
}

// ---------------------------------------------------------------------------
// Geodesic distance

/// arcosh(1 + 2|x-y|^2 / ((1-|x|^2)(1-|y|^2))), evaluated as
/// log1p(t + sqrt(t(t+2))) so that small separations keep full precision.
inline double distance(const VectorRef& x, const VectorRef& y) {
  detail::require_inside(x, "distance");
  detail::require_inside(y, "distance");
  const double u = (x - y).squaredNorm();
  const double ab = (1.0 - x.squaredNorm()) * (1.0 - y.squaredNorm());
  const double t = std::max(0.0, 2.0 * u / ab);
  return std::log1p(t + std::sqrt(t * (t + 2.0)));
}

struct DistanceGrad {
  Vector dx;
  Vector dy;
};

/// Gradient of g * distance(x, y). Coincident points return the zero subgradient.
inline DistanceGrad distance_vjp(const VectorRef& x, const VectorRef& y, double g) {
  const Vector diff = x - y;
  const double u = diff.squaredNorm();
  const double a = 1.0 - x.squaredNorm();
  const double b = 1.0 - y.squaredNorm();
  const double t = 2.0 * u / (a * b);
  DistanceGrad out{Vector::Zero(x.size()), Vector::Zero(y.size())};
  if (!(t > 0.0)) return out;
  const double dd_dt = g / std::sqrt(t * (t + 2.0));
  out.dx = dd_dt * (4.0 / (a * b) * diff + (2.0 * t / a) * x);
  out.dy = dd_dt * (-4.0 / (a * b) * diff + (2.0 * t / b) * y);
  return out;
}

}  // namespace foca::poincare
