#pragma once

// Symmetric 2x2 matrix algebra over a configurable scalar.
//
// Everything here is closed form: spectral decomposition, square roots and
// inverses of 2x2 symmetric matrices need one square root and no iteration,
// and the same code runs on double and on Extended.

#include "mwlab/errors.hpp"
#include "mwlab/scalar.hpp"

#include <Eigen/Core>

#include <string>

namespace mwlab {

template <class S>
using Vec2 = Eigen::Matrix<S, 2, 1>;

template <class S>
using Mat2 = Eigen::Matrix<S, 2, 2>;

/// Planar rotation stored as (cos, sin); composition is complex multiplication,
/// so chains of small rotations never call a transcendental function.
template <class S>
struct Rot2 {
  S c = S(1);
  S s = S(0);

  static Rot2 identity() { return {}; }

  /// Rotation by gamma = arctan(delta): cos = (1+delta^2)^{-1/2}, sin = delta*cos.
  static Rot2 from_tangent(const S& delta) {
    using std::sqrt;
    S c = S(1) / sqrt(S(1) + delta * delta);
    return {c, delta * c};
  }

  Rot2 operator*(const Rot2& o) const { return {c * o.c - s * o.s, s * o.c + c * o.s}; }
  Rot2 inverse() const { return {c, -s}; }
  /// Rotation by twice the angle.
  Rot2 doubled() const { return {c * c - s * s, S(2) * c * s}; }

  /// Image of the first basis vector, i.e. the unit vector at this angle.
  Vec2<S> first() const { return Vec2<S>(c, s); }
  /// Image of the second basis vector.
  Vec2<S> second() const { return Vec2<S>(-s, c); }
  Vec2<S> apply(const Vec2<S>& v) const { return Vec2<S>(c * v.x() - s * v.y(), s * v.x() + c * v.y()); }
};

template <class S>
struct SymMat2 {
  S m11 = S(0);
  S m12 = S(0);
  S m22 = S(0);

  SymMat2() = default;
  SymMat2(S a11, S a12, S a22) : m11(std::move(a11)), m12(std::move(a12)), m22(std::move(a22)) {}

  static SymMat2 identity() { return {S(1), S(0), S(1)}; }
  static SymMat2 diag(const S& d1, const S& d2) { return {d1, S(0), d2}; }
  /// Symmetric part of a general 2x2 matrix.
  static SymMat2 from_matrix(const Mat2<S>& m) { return {m(0, 0), (m(0, 1) + m(1, 0)) / S(2), m(1, 1)}; }

  Mat2<S> matrix() const {
    Mat2<S> m;
    m << m11, m12, m12, m22;
    return m;
  }

  S trace() const { return m11 + m22; }
  S det() const { return m11 * m22 - m12 * m12; }
  Vec2<S> apply(const Vec2<S>& v) const { return Vec2<S>(m11 * v.x() + m12 * v.y(), m12 * v.x() + m22 * v.y()); }
  /// v^T M v
  S quad(const Vec2<S>& v) const { return m11 * v.x() * v.x() + S(2) * m12 * v.x() * v.y() + m22 * v.y() * v.y(); }
  /// u^T M v
  S bilinear(const Vec2<S>& u, const Vec2<S>& v) const {
    return u.x() * (m11 * v.x() + m12 * v.y()) + u.y() * (m12 * v.x() + m22 * v.y());
  }

  /// Coordinates of M in the orthonormal frame (a, b).
  SymMat2 in_frame(const Vec2<S>& a, const Vec2<S>& b) const { return {quad(a), bilinear(a, b), quad(b)}; }
  /// Inverse of in_frame: rebuild absolute entries from frame coordinates.
  static SymMat2 from_frame(const SymMat2& coords, const Vec2<S>& a, const Vec2<S>& b) {
    // M = c11 aa* + c12 (ab* + ba*) + c22 bb*
    return {coords.m11 * a.x() * a.x() + S(2) * coords.m12 * a.x() * b.x() + coords.m22 * b.x() * b.x(),
            coords.m11 * a.x() * a.y() + coords.m12 * (a.x() * b.y() + a.y() * b.x()) + coords.m22 * b.x() * b.y(),
            coords.m11 * a.y() * a.y() + S(2) * coords.m12 * a.y() * b.y() + coords.m22 * b.y() * b.y()};
  }

  SymMat2& operator+=(const SymMat2& o) {
    m11 += o.m11;
    m12 += o.m12;
    m22 += o.m22;
    return *this;
  }
  SymMat2& operator-=(const SymMat2& o) {
    m11 -= o.m11;
    m12 -= o.m12;
    m22 -= o.m22;
    return *this;
  }
  SymMat2& operator*=(const S& t) {
    m11 *= t;
    m12 *= t;
    m22 *= t;
    return *this;
  }
  friend SymMat2 operator+(SymMat2 x, const SymMat2& y) { return x += y; }
  friend SymMat2 operator-(SymMat2 x, const SymMat2& y) { return x -= y; }
  friend SymMat2 operator*(SymMat2 x, const S& t) { return x *= t; }
  friend SymMat2 operator*(const S& t, SymMat2 x) { return x *= t; }
  friend SymMat2 operator/(SymMat2 x, const S& t) { return x *= S(1) / t; }

  /// Largest absolute entry; used to scale tolerances.
  S max_abs() const {
    using std::abs;
    S r = abs(m11);
    if (abs(m12) > r) r = abs(m12);
    if (abs(m22) > r) r = abs(m22);
    return r;
  }
};

/// v v*
template <class S>
SymMat2<S> outer(const Vec2<S>& v) {
  return {v.x() * v.x(), v.x() * v.y(), v.y() * v.y()};
}

/// M A M for symmetric M, A (the congruence that appears in <W> A <W>).
template <class S>
SymMat2<S> congruence(const SymMat2<S>& M, const SymMat2<S>& A) {
  Mat2<S> m = M.matrix();
  return SymMat2<S>::from_matrix(m * A.matrix() * m);
}

/// M = alpha a a* + beta b b*, alpha >= beta, (a, b) orthonormal and right handed.
template <class S>
struct Spectral2 {
  S alpha = S(0);
  S beta = S(0);
  Vec2<S> a = Vec2<S>(S(1), S(0));
  Vec2<S> b = Vec2<S>(S(0), S(1));

  SymMat2<S> matrix() const { return alpha * outer(a) + beta * outer(b); }

  /// Inverse computed from the eigenvalues; no cancellation for ill-conditioned M.
  SymMat2<S> inverse() const {
    if (!(beta != S(0)) || !(alpha != S(0)))
      throw SingularityError("inverse of singular matrix", to_double(alpha * beta));
    return outer(a) / alpha + outer(b) / beta;
  }
  SymMat2<S> sqrt() const {
    using std::sqrt;
    if (beta < S(0)) throw DomainError("square root of a matrix that is not PSD");
    return sqrt(alpha) * outer(a) + sqrt(beta) * outer(b);
  }
  SymMat2<S> inv_sqrt() const {
    using std::sqrt;
    if (!(beta > S(0))) throw SingularityError("inverse square root of singular matrix", to_double(alpha * beta));
    return outer(a) / sqrt(alpha) + outer(b) / sqrt(beta);
  }
  S det() const { return alpha * beta; }
};

/// Closed-form eigen-decomposition. The eigenvector of the larger eigenvalue
/// has its first nonzero component positive; b is a rotated by +90 degrees.
template <class S>
Spectral2<S> spectral(const SymMat2<S>& M) {
  using std::sqrt;
  S half_diff = (M.m11 - M.m22) / S(2);
  S mean = (M.m11 + M.m22) / S(2);
  S h = sqrt(half_diff * half_diff + M.m12 * M.m12);
  Spectral2<S> out;
  out.alpha = mean + h;
  out.beta = mean - h;
  if (h == S(0)) return out;
  Vec2<S> a = half_diff >= S(0) ? Vec2<S>(h + half_diff, M.m12) : Vec2<S>(M.m12, h - half_diff);
  a /= sqrt(a.x() * a.x() + a.y() * a.y());
  if (a.x() < S(0) || (a.x() == S(0) && a.y() < S(0))) a = -a;
  out.a = a;
  out.b = Vec2<S>(-a.y(), a.x());
  return out;
}

template <class S>
S det(const SymMat2<S>& M) {
  return M.det();
}

template <class S>
S trace(const SymMat2<S>& M) {
  return M.trace();
}

template <class S>
S op_norm(const SymMat2<S>& M) {
  using std::abs;
  Spectral2<S> sp = spectral(M);
  return abs(sp.alpha) > abs(sp.beta) ? abs(sp.alpha) : abs(sp.beta);
}

template <class S>
S min_eigenvalue(const SymMat2<S>& M) {
  return spectral(M).beta;
}

/// PSD within the backend tolerance scaled by the matrix size.
template <class S>
bool is_psd(const SymMat2<S>& M, const S& tol_scale = S(1)) {
  S tol = tolerance(M.max_abs()) * tol_scale;
  return M.trace() >= -tol && min_eigenvalue(M) >= -tol;
}

/// Throws SingularityError (with the determinant) when det(M) == 0.
template <class S>
SymMat2<S> inverse(const SymMat2<S>& M) {
  S d = M.det();
  if (d == S(0)) throw SingularityError("inverse of singular matrix", to_double(d));
  return SymMat2<S>{M.m22 / d, -M.m12 / d, M.m11 / d};
}

/// Principal square root of a PSD matrix: (M + sqrt(det) I) / sqrt(tr + 2 sqrt(det)).
template <class S>
SymMat2<S> psd_sqrt(const SymMat2<S>& M) {
  using std::sqrt;
  if (!is_psd(M)) throw DomainError("psd_sqrt: matrix is not positive semidefinite");
  S d = M.det();
  if (d < S(0)) d = S(0);
  S sd = sqrt(d);
  S t2 = M.trace() + S(2) * sd;
  if (!(t2 > S(0))) return SymMat2<S>{};
  S t = sqrt(t2);
  return SymMat2<S>{(M.m11 + sd) / t, M.m12 / t, (M.m22 + sd) / t};
}

/// Least c >= 0 with S <= c M, i.e. the top eigenvalue of M^{-1/2} S M^{-1/2}.
/// M is given by its spectral form so that an ill-conditioned M loses nothing.
template <class S>
S gen_eig_max(const SymMat2<S>& Smat, const Spectral2<S>& M) {
  using std::sqrt;
  if (!(M.beta > S(0)))
    throw SingularityError("gen_eig_max: reference matrix is not positive definite", to_double(M.det()));
  SymMat2<S> c = Smat.in_frame(M.a, M.b);
  SymMat2<S> normalized{c.m11 / M.alpha, c.m12 / sqrt(M.alpha * M.beta), c.m22 / M.beta};
  S top = spectral(normalized).alpha;
  return top > S(0) ? top : S(0);
}

template <class S>
S gen_eig_max(const SymMat2<S>& Smat, const SymMat2<S>& M) {
  return gen_eig_max(Smat, spectral(M));
}

template <class S>
std::string to_string(const Vec2<S>& v) {
  return "(" + to_string(v.x()) + ", " + to_string(v.y()) + ")";
}

}  // namespace mwlab
