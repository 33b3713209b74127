#pragma once

// Symmetric convex bodies in the plane, represented as zonotopes
// Z = { sum_j t_j g_j : t_j in [-1, 1] }.
//
// Convex-body averages of piecewise-constant functions are zonotopes, and so
// are their Minkowski sums, so nothing else is needed. Norms of a body are
// maxima of a convex function and are attained at vertices.

#include "mwlab/dyadic.hpp"
#include "mwlab/errors.hpp"
#include "mwlab/mat2.hpp"
#include "mwlab/scalar.hpp"
#include "mwlab/weight.hpp"

#include <algorithm>
#include <vector>

namespace mwlab {

template <class S>
S cross(const Vec2<S>& u, const Vec2<S>& v) {
  return u.x() * v.y() - u.y() * v.x();
}

/// Angular threshold below which two generator directions are merged.
template <class S>
S merge_threshold() {
  return ipow(S(0.5), ScalarTraits<S>::bits() - 16);
}

template <class S>
struct Zonotope {
  std::vector<Vec2<S>> generators;

  /// h_Z(u) = sum_j |<g_j, u>|
  S support(const Vec2<S>& u) const {
    using std::abs;
    S h(0);
    for (const auto& g : generators) h += abs(g.dot(u));
    return h;
  }

  /// Generators flipped into the upper half plane, sorted by angle, with
  /// zeros dropped and near-parallel directions merged. Same body.
  Zonotope canonical() const {
    using std::abs;
    using std::sqrt;
    std::vector<Vec2<S>> g;
    g.reserve(generators.size());
    for (Vec2<S> v : generators) {
      if (v.x() == S(0) && v.y() == S(0)) continue;
      if (v.y() < S(0) || (v.y() == S(0) && v.x() < S(0))) v = -v;
      g.push_back(v);
    }
    std::sort(g.begin(), g.end(), [](const Vec2<S>& u, const Vec2<S>& v) { return cross(u, v) > S(0); });
    S thr = merge_threshold<S>();
    auto parallel = [&](const Vec2<S>& u, const Vec2<S>& v) {
      return abs(cross(u, v)) <= thr * sqrt(u.squaredNorm() * v.squaredNorm());
    };
    std::vector<Vec2<S>> merged;
    for (const auto& v : g) {
      if (!merged.empty() && parallel(merged.back(), v) && merged.back().dot(v) > S(0))
        merged.back() += v;
      else
        merged.push_back(v);
    }
    // Directions just above angle 0 and just below pi describe the same line.
    if (merged.size() > 1 && parallel(merged.front(), merged.back()) && merged.front().dot(merged.back()) < S(0)) {
      merged.front() -= merged.back();
      merged.pop_back();
      if (merged.front().y() < S(0)) merged.front() = -merged.front();
    }
    return Zonotope{std::move(merged)};
  }

  /// Vertices in counterclockwise order: v_0 = -sum g, v_k = v_{k-1} + 2 g_k,
  /// followed by their negatives. Empty for the zero body.
  std::vector<Vec2<S>> vertices() const {
    Zonotope c = canonical();
    std::size_t m = c.generators.size();
    std::vector<Vec2<S>> out;
    if (m == 0) return out;
    out.reserve(2 * m);
    Vec2<S> v(S(0), S(0));
    for (const auto& g : c.generators) v -= g;
    out.push_back(v);
    for (std::size_t k = 1; k < m; ++k) {
      v += S(2) * c.generators[k - 1];
      out.push_back(v);
    }
    for (std::size_t k = 0; k < m; ++k) out.push_back(-out[k]);
    return out;
  }
};

template <class S>
Zonotope<S> minkowski_sum(const Zonotope<S>& a, const Zonotope<S>& b) {
  Zonotope<S> z = a;
  z.generators.insert(z.generators.end(), b.generators.begin(), b.generators.end());
  return z;
}

template <class S>
Zonotope<S> scale(const Zonotope<S>& z, const S& t) {
  using std::abs;
  Zonotope<S> out = z;
  for (auto& g : out.generators) g *= abs(t);
  return out;
}

/// <<f>>_I: generators (|J|/|I|) f_J over the grid cells J inside I.
template <class S>
Zonotope<S> body_average(const PiecewiseVector<S>& f, const Interval& I) {
  auto [lo, hi] = detail::cell_range(f.level, I);
  S w = S(1) / S(static_cast<double>(hi - lo));
  Zonotope<S> z;
  z.generators.reserve(hi - lo);
  for (auto k = lo; k < hi; ++k) z.generators.push_back(w * f.cells[k]);
  return z;
}

/// max over the vertex list of v* A v (the squared A-norm of the body).
template <class S>
S max_quadratic(const std::vector<Vec2<S>>& vertices, const SymMat2<S>& A) {
  S best(0);
  // The body is symmetric, so the first half of the walk suffices.
  std::size_t half = vertices.size() / 2;
  for (std::size_t k = 0; k < half; ++k) {
    S q = A.quad(vertices[k]);
    if (q > best) best = q;
  }
  return best;
}

/// rho_A(Z) = sup_{x in Z} |A^{1/2} x|: generators are mapped by A^{1/2} and the
/// image zonotope is walked. A may be singular.
template <class S>
S norm_A(const Zonotope<S>& z, const SymMat2<S>& A) {
  using std::sqrt;
  SymMat2<S> root = psd_sqrt(A);
  Zonotope<S> image;
  image.generators.reserve(z.generators.size());
  for (const auto& g : z.generators) image.generators.push_back(root.apply(g));
  S best(0);
  for (const auto& v : image.vertices()) {
    S n2 = v.squaredNorm();
    if (n2 > best) best = n2;
  }
  return sqrt(best);
}

template <class S>
S norm(const Zonotope<S>& z) {
  return norm_A(z, SymMat2<S>::identity());
}

}  // namespace mwlab
