#pragma once

// Martingale matrix weights on the dyadic tree.
//
// The counterexample weight is stored through its eigenframes: for I in D^n,
// W_I = alpha_n a_I a_I* + beta_n b_I b_I*, and the frame (a_I, b_I) is the
// root frame rotated by theta_I = sum_k (+-gamma_k) along the path to I.
// Frames are kept as (cos, sin) pairs, so every rotation is exact up to
// rounding and no transcendental function is evaluated.

#include "mwlab/dyadic.hpp"
#include "mwlab/errors.hpp"
#include "mwlab/mat2.hpp"
#include "mwlab/parallel.hpp"
#include "mwlab/scalar.hpp"

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace mwlab {

template <class S>
struct Eigenvalues {
  S alpha;
  S beta;
};

/// alpha_n = 1/(1+eps^{2n+2}), beta_n = eps^{2n+2}/(1+eps^{2n+2}).
template <class S>
Eigenvalues<S> eigen_schedule(const S& eps, int n) {
  if (!(eps > S(0) && eps < S(1))) throw DomainError("eigen_schedule: epsilon must lie in (0,1)");
  if (n < 0) throw RangeError("eigen_schedule: negative level");
  S e = ipow(S(eps * eps), static_cast<unsigned>(n + 1));
  S d = S(1) + e;
  return {S(1) / d, e / d};
}

/// delta_n^2 = eps^{2n}(1-eps^2)/(1-eps^{4n+2}), n >= 1.
template <class S>
S delta_squared(const S& eps, int n) {
  if (n < 1) throw RangeError("delta_n is defined for n >= 1");
  S e2 = eps * eps;
  return ipow(e2, static_cast<unsigned>(n)) * (S(1) - e2) / (S(1) - ipow(e2, static_cast<unsigned>(2 * n + 1)));
}

template <class S>
S delta(const S& eps, int n) {
  using std::sqrt;
  return sqrt(delta_squared(eps, n));
}

// Scale-fused products. r_n = eps^{-n-1} overflows long before the products
// below do, so these are evaluated in closed form.

/// r_n = eps^{-n-1}
template <class S>
S r_scale(const S& eps, int n) {
  return ipow(S(S(1) / eps), static_cast<unsigned>(n + 1));
}

/// r_n * beta_n = eps^{n+1}/(1+eps^{2n+2})
template <class S>
S r_beta(const S& eps, int n) {
  S e = ipow(eps, static_cast<unsigned>(n + 1));
  return e / (S(1) + e * e);
}

/// r_n * beta_{n+1} = eps^{n+3}/(1+eps^{2n+4})
template <class S>
S r_beta_next(const S& eps, int n) {
  return ipow(eps, static_cast<unsigned>(n + 3)) / (S(1) + ipow(eps, static_cast<unsigned>(2 * n + 4)));
}

/// r_n * delta_{n+1} = sqrt((1-eps^2)/(1-eps^{4n+6}))
template <class S>
S r_delta_next(const S& eps, int n) {
  using std::sqrt;
  return sqrt((S(1) - eps * eps) / (S(1) - ipow(eps, static_cast<unsigned>(4 * n + 6))));
}

/// a' = (a + sign*delta*b)/sqrt(1+delta^2), b' = (b - sign*delta*a)/sqrt(1+delta^2).
template <class S>
std::pair<Vec2<S>, Vec2<S>> rotate_frame(const Vec2<S>& a, const Vec2<S>& b, const S& delta, int sign) {
  using std::abs;
  using std::sqrt;
  S tol = tolerance<S>() * S(16);
  if (abs(a.squaredNorm() - S(1)) > tol || abs(b.squaredNorm() - S(1)) > tol || abs(a.dot(b)) > tol)
    throw DomainError("rotate_frame: input frame is not orthonormal");
  S c = S(1) / sqrt(S(1) + delta * delta);
  S sd = S(sign) * delta;
  return {Vec2<S>(c * (a + sd * b)), Vec2<S>(c * (b - sd * a))};
}

template <class S>
class MartingaleWeight {
 public:
  /// Frames are tabulated when `dense`; otherwise they are composed on demand.
  MartingaleWeight(S eps, int depth, bool dense)
      : eps_(std::move(eps)), depth_(depth), dense_(dense) {
    if (depth < 0 || depth > kMaxLevel - 1) throw RangeError("weight depth out of range");
    for (int n = 0; n <= depth + 1; ++n) {
      auto ab = eigen_schedule(eps_, n);
      alpha_.push_back(ab.alpha);
      beta_.push_back(ab.beta);
      if (n == 0) {
        delta_.push_back(S(0));
        step_.push_back(Rot2<S>::identity());
      } else {
        delta_.push_back(mwlab::delta(eps_, n));
        step_.push_back(Rot2<S>::from_tangent(delta_.back()));
      }
    }
    if (dense_) {
      frames_.resize(count_upto(depth_));
      frames_[0] = Rot2<S>::identity();
      for (int n = 1; n <= depth_; ++n) {
        std::uint64_t base = (std::uint64_t{1} << n) - 1;
        std::uint64_t pbase = (std::uint64_t{1} << (n - 1)) - 1;
        Rot2<S> up = step_[n], down = step_[n].inverse();
        for (std::uint64_t k = 0; k < (std::uint64_t{1} << n); ++k)
          frames_[base + k] = frames_[pbase + (k >> 1)] * ((k & 1u) == 0 ? up : down);
      }
    }
  }

  const S& epsilon() const { return eps_; }
  int depth() const { return depth_; }
  bool dense() const { return dense_; }

  // Schedules are tabulated for levels 0..depth+1.
  const S& alpha(int n) const { return alpha_.at(n); }
  const S& beta(int n) const { return beta_.at(n); }
  const S& delta(int n) const { return delta_.at(n); }
  /// Rotation by gamma_n (n >= 1); the Plus child turns by +gamma, Minus by -gamma.
  const Rot2<S>& step(int n) const { return step_.at(n); }
  Rot2<S> child_step(int n, IntervalClass side) const {
    return side == IntervalClass::Minus ? step_.at(n).inverse() : step_.at(n);
  }

  /// Rotation carrying (e1, e2) to (a_I, b_I).
  Rot2<S> frame(const Interval& I) const {
    check(I);
    if (dense_) return frames_[I.flat()];
    Rot2<S> r = Rot2<S>::identity();
    for (int k = 1; k <= I.level; ++k) r = r * (step_sign(I, k) > 0 ? step_[k] : step_[k].inverse());
    return r;
  }

  /// Rotation from I's frame to the frame of a descendant J, composed from the
  /// step rotations only; accurate even when the relative angle is tiny.
  Rot2<S> relative_frame(const Interval& I, const Interval& J) const {
    check(J);
    if (!I.contains(J)) throw PreconditionError("relative_frame: J is not inside I");
    Rot2<S> r = Rot2<S>::identity();
    for (int k = I.level + 1; k <= J.level; ++k) r = r * (step_sign(J, k) > 0 ? step_[k] : step_[k].inverse());
    return r;
  }

  Vec2<S> a(const Interval& I) const { return frame(I).first(); }
  Vec2<S> b(const Interval& I) const { return frame(I).second(); }

  Spectral2<S> spectral(const Interval& I) const {
    Rot2<S> f = frame(I);
    return {alpha_[I.level], beta_[I.level], f.first(), f.second()};
  }

  /// W_I = <W>_I
  SymMat2<S> average(const Interval& I) const { return spectral(I).matrix(); }

 private:
  void check(const Interval& I) const {
    if (I.level > depth_) throw RangeError("interval " + I.str() + " is below the built depth");
  }

  S eps_;
  int depth_;
  bool dense_;
  std::vector<S> alpha_, beta_, delta_;
  std::vector<Rot2<S>> step_;
  std::vector<Rot2<S>> frames_;
};

/// Largest depth whose frames are tabulated by default.
inline constexpr int kDenseDepth = 22;

/// The recursive counterexample weight; root frame a = (1,0), b = (0,1).
template <class S>
MartingaleWeight<S> build_counterexample_weight(const S& eps, int depth) {
  if (!(eps > S(0) && eps <= S(0.5))) throw ConfigError("epsilon must lie in (0, 1/2]");
  if (depth < 0) throw ConfigError("depth must be nonnegative");
  return MartingaleWeight<S>(eps, depth, depth <= kDenseDepth);
}

struct WeightReport {
  std::size_t checked = 0;
  double martingale_residual = 0;
  double trace_deviation = 0;
  double orthonormality_deviation = 0;
  double schedule_deviation = 0;  ///< |a*Wa - alpha_n| and |b*Wb - beta_n|
  double eccentricity_error = 0;  ///< relative error of beta_n/alpha_n against eps^{2n+2}
  double max_op_norm = 0;
  double min_root_cosine = 1;     ///< min <a_{I0}, a_I>
  double min_plus_alignment = 1;  ///< min <a_{I0}, a_{I+}>

  void merge(const WeightReport& o) {
    checked += o.checked;
    martingale_residual = std::max(martingale_residual, o.martingale_residual);
    trace_deviation = std::max(trace_deviation, o.trace_deviation);
    orthonormality_deviation = std::max(orthonormality_deviation, o.orthonormality_deviation);
    schedule_deviation = std::max(schedule_deviation, o.schedule_deviation);
    eccentricity_error = std::max(eccentricity_error, o.eccentricity_error);
    max_op_norm = std::max(max_op_norm, o.max_op_norm);
    min_root_cosine = std::min(min_root_cosine, o.min_root_cosine);
    min_plus_alignment = std::min(min_plus_alignment, o.min_plus_alignment);
  }

  bool ok(double tol) const {
    return martingale_residual <= tol && trace_deviation <= tol && orthonormality_deviation <= tol &&
           schedule_deviation <= tol && eccentricity_error <= tol && max_op_norm <= 1 + tol;
  }
};

namespace detail {

template <class S>
void check_interval(const MartingaleWeight<S>& W, const Interval& I, WeightReport& r) {
  using std::abs;
  Spectral2<S> sp = W.spectral(I);
  SymMat2<S> WI = sp.matrix();
  auto upd = [](double& slot, const S& v) { slot = std::max(slot, to_double(abs(v))); };
  upd(r.trace_deviation, WI.trace() - S(1));
  upd(r.orthonormality_deviation, sp.a.squaredNorm() - S(1));
  upd(r.orthonormality_deviation, sp.b.squaredNorm() - S(1));
  upd(r.orthonormality_deviation, sp.a.dot(sp.b));
  upd(r.schedule_deviation, WI.quad(sp.a) - sp.alpha);
  upd(r.schedule_deviation, WI.quad(sp.b) - sp.beta);
  S ecc = ipow(S(W.epsilon() * W.epsilon()), static_cast<unsigned>(I.level + 1));
  upd(r.eccentricity_error, (sp.beta / sp.alpha - ecc) / ecc);
  r.max_op_norm = std::max(r.max_op_norm, to_double(op_norm(WI)));
  r.min_root_cosine = std::min(r.min_root_cosine, to_double(sp.a.x()));
  if (I.level < W.depth()) {
    SymMat2<S> mean = (W.average(I.plus()) + W.average(I.minus())) / S(2);
    upd(r.martingale_residual, (WI - mean).max_abs());
    Vec2<S> ap = W.a(I.plus());
    r.min_plus_alignment = std::min(r.min_plus_alignment, to_double(ap.x()));
  }
  ++r.checked;
}

}  // namespace detail

/// Checks every interval of D^{<= maxLevel} (all built levels by default).
template <class S>
WeightReport check_invariants(const MartingaleWeight<S>& W, int maxLevel = -1) {
  if (maxLevel < 0 || maxLevel > W.depth()) maxLevel = W.depth();
  std::size_t total = count_upto(maxLevel);
  std::size_t blocks = std::min<std::size_t>(total, 256);
  std::vector<WeightReport> parts(blocks);
  parallel_for(blocks, [&](std::size_t bi) {
    std::size_t lo = total * bi / blocks, hi = total * (bi + 1) / blocks;
    for (std::size_t i = lo; i < hi; ++i) detail::check_interval(W, Interval::from_flat(i), parts[bi]);
  });
  WeightReport r;
  for (const auto& p : parts) r.merge(p);
  return r;
}

/// Checks every ancestor of the given intervals; used when D^{<= depth} is too
/// large to enumerate.
template <class S>
WeightReport check_invariants_along(const MartingaleWeight<S>& W, const std::vector<Interval>& leaves) {
  WeightReport r;
  for (const auto& leaf : leaves)
    for (int l = 0; l <= leaf.level; ++l) detail::check_interval(W, leaf.ancestor(l), r);
  return r;
}

// ---------------------------------------------------------------------------
// Piecewise-constant fields on a fixed grid D^m.

namespace detail {

/// Dyadic mean of cells [lo, hi) (hi - lo a power of two) by repeated halving,
/// the same order as a bottom-up pyramid.
template <class T, class S>
T halving_mean(const std::vector<T>& cells, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return cells[lo];
  std::size_t mid = lo + (hi - lo) / 2;
  return T((halving_mean<T, S>(cells, lo, mid) + halving_mean<T, S>(cells, mid, hi)) / S(2));
}

inline std::pair<std::uint64_t, std::uint64_t> cell_range(int gridLevel, const Interval& I) {
  if (I.level > gridLevel)
    throw RangeError("interval " + I.str() + " is finer than grid level " + std::to_string(gridLevel));
  int shift = gridLevel - I.level;
  return {I.index << shift, (I.index + 1) << shift};
}

}  // namespace detail

template <class S>
struct PiecewiseWeight {
  int level = 0;
  std::vector<SymMat2<S>> cells;

  PiecewiseWeight() : cells(1, SymMat2<S>::identity()) {}
  PiecewiseWeight(int lvl, std::vector<SymMat2<S>> values) : level(lvl), cells(std::move(values)) {
    if (lvl < 0 || lvl > 30 || cells.size() != (std::size_t{1} << lvl))
      throw RangeError("PiecewiseWeight: cell count does not match grid level");
  }
  static PiecewiseWeight constant(int lvl, const SymMat2<S>& value) {
    return PiecewiseWeight(lvl, std::vector<SymMat2<S>>(std::size_t{1} << lvl, value));
  }

  std::size_t size() const { return cells.size(); }

  /// Exact dyadic mean over I.
  SymMat2<S> average(const Interval& I) const {
    auto [lo, hi] = detail::cell_range(level, I);
    return detail::halving_mean<SymMat2<S>, S>(cells, lo, hi);
  }

  /// Averages over all of D^{<= level}, level-major (Interval::flat order).
  std::vector<SymMat2<S>> pyramid() const {
    std::vector<SymMat2<S>> out(count_upto(level));
    std::uint64_t base = (std::uint64_t{1} << level) - 1;
    for (std::size_t k = 0; k < cells.size(); ++k) out[base + k] = cells[k];
    for (int n = level - 1; n >= 0; --n) {
      std::uint64_t b = (std::uint64_t{1} << n) - 1, cb = (std::uint64_t{2} << n) - 1;
      for (std::uint64_t k = 0; k < (std::uint64_t{1} << n); ++k)
        out[b + k] = (out[cb + 2 * k] + out[cb + 2 * k + 1]) / S(2);
    }
    return out;
  }

  PiecewiseWeight refine(int finer) const {
    if (finer < level) throw RangeError("refine: target grid is coarser");
    std::vector<SymMat2<S>> out(std::size_t{1} << finer);
    int shift = finer - level;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = cells[k >> shift];
    return PiecewiseWeight(finer, std::move(out));
  }

  bool all_psd() const {
    for (const auto& c : cells)
      if (!is_psd(c)) return false;
    return true;
  }
};

template <class S>
struct PiecewiseVector {
  int level = 0;
  std::vector<Vec2<S>> cells;

  PiecewiseVector() : cells(1, Vec2<S>(S(0), S(0))) {}
  PiecewiseVector(int lvl, std::vector<Vec2<S>> values) : level(lvl), cells(std::move(values)) {
    if (lvl < 0 || lvl > 30 || cells.size() != (std::size_t{1} << lvl))
      throw RangeError("PiecewiseVector: cell count does not match grid level");
  }
  static PiecewiseVector constant(int lvl, const Vec2<S>& value) {
    return PiecewiseVector(lvl, std::vector<Vec2<S>>(std::size_t{1} << lvl, value));
  }

  std::size_t size() const { return cells.size(); }

  Vec2<S> average(const Interval& I) const {
    auto [lo, hi] = detail::cell_range(level, I);
    return detail::halving_mean<Vec2<S>, S>(cells, lo, hi);
  }

  PiecewiseVector refine(int finer) const {
    if (finer < level) throw RangeError("refine: target grid is coarser");
    std::vector<Vec2<S>> out(std::size_t{1} << finer);
    int shift = finer - level;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = cells[k >> shift];
    return PiecewiseVector(finer, std::move(out));
  }
};

/// <phi W f>_I with phi given per cell (nullptr means phi = 1).
template <class S>
Vec2<S> average_product(const PiecewiseWeight<S>& W, const PiecewiseVector<S>& f, const Interval& I,
                        const std::vector<S>* phi = nullptr) {
  if (W.level != f.level) throw RangeError("average_product: weight and vector grids differ");
  if (phi && phi->size() != W.size()) throw RangeError("average_product: phi grid differs");
  auto [lo, hi] = detail::cell_range(W.level, I);
  std::vector<Vec2<S>> prod(hi - lo);
  for (std::uint64_t k = lo; k < hi; ++k) {
    prod[k - lo] = W.cells[k].apply(f.cells[k]);
    if (phi) prod[k - lo] *= (*phi)[k];
  }
  return detail::halving_mean<Vec2<S>, S>(prod, 0, prod.size());
}

/// W_n: the martingale stopped at level n, as a field on D^n.
template <class S>
PiecewiseWeight<S> truncate(const MartingaleWeight<S>& W, int n) {
  if (n < 0 || n > W.depth()) throw RangeError("truncate: level " + std::to_string(n) + " exceeds the built depth");
  std::vector<SymMat2<S>> cells(std::size_t{1} << n);
  for (std::size_t k = 0; k < cells.size(); ++k) cells[k] = W.average(Interval(n, k));
  return PiecewiseWeight<S>(n, std::move(cells));
}

/// W_{n,s} = W_n + s * sum_{I in D+^{<= n}} |S_I|^{-1} 1_{S_I} tilde(I), on D^{n+1}.
template <class S, class Tilde>
PiecewiseWeight<S> build_wns(const MartingaleWeight<S>& W, Tilde&& tilde, int n, const S& s) {
  if (s < S(0)) throw DomainError("build_wns: s must be nonnegative");
  PiecewiseWeight<S> out = truncate(W, n).refine(n + 1);
  S bump = s * ipow(S(2), static_cast<unsigned>(n + 1));
  if (n >= 1)
    for (const Interval& I : plus_class(n)) out.cells[s_interval(I, n).index] += bump * tilde(I);
  return out;
}

}  // namespace mwlab
