#pragma once

// Carleson sequences for the counterexample weight and everything computed
// from them: the testing constant, embedding sums and the blow-up ledger, the
// rescaled sequence tilde A, the W_{n,s} family, and the rational-function
// analysis of R_{n,I}(s).
//
// Deep levels are handled in two ways. Per-interval quantities are evaluated
// in the frame of the interval, using the step rotations and the fused scale
// products from weight.hpp, so no r_n is ever multiplied against a tiny
// number. Whole-level sums use the fact that the frame angle theta_I is a sum
// of independent +-gamma_k, which gives E exp(2i theta_I) as a product.

#include "mwlab/dyadic.hpp"
#include "mwlab/errors.hpp"
#include "mwlab/mat2.hpp"
#include "mwlab/parallel.hpp"
#include "mwlab/scalar.hpp"
#include "mwlab/weight.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

namespace mwlab {

template <class S>
S measure_of(const Interval& I) {
  return ipow(S(0.5), static_cast<unsigned>(I.level));
}

/// A_I = |I| r_I^2 b_I b_I*, r_n = eps^{-n-1}.
template <class S>
class CarlesonSequence {
 public:
  CarlesonSequence(const MartingaleWeight<S>& W, int depth) : W_(&W), depth_(depth) {
    if (depth > W.depth()) throw RangeError("Carleson sequence deeper than the weight");
  }

  const MartingaleWeight<S>& weight() const { return *W_; }
  int depth() const { return depth_; }
  S r(int n) const { return r_scale(W_->epsilon(), n); }

  SymMat2<S> A(const Interval& I) const {
    S rr = r(I.level);
    return measure_of<S>(I) * rr * rr * outer(W_->b(I));
  }

  /// A_I^{1/2} = |I|^{1/2} r_I b_I b_I*
  SymMat2<S> sqrtA(const Interval& I) const {
    using std::sqrt;
    return sqrt(measure_of<S>(I)) * r(I.level) * outer(W_->b(I));
  }

  /// <W>_I A_I <W>_I = |I| (r_I beta_I)^2 b_I b_I*, evaluated without r_I.
  SymMat2<S> WAW(const Interval& I) const {
    S rb = r_beta(W_->epsilon(), I.level);
    return measure_of<S>(I) * rb * rb * outer(W_->b(I));
  }

 private:
  const MartingaleWeight<S>* W_;
  int depth_;
};

template <class S>
CarlesonSequence<S> build_A(const MartingaleWeight<S>& W, int depth) {
  return CarlesonSequence<S>(W, depth);
}

// ---------------------------------------------------------------------------
// Testing constant.

template <class S>
struct TestingResult {
  int depth = 0;
  int max_k_level = 0;
  S value = S(0);  ///< max over K in D^{<= max_k_level}
  Interval argmax;
  S root_value = S(0);
  std::vector<S> per_level_max;  ///< max over K at each level
};

/// Best constants c_K in (1/|K|) sum_{I in D(K), level <= depth} <W>_I A_I <W>_I <= c_K <W>_K
/// for every K in D^{<= maxKLevel}. The sums U_K are aggregated bottom up,
/// U_K = (r_k beta_k)^2 b_K b_K* + (U_{K+} + U_{K-})/2, and each c_K is the top
/// eigenvalue of U_K in the frame of K scaled by diag(alpha_k, beta_k)^{-1/2}.
/// If perK is given it receives c_K in flat order.
template <class S>
TestingResult<S> testing_constant(const MartingaleWeight<S>& W, int depth, int maxKLevel,
                                  std::vector<S>* perK = nullptr) {
  if (depth > W.depth()) throw RangeError("testing_constant: depth exceeds the weight");
  if (maxKLevel > depth) maxKLevel = depth;
  if (maxKLevel < 0) throw RangeError("testing_constant: negative K level");
  const S& eps = W.epsilon();
  TestingResult<S> res;
  res.depth = depth;
  res.max_k_level = maxKLevel;
  res.per_level_max.assign(maxKLevel + 1, S(0));
  if (perK) perK->assign(count_upto(maxKLevel), S(0));
  std::vector<SymMat2<S>> below, cur;
  for (int l = depth; l >= 0; --l) {
    std::size_t count = std::size_t{1} << l;
    cur.assign(count, SymMat2<S>{});
    S rb = r_beta(eps, l);
    S own = rb * rb;
    std::vector<S> ck(l <= maxKLevel ? count : 0);
    parallel_for(count, [&](std::size_t k) {
      Interval K(l, k);
      Spectral2<S> sp = W.spectral(K);
      SymMat2<S> u = own * outer(sp.b);
      if (l < depth) u += (below[2 * k] + below[2 * k + 1]) / S(2);
      cur[k] = u;
      if (l <= maxKLevel) ck[k] = gen_eig_max(u, sp);
    });
    if (l <= maxKLevel) {
      for (std::size_t k = 0; k < count; ++k) {
        if (ck[k] > res.per_level_max[l]) res.per_level_max[l] = ck[k];
        if (ck[k] > res.value) {
          res.value = ck[k];
          res.argmax = Interval(l, k);
        }
        if (perK) (*perK)[Interval(l, k).flat()] = ck[k];
      }
      if (l == 0) res.root_value = ck[0];
    }
    std::swap(below, cur);
  }
  return res;
}

/// Same constant for one K, computed from W_I A_I W_I by plain 2x2 algebra in
/// absolute coordinates (cross-check of the identity A_I^{1/2} W_I = beta_I A_I^{1/2}).
/// The plain product loses about u/beta_n^2 in relative accuracy, so this is
/// meant for shallow depths or a generous Extended mantissa.
template <class S>
S testing_constant_generic(const CarlesonSequence<S>& A, const Interval& K, int depth) {
  const MartingaleWeight<S>& W = A.weight();
  std::vector<SymMat2<S>> terms;
  for (const Interval& I : descendants(K, depth)) terms.push_back(congruence(W.average(I), A.A(I)));
  SymMat2<S> sum = pairwise_sum(terms) / measure_of<S>(K);
  return gen_eig_max(sum, W.average(K));
}

/// Convergence of the testing constant as the depth grows.
template <class S>
struct TestingConvergence {
  std::vector<S> sup_values;      ///< sup over K in D^{<= min(d, maxK)} at depth d
  std::vector<S> root_values;     ///< K = I0
  S min_increment = S(0);         ///< smallest c_K(d) - c_K(d-1) over all K, d
  S max_scaled_increment = S(0);  ///< max (c_K(d) - c_K(d-1)) / eps^{2(d - level K)}
  S max_root_scaled_increment = S(0);  ///< same for K = I0, i.e. against eps^{2d}
  S max_sup_scaled_increment = S(0);   ///< sup increments against eps^{2d}
};

template <class S>
TestingConvergence<S> testing_convergence(const MartingaleWeight<S>& W, int maxDepth, int maxKLevel) {
  TestingConvergence<S> out;
  std::vector<S> prev, curK;
  bool have_increment = false;
  S eps2 = W.epsilon() * W.epsilon();
  for (int d = 0; d <= maxDepth; ++d) {
    auto r = testing_constant(W, d, maxKLevel, &curK);
    out.sup_values.push_back(r.value);
    out.root_values.push_back(r.root_value);
    if (d > 0) {
      S sup_inc = (out.sup_values[d] - out.sup_values[d - 1]) / ipow(eps2, static_cast<unsigned>(d));
      if (sup_inc > out.max_sup_scaled_increment) out.max_sup_scaled_increment = sup_inc;
    }
    if (d > 0) {
      int kmax = std::min(d - 1, maxKLevel);
      for (std::size_t i = 0; i < count_upto(kmax); ++i) {
        Interval K = Interval::from_flat(i);
        S inc = curK[i] - prev[i];
        if (!have_increment || inc < out.min_increment) out.min_increment = inc;
        have_increment = true;
        S scaled = inc / ipow(eps2, static_cast<unsigned>(d - K.level));
        if (scaled > out.max_scaled_increment) out.max_scaled_increment = scaled;
        if (i == 0 && scaled > out.max_root_scaled_increment) out.max_root_scaled_increment = scaled;
      }
    }
    prev = curK;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embedding sums.

enum class PhiPolicy { Ones, Left, LeftPlus };

inline const char* phi_name(PhiPolicy p) {
  switch (p) {
    case PhiPolicy::Ones: return "ones";
    case PhiPolicy::Left: return "left";
    case PhiPolicy::LeftPlus: return "left-plus";
  }
  return "?";
}

/// phi_I = plus * 1_{I+} + minus * 1_{I-}
template <class S>
struct HalfWeights {
  S plus = S(0);
  S minus = S(0);
};

template <class S>
HalfWeights<S> policy_weights(PhiPolicy p, const Interval& I) {
  switch (p) {
    case PhiPolicy::Ones: return {S(1), S(1)};
    case PhiPolicy::Left: return {S(1), S(0)};
    case PhiPolicy::LeftPlus:
      return I.klass() == IntervalClass::Plus ? HalfWeights<S>{S(1), S(0)} : HalfWeights<S>{S(0), S(0)};
  }
  return {};
}

/// r_I <b_I, W_{I+-} e> = even +- odd for the two children, in the frame of I:
/// odd = (alpha-beta) c (r s) e_a, even = (alpha s (r s) + r beta' c^2) e_b, where
/// (c, s) is the rotation by gamma_{n+1} and alpha, beta, beta' are at level n+1.
/// Kept apart because odd dominates and cancels when both halves are weighted.
template <class S>
std::pair<S, S> scaled_child_projections(const MartingaleWeight<S>& W, const Interval& I, const Vec2<S>& e) {
  int n = I.level;
  const S& eps = W.epsilon();
  const Rot2<S>& st = W.step(n + 1);
  Rot2<S> fr = W.frame(I);
  S ea = fr.c * e.x() + fr.s * e.y();
  S eb = -fr.s * e.x() + fr.c * e.y();
  S rs = r_delta_next(eps, n) * st.c;  // r_n sin(gamma_{n+1})
  S rb = r_beta_next(eps, n);
  const S& al = W.alpha(n + 1);
  const S& be = W.beta(n + 1);
  S odd = (al - be) * st.c * rs * ea;
  S even = (al * st.s * rs + rb * st.c * st.c) * eb;
  return {even, odd};
}

/// |A_I^{1/2} <phi_I W f>_I|^2 for f = 1_{I0} e.
template <class S>
S embedding_term(const MartingaleWeight<S>& W, const Interval& I, const Vec2<S>& e, const HalfWeights<S>& phi) {
  if (phi.plus == S(0) && phi.minus == S(0)) return S(0);
  auto [even, odd] = scaled_child_projections(W, I, e);
  S x = ((phi.plus + phi.minus) * even + (phi.plus - phi.minus) * odd) / S(2);
  return measure_of<S>(I) * x * x;
}

template <class S>
struct EmbeddingSum {
  std::vector<S> per_level;
  std::vector<S> cumulative;
};

/// Sum over D^{<= depth} by enumeration; phi is any callable Interval -> HalfWeights.
/// The weight must be built to depth + 1.
template <class S, class Phi>
EmbeddingSum<S> embedding_sum(const MartingaleWeight<S>& W, const Vec2<S>& e, int depth, Phi&& phi) {
  if (depth > W.depth()) throw RangeError("embedding_sum: depth exceeds the weight");
  EmbeddingSum<S> out;
  S running(0);
  for (int l = 0; l <= depth; ++l) {
    std::size_t count = std::size_t{1} << l;
    std::vector<S> terms(count);
    parallel_for(count, [&](std::size_t k) {
      Interval I(l, k);
      terms[k] = embedding_term(W, I, e, phi(I));
    });
    S level = pairwise_sum(terms);
    running += level;
    out.per_level.push_back(level);
    out.cumulative.push_back(running);
  }
  return out;
}

template <class S>
EmbeddingSum<S> embedding_sum(const MartingaleWeight<S>& W, const Vec2<S>& e, int depth, PhiPolicy policy) {
  return embedding_sum(W, e, depth, [policy](const Interval& I) { return policy_weights<S>(policy, I); });
}

/// Same sums by plain matrix algebra in absolute coordinates: A_I.quad(<phi W f>_I).
/// Loses accuracy once r_I exceeds about 1/sqrt(machine epsilon); small depths only.
template <class S>
EmbeddingSum<S> embedding_sum_generic(const CarlesonSequence<S>& A, const Vec2<S>& e, int depth, PhiPolicy policy) {
  const MartingaleWeight<S>& W = A.weight();
  if (depth + 1 > W.depth()) throw RangeError("embedding_sum_generic: weight must be built to depth + 1");
  EmbeddingSum<S> out;
  S running(0);
  for (int l = 0; l <= depth; ++l) {
    std::vector<S> terms;
    for (std::uint64_t k = 0; k < (std::uint64_t{1} << l); ++k) {
      Interval I(l, k);
      HalfWeights<S> phi = policy_weights<S>(policy, I);
      Vec2<S> v = (phi.plus * W.average(I.plus()).apply(e) + phi.minus * W.average(I.minus()).apply(e)) / S(2);
      terms.push_back(A.A(I).quad(v));
    }
    S level = pairwise_sum(terms);
    running += level;
    out.per_level.push_back(level);
    out.cumulative.push_back(running);
  }
  return out;
}

/// Closed-form level sums for f = 1_{I0} e.
template <class S>
struct LevelAggregate {
  int level = 0;
  S left = S(0);       ///< phi_I = 1_{I+} for all I at this level
  S left_plus = S(0);  ///< phi_I = 1_{I+} for Plus-class I only
  S ones = S(0);       ///< phi_I = 1
};

namespace detail {

template <class S>
struct Phase {
  S re = S(1);
  S im = S(0);
  Phase operator*(const Phase& o) const { return {re * o.re - im * o.im, re * o.im + im * o.re}; }
};

/// E over the level of (A cos(t) - B sin(t))^2 |e|^2, given E exp(2 i t) |e|^2 = phase.
template <class S>
S quadratic_mean(const S& A, const S& B, const S& e2, const Phase<S>& phase) {
  return ((A * A + B * B) * e2 + (A * A - B * B) * phase.re) / S(2) - A * B * phase.im;
}

}  // namespace detail

/// Uses E exp(2i theta_{I+}) = exp(2i gamma_{n+1}) prod_{k<=n} cos(2 gamma_k) over
/// I in D^n, and the analogous product for the Plus class. Needs schedules
/// only, so the weight may be a non-dense one of any depth >= maxLevel.
template <class S>
std::vector<LevelAggregate<S>> level_aggregates(const MartingaleWeight<S>& W, int maxLevel, const Vec2<S>& e) {
  if (maxLevel > W.depth()) throw RangeError("level_aggregates: level exceeds the weight");
  const S& eps = W.epsilon();
  S e2 = e.squaredNorm();
  // |e|^2 exp(-2 i psi) = conj((e1 + i e2)^2)
  detail::Phase<S> ephase{e.x() * e.x() - e.y() * e.y(), S(-2) * e.x() * e.y()};
  std::vector<LevelAggregate<S>> out;
  S prod(1), prev_prod(1);  // prod_{k<=n} cos 2gamma_k and prod_{k<n}
  for (int n = 0; n <= maxLevel; ++n) {
    if (n >= 1) {
      prev_prod = prod;
      prod *= W.step(n).doubled().c;
    }
    const Rot2<S>& st = W.step(n + 1);
    S A = W.alpha(n + 1) * r_delta_next(eps, n) * st.c;
    S B = r_beta_next(eps, n) * st.c;
    Rot2<S> g2 = st.doubled();
    detail::Phase<S> full = detail::Phase<S>{g2.c * prod, g2.s * prod} * ephase;
    LevelAggregate<S> agg;
    agg.level = n;
    agg.left = detail::quadratic_mean(A, B, e2, full) / S(4);
    if (n >= 1) {
      Rot2<S> both = (W.step(n) * st).doubled();
      detail::Phase<S> half = detail::Phase<S>{both.c * prev_prod, both.s * prev_prod} * ephase;
      agg.left_plus = detail::quadratic_mean(A, B, e2, half) / S(8);
    }
    S rb = r_beta(eps, n);
    agg.ones = rb * rb * (e2 - prod * ephase.re) / S(2);
    out.push_back(agg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Blow-up ledger.

template <class S>
struct LedgerRecord {
  Interval I;
  S D, F;    ///< D_I = alpha_{n+1} sin(gamma_{n+1}) <a, a_{I+}>, F_I = beta_{n+1} cos(gamma_{n+1}) <a, b_{I+}>
  S rD, rF;  ///< r_I D_I and r_I F_I, fused
  S term;    ///< (1/4) |I| (r_I D_I + r_I F_I)^2
};

template <class S>
struct LevelSummary {
  int level = 0;
  S closed_form = S(0);       ///< sum of terms over D^n
  S half_closed_form = S(0);  ///< sum over Plus-class intervals of D^n
  S cumulative = S(0);
  S half_cumulative = S(0);
  std::optional<S> enumerated;       ///< same sum, interval by interval
  std::optional<S> half_enumerated;
  // Certified extremes over all of D^n, from the branch with the largest
  // rotation |theta_{I+}| = gamma_1 + ... + gamma_{n+1}.
  S min_rD = S(0);
  S max_abs_rF = S(0);
  S max_abs_F = S(0);
  S beta_next = S(0);
  bool rD_ok = false;  ///< r_I D_I >= 1/8
  bool DF_ok = false;  ///< D_I >= 2 |F_I|
};

template <class S>
struct BlowupLedger {
  S epsilon;
  int depth = 0;
  int enumerated_depth = -1;
  std::vector<LedgerRecord<S>> records;  ///< kept only up to the requested record depth
  std::vector<LevelSummary<S>> levels;
  std::size_t enumerated_violations = 0;  ///< intervals failing either pointwise estimate

  bool estimates_hold() const {
    for (const auto& l : levels)
      if (!l.rD_ok || !l.DF_ok) return false;
    return enumerated_violations == 0;
  }
};

template <class S>
LedgerRecord<S> ledger_record(const MartingaleWeight<S>& W, const Interval& I) {
  int n = I.level;
  const S& eps = W.epsilon();
  const Rot2<S>& st = W.step(n + 1);
  Rot2<S> plus = W.frame(I) * st;  // theta_{I+}; a = (1,0) so <a,a_{I+}> = cos, <a,b_{I+}> = -sin
  LedgerRecord<S> r;
  r.I = I;
  r.D = W.alpha(n + 1) * st.s * plus.c;
  r.F = -W.beta(n + 1) * st.c * plus.s;
  r.rD = W.alpha(n + 1) * r_delta_next(eps, n) * st.c * plus.c;
  r.rF = -r_beta_next(eps, n) * st.c * plus.s;
  S x = r.rD + r.rF;
  r.term = measure_of<S>(I) * x * x / S(4);
  return r;
}

/// Ledger to level N for f = 1_{I0} a, a = a_{I0}. Levels up to enumerateDepth
/// are also summed interval by interval; records up to recordDepth are kept.
template <class S>
BlowupLedger<S> blowup_ledger(const MartingaleWeight<S>& W, int N, int enumerateDepth = 20, int recordDepth = -1) {
  using std::abs;
  if (N > W.depth()) throw RangeError("blowup_ledger: N exceeds the weight");
  const S& eps = W.epsilon();
  BlowupLedger<S> L;
  L.epsilon = eps;
  L.depth = N;
  L.enumerated_depth = std::min(enumerateDepth, N);
  auto agg = level_aggregates(W, N, Vec2<S>(S(1), S(0)));
  S cum(0), hcum(0);
  Rot2<S> branch = Rot2<S>::identity();
  S eighth = S(1) / S(8);
  for (int n = 0; n <= N; ++n) {
    LevelSummary<S> s;
    s.level = n;
    s.closed_form = agg[n].left;
    s.half_closed_form = agg[n].left_plus;
    cum += s.closed_form;
    hcum += s.half_closed_form;
    s.cumulative = cum;
    s.half_cumulative = hcum;
    const Rot2<S>& st = W.step(n + 1);
    branch = branch * st;  // Gamma_{n+1}
    if (!(branch.c > S(0))) throw DomainError("frame rotation reached pi/2; estimates are not certifiable");
    s.min_rD = W.alpha(n + 1) * r_delta_next(eps, n) * st.c * branch.c;
    s.max_abs_rF = r_beta_next(eps, n) * st.c * branch.s;
    s.max_abs_F = W.beta(n + 1) * st.c * branch.s;
    s.beta_next = W.beta(n + 1);
    s.rD_ok = s.min_rD >= eighth;
    s.DF_ok = s.min_rD >= S(2) * s.max_abs_rF;
    if (n <= L.enumerated_depth) {
      std::size_t count = std::size_t{1} << n;
      std::vector<LedgerRecord<S>> recs(count);
      parallel_for(count, [&](std::size_t k) { recs[k] = ledger_record(W, Interval(n, k)); });
      std::vector<S> terms(count), halves(count);
      for (std::size_t k = 0; k < count; ++k) {
        terms[k] = recs[k].term;
        halves[k] = (n >= 1 && (k & 1u) == 0) ? recs[k].term : S(0);
        if (recs[k].rD < eighth || recs[k].D < S(2) * abs(recs[k].F)) ++L.enumerated_violations;
      }
      s.enumerated = pairwise_sum(terms);
      s.half_enumerated = pairwise_sum(halves);
      if (n <= recordDepth) L.records.insert(L.records.end(), recs.begin(), recs.end());
    }
    L.levels.push_back(s);
  }
  return L;
}

/// Both pointwise estimates hold on all of D^{<= N} (certified via the extremal branch).
template <class S>
bool pointwise_estimates_hold(const S& eps, int N) {
  MartingaleWeight<S> W(eps, N, false);
  try {
    auto L = blowup_ledger(W, N, -1);
    return L.estimates_hold();
  } catch (const DomainError&) {
    return false;
  }
}

/// Least-squares slope of y against x = 0, 1, ..., y.size()-1.
template <class S>
S ls_slope(const std::vector<S>& y) {
  std::size_t n = y.size();
  if (n < 2) return S(0);
  S mx = S(static_cast<double>(n - 1)) / S(2);
  S my(0);
  for (const auto& v : y) my += v;
  my /= S(static_cast<double>(n));
  S sxy(0), sxx(0);
  for (std::size_t i = 0; i < n; ++i) {
    S dx = S(static_cast<double>(i)) - mx;
    sxy += dx * (y[i] - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// ---------------------------------------------------------------------------
// tilde A_I = C^{-1} <W>_I A_I <W>_I = C^{-1} beta_I^2 A_I.

template <class S>
class TildeSequence {
 public:
  TildeSequence(const CarlesonSequence<S>& A, S C) : A_(&A), C_(std::move(C)) {
    if (!(C_ > S(0))) throw DomainError("tilde_A: the constant C must be positive");
  }
  const S& C() const { return C_; }
  const CarlesonSequence<S>& carleson() const { return *A_; }

  SymMat2<S> operator()(const Interval& I) const { return A_->WAW(I) / C_; }

  /// The defining formula, evaluated by matrix products.
  SymMat2<S> generic(const Interval& I) const {
    return congruence(A_->weight().average(I), A_->A(I)) / C_;
  }

 private:
  const CarlesonSequence<S>* A_;
  S C_;
};

template <class S>
TildeSequence<S> tilde_A(const CarlesonSequence<S>& A, const S& C) {
  return TildeSequence<S>(A, C);
}

struct CarltildeReport {
  double max_ratio = 0;  ///< max over I of gen_eig_max((1/|I|) sum_{J in D(I)} tilde A_J, <W>_I)
  Interval argmax;
  std::size_t checked = 0;
};

/// Checks (1/|I|) sum_{J in D(I), level <= depth} tilde A_J <= <W>_I for all I in D^{<= maxLevel}.
template <class S>
CarltildeReport carltilde_check(const TildeSequence<S>& T, int depth, int maxLevel) {
  const MartingaleWeight<S>& W = T.carleson().weight();
  CarltildeReport rep;
  std::vector<SymMat2<S>> below, cur;
  for (int l = depth; l >= 0; --l) {
    std::size_t count = std::size_t{1} << l;
    cur.assign(count, SymMat2<S>{});
    std::vector<double> ratio(l <= maxLevel ? count : 0);
    S inv_measure = ipow(S(2), static_cast<unsigned>(l));
    parallel_for(count, [&](std::size_t k) {
      Interval I(l, k);
      SymMat2<S> u = T(I) * inv_measure;
      if (l < depth) u += (below[2 * k] + below[2 * k + 1]) / S(2);
      cur[k] = u;
      if (l <= maxLevel) ratio[k] = to_double(gen_eig_max(u, W.spectral(I)));
    });
    for (std::size_t k = 0; k < ratio.size(); ++k) {
      ++rep.checked;
      if (ratio[k] > rep.max_ratio) {
        rep.max_ratio = ratio[k];
        rep.argmax = Interval(l, k);
      }
    }
    std::swap(below, cur);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// The W_{n,s} family, analytically.
//
// For I in D+^{<= n}: <W_{n,s}>_I = <W>_I + s E_I with
// E_I = (1/|I|) sum_{J in D+^{<= n}, J subset I} tilde A_J (no other bump lands
// in I because the selectors of ancestors run down Minus children), and
// <phi_I W_{n,s} f>_I = (1/2)(<W_n>_{I+} + s E_{I+}) a.

template <class S>
class WnsModel {
 public:
  WnsModel(const TildeSequence<S>& T, int n) : T_(&T), n_(n) {
    const MartingaleWeight<S>& W = T.carleson().weight();
    if (n < 1) throw RangeError("W_{n,s} needs n >= 1");
    if (n > W.depth()) throw RangeError("W_{n,s}: n exceeds the weight");
    std::size_t total = count_upto(n);
    E_abs_.assign(total, SymMat2<S>{});
    for (int l = n; l >= 0; --l) {
      S inv_measure = ipow(S(2), static_cast<unsigned>(l));
      std::uint64_t base = (std::uint64_t{1} << l) - 1, cbase = (std::uint64_t{2} << l) - 1;
      for (std::uint64_t k = 0; k < (std::uint64_t{1} << l); ++k) {
        Interval I(l, k);
        SymMat2<S> u;
        if (I.klass() == IntervalClass::Plus) u = T(I) * inv_measure;
        if (l < n) u += (E_abs_[cbase + 2 * k] + E_abs_[cbase + 2 * k + 1]) / S(2);
        E_abs_[base + k] = u;
      }
    }
  }

  int n() const { return n_; }
  const TildeSequence<S>& tilde() const { return *T_; }
  const SymMat2<S>& E(const Interval& I) const { return E_abs_.at(I.flat()); }

  /// <W_{n,s}>_I in the frame of I.
  SymMat2<S> average_in_frame(const Interval& I, const S& s) const {
    const MartingaleWeight<S>& W = T_->carleson().weight();
    Spectral2<S> sp = W.spectral(I);
    SymMat2<S> e = E(I).in_frame(sp.a, sp.b);
    return SymMat2<S>{sp.alpha + s * e.m11, s * e.m12, sp.beta + s * e.m22};
  }

  /// Q_{n,I}(s) = det <W_{n,s}>_I
  S Q(const Interval& I, const S& s) const { return average_in_frame(I, s).det(); }

  /// R_{n,I}(s) = |tilde A_I^{1/2} <W_{n,s}>_I^{-1} <phi_I W_{n,s} f>_I|^2, f = 1_{I0} a.
  S R(const Interval& I, const S& s) const {
    const MartingaleWeight<S>& W = T_->carleson().weight();
    check(I);
    int l = I.level;
    Rot2<S> fr = W.frame(I);
    Vec2<S> a_loc(fr.c, -fr.s);  // a = (1,0) in the frame of I
    SymMat2<S> child;            // <W_n>_{I+} + s E_{I+}, frame of I
    if (l < n_) {
      const Rot2<S>& st = W.step(l + 1);
      const S& al = W.alpha(l + 1);
      const S& be = W.beta(l + 1);
      child = SymMat2<S>{al * st.c * st.c + be * st.s * st.s, (al - be) * st.c * st.s, al * st.s * st.s + be * st.c * st.c};
      Spectral2<S> sp = W.spectral(I);
      child += s * E(I.plus()).in_frame(sp.a, sp.b);
    } else {
      child = SymMat2<S>::diag(W.alpha(l), W.beta(l));
    }
    Vec2<S> v = child.apply(a_loc) / S(2);
    SymMat2<S> M = average_in_frame(I, s);
    S y = (M.m11 * v.y() - M.m12 * v.x()) / M.det();
    S rb = r_beta(W.epsilon(), l);
    S x = rb * y;
    return measure_of<S>(I) * x * x / T_->C();
  }

  struct Bound {
    S s, lhs, fnorm, ratio;
  };

  /// lhs = s sum_{I in D+^{<= n}} R_{n,I}(s), fnorm = ||f||^2_{W_{n,s}}, ratio = lhs/fnorm.
  Bound bound(const S& s) const {
    if (s < S(0)) throw DomainError("wns_bound: s must be nonnegative");
    auto plus = plus_class(n_);
    std::vector<S> terms(plus.size());
    parallel_for(plus.size(), [&](std::size_t i) { terms[i] = R(plus[i], s); });
    S lhs = s * pairwise_sum(terms);
    S fnorm = fnorm_of(s);
    return {s, lhs, fnorm, lhs / fnorm};
  }

  /// <W_{I0} a, a> + s <E_{I0} a, a>
  S fnorm_of(const S& s) const {
    const MartingaleWeight<S>& W = T_->carleson().weight();
    return W.alpha(0) + s * E(Interval::root()).m11;
  }

 private:
  void check(const Interval& I) const {
    if (I.level > n_ || I.klass() != IntervalClass::Plus) throw PreconditionError("R_{n,I} needs I in D+^{<= n}");
  }

  const TildeSequence<S>* T_;
  int n_;
  std::vector<SymMat2<S>> E_abs_;
};

/// Same lhs from an explicit W_{n,s} grid field: sum over I in D+^{<= n} of
/// s tilde A_I . quad(<W_{n,s}>_I^{-1} (1/2) <W_{n,s} f>_{I+}).
template <class S>
S wns_lhs_generic(const PiecewiseWeight<S>& Wns, const TildeSequence<S>& T, int n, const S& s) {
  PiecewiseVector<S> f = PiecewiseVector<S>::constant(Wns.level, Vec2<S>(S(1), S(0)));
  std::vector<S> terms;
  for (const Interval& I : plus_class(n)) {
    Vec2<S> v = average_product(Wns, f, I.plus()) / S(2);
    Vec2<S> g = inverse(Wns.average(I)).apply(v);
    terms.push_back(s * T(I).quad(g));
  }
  return pairwise_sum(terms);
}

template <class S>
struct WnsScan {
  std::vector<int> ns;
  std::vector<S> s_grid;
  std::vector<std::vector<typename WnsModel<S>::Bound>> table;  ///< [n index][s index]
  std::vector<S> best;
  std::vector<S> best_s;
  std::vector<int> decreases;  ///< n values where best(n) < best(n-1)
};

/// Geometric grid a, a q, ..., b with `steps` points.
template <class S>
std::vector<S> geometric_grid(const S& a, const S& b, int steps) {
  using std::exp;
  using std::log;
  if (!(a > S(0)) || !(b > a) || steps < 2) throw ConfigError("s-grid must satisfy 0 < a < b and steps >= 2");
  std::vector<S> out;
  S ratio = exp(log(b / a) / S(steps - 1));
  S v = a;
  for (int i = 0; i < steps; ++i) {
    out.push_back(i == steps - 1 ? b : v);
    v *= ratio;
  }
  return out;
}

template <class S>
WnsScan<S> wns_scan(const TildeSequence<S>& T, int nmin, int nmax, const std::vector<S>& s_grid) {
  WnsScan<S> scan;
  scan.s_grid = s_grid;
  for (int n = nmin; n <= nmax; ++n) {
    WnsModel<S> model(T, n);
    std::vector<typename WnsModel<S>::Bound> row;
    S best(0), best_s(0);
    for (const auto& s : s_grid) {
      row.push_back(model.bound(s));
      if (row.back().ratio > best) {
        best = row.back().ratio;
        best_s = s;
      }
    }
    if (!scan.best.empty() && best < scan.best.back()) scan.decreases.push_back(n);
    scan.ns.push_back(n);
    scan.table.push_back(std::move(row));
    scan.best.push_back(best);
    scan.best_s.push_back(best_s);
  }
  return scan;
}

template <class S>
struct GluingWitness {
  int k;
  int n;
  S s;
  S ratio;
};

/// For k = 0, 1, ...: the first (n, s) in the scan whose ratio reaches 4^k.
template <class S>
std::vector<GluingWitness<S>> gluing_report(const WnsScan<S>& scan) {
  std::vector<GluingWitness<S>> out;
  for (int k = 0;; ++k) {
    S target = ipow(S(4), static_cast<unsigned>(k));
    bool found = false;
    for (std::size_t i = 0; i < scan.ns.size() && !found; ++i)
      for (const auto& b : scan.table[i])
        if (b.ratio >= target) {
          out.push_back({k, scan.ns[i], b.s, b.ratio});
          found = true;
          break;
        }
    if (!found) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rational-function analysis of R_{n,I}(s) = P_{n,I}(s) / Q_{n,I}(s)^2.

/// Monomial coefficients of the interpolating polynomial through (x_i, y_i).
template <class S>
std::vector<S> interpolate(const std::vector<S>& x, const std::vector<S>& y) {
  std::size_t m = x.size();
  std::vector<S> dd = y;  // Newton divided differences
  for (std::size_t j = 1; j < m; ++j)
    for (std::size_t i = m - 1; i >= j; --i) {
      dd[i] = (dd[i] - dd[i - 1]) / (x[i] - x[i - j]);
      if (i == j) break;
    }
  std::vector<S> c(m, S(0));
  for (std::size_t j = m; j-- > 0;) {
    // c <- c * (t - x_j) + dd_j
    for (std::size_t i = m - 1; i > 0; --i) c[i] = c[i - 1] - x[j] * c[i];
    c[0] = -x[j] * c[0];
    c[0] += dd[j];
  }
  return c;
}

template <class S>
S polyval(const std::vector<S>& c, const S& t) {
  S v(0);
  for (std::size_t i = c.size(); i-- > 0;) v = v * t + c[i];
  return v;
}

template <class S>
struct RationalSample {
  Interval I;
  int n = 0;
  std::vector<S> nodes;
  std::vector<S> R, Q, Phat;  ///< Phat = R (Q/Q(0))^2 = P / Q(0)^2
  std::vector<S> p_coeffs;    ///< degree 4 fit of Phat
  std::vector<S> q_coeffs;    ///< degree 2 fit of Q
  S p_residual = S(0);        ///< max relative residual of the fit at the unused nodes
  S q_residual = S(0);
  bool q_bound_ok = true;     ///< Q(s) <= (1+s)^2 Q(0)
  bool p_nonnegative = true;
};

namespace detail {

inline std::vector<std::size_t> spread_indices(std::size_t m, std::size_t degree) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j <= degree; ++j)
    idx.push_back(static_cast<std::size_t>(std::lround(double(j) * double(m - 1) / double(degree))));
  return idx;
}

template <class S>
std::pair<std::vector<S>, S> fit_and_residual(const std::vector<S>& x, const std::vector<S>& y, std::size_t degree) {
  using std::abs;
  auto idx = spread_indices(x.size(), degree);
  std::vector<S> fx, fy;
  for (auto i : idx) {
    fx.push_back(x[i]);
    fy.push_back(y[i]);
  }
  auto c = interpolate(fx, fy);
  S scale(0);
  for (const auto& v : y) scale = abs(v) > scale ? abs(v) : scale;
  S worst(0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    S r = abs(polyval(c, x[i]) - y[i]);
    if (r > worst) worst = r;
  }
  return {c, scale > S(0) ? worst / scale : worst};
}

}  // namespace detail

inline const std::vector<double>& default_s_nodes() {
  static const std::vector<double> nodes{0, 0.5, 1, 2, 4, 8, 16};
  return nodes;
}

template <class S>
RationalSample<S> sample_R(const WnsModel<S>& model, const Interval& I, const std::vector<S>& nodes) {
  std::vector<S> sorted = nodes;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.size() < 7 || std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end() || sorted.front() < S(0))
    throw DomainError("sample_R: need at least 7 distinct nonnegative nodes");
  RationalSample<S> rs;
  rs.I = I;
  rs.n = model.n();
  rs.nodes = nodes;
  S q0 = model.Q(I, S(0));
  for (const auto& s : nodes) {
    S r = model.R(I, s);
    S q = model.Q(I, s);
    S ratio = q / q0;
    rs.R.push_back(r);
    rs.Q.push_back(q);
    rs.Phat.push_back(r * ratio * ratio);
    S cap = (S(1) + s) * (S(1) + s) * q0;
    if (q > cap + tolerance(cap)) rs.q_bound_ok = false;
    if (rs.Phat.back() < S(0)) rs.p_nonnegative = false;
  }
  std::tie(rs.p_coeffs, rs.p_residual) = detail::fit_and_residual(rs.nodes, rs.Phat, 4);
  std::tie(rs.q_coeffs, rs.q_residual) = detail::fit_and_residual(rs.nodes, rs.Q, 2);
  return rs;
}

struct LemmaReport {
  bool hypothesis_holds = true;
  double witness_s = 0;       ///< first grid point violating the hypothesis
  double worst_ratio = 0;     ///< max over the grid of |p(s)| s / (1+s)^N
  double p0 = 0;
  double bound = 0;           ///< e^2 N^2
  bool conclusion_holds = true;
};

/// Checks |p(s)| <= (1+s)^N / s on a log grid over [1e-6, 1e6]; if it holds,
/// checks |p(0)| <= e^2 N^2.
template <class S>
LemmaReport polynomial_lemma_check(const std::vector<S>& coeffs, int N, int points = 2401) {
  using std::abs;
  LemmaReport rep;
  rep.bound = std::exp(2.0) * N * N;
  rep.p0 = coeffs.empty() ? 0.0 : to_double(coeffs[0]);
  for (int i = 0; i < points; ++i) {
    double t = -6.0 + 12.0 * i / (points - 1);
    S s = S(std::pow(10.0, t));
    S cap = ipow(S(S(1) + s), static_cast<unsigned>(N)) / s;
    S ratio = abs(polyval(coeffs, s)) / cap;
    rep.worst_ratio = std::max(rep.worst_ratio, to_double(ratio));
    if (ratio > S(1) && rep.hypothesis_holds) {
      rep.hypothesis_holds = false;
      rep.witness_s = to_double(s);
    }
  }
  rep.conclusion_holds = std::abs(rep.p0) <= rep.bound;
  return rep;
}

/// p(s) = (C <W_{I0} a, a>)^{-1} sum_{I in D+^{<= n}} P_{n,I}(s) / Q_{n,I}(0)^2
template <class S>
std::vector<S> aggregate_polynomial(const WnsModel<S>& model, const std::vector<RationalSample<S>>& samples) {
  std::vector<S> c(5, S(0));
  for (const auto& rs : samples)
    for (std::size_t i = 0; i < rs.p_coeffs.size(); ++i) c[i] += rs.p_coeffs[i];
  S norm = model.tilde().C() * model.fnorm_of(S(0));
  for (auto& v : c) v /= norm;
  return c;
}

// ---------------------------------------------------------------------------
// Brute-force constants of the embedding theorem at small depth (double only).

enum class CiiMode { Plain, ConvexBody };

/// Pattern budget for the convex-body enumeration.
inline constexpr double kMaxSignPatterns = 1 << 20;

/// Top generalized eigenvalue of f -> sum_{I in D^{<= depth}} |A_I^{1/2} <phi_I W f>_I|^2
/// against ||f||^2_W over vector fields on the grid D^depth. A holds A_I in flat
/// order. ConvexBody maximizes over per-cell signs phi_I as well.
double brute_force_cii(const PiecewiseWeight<double>& W, const std::vector<SymMat2<double>>& A, CiiMode mode);

/// c_(i): max over K of gen_eig_max((1/|K|) sum_{I in D(K)} <W>_I A_I <W>_I, <W>_K),
/// with averages taken from the grid field.
double testing_constant_grid(const PiecewiseWeight<double>& W, const std::vector<SymMat2<double>>& A);

}  // namespace mwlab
