#pragma once

// Truncated matrix-weighted dyadic maximal operators on a finite grid D^m.
//
// All three operators are evaluated level by level: for each I in D^{<= n}
// the interval-dependent data (a vector, a zonotope, or a list of vectors) is
// built once and swept over the grid cells of I. Cells of one level are
// disjoint, so the sweep parallelizes without synchronization.

#include "mwlab/convexbody.hpp"
#include "mwlab/dyadic.hpp"
#include "mwlab/errors.hpp"
#include "mwlab/mat2.hpp"
#include "mwlab/parallel.hpp"
#include "mwlab/weight.hpp"

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

namespace mwlab {

enum class MaxOperator { MW, McW, CG };

inline const char* operator_name(MaxOperator op) {
  switch (op) {
    case MaxOperator::MW: return "M_W";
    case MaxOperator::McW: return "Mc_W";
    case MaxOperator::CG: return "CG_W";
  }
  return "?";
}

template <class S>
struct MaxField {
  MaxOperator op = MaxOperator::MW;
  int level = 0;
  int truncation = 0;
  std::vector<S> values;
};

namespace detail {

template <class S>
void require_grid(const PiecewiseWeight<S>& W, const PiecewiseVector<S>& f, int n) {
  if (W.level != f.level) throw RangeError("maximal operator: weight and function grids differ");
  if (n < 0 || n > W.level) throw RangeError("maximal operator: truncation exceeds grid level");
}

/// Inverses of <W>_I for I in D^{<= n}, flat order; names I on failure.
template <class S>
std::vector<SymMat2<S>> inverse_averages(const std::vector<SymMat2<S>>& pyramid, int n) {
  std::vector<SymMat2<S>> inv(count_upto(n));
  for (std::size_t i = 0; i < inv.size(); ++i) {
    try {
      inv[i] = inverse(pyramid[i]);
    } catch (const SingularityError& e) {
      throw SingularityError("<W>_I is singular for I = " + Interval::from_flat(i).str(), e.det());
    }
  }
  return inv;
}

/// Runs visit(I, lo, hi) for every I in D^{<= n}; [lo, hi) are the cells of I.
template <class Visit>
void sweep(int gridLevel, int n, Visit&& visit) {
  for (int l = 0; l <= n; ++l) {
    std::size_t count = std::size_t{1} << l;
    parallel_for(count, [&](std::size_t k) {
      Interval I(l, k);
      auto [lo, hi] = cell_range(gridLevel, I);
      visit(I, lo, hi);
    });
  }
}

}  // namespace detail

/// M_{W,n} f(x) = max_{I in D^{<= n}, I ni x} |W(x)^{1/2} <W>_I^{-1} <W f>_I|
template <class S>
MaxField<S> eval_MW(const PiecewiseWeight<S>& W, const PiecewiseVector<S>& f, int n) {
  using std::sqrt;
  detail::require_grid(W, f, n);
  auto avg = W.pyramid();
  auto inv = detail::inverse_averages(avg, n);
  std::vector<Vec2<S>> wf(W.size());
  for (std::size_t k = 0; k < wf.size(); ++k) wf[k] = W.cells[k].apply(f.cells[k]);
  std::vector<S> best(W.size(), S(0));
  detail::sweep(W.level, n, [&](const Interval& I, std::uint64_t lo, std::uint64_t hi) {
    Vec2<S> g = inv[I.flat()].apply(detail::halving_mean<Vec2<S>, S>(wf, lo, hi));
    for (auto x = lo; x < hi; ++x) best[x] = std::max(best[x], W.cells[x].quad(g));
  });
  for (auto& v : best) v = sqrt(v);
  return {MaxOperator::MW, W.level, n, std::move(best)};
}

/// rho_{W(x)}(M^c_{W,n} f(x)): the sup over phi_I is attained at per-cell signs,
/// so each interval contributes the zonotope with generators
/// (|J|/|I|) <W>_I^{-1} W_J f_J.
template <class S>
MaxField<S> eval_McW(const PiecewiseWeight<S>& W, const PiecewiseVector<S>& f, int n) {
  using std::sqrt;
  detail::require_grid(W, f, n);
  auto avg = W.pyramid();
  auto inv = detail::inverse_averages(avg, n);
  std::vector<S> best(W.size(), S(0));
  detail::sweep(W.level, n, [&](const Interval& I, std::uint64_t lo, std::uint64_t hi) {
    const SymMat2<S>& Minv = inv[I.flat()];
    S w = S(1) / S(static_cast<double>(hi - lo));
    Zonotope<S> z;
    z.generators.reserve(hi - lo);
    for (auto k = lo; k < hi; ++k) z.generators.push_back(w * Minv.apply(W.cells[k].apply(f.cells[k])));
    auto verts = z.vertices();
    for (auto x = lo; x < hi; ++x) best[x] = std::max(best[x], max_quadratic(verts, W.cells[x]));
  });
  for (auto& v : best) v = sqrt(v);
  return {MaxOperator::McW, W.level, n, std::move(best)};
}

/// Christ-Goldberg: max_I (1/|I|) sum_J |J| |W(x)^{1/2} <W>_I^{-1} W_J f_J|.
template <class S>
MaxField<S> eval_CG(const PiecewiseWeight<S>& W, const PiecewiseVector<S>& f, int n) {
  using std::sqrt;
  detail::require_grid(W, f, n);
  auto avg = W.pyramid();
  auto inv = detail::inverse_averages(avg, n);
  std::vector<S> best(W.size(), S(0));
  detail::sweep(W.level, n, [&](const Interval& I, std::uint64_t lo, std::uint64_t hi) {
    const SymMat2<S>& Minv = inv[I.flat()];
    std::vector<Vec2<S>> g;
    g.reserve(hi - lo);
    for (auto k = lo; k < hi; ++k) g.push_back(Minv.apply(W.cells[k].apply(f.cells[k])));
    S w = S(1) / S(static_cast<double>(hi - lo));
    for (auto x = lo; x < hi; ++x) {
      S total(0);
      for (const auto& v : g) total += sqrt(W.cells[x].quad(v));
      total *= w;
      if (total > best[x]) best[x] = total;
    }
  });
  return {MaxOperator::CG, W.level, n, std::move(best)};
}

template <class S>
MaxField<S> eval(MaxOperator op, const PiecewiseWeight<S>& W, const PiecewiseVector<S>& f, int n) {
  switch (op) {
    case MaxOperator::MW: return eval_MW(W, f, n);
    case MaxOperator::McW: return eval_McW(W, f, n);
    case MaxOperator::CG: return eval_CG(W, f, n);
  }
  throw DomainError("unknown operator");
}

/// ||F||_{L^2[0,1)} for a piecewise-constant field.
template <class S>
S l2_norm(const MaxField<S>& F) {
  using std::sqrt;
  std::vector<S> sq(F.values.size());
  for (std::size_t k = 0; k < sq.size(); ++k) sq[k] = F.values[k] * F.values[k];
  return sqrt(pairwise_sum(sq) / S(static_cast<double>(sq.size())));
}

/// ||f||_{L^2_W} = (int <W f, f>)^{1/2}
template <class S>
S weighted_norm(const PiecewiseVector<S>& f, const PiecewiseWeight<S>& W) {
  using std::sqrt;
  if (W.level != f.level) throw RangeError("weighted_norm: grids differ");
  std::vector<S> q(W.size());
  for (std::size_t k = 0; k < q.size(); ++k) q[k] = W.cells[k].quad(f.cells[k]);
  return sqrt(pairwise_sum(q) / S(static_cast<double>(q.size())));
}

template <class S>
struct Selector {
  Interval I;
  Interval S_I;
  const std::vector<S>* phi = nullptr;  ///< per grid cell; nullptr means phi = 1
};

/// sum_I |S_I| |<W>_{S_I}^{1/2} <W>_I^{-1} <phi_I W f>_I|^2, a lower bound for
/// ||M^c_W f||^2 whenever the S_I are disjoint.
template <class S>
S linearized_lower_bound(const PiecewiseWeight<S>& W, const PiecewiseVector<S>& f,
                         const std::vector<Selector<S>>& selectors) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
  for (const auto& sel : selectors) {
    if (!sel.I.contains(sel.S_I)) throw PreconditionError("selector " + sel.S_I.str() + " is not inside " + sel.I.str());
    spans.push_back(detail::cell_range(W.level, sel.S_I));
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t k = 1; k < spans.size(); ++k)
    if (spans[k].first < spans[k - 1].second) throw PreconditionError("selector sets are not disjoint");
  std::vector<S> terms;
  terms.reserve(selectors.size());
  for (const auto& sel : selectors) {
    Vec2<S> g = inverse(W.average(sel.I)).apply(average_product(W, f, sel.I, sel.phi));
    terms.push_back(S(sel.S_I.measure()) * W.average(sel.S_I).quad(g));
  }
  return pairwise_sum(terms);
}

}  // namespace mwlab
