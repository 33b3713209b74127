#pragma once

// Independent reference implementations for tests. Nothing here reuses the
// library's numeric kernels: matrices are plain Eigen types, sums are naive,
// and the counterexample frames are rebuilt from the martingale relation.

#include "mwlab/weight.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using Vec = Eigen::Vector2d;
using Mat = Eigen::Matrix2d;

/// max over all 2^m sign patterns of |A^{1/2} sum_j +-g_j|.
double zonotope_norm(const std::vector<Vec>& gens, const Mat& A);

/// Scalar weighted maximal functions on a grid of 2^m cells, truncated at level n.
/// kind 0: w(x)^{1/2} <w>_I^{-1} |<w g>_I|; kind 1: w(x)^{1/2} <w>_I^{-1} <w |g|>_I.
std::vector<double> scalar_maximal(const std::vector<double>& w, const std::vector<double>& g, int n, int kind);

/// Dyadic maximal function of |f| for W = identity: sup_I |<f>_I|.
std::vector<double> plain_maximal(const std::vector<Vec>& f);

/// rho_{W(x)}(M^c_{W,n} f(x)) by enumerating every sign pattern on every I.
std::vector<double> mcw_exhaustive(const std::vector<Mat>& W, const std::vector<Vec>& f, int n);

struct Frames {
  std::vector<Vec> a, b;  ///< flat order over D^{<= depth}
  std::vector<double> alpha, beta;
};

/// Counterexample frames rebuilt top-down from the martingale relation
/// (alpha_{n+1} + beta_{n+1} delta^2)/(1 + delta^2) = alpha_n solved for delta.
Frames counterexample_frames(double eps, int depth);

/// sum over I in D^{<= depth} (left half policy, f = 1_{I0}(1,0)) of
/// (1/4)|I| r_I^2 <b_I, W_{I+} a>^2, summed naively in long double.
std::vector<long double> sigma2_levels(double eps, int depth);

/// Lagrange interpolant through (x, y) evaluated at t.
double lagrange(const std::vector<double>& x, const std::vector<double>& y, double t);

// Random instances.
Mat random_spd(std::mt19937_64& rng, double min_eig = 0.05);
mwlab::PiecewiseWeight<double> random_weight(std::mt19937_64& rng, int level);
mwlab::PiecewiseVector<double> random_field(std::mt19937_64& rng, int level);

inline mwlab::SymMat2<double> to_sym(const Mat& m) { return {m(0, 0), m(0, 1), m(1, 1)}; }
inline Mat to_mat(const mwlab::SymMat2<double>& m) { return m.matrix(); }

}  // namespace oracle
