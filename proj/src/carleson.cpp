#include "mwlab/carleson.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <string>

namespace mwlab {

namespace {

using MatX = Eigen::MatrixXd;

struct IntervalForms {
  // Transformed forms L^{-1} G_I(phi) L^{-T}, one per sign pattern with the
  // first cell's sign fixed to +1.
  std::vector<MatX> forms;
};

}  // namespace

double brute_force_cii(const PiecewiseWeight<double>& W, const std::vector<SymMat2<double>>& A, CiiMode mode) {
  const int depth = W.level;
  const std::size_t cells = W.size();
  const Eigen::Index dim = static_cast<Eigen::Index>(2 * cells);
  if (A.size() != count_upto(depth)) throw RangeError("brute_force_cii: A must cover D^{<= grid level}");

  double patterns = 1;
  if (mode == CiiMode::ConvexBody)
    for (int l = 0; l <= depth; ++l) patterns *= std::pow(std::pow(2.0, double(cells >> l) - 1), double(1u << l));
  if (patterns > kMaxSignPatterns)
    throw ResourceError("brute_force_cii: convex-body mode at depth " + std::to_string(depth) + " needs " +
                        std::to_string(patterns) + " sign patterns");

  // ||f||_W^2 = f* H f with H block diagonal.
  MatX H = MatX::Zero(dim, dim);
  double cell_measure = std::ldexp(1.0, -depth);
  for (std::size_t x = 0; x < cells; ++x) H.block<2, 2>(2 * x, 2 * x) = cell_measure * W.cells[x].matrix();
  Eigen::LLT<MatX> llt(H);
  if (llt.info() != Eigen::Success) throw SingularityError("brute_force_cii: weight is not positive definite", H.determinant());
  MatX Linv = llt.matrixL().solve(MatX::Identity(dim, dim));

  std::vector<IntervalForms> per(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) {
    Interval I = Interval::from_flat(i);
    auto [lo, hi] = detail::cell_range(depth, I);
    std::size_t m = hi - lo;
    std::size_t npat = mode == CiiMode::ConvexBody ? (std::size_t{1} << (m - 1)) : 1;
    for (std::size_t p = 0; p < npat; ++p) {
      // <phi W f>_I = K f with K = (1/m) [.. phi_x W_x ..]
      MatX K = MatX::Zero(2, dim);
      for (std::size_t x = lo; x < hi; ++x) {
        std::size_t j = x - lo;
        double sign = (j > 0 && ((p >> (j - 1)) & 1u)) ? -1.0 : 1.0;
        K.block<2, 2>(0, 2 * x) = (sign / double(m)) * W.cells[x].matrix();
      }
      MatX KL = K * Linv.transpose();
      per[i].forms.push_back(KL.transpose() * A[i].matrix() * KL);
    }
  }

  auto top = [](const MatX& G) {
    Eigen::SelfAdjointEigenSolver<MatX> es(G, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  };

  // Depth-first over intervals with running partial sums; the root's patterns
  // are distributed over threads.
  const std::size_t nI = per.size();
  const std::size_t roots = per[0].forms.size();
  std::vector<double> best(roots, 0.0);
  parallel_for(roots, [&](std::size_t r) {
    std::vector<MatX> partial(nI);
    partial[0] = per[0].forms[r];
    double local = 0;
    std::vector<std::size_t> choice(nI, 0);
    // Iterative odometer over intervals 1..nI-1.
    std::size_t i = 1;
    if (nI == 1) {
      local = top(partial[0]);
    } else {
      while (true) {
        partial[i] = partial[i - 1] + per[i].forms[choice[i]];
        if (i + 1 < nI) {
          ++i;
          choice[i] = 0;
          continue;
        }
        local = std::max(local, top(partial[i]));
        // advance
        while (i >= 1 && ++choice[i] == per[i].forms.size()) --i;
        if (i == 0) break;
      }
    }
    best[r] = local;
  });
  double out = 0;
  for (double v : best) out = std::max(out, v);
  return out;
}

double testing_constant_grid(const PiecewiseWeight<double>& W, const std::vector<SymMat2<double>>& A) {
  const int depth = W.level;
  if (A.size() != count_upto(depth)) throw RangeError("testing_constant_grid: A must cover D^{<= grid level}");
  auto avg = W.pyramid();
  double best = 0;
  for (std::size_t k = 0; k < A.size(); ++k) {
    Interval K = Interval::from_flat(k);
    SymMat2<double> sum;
    for (const Interval& I : descendants(K, depth)) sum += congruence(avg[I.flat()], A[I.flat()]);
    sum = sum / K.measure();
    best = std::max(best, gen_eig_max(sum, avg[k]));
  }
  return best;
}

}  // namespace mwlab
