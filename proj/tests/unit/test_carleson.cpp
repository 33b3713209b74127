#include "mwlab/carleson.hpp"
#include "mwlab/maxop.hpp"
#include "oracles/oracles.hpp"

#include <doctest.h>

#include <random>

using namespace mwlab;

namespace {

const double kCap = std::pow(16.0 / 15.0, 2);  // (1 - eps^2)^{-2} at eps = 1/4

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

SymMat2<double> to_double_mat(const SymMat2<Extended>& m) {
  return {to_double(m.m11), to_double(m.m12), to_double(m.m22)};
}

std::vector<SymMat2<double>> flat_A(const CarlesonSequence<double>& A, int depth) {
  std::vector<SymMat2<double>> out;
  for (std::uint64_t i = 0; i < count_upto(depth); ++i) out.push_back(A.A(Interval::from_flat(i)));
  return out;
}

}  // namespace

TEST_SUITE("carleson") {

TEST_CASE("Carleson sequence") {
  auto W = build_counterexample_weight(0.5, 20);
  auto A = build_A(W, 20);
  auto root = A.A(Interval::root());
  CHECK(root.m11 == doctest::Approx(0).epsilon(1e-15));
  CHECK(std::abs(root.m12) < 1e-15);
  CHECK(root.m22 == doctest::Approx(4));
  CHECK_THROWS_AS(build_A(W, 21), RangeError);

  auto V = build_counterexample_weight(0.25, 20);
  auto B = build_A(V, 20);
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 500; ++trial) {
    int n = static_cast<int>(rng() % 21);
    Interval I(n, n == 0 ? 0 : rng() % (std::uint64_t{1} << n));
    auto a = B.A(I);
    CHECK(rel(a.trace(), I.measure() * std::pow(0.25, -2 * n - 2)) < 1e-13);
    CHECK(std::abs(a.det()) <= 1e-13 * a.trace() * a.trace());
    auto r = B.sqrtA(I);
    auto sq = SymMat2<double>::from_matrix(r.matrix() * r.matrix());
    CHECK((sq - a).max_abs() <= 1e-13 * a.max_abs());
    // A^{1/2} W_I = beta_I A^{1/2}
    Mat2<double> lhs = r.matrix() * V.average(I).matrix();
    CHECK((lhs - V.beta(n) * r.matrix()).cwiseAbs().maxCoeff() <= 1e-12 * r.max_abs() * V.beta(n) + 1e-15 * r.max_abs());
  }

  // the plain product W A W loses u/beta_n relative accuracy in double, so the
  // reference is evaluated in extended precision
  set_extended_bits(256);
  auto Ve = build_counterexample_weight(Extended(0.25), 12);
  auto Be = build_A(Ve, 12);
  for (std::uint64_t i = 0; i < count_upto(12); i += 13) {
    Interval I = Interval::from_flat(i);
    auto waw = congruence(Ve.average(I), Be.A(I));
    double scale = B.WAW(I).max_abs();
    CHECK((B.WAW(I) - to_double_mat(waw)).max_abs() <= 1e-13 * scale);
    CHECK(to_double((Be.WAW(I) - waw).max_abs()) <= 1e-30 * scale);
  }
}

TEST_CASE("testing constant: trivial instance") {
  auto W = PiecewiseWeight<double>::constant(2, SymMat2<double>::identity());
  std::vector<SymMat2<double>> A(count_upto(2));
  A[0] = SymMat2<double>::identity();
  CHECK(testing_constant_grid(W, A) == doctest::Approx(1));
}

TEST_CASE("testing constant of the counterexample") {
  auto W = build_counterexample_weight(0.25, 20);
  auto r = testing_constant(W, 20, 0);
  CHECK(r.value <= kCap + 1e-9);
  CHECK(r.value == r.root_value);
  CHECK(r.argmax == Interval::root());

  // three code paths agree; the grid path works from cell values in double and
  // resolves beta_n only at shallow depth
  auto Wsmall = build_counterexample_weight(0.25, 3);
  auto A = build_A(Wsmall, 3);
  std::vector<double> perK;
  auto t = testing_constant(Wsmall, 3, 3, &perK);
  double grid = testing_constant_grid(truncate(Wsmall, 3), flat_A(A, 3));
  CHECK(rel(t.value, grid) < 1e-9);

  set_extended_bits(256);
  auto W6 = build_counterexample_weight(0.25, 6);
  auto W6e = build_counterexample_weight(Extended(0.25), 6);
  auto A6e = build_A(W6e, 6);
  testing_constant(W6, 6, 6, &perK);
  for (std::uint64_t i = 0; i < count_upto(6); ++i) {
    Interval K = Interval::from_flat(i);
    CHECK(rel(perK[i], to_double(testing_constant_generic(A6e, K, 6))) < 1e-12);
  }

  auto We = build_counterexample_weight(Extended(0.25), 10);
  auto Ae = build_A(We, 10);
  auto te = testing_constant(We, 10, 0);
  CHECK(to_double(abs(te.value - testing_constant_generic(Ae, Interval::root(), 10))) < 1e-25);
  CHECK(rel(to_double(te.value), testing_constant(W, 10, 0).value) < 1e-13);
}

TEST_CASE("testing constant converges monotonically") {
  auto W = build_counterexample_weight(0.25, 20);
  auto conv = testing_convergence(W, 20, 8);
  CHECK(conv.min_increment >= 0);
  for (std::size_t d = 1; d < conv.sup_values.size(); ++d) CHECK(conv.sup_values[d] >= conv.sup_values[d - 1]);

  // increments shrink to eps^{2d}, far below double resolution
  set_extended_bits(256);
  MartingaleWeight<Extended> We(Extended(0.25), 12, true);
  auto ce = testing_convergence(We, 12, 6);
  CHECK(ce.min_increment > Extended(0));
  CHECK(to_double(ce.max_root_scaled_increment) <= 1 + 1e-12);
  CHECK(to_double(ce.max_scaled_increment) <= 1 + 1e-12);
  CHECK(to_double(ce.max_root_scaled_increment) >= 0.99);
  CHECK(to_double(ce.root_values.back()) == doctest::Approx(conv.root_values[12]).epsilon(1e-14));
}

TEST_CASE("embedding sums: trivial and the ones policy") {
  auto W = build_counterexample_weight(0.25, 21);
  auto z = embedding_sum(W, Vec2<double>(0, 0), 10, PhiPolicy::Ones);
  CHECK(z.cumulative.back() == 0);

  for (double eps : {0.125, 0.25}) {
    auto V = build_counterexample_weight(eps, 21);
    for (Vec2<double> e : {Vec2<double>(1, 0), Vec2<double>(0.6, 0.8), Vec2<double>(0, 1)}) {
      auto s = embedding_sum(V, e, 20, PhiPolicy::Ones);
      for (int n = 0; n <= 20; ++n) CHECK(s.per_level[n] <= std::pow(eps, 2 * n + 2) * e.squaredNorm() * (1 + 1e-12));
      CHECK(s.cumulative.back() <= eps * eps / (1 - eps * eps) * e.squaredNorm() * (1 + 1e-12));
    }
  }
  // per-term formula |I| (beta_I r_I)^2 <a, b_I>^2
  auto f = embedding_sum(W, Vec2<double>(1, 0), 6, [&](const Interval& I) {
    return I == Interval(3, 5) ? HalfWeights<double>{1, 1} : HalfWeights<double>{0, 0};
  });
  double want = Interval(3, 5).measure() * std::pow(r_beta(0.25, 3) * W.b(Interval(3, 5)).x(), 2);
  CHECK(rel(f.cumulative.back(), want) < 1e-12);
}

TEST_CASE("embedding sums: two code paths and closed forms") {
  auto W = build_counterexample_weight(0.25, 17);
  // the generic path needs about u r_I^2 << 1, hence the wide mantissa
  set_extended_bits(256);
  auto We = build_counterexample_weight(Extended(0.25), 9);
  auto Ae = build_A(We, 9);
  std::vector<Vec2<double>> es{Vec2<double>(1, 0), Vec2<double>(0.6, -0.8)};
  for (const auto& e : es) {
    auto agg = level_aggregates(W, 16, e);
    for (auto p : {PhiPolicy::Ones, PhiPolicy::Left, PhiPolicy::LeftPlus}) {
      auto fast = embedding_sum(W, e, 16, p);
      auto slow = embedding_sum_generic(Ae, Vec2<Extended>(Extended(e.x()), Extended(e.y())), 8, p);
      for (int n = 0; n <= 8; ++n) {
        if (p == PhiPolicy::LeftPlus && n == 0) continue;
        CHECK(rel(fast.per_level[n], to_double(slow.per_level[n])) < 1e-13);
      }
      for (int n = 0; n <= 16; ++n) {
        double closed = p == PhiPolicy::Ones ? agg[n].ones : p == PhiPolicy::Left ? agg[n].left : agg[n].left_plus;
        if (p == PhiPolicy::LeftPlus && n == 0) CHECK(fast.per_level[0] == 0);
        else CHECK(rel(fast.per_level[n], closed) < 1e-11);
      }
    }
  }
  // naive long double summation with frames built from the martingale relation
  auto naive = oracle::sigma2_levels(0.25, 14);
  auto fast = embedding_sum(W, Vec2<double>(1, 0), 14, PhiPolicy::Left);
  for (int n = 0; n <= 14; ++n) CHECK(rel(fast.per_level[n], double(naive[n])) < 1e-8);
}

TEST_CASE("embedding sums in extended precision") {
  set_extended_bits(160);
  auto W = build_counterexample_weight(Extended(0.25), 9);
  auto A = build_A(W, 9);
  Vec2<Extended> e(Extended(1), Extended(0));
  auto fast = embedding_sum(W, e, 8, PhiPolicy::Left);
  auto slow = embedding_sum_generic(A, e, 8, PhiPolicy::Left);
  for (int n = 0; n <= 8; ++n) CHECK(to_double(abs(fast.per_level[n] - slow.per_level[n])) < 1e-30);
  MartingaleWeight<Extended> deep(Extended(0.25), 61, false);
  MartingaleWeight<double> deepd(0.25, 40, false);
  auto ae = level_aggregates(deep, 61, e);
  auto ad = level_aggregates(deepd, 40, Vec2<double>(1, 0));
  for (int n = 0; n <= 40; ++n) CHECK(rel(ad[n].left, to_double(ae[n].left)) < 1e-12);
  for (int n = 0; n <= 61; ++n) CHECK(ae[n].left >= Extended(1) / 1024);
  CHECK_THROWS_AS(MartingaleWeight<Extended>(Extended(0.25), 62, false), RangeError);
  set_extended_bits(128);
}

TEST_CASE("linear growth of the left-half sums") {
  MartingaleWeight<double> W(0.25, 41, false);
  auto agg = level_aggregates(W, 40, Vec2<double>(1, 0));
  std::vector<double> cum;
  double run = 0;
  for (int n = 0; n <= 40; ++n) {
    CHECK(agg[n].left >= 1.0 / 1024);
    CHECK(agg[n].left <= 1.0);
    if (n >= 1) CHECK(agg[n].left_plus >= 1.0 / 2048);
    run += agg[n].left;
    cum.push_back(run);
  }
  CHECK(ls_slope(cum) >= 1.0 / 1024);
  CHECK(ls_slope(std::vector<double>{1, 3, 5, 7}) == doctest::Approx(2));
  CHECK(ls_slope(std::vector<double>{4}) == 0);
}

TEST_CASE("blow-up ledger") {
  auto W = build_counterexample_weight(0.25, 15);
  auto L = blowup_ledger(W, 14, 14, 14);
  CHECK(L.enumerated_violations == 0);
  CHECK(L.estimates_hold());
  auto left = embedding_sum(W, Vec2<double>(1, 0), 14, PhiPolicy::Left);
  auto half = embedding_sum(W, Vec2<double>(1, 0), 14, PhiPolicy::LeftPlus);
  double prev = 0;
  for (const auto& lv : L.levels) {
    REQUIRE(lv.enumerated.has_value());
    CHECK(rel(*lv.enumerated, lv.closed_form) < 1e-11);
    CHECK(rel(*lv.enumerated, left.per_level[lv.level]) < 1e-12);
    if (lv.level >= 1) CHECK(rel(*lv.half_enumerated, half.per_level[lv.level]) < 1e-12);
    CHECK(lv.cumulative >= prev);
    prev = lv.cumulative;
    CHECK(lv.max_abs_F <= lv.beta_next);
    CHECK(lv.beta_next <= std::pow(0.25, 2 * lv.level + 4));
  }
  // certified extremes bound every enumerated record
  for (const auto& r : L.records) {
    const auto& lv = L.levels[r.I.level];
    CHECK(r.rD >= lv.min_rD * (1 - 1e-13));
    CHECK(std::abs(r.rF) <= lv.max_abs_rF * (1 + 1e-13));
    CHECK(std::abs(r.F) <= W.beta(r.I.level + 1));
    CHECK(r.term >= 0);
    double r_n = r_scale(0.25, r.I.level);
    CHECK(rel(r.rD, r_n * r.D) < 1e-12);
  }
  CHECK(L.records.size() == count_upto(14));
}

TEST_CASE("pointwise estimates to depth 40") {
  CHECK(pointwise_estimates_hold(0.125, 40));
  CHECK(pointwise_estimates_hold(0.25, 40));
  MartingaleWeight<double> W(0.25, 41, false);
  auto L = blowup_ledger(W, 40, 12);
  CHECK(L.estimates_hold());
  for (const auto& lv : L.levels) CHECK(lv.min_rD >= 0.125);
}

TEST_CASE("rescaled sequence and its Carleson property") {
  auto W = build_counterexample_weight(0.25, 16);
  auto A = build_A(W, 16);
  CHECK_THROWS_AS(tilde_A(A, 0.0), DomainError);
  double C = testing_constant(W, 16, 16).value;
  auto T = tilde_A(A, C);
  for (std::uint64_t i = 0; i < count_upto(10); i += 7) {
    Interval I = Interval::from_flat(i);
    double b = W.beta(I.level);
    CHECK((T(I) - A.A(I) * (b * b / C)).max_abs() <= 1e-12 * T(I).max_abs());
  }
  set_extended_bits(256);
  auto We = build_counterexample_weight(Extended(0.25), 10);
  auto Ae = build_A(We, 10);
  auto Te = tilde_A(Ae, Extended(C));
  for (std::uint64_t i = 0; i < count_upto(10); i += 7) {
    Interval I = Interval::from_flat(i);
    CHECK((T(I) - to_double_mat(Te.generic(I))).max_abs() <= 1e-13 * T(I).max_abs());
  }
  auto rep = carltilde_check(T, 16, 16);
  CHECK(rep.checked == count_upto(16));
  CHECK(rep.max_ratio <= 1 + 1e-9);

  double total = 0;
  for (const auto& I : plus_class(16)) total += T(I).quad(Vec2<double>(1, 0));
  CHECK(total <= W.alpha(0));
}

TEST_CASE("analytic W_{n,s} model against explicit grids") {
  auto W = build_counterexample_weight(0.25, 10);
  auto A = build_A(W, 10);
  auto T = tilde_A(A, kCap);
  for (int n = 1; n <= 8; ++n) {
    WnsModel<double> model(T, n);
    CHECK(model.bound(0.0).lhs == 0);
    for (double s : {0.25, 1.0, 4.0}) {
      auto Wns = build_wns(W, T, n, s);
      auto b = model.bound(s);
      double generic = wns_lhs_generic(Wns, T, n, s);
      CHECK(rel(b.lhs, generic) < 1e-6);
      auto f = PiecewiseVector<double>::constant(n + 1, Vec2<double>(1, 0));
      double fn = weighted_norm(f, Wns);
      CHECK(rel(b.fnorm, fn * fn) < 1e-12);
      CHECK(b.fnorm <= (1 + s) * W.alpha(0) + 1e-15);
      for (const auto& I : plus_class(n)) {
        auto M = model.average_in_frame(I, s);
        auto direct = Wns.average(I).in_frame(W.a(I), W.b(I));
        CHECK((M - direct).max_abs() <= 1e-12);
      }
      if (n <= 6) {
        double full = l2_norm(eval_McW(Wns, f, n + 1));
        CHECK(b.ratio <= full * full / b.fnorm * (1 + 1e-9));
      }
    }
  }
  CHECK_THROWS_AS(WnsModel<double>(T, 0), RangeError);
  CHECK_THROWS_AS(WnsModel<double>(T, 11), RangeError);
  WnsModel<double> m3(T, 3);
  CHECK_THROWS_AS(m3.R(Interval(1, 1), 1.0), PreconditionError);
  CHECK_THROWS_AS(m3.bound(-1.0), DomainError);
}

TEST_CASE("limit s -> 0 reproduces the half sums") {
  auto W = build_counterexample_weight(0.25, 12);
  auto A = build_A(W, 12);
  double C = 1.1;
  auto T = tilde_A(A, C);
  auto half = embedding_sum(W, Vec2<double>(1, 0), 11, PhiPolicy::LeftPlus);
  for (int n = 2; n <= 12; ++n) {
    WnsModel<double> model(T, n);
    double sum = 0;
    for (const auto& I : plus_class(n - 1)) sum += model.R(I, 0.0);
    CHECK(rel(sum, half.cumulative[n - 1] / C) < 1e-11);
  }
}

TEST_CASE("interpolation") {
  std::vector<double> x{0, 0.5, 1, 2, 4}, y;
  auto p = [](double t) { return 3 - t + 0.5 * t * t - 0.25 * t * t * t + 0.125 * t * t * t * t; };
  for (double t : x) y.push_back(p(t));
  auto c = interpolate(x, y);
  REQUIRE(c.size() == 5);
  CHECK(c[0] == doctest::Approx(3));
  CHECK(c[1] == doctest::Approx(-1));
  CHECK(c[4] == doctest::Approx(0.125));
  for (double t : {0.3, 3.0, 16.0}) {
    CHECK(polyval(c, t) == doctest::Approx(p(t)).epsilon(1e-12));
    CHECK(polyval(c, t) == doctest::Approx(oracle::lagrange(x, y, t)).epsilon(1e-12));
  }
}

TEST_CASE("rational structure of R") {
  auto W = build_counterexample_weight(0.25, 8);
  auto A = build_A(W, 8);
  double C = testing_constant(W, 8, 8).value;
  auto T = tilde_A(A, C);
  std::vector<double> nodes(default_s_nodes().begin(), default_s_nodes().end());
  for (int n = 2; n <= 6; ++n) {
    WnsModel<double> model(T, n);
    for (const auto& I : plus_class(n)) {
      auto rs = sample_R(model, I, nodes);
      CHECK(rs.p_residual <= 1e-8);
      CHECK(rs.q_residual <= 1e-8);
      CHECK(rs.q_bound_ok);
      CHECK(rs.p_nonnegative);
      if (I.level < n) {
        HalfWeights<double> phi{1, 0};
        CHECK(rel(rs.R[0], embedding_term(W, I, Vec2<double>(1, 0), phi) / C) < 1e-11);
      }
      // Q(s) = det <W_{n,s}>_I at the nodes, including s = 0
      CHECK(rel(rs.Q[0], W.alpha(I.level) * W.beta(I.level)) < 1e-12);
    }
  }
  WnsModel<double> m(T, 3);
  CHECK_THROWS_AS(sample_R(m, Interval(1, 0), std::vector<double>{0, 1, 2}), DomainError);
  CHECK_THROWS_AS(sample_R(m, Interval(1, 0), std::vector<double>{0, 1, 1, 2, 3, 4, 5}), DomainError);
}

TEST_CASE("polynomial lemma checker") {
  auto zero = polynomial_lemma_check(std::vector<double>{0}, 3);
  CHECK(zero.hypothesis_holds);
  CHECK(zero.p0 == 0);
  CHECK(zero.conclusion_holds);
  auto one = polynomial_lemma_check(std::vector<double>{1}, 1);
  CHECK(one.hypothesis_holds);
  CHECK(one.p0 == 1);
  CHECK(one.bound == doctest::Approx(std::exp(2.0)));
  CHECK(one.conclusion_holds);
  auto big = polynomial_lemma_check(std::vector<double>{100}, 1);
  CHECK_FALSE(big.hypothesis_holds);
  CHECK(big.witness_s > 0);
  auto cubic = polynomial_lemma_check(std::vector<double>{2, -1, 0.5}, 5);
  CHECK(cubic.hypothesis_holds);
  CHECK(cubic.conclusion_holds);
}

TEST_CASE("scan utilities") {
  auto g = geometric_grid(1.0 / 64, 64.0, 13);
  REQUIRE(g.size() == 13);
  CHECK(g.front() == 1.0 / 64);
  CHECK(g[6] == doctest::Approx(1.0));
  CHECK(g.back() == 64.0);
  CHECK_THROWS_AS(geometric_grid(0.0, 1.0, 4), ConfigError);
  CHECK_THROWS_AS(geometric_grid(1.0, 2.0, 1), ConfigError);

  auto W = build_counterexample_weight(0.25, 8);
  auto A = build_A(W, 8);
  auto T = tilde_A(A, kCap);
  auto scan = wns_scan(T, 2, 6, g);
  CHECK(scan.ns.size() == 5);
  CHECK(scan.table[0].size() == 13);
  for (std::size_t i = 0; i < scan.ns.size(); ++i) {
    double best = 0;
    for (const auto& b : scan.table[i]) best = std::max(best, b.ratio);
    CHECK(scan.best[i] == best);
  }
  auto glue = gluing_report(scan);
  for (std::size_t k = 0; k < glue.size(); ++k) {
    CHECK(glue[k].k == int(k));
    CHECK(glue[k].ratio >= std::pow(4.0, double(k)));
  }
}

TEST_CASE("brute-force embedding constants") {
  auto one = PiecewiseWeight<double>::constant(0, SymMat2<double>::identity());
  CHECK(brute_force_cii(one, {SymMat2<double>::identity()}, CiiMode::Plain) == doctest::Approx(1));
  CHECK(brute_force_cii(one, {SymMat2<double>::identity()}, CiiMode::ConvexBody) == doctest::Approx(1));

  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 10; ++trial) {
    auto W = oracle::random_weight(rng, 2);
    std::vector<SymMat2<double>> A;
    for (std::uint64_t i = 0; i < count_upto(2); ++i) A.push_back(oracle::to_sym(oracle::random_spd(rng, 0.0)));
    double plain = brute_force_cii(W, A, CiiMode::Plain);
    double body = brute_force_cii(W, A, CiiMode::ConvexBody);
    CHECK(plain >= testing_constant_grid(W, A) * (1 - 1e-10));
    CHECK(body >= plain * (1 - 1e-12));
    // random test functions never beat the constant
    for (int k = 0; k < 50; ++k) {
      auto f = oracle::random_field(rng, 2);
      double lhs = 0;
      for (std::uint64_t i = 0; i < count_upto(2); ++i) lhs += A[i].quad(average_product(W, f, Interval::from_flat(i)));
      double norm2 = std::pow(weighted_norm(f, W), 2);
      CHECK(lhs <= plain * norm2 * (1 + 1e-10));
    }
  }
  CHECK_THROWS_AS(brute_force_cii(oracle::random_weight(rng, 2), std::vector<SymMat2<double>>(3), CiiMode::Plain),
                  RangeError);
  auto W4 = oracle::random_weight(rng, 4);
  CHECK_THROWS_AS(brute_force_cii(W4, std::vector<SymMat2<double>>(count_upto(4)), CiiMode::ConvexBody), ResourceError);
}

}
