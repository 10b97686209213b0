#include <gtest/gtest.h>

#include "reference.hpp"

using namespace deadcore;

namespace {

struct ScanRoot {
  double t;
  bool rising;
};

/// Sign changes of the fibre equation on a dense log grid, refined by bisection.
std::vector<ScanRoot> scan_roots(const FiberCoeffs& c, double p, double q, double r) {
  auto f = [&](double t) { return fiber_equation(c, p, q, r, t); };
  std::vector<ScanRoot> out;
  double t0 = 1e-8, f0 = f(t0);
  for (int i = 1; i <= 20000; ++i) {
    const double t1 = 1e-8 * std::pow(10.0, 16.0 * i / 20000.0), f1 = f(t1);
    if ((f0 < 0.0) != (f1 < 0.0)) {
      double lo = t0, hi = t1;
      for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        ((f(mid) < 0.0) == (f0 < 0.0) ? lo : hi) = mid;
      }
      out.push_back({0.5 * (lo + hi), f1 > f0});
    }
    t0 = t1, f0 = f1;
  }
  return out;
}

ProblemModel qr_model(const GridPtr& g, double p, double r, double scale = 1.0, double mu = 1024.0) {
  return ProblemModel::make(scale_positive_part(ref::weight(g), scale), p, 1.5, mu, Variant::q_plus_r, r);
}

SolveOptions opts() {
  SolveOptions o;
  o.max_iter = 20000;
  return o;
}

}  // namespace

TEST(Fiber, ClosedFormWithoutSecondTerm) {
  const FiberRoots fr = fiber_roots({2.0, 0.5, 0.0}, 2.0, 1.5, 4.0);
  EXPECT_EQ(fr.fcase, FiberCase::ii);
  ASSERT_TRUE(fr.t_plus);
  EXPECT_NEAR(*fr.t_plus, std::pow(0.25, 2.0), 1e-15);
  EXPECT_FALSE(fr.t_minus);
  EXPECT_EQ(fiber_roots({2.0, -0.5, 0.0}, 2.0, 1.5, 4.0).fcase, FiberCase::none);
}

TEST(Fiber, MatchesDenseScanOnRandomCoefficients) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> A(0.2, 3.0), B(-1.0, 1.0), C(-2.0, 2.0);
  int two_roots = 0;
  for (const auto& [p, r] : std::vector<std::pair<double, double>>{{2.0, 4.0}, {3.0, 6.0}, {2.0, 2.5}}) {
    for (int t = 0; t < 100; ++t) {
      // Shrink B on half the draws so that case (i) is well represented.
      const FiberCoeffs c{A(rng), (t % 2 ? 0.05 : 1.0) * B(rng), C(rng)};
      const FiberRoots fr = fiber_roots(c, p, 1.5, r);
      const auto scan = scan_roots(c, p, 1.5, r);
      std::optional<double> up, down;
      for (const auto& s : scan) (s.rising ? up : down) = s.t;
      ASSERT_EQ(fr.t_plus.has_value(), up.has_value()) << c.A << ' ' << c.B << ' ' << c.C;
      ASSERT_EQ(fr.t_minus.has_value(), down.has_value()) << c.A << ' ' << c.B << ' ' << c.C;
      if (up) {
        EXPECT_NEAR(*fr.t_plus, *up, 1e-9 * *up);
      }
      if (down) {
        EXPECT_NEAR(*fr.t_minus, *down, 1e-9 * *down);
      }
      const FiberCase expect = up && down ? FiberCase::i : up ? FiberCase::ii : down ? FiberCase::iii : FiberCase::none;
      EXPECT_EQ(fr.fcase, expect);
      two_roots += expect == FiberCase::i;
      for (const auto& root : {fr.t_plus, fr.t_minus})
        if (root) {
          EXPECT_LE(std::abs(fiber_equation(c, p, 1.5, r, *root)), 1e-12 * (c.A + std::abs(c.B) + std::abs(c.C)));
        }
    }
  }
  EXPECT_GT(two_roots, 20);
}

TEST(Fiber, TwoRootsAreAMinimumAndAMaximum) {
  const FiberCoeffs c{1.0, 0.05, 0.5};
  const FiberRoots fr = fiber_roots(c, 2.0, 1.5, 4.0);
  ASSERT_EQ(fr.fcase, FiberCase::i);
  EXPECT_LT(*fr.t_plus, *fr.t_minus);
  auto e = [&](double t) { return fiber_energy(c, 2.0, 1.5, 4.0, t); };
  EXPECT_LT(e(*fr.t_plus), 0.0);
  EXPECT_LT(e(*fr.t_plus), e(0.99 * *fr.t_plus));
  EXPECT_LT(e(*fr.t_plus), e(1.01 * *fr.t_plus));
  EXPECT_GT(e(*fr.t_minus), e(0.99 * *fr.t_minus));
  EXPECT_GT(e(*fr.t_minus), e(1.01 * *fr.t_minus));
}

TEST(Fiber, RootsScaleWithTheDirection) {
  // Coefficients of s u are s^p A, s^q B, s^r C, and the fibre of s u is the fibre of u at t / s.
  const GridPtr g = ref::line(129);
  const ProblemModel m = qr_model(g, 2.0, 4.0, 1.0, 0.01);
  std::mt19937_64 rng(2);
  const ScalarField u = random_smooth_direction(g, rng);
  const FiberRoots a = fiber_roots(fiber_coeffs(u, m), 2.0, 1.5, 4.0);
  const FiberRoots b = fiber_roots(fiber_coeffs(3.0 * u, m), 2.0, 1.5, 4.0);
  ASSERT_EQ(a.fcase, b.fcase);
  ASSERT_NE(a.fcase, FiberCase::none);
  if (a.t_plus) {
    EXPECT_NEAR(*b.t_plus * 3.0, *a.t_plus, 1e-9 * *a.t_plus);
  }
  if (a.t_minus) {
    EXPECT_NEAR(*b.t_minus * 3.0, *a.t_minus, 1e-9 * *a.t_minus);
  }
}

TEST(Fiber, EqualExponentsUseTheDifference) {
  EXPECT_EQ(fiber_roots({2.0, 1.0, 1.0}, 2.0, 1.5, 2.0).fcase, FiberCase::ii);
  EXPECT_NEAR(*fiber_roots({2.0, 1.0, 1.0}, 2.0, 1.5, 2.0).t_plus, 1.0, 1e-15);
  EXPECT_EQ(fiber_roots({1.0, -1.0, 2.0}, 2.0, 1.5, 2.0).fcase, FiberCase::iii);
  EXPECT_EQ(fiber_roots({1.0, 1.0, 2.0}, 2.0, 1.5, 2.0).fcase, FiberCase::none);
  EXPECT_THROW(fiber_roots({0.0, 1.0, 1.0}, 2.0, 1.5, 4.0), InputError);
  EXPECT_STREQ(to_string(FiberCase::iii), "iii");
}

TEST(Gate, PositiveMaximumMatchesScan) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> A(0.2, 3.0), B(0.0, 1.0), C(0.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    const FiberCoeffs c{A(rng), 0.1 * B(rng), C(rng)};
    // e(t) / t^q = t^{p-q} A/p - t^{r-q} C/r - B/q must become positive somewhere.
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 20000; ++i) {
      const double s = 1e-6 * std::pow(10.0, 12.0 * i / 20000.0);
      best = std::max(best, fiber_energy(c, 2.0, 1.5, 4.0, s) / std::pow(s, 1.5));
    }
    EXPECT_EQ(fiber_has_positive_max(c, 2.0, 1.5, 4.0), best > 0.0) << c.A << ' ' << c.B << ' ' << c.C;
  }
}

TEST(Gate, ReferencePassesAndLargePositivePartFails) {
  const GridPtr g = ref::line(513);
  for (double p : {2.0, 3.0}) {
    EXPECT_TRUE(smallness_gate(qr_model(g, p, 4.0)).passed);
    const GateReport bad = smallness_gate(qr_model(g, p, 4.0, 1000.0));
    EXPECT_FALSE(bad.passed);
    EXPECT_GT(bad.failures, 0);
    EXPECT_EQ(bad.directions, 200);
  }
}

TEST(Gate, DirectionsAreSmoothAndDeterministic) {
  const GridPtr g = ref::line(257);
  std::mt19937_64 a(9), b(9);
  const ScalarField u = random_smooth_direction(g, a), v = random_smooth_direction(g, b);
  EXPECT_EQ(u.values, v.values);
  EXPECT_TRUE(u.vanishes_on_boundary());
  EXPECT_GT(u.sup_norm(), 0.0);
}

TEST(Nehari, GroundStateOnTheManifold) {
  const GridPtr g = ref::line(513);
  for (double p : {2.0, 3.0}) {
    const ProblemModel m = qr_model(g, p, 4.0);
    const ExtensionResult ex = nehari_ground_state(m, opts());
    ASSERT_FALSE(ex.refused) << ex.diagnostic;
    ASSERT_FALSE(ex.aborted) << ex.diagnostic;
    const SolveResult& v = ex.result;
    EXPECT_TRUE(v.valid) << "p=" << p << " res=" << v.res_sup;
    EXPECT_LT(v.energy, 0.0);
    EXPECT_LT(nehari_defect(v.u, m), 1e-8);
    // On the manifold I(V) = (1/p - 1/q) B' + (1/p - 1/r) C' with A' = B' + C'.
    const FiberCoeffs c = fiber_coeffs(v.u, m);
    const double r = 4.0;
    EXPECT_NEAR(v.energy, c.A / p - c.B / 1.5 - c.C / r, 1e-12 * std::abs(v.energy));
    EXPECT_NEAR(v.energy, (1.0 / p - 1.0 / 1.5) * c.B + (1.0 / p - 1.0 / r) * c.C, 1e-6 * std::abs(v.energy));
    EXPECT_TRUE(positive_on(v.u, detect_components(m.a_mu())));
    EXPECT_GE(v.u.min(), 0.0);
  }
}

TEST(Nehari, RefusedWhenTheGateFails) {
  const GridPtr g = ref::line(257);
  const ExtensionResult ex = nehari_ground_state(qr_model(g, 2.0, 4.0, 1000.0), opts());
  EXPECT_TRUE(ex.refused);
  ASSERT_TRUE(ex.gate);
  EXPECT_FALSE(ex.gate->passed);
  EXPECT_NE(ex.diagnostic.find("smallness gate"), std::string::npos);
  EXPECT_THROW(nehari_ground_state(ref::model(g, 2.0, 1.0), opts()), InputError);
}

TEST(EqualExponent, SolvesWhenCoercive) {
  const GridPtr g = ref::line(513);
  for (double p : {2.0, 3.0}) {
    const ProblemModel m = ProblemModel::make(ref::weight(g), p, 1.5, 1024.0, Variant::p_linear);
    const ExtensionResult ex = solve_r_eq_p(m, opts());
    ASSERT_FALSE(ex.refused) << ex.diagnostic;
    ASSERT_TRUE(ex.lambda1);
    EXPECT_GT(*ex.lambda1, 0.0);
    EXPECT_TRUE(ex.result.valid) << ex.result.res_sup;
    EXPECT_LT(ex.result.energy, 0.0);
  }
}

TEST(EqualExponent, RefusedWhenNotCoercive) {
  const GridPtr g = ref::line(257);
  const ProblemModel m =
      ProblemModel::make(scale_positive_part(ref::weight(g), 1e4), 2.0, 1.5, 1024.0, Variant::p_linear);
  const ExtensionResult ex = solve_r_eq_p(m, opts());
  EXPECT_TRUE(ex.refused);
  ASSERT_TRUE(ex.lambda1);
  EXPECT_LT(*ex.lambda1, 0.0);
  EXPECT_NE(ex.diagnostic.find("coercivity"), std::string::npos);
}

TEST(SubSuper, OrderedBracketAndSolution) {
  const GridPtr g = ref::line(513);
  for (const auto& [p, r] : std::vector<std::pair<double, double>>{{2.0, 6.0}, {3.0, 4.0}}) {
    const ProblemModel m = qr_model(g, p, r);
    const SubSuperResult s = subsuper_solve(m, opts());
    ASSERT_FALSE(s.ext.refused) << s.ext.diagnostic;
    EXPECT_GT(s.c, 0.0);
    EXPECT_GT(s.M, 0.0);
    EXPECT_EQ(s.balls.size(), 2u);
    const Functional f = Functional::from_model(m);
    EXPECT_TRUE(satisfies_sub(f, s.eta, 0.0));
    EXPECT_TRUE(satisfies_super(f, s.upper, 0.0));
    const ScalarField& w = s.ext.result.u;
    for (std::size_t k = 0; k < w.size(); ++k) {
      EXPECT_GE(w[k], s.eta[k]);
      EXPECT_LE(w[k], s.upper[k]);
    }
    EXPECT_TRUE(s.ext.result.valid) << "p=" << p << " r=" << r << " res=" << s.res_inactive;
    EXPECT_LE(w.sup_norm(), s.upper.sup_norm());
  }
}
