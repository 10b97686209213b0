#include <gtest/gtest.h>

#include "reference.hpp"

using namespace deadcore;

namespace {

ProblemModel unit_weight_model(const GridPtr& g, double p, double q, Variant v = Variant::pure_q,
                               std::optional<double> r = std::nullopt) {
  return ProblemModel::make(split_weight(ScalarField(g, 1.0)), p, q, 1.0, v, r);
}

/// max_k |analytic - fd| / max_k |fd|, with the nodal density scaled to a partial derivative.
double fd_gradient_error(const ScalarField& u, const ProblemModel& m, double eps) {
  const Functional f = Functional::from_model(m);
  const ScalarField g = f.gradient(u, eps);
  const double step = 1e-6 * u.sup_norm();
  const double vol = u.grid->cell_volume();
  double err = 0.0, scale = 0.0;
  ScalarField w = u;
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (u.grid->on_boundary(k)) continue;
    w[k] = u[k] + step;
    const double up = f.value(w);
    w[k] = u[k] - step;
    const double dn = f.value(w);
    w[k] = u[k];
    const double fd = (up - dn) / (2.0 * step);
    err = std::max(err, std::abs(g[k] * vol - fd));
    scale = std::max(scale, std::abs(fd));
  }
  return err / scale;
}

}  // namespace

TEST(Energy, ZeroFieldHasZeroEnergy) {
  const GridPtr g = ref::line(17);
  const EnergyBreakdown e = energy(ScalarField(g), ref::model(g, 2.0, 1.0));
  EXPECT_EQ(e.total, 0.0);
  EXPECT_EQ(e.dirichlet, 0.0);
}

TEST(Energy, ThreeNodeHandValue) {
  const GridPtr g = ref::line(3);
  const ScalarField u(g, std::vector<double>{0.0, 1.0, 0.0});
  const EnergyBreakdown e = energy(u, unit_weight_model(g, 2.0, 1.5));
  EXPECT_NEAR(e.dirichlet, 2.0, 1e-15);
  EXPECT_NEAR(e.term_q, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(e.total, 5.0 / 3.0, 1e-15);
  EXPECT_FALSE(e.term_r.has_value());
}

TEST(Energy, RejectsNonzeroBoundary) {
  const GridPtr g = ref::line(3);
  EXPECT_THROW(energy(ScalarField(g, 1.0), unit_weight_model(g, 2.0, 1.5)), InputError);
}

TEST(Energy, Homogeneity) {
  const GridPtr g = ref::square(9);
  std::mt19937_64 rng(3);
  const ScalarField u = ref::random_field(g, rng);
  const ProblemModel m = ProblemModel::make(ref::weight(g), 3.0, 1.5, 2.0);
  const EnergyBreakdown e = energy(u, m);
  for (double t : {0.0, 0.5, 2.0}) {
    const EnergyBreakdown et = energy(t * u, m);
    EXPECT_NEAR(et.dirichlet, std::pow(t, 3.0) * e.dirichlet, 1e-13 * (1.0 + e.dirichlet * 8));
    EXPECT_NEAR(et.total, std::pow(t, 3.0) * e.dirichlet - std::pow(t, 1.5) * e.term_q, 1e-12 * (1.0 + e.dirichlet * 8));
  }
}

TEST(Energy, EvenForAllVariants) {
  const GridPtr g = ref::line(33);
  std::mt19937_64 rng(5);
  const ScalarField u = ref::random_field(g, rng);
  const WeightSplit w = ref::weight(g);
  for (const ProblemModel& m : {ProblemModel::make(w, 2.0, 1.5, 3.0), ProblemModel::make(w, 2.0, 1.5, 3.0, Variant::q_plus_r, 4.0),
                                ProblemModel::make(w, 3.0, 1.5, 3.0, Variant::p_linear)}) {
    EXPECT_EQ(energy(-1.0 * u, m).total, energy(u, m).total);
  }
}

TEST(Energy, ReflectionCommutesWithEvaluation) {
  const GridPtr g = ref::line(65);
  std::mt19937_64 rng(11);
  const ScalarField u = ref::random_field(g, rng), a = ref::random_field(g, rng);
  ScalarField ur(g), ar(g);
  for (std::size_t k = 0; k < u.size(); ++k) {
    ur[u.size() - 1 - k] = u[k];
    ar[u.size() - 1 - k] = a[k];
  }
  const ProblemModel m = ProblemModel::make(split_weight(a), 3.0, 1.5, 2.0);
  const ProblemModel mr = ProblemModel::make(split_weight(ar), 3.0, 1.5, 2.0);
  EXPECT_NEAR(energy(u, m).total, energy(ur, mr).total, 1e-12);
}

TEST(Energy, SecondTermPresentForQPlusR) {
  const GridPtr g = ref::line(3);
  const ScalarField u(g, std::vector<double>{0.0, 2.0, 0.0});
  const EnergyBreakdown e = energy(u, unit_weight_model(g, 2.0, 1.5, Variant::q_plus_r, 4.0));
  ASSERT_TRUE(e.term_r.has_value());
  EXPECT_NEAR(*e.term_r, 0.5 * 16.0 / 4.0, 1e-14);
  EXPECT_NEAR(e.total, e.dirichlet - e.term_q - *e.term_r, 1e-14);
}

TEST(Model, Invariants) {
  const GridPtr g = ref::line(9);
  const WeightSplit w = ref::weight(g);
  EXPECT_THROW(ProblemModel::make(w, 2.0, 2.5, 1.0), InputError);
  EXPECT_THROW(ProblemModel::make(w, 2.0, 1.0, 1.0), InputError);
  EXPECT_THROW(ProblemModel::make(w, 2.0, 1.5, -1.0), InputError);
  EXPECT_THROW(ProblemModel::make(w, 2.0, 1.5, 1.0, Variant::q_plus_r, 1.8), InputError);
  EXPECT_THROW(ProblemModel::make(w, 2.0, 1.5, 1.0, Variant::q_plus_r), InputError);
  const ProblemModel m2 = ProblemModel::make(ref::weight(ref::square(9)), 1.5, 1.2, 1.0, Variant::q_plus_r, 7.0);
  EXPECT_DOUBLE_EQ(m2.p_star(), 6.0);
  EXPECT_THROW(m2.validate(true), InputError);
  EXPECT_TRUE(std::isinf(ProblemModel::make(w, 2.0, 1.5, 1.0).p_star()));
  EXPECT_EQ(ProblemModel::make(w, 3.0, 1.5, 1.0, Variant::p_linear).second_exponent(), 3.0);
}

TEST(Gradient, ZeroAtZero) {
  const GridPtr g = ref::square(9);
  const ScalarField gr = gradient(ScalarField(g), ProblemModel::make(ref::weight(g), 2.0, 1.5, 1.0));
  EXPECT_EQ(gr.sup_norm(), 0.0);
}

TEST(Gradient, HandStencilOnFiveNodes) {
  const GridPtr g = ref::line(5);
  const ScalarField u(g, std::vector<double>{0.0, 0.3, 0.8, 0.2, 0.0});
  const ScalarField a(g, std::vector<double>{0.0, 1.0, -2.0, 0.5, 0.0});
  const ProblemModel m = ProblemModel::make(split_weight(a), 2.0, 1.5, 1.0);
  const ScalarField gr = gradient(u, m);
  const double h2 = 0.0625;
  for (std::size_t k = 1; k < 4; ++k) {
    const double lap = (2 * u[k] - u[k - 1] - u[k + 1]) / h2;
    EXPECT_NEAR(gr[k], lap - a[k] * std::sqrt(u[k]), 1e-13);
  }
  EXPECT_EQ(gr[0], 0.0);
  EXPECT_EQ(gr[4], 0.0);
}

TEST(Gradient, HandStencilTwoDimensions) {
  const GridPtr g = ref::square(5);
  std::mt19937_64 rng(2);
  const ScalarField u = ref::random_field(g, rng);
  const ProblemModel m = ProblemModel::make(split_weight(ScalarField(g)), 2.0, 1.5, 1.0);
  const ScalarField gr = gradient(u, m);
  for (std::size_t k = 0; k < g->size(); ++k) {
    if (g->on_boundary(k)) continue;
    const double lap = (4 * u[k] - u[k - 1] - u[k + 1] - u[k - 5] - u[k + 5]) / (g->h() * g->h());
    EXPECT_NEAR(gr[k], lap, 1e-12);
  }
}

TEST(Gradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(42);
  const GridPtr g1 = ref::line(33);
  const GridPtr g2 = ref::square(9);
  for (const GridPtr& g : {g1, g2}) {
    const WeightSplit w = ref::weight(g);
    for (int t = 0; t < 50; ++t) {
      const ScalarField u = ref::random_field(g, rng);
      EXPECT_LE(fd_gradient_error(u, ProblemModel::make(w, 2.0, 1.5, 3.0), 0.0), 1e-6);
      EXPECT_LE(fd_gradient_error(u, ProblemModel::make(w, 3.0, 1.5, 3.0), 1e-8), 1e-4);
      EXPECT_LE(fd_gradient_error(u, ProblemModel::make(w, 1.5, 1.2, 3.0), 1e-8), 1e-4);
      EXPECT_LE(fd_gradient_error(u, ProblemModel::make(w, 2.0, 1.5, 3.0, Variant::q_plus_r, 4.0), 0.0), 1e-6);
    }
  }
}

TEST(Residual, ManufacturedSolutionConvergesSecondOrder) {
  // -u'' = pi^2 sin(pi x) with u = sin(pi x): a linear forcing term replaces the q-term.
  std::vector<double> errs;
  for (int n : {33, 65, 129}) {
    const GridPtr g = ref::line(n);
    const double pi = std::acos(-1.0);
    const ScalarField u = sample(g, [&](std::array<double, 2> x) { return std::sin(pi * x[0]); });
    ScalarField uu = u;
    uu[0] = uu[n - 1] = 0.0;
    const ScalarField f = sample(g, [&](std::array<double, 2> x) { return pi * pi * std::sin(pi * x[0]); });
    const Functional fn(2.0, {{1.0, f}});
    errs.push_back(fn.gradient(uu).sup_norm());
  }
  EXPECT_NEAR(errs[0] / errs[1], 4.0, 0.1);
  EXPECT_NEAR(errs[1] / errs[2], 4.0, 0.1);
  EXPECT_LT(errs[2], 1e-3);
}

TEST(SolutionEnergyGap, ZeroFieldAndNegativeControl) {
  const GridPtr g = ref::line(65);
  const ProblemModel m = ref::model(g, 2.0, 1.0);
  EXPECT_EQ(solution_energy_gap(ScalarField(g), m), 0.0);
  std::mt19937_64 rng(9);
  const ScalarField u = ref::random_field(g, rng, true);
  EXPECT_GT(solution_energy_gap(u, m), 1e-2);
  EXPECT_THROW(solution_energy_gap(u, ProblemModel::make(ref::weight(g), 2.0, 1.5, 1.0, Variant::p_linear)),
               InputError);
}

TEST(Curvature, DirichletPartMatchesSecondDifferencesForP2) {
  const GridPtr g = ref::line(9);
  std::mt19937_64 rng(4);
  const ScalarField u = ref::random_field(g, rng, true);
  const Functional f(2.0, {});
  const Curvature cv = f.curvature(u, f.gradient(u), 0.0);
  const double h2 = g->h() * g->h();
  for (std::size_t k = 1; k + 1 < g->size(); ++k) EXPECT_NEAR(cv.diag[k], 2.0 / h2, 1e-9);
  for (double v : cv.offdiag) EXPECT_NEAR(v, -1.0 / h2, 1e-9);
}
