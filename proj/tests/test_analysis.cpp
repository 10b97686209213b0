#include <gtest/gtest.h>

#include "reference.hpp"

using namespace deadcore;

namespace {

BarrierSpec shell_1d(double K = 1.0, double beta = 4.0) {
  BarrierSpec s;
  s.center = {0.5, 0.0};
  s.r_in = 0.1;
  s.R = 0.3;
  s.K = K;
  s.beta = beta;
  return s;
}

SweepOptions cold() {
  SweepOptions o;
  o.warm_start = false;
  return o;
}

}  // namespace

TEST(Support, ThresholdAndDefault) {
  const GridPtr g = ref::line(5);
  const ScalarField u(g, std::vector<double>{0.0, 1e-9, 0.5, 1.0, 0.0});
  EXPECT_EQ(support(u).nodes(), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(support(u, 0.6).nodes(), (std::vector<std::size_t>{3}));
  EXPECT_THROW(support(u, 0.0), InputError);
  EXPECT_TRUE(support(ScalarField(g)).empty());
}

TEST(DeadcoreFraction, CountsSmallValuesInRegion) {
  const GridPtr g = ref::line(6);
  const ScalarField u(g, std::vector<double>{0.0, 0.0, 1e-8, 0.4, 1.0, 0.0});
  NodeMask region(g);
  for (std::size_t k : {1, 2, 3, 4}) region.set(k);
  EXPECT_DOUBLE_EQ(deadcore_fraction(u, region), 0.5);
  EXPECT_DOUBLE_EQ(deadcore_fraction(u, region, 0.5), 0.75);
  EXPECT_THROW(deadcore_fraction(u, NodeMask(g)), InputError);
}

TEST(CountDistinct, DuplicatesAndPermutation) {
  const GridPtr g = ref::line(33);
  std::mt19937_64 rng(1);
  const ScalarField a = ref::random_field(g, rng, true), b = ref::random_field(g, rng, true);
  ScalarField a2 = a;
  a2[5] += 1e-9;
  EXPECT_EQ(count_distinct({&a, &b, &a2}), 2u);
  EXPECT_EQ(count_distinct({&a2, &a, &b}), 2u);
  EXPECT_EQ(count_distinct({&a, &a}), 1u);
  EXPECT_EQ(count_distinct({}), 0u);
  EXPECT_EQ(count_distinct({&a, &b}, 10.0), 1u);
}

TEST(CountDistinct, ToleranceIsRelative) {
  const GridPtr g = ref::line(9);
  ScalarField a(g), b(g);
  a[4] = 1e-6;
  b[4] = 2e-6;
  EXPECT_EQ(count_distinct({&a, &b}), 2u);
  EXPECT_EQ(count_distinct({&a, &b}, 1e-5), 1u);
}

TEST(CountDistinct, IdempotentOnRepresentatives) {
  const GridPtr g = ref::line(17);
  std::mt19937_64 rng(6);
  std::vector<ScalarField> fs;
  for (int i = 0; i < 4; ++i) fs.push_back(ref::random_field(g, rng));
  fs.push_back(fs[0]);
  fs.push_back(fs[2]);
  std::vector<const ScalarField*> all, reps;
  for (const auto& f : fs) all.push_back(&f);
  for (int i = 0; i < 4; ++i) reps.push_back(&fs[i]);
  EXPECT_EQ(count_distinct(all), 4u);
  EXPECT_EQ(count_distinct(reps), 4u);
}

TEST(Barrier, ExponentAndFieldShape) {
  EXPECT_DOUBLE_EQ(BarrierSpec::beta_for(2.0, 1.5), 4.0);
  EXPECT_DOUBLE_EQ(BarrierSpec::beta_for(3.0, 2.0), 3.0);
  const GridPtr g = ref::line(201);
  const ScalarField W = barrier_field(g, shell_1d());
  EXPECT_EQ(W[100], 0.0);  // centre
  EXPECT_EQ(W[80], 0.0);   // exactly r_in
  EXPECT_GT(W[79], 0.0);
  const double x = g->coord(50)[0] - 0.5;
  EXPECT_NEAR(W[50], std::pow(x * x - 0.01, 4.0), 1e-15);
}

TEST(Barrier, RejectsBadShells) {
  const GridPtr g = ref::line(65);
  BarrierSpec s = shell_1d();
  s.R = 0.05;
  EXPECT_THROW(barrier_field(g, s), InputError);
  s = shell_1d();
  s.R = 0.6;
  EXPECT_THROW(barrier_field(g, s), InputError);
  EXPECT_THROW(barrier_check(g, shell_1d(), 1.0, 1.5, 2.0), InputError);
}

TEST(Barrier, ThresholdSeparatesHoldingFromFailing) {
  for (const GridPtr& g : {ref::line(513), ref::square(65)}) {
    for (double p : {2.0, 3.0}) {
      BarrierSpec s = shell_1d(1.0, BarrierSpec::beta_for(p, 1.5));
      if (g->dim() == 2) s.center = {0.5, 0.5};
      const BarrierThreshold t = barrier_threshold(g, s, p, 1.5);
      ASSERT_TRUE(t.found);
      EXPECT_TRUE(std::isfinite(t.A0));
      EXPECT_GT(t.A0, 0.0);
      EXPECT_FALSE(barrier_check(g, s, 0.0, p, 1.5).holds);
      EXPECT_FALSE(barrier_check(g, s, 0.99 * t.A0, p, 1.5).holds);
      for (double f : {1.0, 1.5, 10.0}) EXPECT_TRUE(barrier_check(g, s, f * t.A0, p, 1.5).holds);
      // The bisection never undershoots the analytic worst ratio.
      EXPECT_GE(t.A0 * (1.0 + 1e-8), t.ratio_max);
    }
  }
}

TEST(Barrier, ThresholdScalesWithAmplitude) {
  // A W^{q-1} against Delta_p W: A0(K) = K^{p-q} A0(1).
  const GridPtr g = ref::line(513);
  const double a1 = barrier_threshold(g, shell_1d(1.0), 2.0, 1.5).A0;
  double prev = a1;
  for (double K : {2.0, 4.0}) {
    const double a = barrier_threshold(g, shell_1d(K), 2.0, 1.5).A0;
    EXPECT_GT(a, prev);
    EXPECT_NEAR(a, std::sqrt(K) * a1, 1e-6 * a);
    prev = a;
  }
}

TEST(Barrier, WiderShellNeedsLessAbsorptionAtFixedEdgeLevel) {
  // K is chosen so that W equals 1 on the outer sphere.
  const GridPtr g = ref::square(129);
  for (double p : {2.0, 3.0}) {
    double prev = std::numeric_limits<double>::infinity();
    for (double R : {0.2, 0.25, 0.3, 0.35, 0.4}) {
      BarrierSpec s;
      s.center = {0.5, 0.5};
      s.r_in = 0.1;
      s.R = R;
      s.beta = BarrierSpec::beta_for(p, 1.5);
      s.K = 1.0 / std::pow(R * R - s.r_in * s.r_in, s.beta);
      const BarrierThreshold t = barrier_threshold(g, s, p, 1.5);
      ASSERT_TRUE(t.found);
      EXPECT_LE(t.A0, prev) << "p=" << p << " R=" << R;
      prev = t.A0;
    }
  }
}

TEST(Barrier, ModelOverloadNeedsPureQ) {
  const GridPtr g = ref::line(65);
  const ProblemModel m = ProblemModel::make(ref::weight(g), 2.0, 1.5, 1.0, Variant::q_plus_r, 4.0);
  EXPECT_THROW(barrier_check(shell_1d(), 1.0, m), InputError);
  EXPECT_NO_THROW(barrier_check(shell_1d(), 1.0, ref::model(g, 2.0, 1.0)));
}

TEST(Sweep, SingleMuRowIsComplete) {
  const GridPtr g = ref::line(129);
  const ProblemModel m = ref::model(g, 2.0, 1.0);
  const ComponentSet cs = detect_components(m.a_mu());
  const SweepReport rep = sweep(m, {8.0}, cs);
  ASSERT_EQ(rep.rows.size(), 1u);
  const SweepRow& r = rep.rows[0];
  EXPECT_TRUE(r.ok()) << r.status();
  EXPECT_LT(r.m, 0.0);
  EXPECT_GT(r.m_prime_fd, 0.0);
  EXPECT_NEAR(r.m_prime_fd, r.m_prime_formula, 0.01 * r.m_prime_formula);
  EXPECT_EQ(r.hausdorff.size(), 2u);
  EXPECT_EQ(r.n_distinct, 3u);
  EXPECT_EQ(r.candidates.size(), 3u);
  EXPECT_GE(r.deadcore_fraction, 0.0);
  EXPECT_LE(r.deadcore_fraction, 1.0);
}

TEST(Sweep, RejectsBadLadders) {
  const GridPtr g = ref::line(65);
  const ProblemModel m = ref::model(g, 2.0, 1.0);
  const ComponentSet cs = detect_components(m.a_mu());
  EXPECT_THROW(sweep(m, {}, cs), InputError);
  EXPECT_THROW(sweep(m, {2.0, 1.0}, cs), InputError);
  EXPECT_THROW(sweep(m, {1.0, 1.0}, cs), InputError);
}

TEST(Sweep, ParallelMatchesSerialColdStart) {
  const GridPtr g = ref::line(129);
  const ProblemModel m = ref::model(g, 3.0, 1.0);
  const ComponentSet cs = detect_components(m.a_mu());
  const std::vector<double> mus{1.0, 16.0, 256.0};
  SweepOptions par = cold();
  par.parallel = 3;
  const SweepReport a = sweep(m, mus, cs, cold());
  const SweepReport b = sweep(m, mus, cs, par);
  EXPECT_EQ(a.to_csv(), b.to_csv());
  for (std::size_t i = 0; i < mus.size(); ++i) EXPECT_EQ(a.rows[i].ground.u.values, b.rows[i].ground.u.values);
}

TEST(Sweep, CsvHeaderAndShape) {
  const GridPtr g = ref::line(65);
  const ProblemModel m = ref::model(g, 2.0, 1.0);
  const SweepReport rep = sweep(m, {1.0, 2.0}, detect_components(m.a_mu()));
  const std::string csv = rep.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "mu,m,m_prime_fd,m_prime_formula,lambda1,n_distinct,hausdorff_1,hausdorff_2,deadcore_fraction,status");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Sweep, MonotoneEnergyAndShrinkingSupport) {
  const GridPtr g = ref::line(257);
  for (double p : {2.0, 3.0}) {
    const ProblemModel m = ref::model(g, p, 1.0);
    const SweepReport rep = sweep(m, {4.0, 64.0, 1024.0}, detect_components(m.a_mu()));
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
      EXPECT_GT(rep.rows[i].m, rep.rows[i - 1].m) << "p=" << p;
      EXPECT_TRUE(support(rep.rows[i].ground.u).subset_of(support(rep.rows[i - 1].ground.u))) << "p=" << p;
    }
  }
}
