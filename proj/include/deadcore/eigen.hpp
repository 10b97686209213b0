#pragma once

#include <random>

#include "deadcore/components.hpp"
#include "deadcore/minimize.hpp"
#include "deadcore/solve.hpp"

namespace deadcore {

enum class Normalization { p_norm, sup_norm };

struct EigenOptions {
  double tol_decrease = 1e-12;  // stop once the quotient drops by less than this (relative) ...
  int quiet_steps = 10;         // ... for this many consecutive iterations
  double tol_pg = 1e-10;        // or once the projected Rayleigh gradient is this small
  long max_iter = 20000;
  std::optional<double> eps_reg;
  std::uint64_t seed = 0;

  double eps_for(double p) const { return eps_reg ? *eps_reg : (p < 2.0 ? 1e-8 : 0.0); }
};

struct EigenResult {
  double lambda = 0.0;
  ScalarField phi;
  std::vector<double> rayleigh_history;
  long iterations = 0;
  bool converged = false;
  std::string diagnostic;
};

/// sum |u|^p h^d.
inline double pnorm_p(const ScalarField& u, double p) {
  return quadrature(u, [&](std::size_t, double v) { return std::pow(std::abs(v), p); });
}

/// (sum_cells |grad u|^p - sum weight |u|^p) h^d / sum |u|^p h^d.
inline double rayleigh_quotient(const ScalarField& u, double p, const ScalarField& weight) {
  const double den = pnorm_p(u, p);
  if (!(den > 0.0)) throw InputError("rayleigh_quotient: zero field");
  return p * Functional(p, {{p, weight}}).value(u) / den;
}

/// Minimizes the Rayleigh quotient of -Delta_p - weight |.|^{p-2} over nonnegative
/// fields vanishing on the zero mask and the boundary. Each step is preconditioned
/// by the sparse curvature of the convex part, projected, renormalized, and
/// accepted only if the quotient does not increase.
inline EigenResult rayleigh_min(double p, const ScalarField& weight, const NodeMask& zero_mask,
                                Normalization norm = Normalization::p_norm, const EigenOptions& opts = {},
                                const std::optional<ScalarField>& init = std::nullopt) {
  if (!(p > 1.0)) throw InputError("rayleigh_min: need p > 1");
  require_same_grid(weight.grid, zero_mask.grid, "rayleigh_min");
  const GridPtr& grid = weight.grid;
  const BoxSet box = BoxSet::nonnegative(grid, zero_mask);
  const std::size_t n = grid->size();
  if (box.zero.count() == n) throw InputError("rayleigh_min: zero mask leaves no free node");

  const Functional num(p, {{p, weight}});
  const double eps = opts.eps_for(p);
  auto normalize = [&](ScalarField& u) {
    const double s = pnorm_p(u, p);
    if (!(s > 0.0)) return false;
    u *= std::pow(s, -1.0 / p);
    return true;
  };

  ScalarField x(grid);
  if (init) {
    require_same_grid(init->grid, grid, "rayleigh_min init");
    x = *init;
    for (double& v : x.values) v = std::abs(v);
  } else {
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> noise(0.0, 0.01);
    for (std::size_t k = 0; k < n; ++k) x[k] = 1.0 + noise(rng);
  }
  box.project(x);
  if (!normalize(x)) {
    x.values.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) x[k] = 1.0;
    box.project(x);
    normalize(x);
  }

  EigenResult res;
  double lam = rayleigh_quotient(x, p, weight);
  res.rayleigh_history.push_back(lam);
  detail::CurvatureSystem sys(*grid);
  std::vector<uint8_t> free(n);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  ScalarField r(grid), dir(grid), trial(grid);
  int quiet = 0;
  long it = 0;
  for (; it < opts.max_iter; ++it) {
    // Rayleigh gradient (up to the factor p) on the unit sphere.
    const ScalarField g = num.gradient(x, eps);
    for (std::size_t k = 0; k < n; ++k) r[k] = box.fixed(k) ? 0.0 : g[k] - lam * Functional::signed_power(x[k], p - 1.0);
    const double pg = box.projected_gradient_norm(x, r);
    if (pg <= opts.tol_pg) {
      res.converged = true;
      break;
    }
    const Curvature cv = num.curvature(x, g, eps);
    for (std::size_t k = 0; k < n; ++k) free[k] = !box.fixed(k) && !(x[k] <= 0.0 && r[k] > 0.0);
    bool ok = sys.factor(cv, free);
    if (ok) {
      for (std::size_t k = 0; k < n; ++k) rhs[Eigen::Index(k)] = free[k] ? -r[k] : 0.0;
      const Eigen::VectorXd d = sys.solve(rhs);
      for (std::size_t k = 0; k < n; ++k) {
        dir[k] = free[k] ? d[Eigen::Index(k)] : -r[k] / cv.diag[k];
        ok = ok && std::isfinite(dir[k]);
      }
    }
    if (!ok)
      for (std::size_t k = 0; k < n; ++k) dir[k] = -r[k] / cv.diag[k];

    // Backtrack from a unit step, then extrapolate while the quotient keeps falling.
    auto try_step = [&](double t, ScalarField& out) -> double {
      for (std::size_t k = 0; k < n; ++k) out[k] = x[k] + t * dir[k];
      box.project(out);
      if (!normalize(out)) return std::numeric_limits<double>::infinity();
      return rayleigh_quotient(out, p, weight);
    };
    double t = 1.0;
    double best = try_step(t, trial);
    for (int bt = 0; bt < 60 && !(best < lam); ++bt) {
      t *= 0.5;
      best = try_step(t, trial);
    }
    if (!(best <= lam)) {
      // No representable decrease left; accept if the gradient is at rounding level.
      if (pg <= 1e-6 * (1.0 + std::abs(lam)) * x.sup_norm()) {
        res.converged = true;
      } else {
        res.diagnostic = "line search stalled";
      }
      break;
    }
    if (t == 1.0) {
      ScalarField more(grid);
      for (int ex = 0; ex < 8; ++ex) {
        const double v = try_step(2.0 * t, more);
        if (!(v < best)) break;
        best = v;
        t *= 2.0;
        std::swap(trial, more);
      }
    }
    const double drop = lam - best;
    std::swap(x, trial);
    lam = best;
    res.rayleigh_history.push_back(lam);
    quiet = drop < opts.tol_decrease * std::max(1.0, std::abs(lam)) ? quiet + 1 : 0;
    if (quiet >= opts.quiet_steps) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged && res.diagnostic.empty()) res.diagnostic = "max_iter exceeded";
  if (norm == Normalization::sup_norm) x *= 1.0 / x.sup_norm();
  res.lambda = rayleigh_quotient(x, p, weight);
  res.phi = std::move(x);
  res.iterations = it;
  return res;
}

/// lambda_1(mu): first eigenvalue of -Delta_p - a_mu |.|^{p-2}.
inline EigenResult rayleigh_min(const ProblemModel& model, const NodeMask& zero_mask,
                                Normalization norm = Normalization::p_norm, const EigenOptions& opts = {},
                                const std::optional<ScalarField>& init = std::nullopt) {
  require_same_grid(zero_mask.grid, model.grid(), "rayleigh_min");
  return rayleigh_min(model.p, model.a_mu(), zero_mask, norm, opts, init);
}

/// lambda_infinity: the quotient with weight a^+ over fields vanishing where a < 0.
inline EigenResult lambda_infinity(const ProblemModel& model, const EigenOptions& opts = {}) {
  const NodeMask negative = mask_where(model.a_minus, [](double v) { return v > 0.0; });
  return rayleigh_min(model.p, model.a_plus, negative, Normalization::p_norm, opts);
}

/// Torsion function: minimizer of (1/p) sum |grad e|^p h^d - sum e h^d vanishing on the mask.
inline SolveResult torsion(const NodeMask& mask, double p, const SolveOptions& opts = {}) {
  if (!(p > 1.0)) throw InputError("torsion: need p > 1");
  const GridPtr& grid = mask.grid;
  const BoxSet box = BoxSet::nonnegative(grid, mask);
  if (box.zero.count() == grid->size()) throw InputError("torsion: mask leaves no free node");
  const Functional f(p, {{1.0, ScalarField(grid, 1.0)}});
  ScalarField start(grid, 1.0);
  box.project(start);
  start *= best_ray_scale(f, start);
  const MinimizeResult mr = minimize_box(f, box, std::move(start), opts);
  SolveResult out;
  out.u = mr.u;
  out.energy = mr.energy;
  out.pg_norm = mr.pg_norm;
  out.converged = mr.converged;
  out.iterations = mr.iterations;
  out.zero_mask = mask;
  out.diagnostic = mr.diagnostic;
  // -Delta_p e - 1 over free nodes.
  ScalarField res = f.gradient(out.u, 0.0);
  for (std::size_t k = 0; k < res.size(); ++k)
    if (box.fixed(k)) res[k] = 0.0;
  out.res_sup = res.sup_norm();
  out.valid = out.converged && out.res_sup <= 1e-6;
  return out;
}

struct CoercivityCertificate {
  bool holds = false;
  double lambda1 = 0.0;
  EigenResult eigen;
};

/// The p-homogeneous part of I_{mu,p} is coercive iff lambda_1(mu) > 0.
inline CoercivityCertificate coercivity_certificate(const ProblemModel& model, const EigenOptions& opts = {}) {
  const auto s = model.second_exponent();
  if (!s || *s != model.p) throw InputError("coercivity_certificate: needs the p-linear variant or r = p");
  CoercivityCertificate c;
  c.eigen = rayleigh_min(model, NodeMask(model.grid()), Normalization::p_norm, opts);
  c.lambda1 = c.eigen.lambda;
  c.holds = c.eigen.converged && c.lambda1 > 0.0;
  return c;
}

struct Ball {
  std::size_t center = 0;
  double radius = 0.0;
  NodeMask nodes;
};

/// Largest ball centred at a node of the region and containing only region
/// nodes (distance to the nearest outside node, strict inequality).
inline Ball largest_inscribed_ball(const NodeMask& region) {
  const Grid& g = *region.grid;
  const auto inside = region.nodes();
  if (inside.empty()) throw InputError("largest_inscribed_ball: empty region");
  const auto outside = (~region).nodes();
  Ball b{inside.front(), 0.0, NodeMask(region.grid)};
  for (auto c : inside) {
    double d = std::numeric_limits<double>::infinity();
    for (auto o : outside) d = std::min(d, g.distance(c, o));
    if (d > b.radius) b.radius = d, b.center = c;
  }
  for (std::size_t k = 0; k < g.size(); ++k)
    if (g.distance(k, b.center) < b.radius * (1.0 - 1e-12)) b.nodes.set(k);
  return b;
}

/// First Dirichlet eigenfunction of -Delta_p on a ball, sup-norm one.
inline EigenResult ball_eigenfunction(const Ball& ball, double p, const EigenOptions& opts = {}) {
  return rayleigh_min(p, ScalarField(ball.nodes.grid), ~ball.nodes, Normalization::sup_norm, opts);
}

}  // namespace deadcore
