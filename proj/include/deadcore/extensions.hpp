#pragma once

#include <random>

#include "deadcore/analysis.hpp"
#include "deadcore/eigen.hpp"
#include "deadcore/solve.hpp"

namespace deadcore {

/// Fibre coefficients of u: A = ||grad u||_p^p, B = sum a_mu |u|^q h^d, C = sum a_mu |u|^r h^d.
struct FiberCoeffs {
  double A = 0.0;
  double B = 0.0;
  double C = 0.0;
};

/// i: two fibre critical points t+ < t-; ii: only t+; iii: only t- (B <= 0);
/// none: no positive critical point.
enum class FiberCase { i, ii, iii, none };

inline const char* to_string(FiberCase c) {
  switch (c) {
    case FiberCase::i: return "i";
    case FiberCase::ii: return "ii";
    case FiberCase::iii: return "iii";
    case FiberCase::none: return "none";
  }
  return "?";
}

struct FiberRoots {
  FiberCase fcase = FiberCase::none;
  std::optional<double> t_plus;
  std::optional<double> t_minus;
};

inline FiberCoeffs fiber_coeffs(const ScalarField& u, const ProblemModel& model) {
  const auto r = model.second_exponent();
  if (!r) throw InputError("fiber_coeffs: model has no second nonlinearity");
  const Functional f = Functional::from_model(model);
  return FiberCoeffs{model.p * f.dirichlet(u), model.q * f.term(0, u), *r * f.term(1, u)};
}

/// t^{p-q} A - B - t^{r-q} C.
inline double fiber_equation(const FiberCoeffs& c, double p, double q, double r, double t) {
  return std::pow(t, p - q) * c.A - c.B - std::pow(t, r - q) * c.C;
}

/// I(t u) = t^p A / p - t^q B / q - t^r C / r.
inline double fiber_energy(const FiberCoeffs& c, double p, double q, double r, double t) {
  return std::pow(t, p) * c.A / p - std::pow(t, q) * c.B / q - std::pow(t, r) * c.C / r;
}

namespace detail {

/// Root of the fibre equation on [lo, hi] (opposite signs), bisection then Newton polish.
inline double fiber_root(const FiberCoeffs& c, double p, double q, double r, double lo, double hi) {
  auto f = [&](double t) { return fiber_equation(c, p, q, r, t); };
  double flo = f(lo);
  for (int i = 0; i < 200 && hi - lo > 1e-16 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) lo = mid, flo = fm;
    else hi = mid;
  }
  double t = 0.5 * (lo + hi);
  for (int i = 0; i < 5; ++i) {
    const double d = (p - q) * std::pow(t, p - q - 1.0) * c.A - (r - q) * std::pow(t, r - q - 1.0) * c.C;
    if (d == 0.0) break;
    const double next = t - f(t) / d;
    if (!(next > 0.0) || std::abs(f(next)) >= std::abs(f(t))) break;
    t = next;
  }
  return t;
}

}  // namespace detail

/// Positive roots of t^{p-q} A - B - t^{r-q} C = 0 and their classification.
inline FiberRoots fiber_roots(const FiberCoeffs& c, double p, double q, double r) {
  if (!(c.A > 0.0)) throw InputError("fiber_roots: need A > 0");
  if (!(q > 1.0 && q < p && r >= p)) throw InputError("fiber_roots: need 1 < q < p <= r");
  FiberRoots out;
  auto f = [&](double t) { return fiber_equation(c, p, q, r, t); };
  // Upper bracket: grow until f has the sign it takes at infinity.
  auto grow = [&](double t, bool want_negative) {
    for (int i = 0; i < 4000 && ((f(t) < 0.0) != want_negative); ++i) t *= 2.0;
    return t;
  };
  if (c.C == 0.0) {
    if (c.B > 0.0) {
      out.fcase = FiberCase::ii;
      out.t_plus = std::pow(c.B / c.A, 1.0 / (p - q));
    }
    return out;
  }
  if (r == p) {
    // t^{p-q} (A - C) = B.
    const double D = c.A - c.C;
    if (c.B > 0.0 && D > 0.0) {
      out.fcase = FiberCase::ii;
      out.t_plus = std::pow(c.B / D, 1.0 / (p - q));
    } else if (c.B < 0.0 && D < 0.0) {
      out.fcase = FiberCase::iii;
      out.t_minus = std::pow(c.B / D, 1.0 / (p - q));
    }
    return out;
  }
  if (c.C < 0.0) {
    // f increases from -B to infinity.
    if (c.B > 0.0) {
      out.fcase = FiberCase::ii;
      double hi = grow(1.0, false);
      out.t_plus = detail::fiber_root(c, p, q, r, 0.0, hi);
    }
    return out;
  }
  // C > 0: f rises to a single maximum, then falls to -infinity.
  const double t_max = std::pow((p - q) * c.A / ((r - q) * c.C), 1.0 / (r - p));
  const double f_max = f(t_max);
  if (c.B > 0.0) {
    if (f_max > 0.0) {
      out.fcase = FiberCase::i;
      out.t_plus = detail::fiber_root(c, p, q, r, 0.0, t_max);
      out.t_minus = detail::fiber_root(c, p, q, r, t_max, grow(2.0 * t_max, true));
    }
    return out;
  }
  if (c.B < 0.0 || f_max > 0.0) {
    out.fcase = FiberCase::iii;
    out.t_minus = detail::fiber_root(c, p, q, r, t_max, grow(2.0 * t_max, true));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Smallness gate

/// Nonnegative smooth field: a few random Gaussians times a boundary window.
inline ScalarField random_smooth_direction(const GridPtr& grid, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> count(1, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto ext = grid->extent();
  const double L = std::max(ext[0], ext[1]);
  struct G {
    std::array<double, 2> c;
    double w, a;
  };
  std::vector<G> gs(count(rng));
  for (auto& g : gs) {
    g.c = {unit(rng) * ext[0], unit(rng) * ext[1]};
    g.w = (0.03 + 0.22 * unit(rng)) * L;
    g.a = 0.1 + 0.9 * unit(rng);
  }
  ScalarField u = sample(grid, [&](std::array<double, 2> x) {
    double v = 0.0;
    for (const auto& g : gs) {
      const double dx = x[0] - g.c[0];
      const double dy = grid->dim() == 2 ? x[1] - g.c[1] : 0.0;
      v += g.a * std::exp(-(dx * dx + dy * dy) / (2.0 * g.w * g.w));
    }
    double win = x[0] * (ext[0] - x[0]);
    if (grid->dim() == 2) win *= x[1] * (ext[1] - x[1]);
    return v * win;
  });
  for (std::size_t k = 0; k < u.size(); ++k)
    if (grid->on_boundary(k)) u[k] = 0.0;
  return u;
}

/// True when t -> I(t u) takes a positive value for some t > 0.
inline bool fiber_has_positive_max(const FiberCoeffs& c, double p, double q, double r) {
  if (!(c.A > 0.0)) return false;
  if (r == p) return c.A > c.C || c.B < 0.0;
  if (c.C <= 0.0) return true;
  // I(tu) / t^q = t^{p-q} A/p - t^{r-q} C/r - B/q, maximal at t*.
  const double ts = std::pow(((p - q) * c.A / p) / ((r - q) * c.C / r), 1.0 / (r - p));
  return std::pow(ts, p - q) * c.A / p - std::pow(ts, r - q) * c.C / r - c.B / q > 0.0;
}

struct GateReport {
  bool passed = true;
  int directions = 0;
  int failures = 0;
};

/// Every one of n random smooth directions must have a fibre with a positive maximum.
inline GateReport smallness_gate(const ProblemModel& model, int n = 200, std::uint64_t seed = 0) {
  const auto r = model.second_exponent();
  if (!r) throw InputError("smallness_gate: model has no second nonlinearity");
  std::mt19937_64 rng(seed);
  GateReport g;
  g.directions = n;
  for (int i = 0; i < n; ++i) {
    const ScalarField u = random_smooth_direction(model.grid(), rng);
    if (!fiber_has_positive_max(fiber_coeffs(u, model), model.p, model.q, *r)) ++g.failures;
  }
  g.passed = g.failures == 0;
  return g;
}

// ---------------------------------------------------------------------------
// Solvers

struct ExtensionResult {
  SolveResult result;
  bool refused = false;  // a certificate or gate failed; nothing was solved
  bool aborted = false;  // the run started but lost its admissibility
  std::optional<double> lambda1;
  std::optional<GateReport> gate;
  std::string diagnostic;
};

inline void note(std::string& d, const std::string& s) { d += (d.empty() ? "" : "; ") + s; }

/// Positive on every node of every component.
inline bool positive_on(const ScalarField& u, const ComponentSet& comps) {
  for (const auto& w : comps.omega)
    for (auto k : w.nodes())
      if (!(u[k] > 0.0)) return false;
  return true;
}

/// Ground state of the q + r problem on the Nehari manifold: projected descent
/// with every iterate rescaled to the t+ point of its fibre. Best of several seeds.
inline ExtensionResult nehari_ground_state(const ProblemModel& model, const SolveOptions& opts, int seeds = 3,
                                           int gate_directions = 200) {
  if (model.variant != Variant::q_plus_r) throw InputError("nehari_ground_state: needs the q-plus-r variant");
  model.validate(true);
  ExtensionResult out;
  out.gate = smallness_gate(model, gate_directions, opts.seed);
  if (!out.gate->passed) {
    out.refused = true;
    out.diagnostic = "smallness gate violated: " + std::to_string(out.gate->failures) + " of " +
                     std::to_string(out.gate->directions) + " directions have no positive fibre maximum";
    return out;
  }
  const double r = *model.r;
  const Functional f = Functional::from_model(model);
  const NodeMask none(model.grid());
  const BoxSet box = BoxSet::nonnegative(model.grid(), none);
  const ScalarField a_mu = model.a_mu();
  const NodeMask positive = mask_where(a_mu, [](double v) { return v > 0.0; });
  const Retraction to_branch = [&](const ScalarField& u) -> std::optional<ScalarField> {
    const FiberCoeffs c = fiber_coeffs(u, model);
    if (!(c.A > 0.0)) return std::nullopt;
    const FiberRoots fr = fiber_roots(c, model.p, model.q, r);
    if (!fr.t_plus) return std::nullopt;
    return *fr.t_plus * u;
  };
  bool have = false;
  for (int s = 0; s < seeds; ++s) {
    SolveOptions o = opts;
    o.seed = opts.seed + static_cast<std::uint64_t>(s);
    // Seed noise only where a_mu > 0, so the start keeps B > 0 and a t+ point.
    const MinimizeResult mr = minimize_box(f, box, default_init(model, ~positive, o.seed), o, to_branch);
    if (mr.aborted) {
      note(out.diagnostic, "seed " + std::to_string(o.seed) + ": " + mr.diagnostic);
      continue;
    }
    SolveResult sr = finish(mr, model, none);
    if (!have || sr.energy < out.result.energy) out.result = std::move(sr), have = true;
  }
  if (!have) {
    out.aborted = true;
    note(out.diagnostic, "fibre lost its negative-energy branch (smallness gate violated)");
    return out;
  }
  if (!(out.result.energy < 0.0)) note(out.diagnostic, "energy is not negative");
  return out;
}

/// |I'(V) V| relative to ||grad V||_p^p: distance from the Nehari manifold.
inline double nehari_defect(const ScalarField& v, const ProblemModel& model) {
  const FiberCoeffs c = fiber_coeffs(v, model);
  return std::abs(c.A - c.B - c.C) / std::max(c.A, std::numeric_limits<double>::min());
}

/// Global minimizer of I_{mu,p}; refused unless lambda_1(mu) > 0.
inline ExtensionResult solve_r_eq_p(const ProblemModel& model, const SolveOptions& opts,
                                    const EigenOptions& eig = {}) {
  const auto s = model.second_exponent();
  if (!s || *s != model.p) throw InputError("solve_r_eq_p: needs the p-linear variant or r = p");
  ExtensionResult out;
  const CoercivityCertificate cert = coercivity_certificate(model, eig);
  out.lambda1 = cert.lambda1;
  if (!cert.holds) {
    out.refused = true;
    out.diagnostic = "coercivity certificate failed: lambda_1(mu) = " + format_double(cert.lambda1);
    return out;
  }
  out.result = minimize_constrained(model, NodeMask(model.grid()), opts);
  if (!(out.result.energy < 0.0)) note(out.diagnostic, "energy is not negative");
  return out;
}

struct SubSuperResult {
  ExtensionResult ext;
  ScalarField eta;           // subsolution c * sum phi_i
  ScalarField upper;         // supersolution M e
  double c = 0.0;
  double M = 0.0;
  double res_inactive = 0.0; // residual sup over nodes strictly inside the order interval
  std::vector<Ball> balls;
};

/// Free nodes where the gradient is <= tol (subsolution) or >= -tol (supersolution).
inline bool satisfies_sub(const Functional& f, const ScalarField& u, double tol) {
  const ScalarField g = f.gradient(u, 0.0);
  for (double v : g.values)
    if (v > tol) return false;
  return true;
}

inline bool satisfies_super(const Functional& f, const ScalarField& u, double tol) {
  const ScalarField g = f.gradient(u, 0.0);
  for (double v : g.values)
    if (v < -tol) return false;
  return true;
}

/// Sub/supersolution bracket: eta = c sum phi_{1,B_i} below, M e above, then
/// minimization of the energy over the order interval [eta, M e].
inline SubSuperResult subsuper_solve(const ProblemModel& model, const SolveOptions& opts,
                                     const EigenOptions& eig = {}) {
  if (model.variant != Variant::q_plus_r) throw InputError("subsuper_solve: needs the q-plus-r variant");
  model.validate();
  SubSuperResult out;
  const GridPtr& grid = model.grid();
  const ScalarField a = effective_weight(model.a_plus, model.a_minus, 1.0);
  const ComponentSet comps = detect_components(a);
  if (!comps.a1_holds()) throw InputError("subsuper_solve: no positivity component");
  const Functional f = Functional::from_model(model);
  const double tol = default_tol_res(model);

  ScalarField phi_sum(grid);
  const NodeMask positive = mask_where(a, [](double v) { return v > 0.0; });
  for (const auto& w : comps.omega) {
    const Ball b = largest_inscribed_ball(w & positive);
    if (b.nodes.empty()) {
      out.ext.refused = true;
      out.ext.diagnostic = "a component holds no grid ball with a > 0";
      return out;
    }
    phi_sum += ball_eigenfunction(b, model.p, eig).phi;
    out.balls.push_back(b);
  }

  // Largest c, scanning up from tiny values, below the first failure of the subsolution test.
  double lo = 0.0, hi = 0.0;
  for (double c = 1e-12; c <= 1e6; c *= 2.0) {
    if (satisfies_sub(f, c * phi_sum, 0.0)) lo = c;
    else {
      hi = c;
      break;
    }
  }
  if (lo == 0.0) {
    out.ext.refused = true;
    out.ext.diagnostic = "no admissible subsolution scale c";
    return out;
  }
  if (hi > 0.0)
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (satisfies_sub(f, mid * phi_sum, 0.0) ? lo : hi) = mid;
    }
  out.c = lo;
  out.eta = lo * phi_sum;

  // Smallest M on a log scan with M e a supersolution lying above eta.
  const SolveResult e = torsion(NodeMask(grid), model.p, opts);
  if (!e.converged) note(out.ext.diagnostic, "torsion solve unconverged");
  bool found = false;
  for (double M = 1e-8; M <= 1e8 && !found; M *= std::pow(10.0, 0.125)) {
    const ScalarField up = M * e.u;
    bool above = true;
    for (std::size_t k = 0; k < up.size() && above; ++k) above = up[k] >= out.eta[k];
    if (above && satisfies_super(f, up, 0.0)) {
      out.M = M;
      out.upper = up;
      found = true;
    }
  }
  if (!found) {
    out.ext.refused = true;
    note(out.ext.diagnostic, "no admissible supersolution scale M");
    return out;
  }

  BoxSet box{out.eta, out.upper, boundary_mask(grid)};
  ScalarField start = out.eta;
  for (std::size_t k = 0; k < start.size(); ++k) start[k] = 0.5 * (out.eta[k] + out.upper[k]);
  const MinimizeResult mr = minimize_box(f, box, std::move(start), opts);
  out.ext.result = finish(mr, model, NodeMask(grid));
  const Residual res = residual(out.ext.result.u, model);
  for (std::size_t k = 0; k < res.field.size(); ++k) {
    const double u = out.ext.result.u[k];
    const double span = out.upper[k] - out.eta[k];
    const double gap = 1e-9 * std::max(span, std::numeric_limits<double>::min());
    if (grid->on_boundary(k) || u - out.eta[k] <= gap || out.upper[k] - u <= gap) continue;
    out.res_inactive = std::max(out.res_inactive, std::abs(res.field[k]));
  }
  out.ext.result.valid = out.ext.result.converged && out.res_inactive <= tol;
  return out;
}

}  // namespace deadcore
