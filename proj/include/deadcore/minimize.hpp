#pragma once

#include <functional>
#include <limits>
#include <optional>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "deadcore/energy.hpp"

namespace deadcore {

struct SolveOptions {
  double tol_pg = 1e-8;
  long max_iter = 200000;
  std::optional<double> eps_reg;  // defaults to 1e-8 for p < 2, 0 otherwise
  std::uint64_t seed = 0;
  double armijo = 1e-4;
  int max_backtracks = 60;
  int polish_iter = 20;  // extra iterations after tol_pg is met, while energy still drops

  double eps_for(double p) const { return eps_reg ? *eps_reg : (p < 2.0 ? 1e-8 : 0.0); }
  void validate() const {
    if (!(tol_pg > 0.0)) throw InputError("solver: tol_pg must be positive");
    if (max_iter < 1) throw InputError("solver: max_iter must be >= 1");
  }
};

/// Feasible set: lower <= u <= upper, u = 0 on the zero mask and on the boundary.
struct BoxSet {
  ScalarField lower;
  std::optional<ScalarField> upper;
  NodeMask zero;

  static BoxSet nonnegative(const GridPtr& g, const NodeMask& zero_mask) {
    return BoxSet{ScalarField(g, 0.0), std::nullopt, zero_mask | boundary_mask(g)};
  }

  bool fixed(std::size_t k) const { return zero[k]; }

  /// Clamp, then zero the mask (which already contains the boundary).
  void project(ScalarField& u) const {
    for (std::size_t k = 0; k < u.size(); ++k) {
      double v = std::max(u[k], lower[k]);
      if (upper) v = std::min(v, (*upper)[k]);
      u[k] = zero[k] ? 0.0 : v;
    }
  }

  /// sup over free nodes of |u - P(u - g)|.
  double projected_gradient_norm(const ScalarField& u, const ScalarField& g) const {
    double m = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      if (zero[k]) continue;
      double v = std::max(u[k] - g[k], lower[k]);
      if (upper) v = std::min(v, (*upper)[k]);
      m = std::max(m, std::abs(u[k] - v));
    }
    return m;
  }
};

struct MinimizeResult {
  ScalarField u;
  double energy = 0.0;
  double pg_norm = 0.0;
  long iterations = 0;
  bool converged = false;
  bool aborted = false;
  std::string diagnostic;
};

/// Optional map applied after every trial step (e.g. rescaling onto a fibre
/// branch). Returns nullopt to abort the run.
using Retraction = std::function<std::optional<ScalarField>(const ScalarField&)>;

/// Minimizer of t -> value(t u) over t > 0 (log-scale scan, then golden
/// refinement). Returns 1 when no positive multiple lowers the energy below zero.
inline double best_ray_scale(const Functional& f, const ScalarField& u) {
  ScalarField tu = u;
  auto at = [&](double lt) {
    const double t = std::pow(10.0, lt);
    for (std::size_t k = 0; k < u.size(); ++k) tu[k] = t * u[k];
    return f.value(tu);
  };
  double best_lt = 0.0, best = std::numeric_limits<double>::infinity();
  for (double lt = -15.0; lt <= 6.0; lt += 0.25) {
    const double v = at(lt);
    if (v < best) best = v, best_lt = lt;
  }
  if (!(best < 0.0)) return 1.0;
  double lo = best_lt - 0.25, hi = best_lt + 0.25;
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int i = 0; i < 60; ++i) {
    const double a = hi - r * (hi - lo), b = lo + r * (hi - lo);
    if (at(a) < at(b)) hi = b; else lo = a;
  }
  return std::pow(10.0, 0.5 * (lo + hi));
}

namespace detail {

/// Assembles the curvature restricted to the free set; rows of fixed and
/// active nodes keep only their diagonal. The sparsity pattern never changes,
/// so one symbolic analysis serves the whole run.
class CurvatureSystem {
 public:
  explicit CurvatureSystem(const Grid& g) : n_(g.size()), edges_(edge_pattern(g)) {
    trip_.reserve(n_ + edges_.size());
  }

  bool factor(const Curvature& cv, const std::vector<uint8_t>& free) {
    trip_.clear();
    for (std::size_t k = 0; k < n_; ++k) trip_.emplace_back(int(k), int(k), cv.diag[k]);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto [a, b] = edges_[e];
      const double v = free[a] && free[b] ? cv.offdiag[e] : 0.0;
      // Lower triangle only, as the solver reads it.
      trip_.emplace_back(int(std::max(a, b)), int(std::min(a, b)), v);
    }
    mat_.resize(int(n_), int(n_));
    mat_.setFromTriplets(trip_.begin(), trip_.end());
    if (!analysed_) {
      ldlt_.analyzePattern(mat_);
      analysed_ = true;
    }
    ldlt_.factorize(mat_);
    return ldlt_.info() == Eigen::Success;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return ldlt_.solve(rhs); }

  /// s^T M s with the same restriction.
  double quad(const Curvature& cv, const std::vector<uint8_t>& free, const ScalarField& s) const {
    double q = 0.0;
    for (std::size_t k = 0; k < n_; ++k) q += cv.diag[k] * s[k] * s[k];
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto [a, b] = edges_[e];
      if (free[a] && free[b]) q += 2.0 * cv.offdiag[e] * s[a] * s[b];
    }
    return q;
  }

 private:
  std::size_t n_;
  std::vector<std::array<std::size_t, 2>> edges_;
  std::vector<Eigen::Triplet<double>> trip_;
  Eigen::SparseMatrix<double> mat_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt_;
  bool analysed_ = false;
};

}  // namespace detail

/// Two-metric projected descent. Nodes sitting on a bound with the gradient
/// pushing outward take a diagonally scaled step; the remaining free nodes take
/// a step preconditioned by the sparse curvature of the convex part of the
/// energy. The step length starts from a spectral estimate and is cut back
/// along the projection arc until monotone Armijo decrease holds.
inline MinimizeResult minimize_box(const Functional& f, const BoxSet& box, ScalarField init, const SolveOptions& opts,
                                   const Retraction& retract = {}) {
  opts.validate();
  const double eps = opts.eps_for(f.p());
  const double vol = init.grid->cell_volume();
  const std::size_t n = init.size();
  MinimizeResult res;
  ScalarField x = std::move(init);
  box.project(x);
  if (retract) {
    auto r = retract(x);
    if (!r) {
      res.u = x;
      res.aborted = true;
      res.diagnostic = "retraction failed at the initial point";
      return res;
    }
    x = std::move(*r);
  }
  double fx = f.value(x);
  ScalarField g = f.gradient(x, eps);
  detail::CurvatureSystem sys(*x.grid);
  std::vector<uint8_t> free(n);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  ScalarField dir(x.grid), trial(x.grid), gt(x.grid);
  double step = 1.0;
  int polish = opts.polish_iter;
  long it = 0;
  for (; it < opts.max_iter; ++it) {
    res.pg_norm = box.projected_gradient_norm(x, g);
    if (res.pg_norm <= opts.tol_pg) {
      // tol_pg is measured in units of u; a few more steps settle nodes whose
      // value is tiny but whose residual is not.
      if (polish-- <= 0 || res.pg_norm == 0.0) {
        res.converged = true;
        break;
      }
    }
    const Curvature cv = f.curvature(x, g, eps);
    // Activity band in the units of x: the diagonally scaled projected step.
    double band = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (box.fixed(k)) continue;
      double v = std::max(x[k] - g[k] / cv.diag[k], box.lower[k]);
      if (box.upper) v = std::min(v, (*box.upper)[k]);
      band = std::max(band, std::abs(x[k] - v));
    }
    for (std::size_t k = 0; k < n; ++k) {
      bool act = box.fixed(k);
      if (!act && x[k] - box.lower[k] <= band && g[k] > 0.0) act = true;
      if (!act && box.upper && (*box.upper)[k] - x[k] <= band && g[k] < 0.0) act = true;
      free[k] = !act;
    }
    bool newton = sys.factor(cv, free);
    if (newton) {
      for (std::size_t k = 0; k < n; ++k) rhs[Eigen::Index(k)] = free[k] ? -g[k] : 0.0;
      const Eigen::VectorXd d = sys.solve(rhs);
      for (std::size_t k = 0; k < n; ++k) {
        dir[k] = free[k] ? d[Eigen::Index(k)] : -g[k] / cv.diag[k];
        if (!std::isfinite(dir[k])) newton = false;
      }
    }
    if (!newton)
      for (std::size_t k = 0; k < n; ++k) dir[k] = -g[k] / cv.diag[k];
    for (std::size_t k = 0; k < n; ++k)
      if (box.fixed(k)) dir[k] = 0.0;

    bool accepted = false, have_gt = false;
    const double noise = 1e-13 * (std::abs(fx) + f.dirichlet(x));
    double t = step;
    double ft = 0.0;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      for (std::size_t k = 0; k < n; ++k) {
        trial[k] = x[k] + t * dir[k];
        // Free nodes may close at most 90% of their gap to a bound per step, so a
        // whole component cannot be clamped to zero in one jump.
        if (free[k]) {
          trial[k] = std::max(trial[k], x[k] - 0.9 * (x[k] - box.lower[k]));
          if (box.upper) trial[k] = std::min(trial[k], x[k] + 0.9 * ((*box.upper)[k] - x[k]));
        }
      }
      box.project(trial);
      if (retract) {
        auto r = retract(trial);
        if (!r) {
          res.aborted = true;
          res.diagnostic = "retraction failed during descent";
          break;
        }
        trial = std::move(*r);
      }
      double lin = 0.0, moved = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        lin += g[k] * (trial[k] - x[k]);
        moved = std::max(moved, std::abs(trial[k] - x[k]));
      }
      lin *= vol;
      if (moved == 0.0) break;
      if (lin >= 0.0) {
        t *= 0.5;
        continue;
      }
      const double df = f.difference(x, trial);
      bool ok = df <= opts.armijo * lin;
      if (!ok && std::abs(df) <= noise) {
        // Energy change below rounding: fall back to the slope at the trial point.
        gt = f.gradient(trial, eps);
        double slope = 0.0;
        for (std::size_t k = 0; k < n; ++k) slope += gt[k] * (trial[k] - x[k]);
        ok = slope * vol <= -(1.0 - 2.0 * opts.armijo) * lin;
        have_gt = ok;
      }
      if (ok) {
        ft = f.value(trial);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (res.aborted || !accepted) break;
    if (!have_gt) gt = f.gradient(trial, eps);
    ScalarField s(x.grid);
    double sy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = trial[k] - x[k];
      sy += s[k] * (gt[k] - g[k]);
    }
    const double sms = sys.quad(cv, free, s);
    step = sy > 0.0 && sms > 0.0 ? std::clamp(sms / sy, 1e-3, 1e3) : std::min(1e3, 2.0 * t);
    std::swap(x, trial);
    g = std::move(gt);
    fx = ft;
  }
  if (!res.converged && !res.aborted) {
    res.pg_norm = box.projected_gradient_norm(x, g);
    res.converged = res.pg_norm <= opts.tol_pg;
    if (!res.converged && res.diagnostic.empty())
      res.diagnostic = it >= opts.max_iter ? "max_iter exceeded" : "line search stalled";
  }
  res.u = std::move(x);
  res.energy = fx;
  res.iterations = it;
  return res;
}

}  // namespace deadcore
