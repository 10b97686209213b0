#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "deadcore/grid.hpp"
#include "deadcore/weight.hpp"

namespace deadcore {

enum class Variant { pure_q, q_plus_r, p_linear };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::pure_q: return "pure-q";
    case Variant::q_plus_r: return "q-plus-r";
    case Variant::p_linear: return "p-linear";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "pure-q") return Variant::pure_q;
  if (s == "q-plus-r") return Variant::q_plus_r;
  if (s == "p-linear") return Variant::p_linear;
  throw InputError("unknown variant '" + s + "'");
}

/// One discrete energy: (1/p) sum_cells |grad u|^p h^d - sum_terms (1/s) sum a_mu |u|^s h^d.
struct ProblemModel {
  double p = 2.0;
  double q = 1.5;
  std::optional<double> r;
  double mu = 1.0;
  Variant variant = Variant::pure_q;
  ScalarField a_plus;
  ScalarField a_minus;

  static ProblemModel make(const WeightSplit& w, double p, double q, double mu,
                           Variant variant = Variant::pure_q, std::optional<double> r = std::nullopt) {
    ProblemModel m;
    m.p = p;
    m.q = q;
    m.mu = mu;
    m.variant = variant;
    m.r = variant == Variant::p_linear ? std::optional<double>(p) : r;
    m.a_plus = w.a_plus;
    m.a_minus = w.a_minus;
    m.validate();
    return m;
  }

  const GridPtr& grid() const { return a_plus.grid; }

  /// Critical Sobolev exponent N p / (N - p), infinite when p >= N.
  double p_star() const {
    const double N = grid()->dim();
    return p < N ? N * p / (N - p) : std::numeric_limits<double>::infinity();
  }

  /// Exponent of the second nonlinearity, if any.
  std::optional<double> second_exponent() const {
    if (variant == Variant::pure_q) return std::nullopt;
    if (variant == Variant::p_linear) return p;
    return r;
  }

  ScalarField a_mu() const { return effective_weight(a_plus, a_minus, mu); }

  ProblemModel with_mu(double new_mu) const {
    ProblemModel m = *this;
    m.mu = new_mu;
    return m;
  }

  void validate(bool nehari_path = false) const {
    if (!(p > 1.0)) throw InputError("model: need p > 1");
    if (!(q > 1.0 && q < p)) throw InputError("model: need 1 < q < p");
    if (!(mu >= 0.0)) throw InputError("model: need mu >= 0");
    if (!a_plus.grid || !a_minus.grid) throw InputError("model: missing weight");
    require_same_grid(a_plus.grid, a_minus.grid, "model weight");
    if (variant == Variant::q_plus_r) {
      if (!r || !(*r >= p)) throw InputError("model: q-plus-r needs r >= p");
      if (nehari_path && !(*r < p_star())) throw InputError("model: Nehari path needs r < p*");
    }
  }
};

struct EnergyBreakdown {
  double dirichlet = 0.0;
  double term_q = 0.0;
  std::optional<double> term_r;
  double total = 0.0;
};

/// Node pairs coupled by the cell stencil, in the order Functional::curvature
/// emits their values. 1D: (c, c+1). 2D per cell k: (k, k+1), (k, k+nx), (k+1, k+nx).
inline std::vector<std::array<std::size_t, 2>> edge_pattern(const Grid& g) {
  std::vector<std::array<std::size_t, 2>> e;
  if (g.dim() == 1) {
    for (int c = 0; c + 1 < g.nx(); ++c) e.push_back({std::size_t(c), std::size_t(c + 1)});
  } else {
    const std::size_t nx = g.nx();
    for (int j = 0; j + 1 < g.ny(); ++j)
      for (int i = 0; i + 1 < g.nx(); ++i) {
        const std::size_t k = g.index(i, j);
        e.push_back({k, k + 1});
        e.push_back({k, k + nx});
        e.push_back({k + 1, k + nx});
      }
  }
  return e;
}

struct Curvature {
  ScalarField diag;
  std::vector<double> offdiag;
  double floor = 0.0;
};

/// -(1/s) sum weight |u|^s h^d.
struct PowerTerm {
  double exponent;
  ScalarField weight;
};

/// Generic discrete functional shared by the solver, eigen and extension modules.
class Functional {
 public:
  Functional(double p, std::vector<PowerTerm> terms) : p_(p), terms_(std::move(terms)) {}

  static Functional from_model(const ProblemModel& m) {
    ScalarField w = m.a_mu();
    std::vector<PowerTerm> terms{{m.q, w}};
    if (auto s = m.second_exponent()) terms.push_back({*s, w});
    return Functional(m.p, std::move(terms));
  }

  double p() const { return p_; }
  const std::vector<PowerTerm>& terms() const { return terms_; }

  /// (1/p) sum_cells |grad u|^p h^d with forward differences per cell.
  double dirichlet(const ScalarField& u) const {
    const Grid& g = *u.grid;
    const double h = g.h();
    double s = 0.0;
    if (g.dim() == 1) {
      for (int c = 0; c + 1 < g.nx(); ++c) s += std::pow(std::abs(u[c + 1] - u[c]) / h, p_);
    } else {
      for (int j = 0; j + 1 < g.ny(); ++j)
        for (int i = 0; i + 1 < g.nx(); ++i) {
          const std::size_t k = g.index(i, j);
          const double gx = (u[k + 1] - u[k]) / h;
          const double gy = (u[k + g.nx()] - u[k]) / h;
          s += std::pow(gx * gx + gy * gy, 0.5 * p_);
        }
    }
    return s * g.cell_volume() / p_;
  }

  double term(std::size_t t, const ScalarField& u) const {
    const PowerTerm& pt = terms_[t];
    return quadrature(u, [&](std::size_t k, double v) { return pt.weight[k] * std::pow(std::abs(v), pt.exponent); }) /
           pt.exponent;
  }

  EnergyBreakdown breakdown(const ScalarField& u) const {
    EnergyBreakdown e;
    e.dirichlet = dirichlet(u);
    e.total = e.dirichlet;
    if (!terms_.empty()) {
      e.term_q = term(0, u);
      e.total -= e.term_q;
    }
    if (terms_.size() > 1) {
      e.term_r = term(1, u);
      e.total -= *e.term_r;
    }
    return e;
  }

  double value(const ScalarField& u) const { return breakdown(u).total; }

  /// value(v) - value(u), summed term by term so that small steps are not
  /// lost to cancellation against the total.
  double difference(const ScalarField& u, const ScalarField& v) const {
    const Grid& g = *u.grid;
    const double h = g.h();
    double s = 0.0;
    if (g.dim() == 1) {
      for (int c = 0; c + 1 < g.nx(); ++c)
        s += std::pow(std::abs(v[c + 1] - v[c]) / h, p_) - std::pow(std::abs(u[c + 1] - u[c]) / h, p_);
    } else {
      for (int j = 0; j + 1 < g.ny(); ++j)
        for (int i = 0; i + 1 < g.nx(); ++i) {
          const std::size_t k = g.index(i, j);
          const double ux = (u[k + 1] - u[k]) / h, uy = (u[k + g.nx()] - u[k]) / h;
          const double vx = (v[k + 1] - v[k]) / h, vy = (v[k + g.nx()] - v[k]) / h;
          s += std::pow(vx * vx + vy * vy, 0.5 * p_) - std::pow(ux * ux + uy * uy, 0.5 * p_);
        }
    }
    double d = s * g.cell_volume() / p_;
    for (const PowerTerm& pt : terms_) {
      double t = 0.0;
      for (std::size_t k = 0; k < u.size(); ++k)
        if (u[k] != v[k])
          t += pt.weight[k] * (std::pow(std::abs(v[k]), pt.exponent) - std::pow(std::abs(u[k]), pt.exponent));
      d -= t * g.cell_volume() / pt.exponent;
    }
    return d;
  }

  /// Nodal density of the Dirichlet first variation (discrete -Delta_p u), regularized by eps.
  ScalarField dirichlet_gradient(const ScalarField& u, double eps = 0.0) const {
    const Grid& g = *u.grid;
    const double h = g.h();
    ScalarField out(u.grid);
    if (g.dim() == 1) {
      for (int c = 0; c + 1 < g.nx(); ++c) {
        const double f = flux((u[c + 1] - u[c]) / h, 0.0, eps)[0];
        out[c] -= f / h;
        out[c + 1] += f / h;
      }
    } else {
      for (int j = 0; j + 1 < g.ny(); ++j)
        for (int i = 0; i + 1 < g.nx(); ++i) {
          const std::size_t k = g.index(i, j);
          const auto f = flux((u[k + 1] - u[k]) / h, (u[k + g.nx()] - u[k]) / h, eps);
          out[k] -= (f[0] + f[1]) / h;
          out[k + 1] += f[0] / h;
          out[k + g.nx()] += f[1] / h;
        }
    }
    return out;
  }

  /// Nodal density of the full first variation; zero on boundary nodes.
  ScalarField gradient(const ScalarField& u, double eps = 0.0) const {
    ScalarField out = dirichlet_gradient(u, eps);
    for (const PowerTerm& pt : terms_)
      for (std::size_t k = 0; k < u.size(); ++k) out[k] -= pt.weight[k] * signed_power(u[k], pt.exponent - 1.0);
    for (std::size_t k = 0; k < u.size(); ++k)
      if (u.grid->on_boundary(k)) out[k] = 0.0;
    return out;
  }

  /// Sparse positive (semi)definite curvature of the convex part of the
  /// functional, in nodal-density units. Concave potential contributions are
  /// dropped; singular ones are evaluated at the larger of |u| and the
  /// magnitude where they balance the current gradient. Off-diagonal values
  /// follow edge_pattern(grid) entry by entry.
  Curvature curvature(const ScalarField& u, const ScalarField& grad, double eps) const {
    const Grid& g = *u.grid;
    const double h = g.h();
    const double h2 = h * h;
    Curvature cv{ScalarField(u.grid), {}};
    ScalarField& d = cv.diag;
    if (g.dim() == 1) {
      cv.offdiag.reserve(g.nx() - 1);
      for (int c = 0; c + 1 < g.nx(); ++c) {
        const double gc = (u[c + 1] - u[c]) / h;
        const double s2 = gc * gc + eps * eps;
        double hc = s2 > 0.0 ? std::pow(s2, 0.5 * p_ - 2.0) * ((p_ - 1.0) * gc * gc + eps * eps) : 0.0;
        if (!std::isfinite(hc)) hc = 0.0;
        d[c] += hc / h2;
        d[c + 1] += hc / h2;
        cv.offdiag.push_back(-hc / h2);
      }
    } else {
      cv.offdiag.reserve(3 * static_cast<std::size_t>(g.nx() - 1) * (g.ny() - 1));
      for (int j = 0; j + 1 < g.ny(); ++j)
        for (int i = 0; i + 1 < g.nx(); ++i) {
          const std::size_t k = g.index(i, j);
          const double gx = (u[k + 1] - u[k]) / h;
          const double gy = (u[k + g.nx()] - u[k]) / h;
          const double s2 = gx * gx + gy * gy + eps * eps;
          double hxx = 0.0, hyy = 0.0, hxy = 0.0;
          if (s2 > 0.0) {
            const double phi = std::pow(s2, 0.5 * p_ - 1.0);
            const double psi = (p_ - 2.0) * std::pow(s2, 0.5 * p_ - 2.0);
            hxx = phi + psi * gx * gx;
            hyy = phi + psi * gy * gy;
            hxy = psi * gx * gy;
            if (!std::isfinite(hxx) || !std::isfinite(hyy) || !std::isfinite(hxy)) hxx = hyy = hxy = 0.0;
          }
          d[k] += (hxx + 2.0 * hxy + hyy) / h2;
          d[k + 1] += hxx / h2;
          d[k + g.nx()] += hyy / h2;
          cv.offdiag.push_back(-(hxx + hxy) / h2);
          cv.offdiag.push_back(-(hxy + hyy) / h2);
          cv.offdiag.push_back(hxy / h2);
        }
    }
    // The floor follows the Dirichlet scale; singular potential entries must not lift it.
    double top = 0.0;
    for (double v : d.values)
      if (std::isfinite(v)) top = std::max(top, v);
    for (const PowerTerm& pt : terms_) {
      const double s = pt.exponent;
      if (s <= 1.0) continue;
      for (std::size_t k = 0; k < u.size(); ++k) {
        const double w = pt.weight[k];
        if (w >= 0.0) continue;
        double mag = std::abs(u[k]);
        if (s < 2.0) mag = std::max(mag, std::pow(std::abs(grad[k]) / -w, 1.0 / (s - 1.0)));
        if (mag > 0.0) d[k] += (s - 1.0) * -w * std::pow(mag, s - 2.0);
      }
    }
    cv.floor = top > 0.0 ? 1e-10 * top : 1e-10 / h2;
    for (double& v : d.values) v = std::isfinite(v) ? std::max(v, cv.floor) : std::numeric_limits<double>::max();
    return cv;
  }

  /// |v|^e sign(v); the e = 0 case (linear potential) uses the right derivative at 0.
  static double signed_power(double v, double e) {
    if (e == 0.0) return v < 0.0 ? -1.0 : 1.0;
    if (v == 0.0) return 0.0;
    return v > 0.0 ? std::pow(v, e) : -std::pow(-v, e);
  }

 private:
  std::array<double, 2> flux(double gx, double gy, double eps) const {
    const double s2 = gx * gx + gy * gy + eps * eps;
    if (s2 == 0.0) return {0.0, 0.0};
    const double phi = p_ == 2.0 ? 1.0 : std::pow(s2, 0.5 * p_ - 1.0);
    return {phi * gx, phi * gy};
  }

  double p_;
  std::vector<PowerTerm> terms_;
};

inline void require_admissible(const ScalarField& u) {
  if (!u.vanishes_on_boundary()) throw InputError("field must vanish on boundary nodes");
}

inline EnergyBreakdown energy(const ScalarField& u, const ProblemModel& model) {
  require_admissible(u);
  require_same_grid(u.grid, model.grid(), "energy");
  return Functional::from_model(model).breakdown(u);
}

inline ScalarField gradient(const ScalarField& u, const ProblemModel& model, double eps_reg = 0.0) {
  require_same_grid(u.grid, model.grid(), "gradient");
  return Functional::from_model(model).gradient(u, eps_reg);
}

struct Residual {
  ScalarField field;
  double sup_norm = 0.0;
};

/// Unregularized first variation at every free (non-boundary) node; no mask is applied.
inline Residual residual(const ScalarField& u, const ProblemModel& model) {
  Residual r{gradient(u, model, 0.0), 0.0};
  r.sup_norm = r.field.sup_norm();
  return r;
}

inline double default_tol_res(const ProblemModel& model) { return 1e-6 * (1.0 + model.a_plus.sup_norm()); }

/// |I(u) + ((p-q)/(pq)) * p * dirichlet(u)| / |I(u)|; zero for u = 0.
inline double solution_energy_gap(const ScalarField& u, const ProblemModel& model) {
  if (model.variant != Variant::pure_q) throw InputError("solution_energy_gap: pure-q variant only");
  const EnergyBreakdown e = energy(u, model);
  if (e.total == 0.0 && e.dirichlet == 0.0) return 0.0;
  const double grad_pp = model.p * e.dirichlet;
  const double predicted = -(model.p - model.q) / (model.p * model.q) * grad_pp;
  return std::abs(e.total - predicted) / std::max(std::abs(e.total), std::numeric_limits<double>::min());
}

/// ||grad u||_p^p in the discrete sense.
inline double gradient_pnorm_p(const ScalarField& u, double p) { return p * Functional(p, {}).dirichlet(u); }

}  // namespace deadcore
