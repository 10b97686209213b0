#pragma once

#include <atomic>
#include <sstream>
#include <thread>

#include "deadcore/eigen.hpp"
#include "deadcore/solve.hpp"

namespace deadcore {

/// Nodes with u > threshold; the default threshold is 1e-6 * ||u||_inf.
inline NodeMask support(const ScalarField& u, std::optional<double> threshold = std::nullopt) {
  const double t = threshold ? *threshold : 1e-6 * u.sup_norm();
  if (threshold && !(t > 0.0)) throw InputError("support: threshold must be positive");
  return mask_where(u, [&](double v) { return v > t; });
}

/// Fraction of region nodes where u <= threshold (default 1e-6 * ||u||_inf).
inline double deadcore_fraction(const ScalarField& u, const NodeMask& region,
                                std::optional<double> threshold = std::nullopt) {
  const auto nodes = region.nodes();
  if (nodes.empty()) throw InputError("deadcore_fraction: empty region");
  const double t = threshold ? *threshold : 1e-6 * u.sup_norm();
  std::size_t dead = 0;
  for (auto k : nodes) dead += u[k] <= t;
  return static_cast<double>(dead) / static_cast<double>(nodes.size());
}

/// Default separation for counting: relative to the largest candidate.
inline double default_tol_dist(const std::vector<const ScalarField*>& fields) {
  double top = 0.0;
  for (auto* f : fields) top = std::max(top, f->sup_norm());
  return 1e-4 * top;
}

/// Number of classes under the transitive closure of "sup-distance <= tol".
inline std::size_t count_distinct(const std::vector<const ScalarField*>& fields, std::optional<double> tol = std::nullopt) {
  const double t = tol ? *tol : default_tol_dist(fields);
  std::vector<std::size_t> parent(fields.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < fields.size(); ++i)
    for (std::size_t j = i + 1; j < fields.size(); ++j)
      if (sup_distance(*fields[i], *fields[j]) <= t) parent[find(i)] = find(j);
  std::size_t n = 0;
  for (std::size_t i = 0; i < parent.size(); ++i) n += find(i) == i;
  return n;
}

/// Distinct classes among the valid candidates only.
inline std::size_t count_distinct_valid(const std::vector<Candidate>& cands, std::optional<double> tol = std::nullopt) {
  std::vector<const ScalarField*> ok;
  for (const auto& c : cands)
    if (c.result.valid) ok.push_back(&c.result.u);
  return count_distinct(ok, tol);
}

// ---------------------------------------------------------------------------
// Barrier

struct BarrierSpec {
  std::array<double, 2> center{0.5, 0.5};
  double r_in = 0.1;
  double R = 0.3;
  double K = 1.0;
  double beta = 4.0;

  static double beta_for(double p, double q) { return p / (p - q); }
  void validate() const {
    if (!(r_in > 0.0 && r_in < R)) throw InputError("barrier: need 0 < r_in < R");
    if (!(K > 0.0)) throw InputError("barrier: need K > 0");
    if (!(beta > 1.0)) throw InputError("barrier: need beta > 1");
  }
};

/// W = K (|x - x0|^2 - r_in^2)^beta outside the inner ball, 0 inside; the same
/// formula continues past R so the stencil sees a smooth field at the outer edge.
inline ScalarField barrier_field(const GridPtr& grid, const BarrierSpec& spec) {
  spec.validate();
  const auto ext = grid->extent();
  for (int a = 0; a < grid->dim(); ++a)
    if (spec.center[a] - spec.R < 0.0 || spec.center[a] + spec.R > ext[a])
      throw InputError("barrier: shell exits the domain");
  return sample(grid, [&](std::array<double, 2> x) {
    const double dx = x[0] - spec.center[0];
    const double dy = grid->dim() == 2 ? x[1] - spec.center[1] : 0.0;
    const double s = dx * dx + dy * dy - spec.r_in * spec.r_in;
    return s > 0.0 ? spec.K * std::pow(s, spec.beta) : 0.0;
  });
}

struct BarrierCheck {
  bool holds = false;
  ScalarField margin;    // -Delta_p W + A W^{q-1} on checked nodes, 0 elsewhere
  NodeMask checked;      // r_in + h <= |x - x0| < R
  double min_margin = 0.0;
  double tol = 0.0;
};

/// Nodes of the shell interior, one cell away from the inner sphere.
inline NodeMask barrier_nodes(const GridPtr& grid, const BarrierSpec& spec) {
  NodeMask m(grid);
  for (std::size_t k = 0; k < grid->size(); ++k) {
    if (grid->on_boundary(k)) continue;
    const auto x = grid->coord(k);
    const double dx = x[0] - spec.center[0];
    const double dy = grid->dim() == 2 ? x[1] - spec.center[1] : 0.0;
    const double rho = std::sqrt(dx * dx + dy * dy);
    if (rho >= spec.r_in + grid->h() * (1.0 - 1e-9) && rho < spec.R) m.set(k);
  }
  return m;
}

/// Discrete -Delta_p W on the shell nodes.
inline ScalarField barrier_operator(const GridPtr& grid, const BarrierSpec& spec, double p) {
  return Functional(p, {}).dirichlet_gradient(barrier_field(grid, spec));
}

inline BarrierCheck barrier_check(const GridPtr& grid, const BarrierSpec& spec, double A, double p, double q) {
  if (!(q > 1.0 && q < p)) throw InputError("barrier: need 1 < q < p");
  const ScalarField W = barrier_field(grid, spec);
  const ScalarField lap = Functional(p, {}).dirichlet_gradient(W);
  BarrierCheck c;
  c.checked = barrier_nodes(grid, spec);
  if (c.checked.empty()) throw InputError("barrier: no grid node inside the shell");
  c.margin = ScalarField(grid);
  double scale = 0.0;
  for (auto k : c.checked.nodes()) scale = std::max(scale, std::abs(lap[k]));
  c.tol = 1e-10 * (1.0 + scale);
  c.min_margin = std::numeric_limits<double>::infinity();
  for (auto k : c.checked.nodes()) {
    c.margin[k] = lap[k] + A * std::pow(W[k], q - 1.0);
    c.min_margin = std::min(c.min_margin, c.margin[k]);
  }
  c.holds = c.min_margin >= -c.tol;
  return c;
}

inline BarrierCheck barrier_check(const BarrierSpec& spec, double A, const ProblemModel& model) {
  if (model.variant != Variant::pure_q) throw InputError("barrier: pure-q variant only");
  return barrier_check(model.grid(), spec, A, model.p, model.q);
}

struct BarrierThreshold {
  double A0 = 0.0;         // bisection result
  double ratio_max = 0.0;  // max over shell nodes of Delta_p W / W^{q-1}
  bool found = false;
  int iterations = 0;
};

/// Smallest A for which the check holds: bracket by doubling, then bisect.
inline BarrierThreshold barrier_threshold(const GridPtr& grid, const BarrierSpec& spec, double p, double q,
                                          double rel_tol = 1e-10) {
  BarrierThreshold t;
  const ScalarField W = barrier_field(grid, spec);
  const ScalarField lap = Functional(p, {}).dirichlet_gradient(W);
  for (auto k : barrier_nodes(grid, spec).nodes())
    if (W[k] > 0.0) t.ratio_max = std::max(t.ratio_max, -lap[k] / std::pow(W[k], q - 1.0));
  if (barrier_check(grid, spec, 0.0, p, q).holds) {
    t.found = true;
    return t;
  }
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200 && !barrier_check(grid, spec, hi, p, q).holds; ++i) lo = hi, hi *= 2.0;
  if (!barrier_check(grid, spec, hi, p, q).holds) return t;
  while (hi - lo > rel_tol * hi && t.iterations < 200) {
    const double mid = 0.5 * (lo + hi);
    (barrier_check(grid, spec, mid, p, q).holds ? hi : lo) = mid;
    ++t.iterations;
  }
  t.A0 = hi;
  t.found = true;
  return t;
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepOptions {
  SolveOptions solve;
  EigenOptions eigen;
  bool warm_start = true;
  int parallel = 1;               // > 1 runs rows concurrently with cold starts
  double fd_rel_step = 1e-3;      // m'(mu) by central differences at mu (1 +- step)
  std::optional<NodeMask> belt;   // dead-core region; default from the components
  std::optional<double> eps0;     // bump neighbourhood radius; default half the closure gap
  std::optional<double> tol_dist; // candidate separation; default relative
};

struct SweepRow {
  double mu = 0.0;
  double m = 0.0;
  double m_prime_fd = 0.0;
  double m_prime_formula = 0.0;
  double lambda1 = 0.0;
  std::size_t n_distinct = 0;
  std::vector<double> hausdorff;  // per bump; NaN when the bump support is empty
  double deadcore_fraction = 0.0;
  std::vector<std::string> issues;
  SolveResult ground;
  std::vector<Candidate> candidates;
  EigenResult eigen;

  bool ok() const { return issues.empty(); }
  std::string status() const {
    if (issues.empty()) return "ok";
    std::string s;
    for (const auto& i : issues) s += (s.empty() ? "" : ";") + i;
    return s;
  }
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::size_t n_components = 0;
  double eps0 = 0.0;
  NodeMask belt;

  std::string to_csv() const {
    std::ostringstream os;
    os << "mu,m,m_prime_fd,m_prime_formula,lambda1,n_distinct";
    for (std::size_t i = 1; i <= n_components; ++i) os << ",hausdorff_" << i;
    os << ",deadcore_fraction,status\n";
    for (const auto& r : rows) {
      os << format_double(r.mu) << ',' << format_double(r.m) << ',' << format_double(r.m_prime_fd) << ','
         << format_double(r.m_prime_formula) << ',' << format_double(r.lambda1) << ',' << r.n_distinct;
      for (double d : r.hausdorff) os << ',' << format_double(d);
      os << ',' << format_double(r.deadcore_fraction) << ',' << r.status() << '\n';
    }
    return os.str();
  }
};

/// Negative-weight nodes at distance >= eps0/2 from every component closure.
inline NodeMask default_belt(const ScalarField& a, const ComponentSet& comps, double eps0) {
  NodeMask closed(a.grid);
  for (const auto& w : comps.omega) closed |= closure(w);
  const NodeMask near = dilate(closed, 0.5 * eps0).mask;
  NodeMask belt = mask_where(a, [](double v) { return v < 0.0; }) - near - boundary_mask(a.grid);
  return belt;
}

/// (1/q) sum a^- U^q h^d.
inline double m_prime_formula(const ScalarField& u, const ProblemModel& model) {
  return quadrature(u, [&](std::size_t k, double v) { return model.a_minus[k] * std::pow(std::abs(v), model.q); }) /
         model.q;
}

namespace detail {

inline SweepRow sweep_row(const ProblemModel& base, double mu, const ComponentSet& comps, const SweepReport& rep,
                          const SweepOptions& o, const SweepRow* prev) {
  SweepRow row;
  row.mu = mu;
  const ProblemModel model = base.with_mu(mu);
  const InitSpec init = prev ? InitSpec(prev->ground.u) : InitSpec(RandomInit{});
  GroundState gs = ground_state(model, comps, o.solve, init);
  row.ground = gs.result;
  row.m = row.ground.energy;
  if (!row.ground.converged) row.issues.push_back("ground state unconverged");
  if (!row.ground.valid) row.issues.push_back("ground state invalid");
  if (!gs.positive_on_components) row.issues.push_back("ground state not positive on components");

  const double d = o.fd_rel_step * mu;
  const SolveResult up = minimize_constrained(model.with_mu(mu + d), NodeMask(model.grid()), o.solve, row.ground.u);
  const SolveResult dn = mu - d >= 0.0
                             ? minimize_constrained(model.with_mu(mu - d), NodeMask(model.grid()), o.solve, row.ground.u)
                             : row.ground;
  const double span = mu - d >= 0.0 ? 2.0 * d : d;
  row.m_prime_fd = (up.energy - dn.energy) / span;
  if (!up.converged || !dn.converged) row.issues.push_back("derivative solve unconverged");
  row.m_prime_formula = m_prime_formula(row.ground.u, model);

  const std::optional<ScalarField> phi0 = prev ? std::optional<ScalarField>(prev->eigen.phi) : std::nullopt;
  row.eigen = rayleigh_min(model, NodeMask(model.grid()), Normalization::p_norm, o.eigen, phi0);
  row.lambda1 = row.eigen.lambda;
  if (!row.eigen.converged) row.issues.push_back("eigen unconverged");

  row.candidates = enumerate_candidates(model, comps, o.solve);
  for (const auto& c : row.candidates)
    if (!c.result.converged) {
      row.issues.push_back("candidate unconverged");
      break;
    }
  row.n_distinct = count_distinct_valid(row.candidates, o.tol_dist);

  const BumpDecomposition bd = bump_decompose(row.ground.u, comps, rep.eps0);
  const double thr = 1e-6 * row.ground.u.sup_norm();
  for (std::size_t i = 0; i < comps.n(); ++i) {
    const NodeMask s = mask_where(bd.bumps[i], [&](double v) { return v > thr; });
    row.hausdorff.push_back(s.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : hausdorff(s, closure(comps.omega[i])));
  }
  row.deadcore_fraction = rep.belt.empty() ? std::numeric_limits<double>::quiet_NaN()
                                           : deadcore_fraction(row.ground.u, rep.belt);
  return row;
}

}  // namespace detail

/// One row per mu: ground state, m and both m' estimates, lambda_1, the
/// candidate count, per-bump Hausdorff distances and the dead-core fraction.
/// Serial runs chain warm starts; parallel runs start every row cold, so a
/// parallel report matches a serial cold-start report exactly.
inline SweepReport sweep(const ProblemModel& base, const std::vector<double>& ladder, const ComponentSet& comps,
                         const SweepOptions& o = {}) {
  if (ladder.empty()) throw InputError("sweep: empty mu ladder");
  for (std::size_t i = 1; i < ladder.size(); ++i)
    if (!(ladder[i] > ladder[i - 1])) throw InputError("sweep: mu ladder must be strictly increasing");
  if (!comps.a1_holds()) throw InputError("sweep: no positivity component");
  SweepReport rep;
  rep.n_components = comps.n();
  rep.eps0 = o.eps0 ? *o.eps0 : default_eps0(comps);
  rep.belt = o.belt ? *o.belt : default_belt(effective_weight(base.a_plus, base.a_minus, 1.0), comps, rep.eps0);
  rep.rows.resize(ladder.size());
  if (o.parallel > 1) {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(ladder.size());
    const int workers = std::min<int>(o.parallel, static_cast<int>(ladder.size()));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < ladder.size();) {
          try {
            rep.rows[i] = detail::sweep_row(base, ladder[i], comps, rep, o, nullptr);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (std::size_t i = 0; i < ladder.size(); ++i)
      rep.rows[i] = detail::sweep_row(base, ladder[i], comps, rep, o,
                                      o.warm_start && i > 0 ? &rep.rows[i - 1] : nullptr);
  }
  return rep;
}

}  // namespace deadcore
