#pragma once

#include <random>
#include <variant>
#include <vector>

#include "deadcore/components.hpp"
#include "deadcore/energy.hpp"
#include "deadcore/minimize.hpp"

namespace deadcore {

struct SolveResult {
  ScalarField u;
  double energy = 0.0;
  double pg_norm = 0.0;
  double res_sup = 0.0;
  bool valid = false;
  bool converged = false;
  long iterations = 0;
  NodeMask zero_mask;
  std::string diagnostic;
};

struct RandomInit {};
using InitSpec = std::variant<RandomInit, ScalarField>;

/// a^+ scaled to unit sup-norm plus uniform seed noise of amplitude 0.01 on free nodes.
inline ScalarField default_init(const ProblemModel& model, const NodeMask& zero_mask, std::uint64_t seed) {
  ScalarField u = model.a_plus;
  const double top = u.sup_norm();
  if (top > 0.0) u *= 1.0 / top;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(0.0, 0.01);
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double e = noise(rng);
    if (!zero_mask[k] && !u.grid->on_boundary(k)) u[k] += e;
  }
  return u;
}

inline SolveResult finish(const MinimizeResult& mr, const ProblemModel& model, const NodeMask& zero_mask) {
  SolveResult out;
  out.u = mr.u;
  out.energy = mr.energy;
  out.pg_norm = mr.pg_norm;
  out.converged = mr.converged;
  out.iterations = mr.iterations;
  out.zero_mask = zero_mask;
  out.diagnostic = mr.diagnostic;
  out.res_sup = residual(out.u, model).sup_norm;
  out.valid = out.converged && out.res_sup <= default_tol_res(model);
  return out;
}

/// Nonnegative minimizer of the model energy over {u >= 0, u = 0 on zero_mask and boundary}.
inline SolveResult minimize_constrained(const ProblemModel& model, const NodeMask& zero_mask, const SolveOptions& opts,
                                        const InitSpec& init = RandomInit{}) {
  model.validate();
  require_same_grid(zero_mask.grid, model.grid(), "minimize_constrained");
  ScalarField start = std::holds_alternative<ScalarField>(init) ? std::get<ScalarField>(init)
                                                               : default_init(model, zero_mask, opts.seed);
  require_same_grid(start.grid, model.grid(), "minimize_constrained init");
  const BoxSet box = BoxSet::nonnegative(model.grid(), zero_mask);
  // Start on the energy-minimizing point of the ray so descent cannot fall into u = 0.
  box.project(start);
  start *= best_ray_scale(Functional::from_model(model), start);
  return finish(minimize_box(Functional::from_model(model), box, std::move(start), opts), model, zero_mask);
}

struct GroundState {
  SolveResult result;
  bool positive_on_components = true;
};

/// Global minimizer U_mu; positivity on every component is checked afterwards.
inline GroundState ground_state(const ProblemModel& model, const ComponentSet& comps, const SolveOptions& opts,
                                const InitSpec& init = RandomInit{}) {
  if (model.variant != Variant::pure_q) throw InputError("ground_state: pure-q variant only");
  GroundState gs{minimize_constrained(model, NodeMask(model.grid()), opts, init), true};
  for (const auto& w : comps.omega)
    for (auto k : w.nodes())
      if (!(gs.result.u[k] > 0.0)) gs.positive_on_components = false;
  if (!gs.positive_on_components) gs.result.diagnostic += (gs.result.diagnostic.empty() ? "" : "; ") +
                                                          std::string("ground state vanishes somewhere on a component");
  return gs;
}

struct Candidate {
  std::vector<std::size_t> subset;  // zero-based component ids
  SolveResult result;
  std::vector<bool> positive_on;  // realised pattern per component
  bool pattern_matches = true;
};

inline std::vector<std::vector<std::size_t>> nonempty_subsets(std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t bits = 1; bits < (std::size_t{1} << n); ++bits) {
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < n; ++i)
      if (bits & (std::size_t{1} << i)) s.push_back(i);
    out.push_back(std::move(s));
  }
  return out;
}

inline Candidate solve_candidate(const ProblemModel& model, const ComponentSet& comps,
                                 const std::vector<std::size_t>& subset, const SolveOptions& opts,
                                 const InitSpec& init = RandomInit{}) {
  std::vector<std::size_t> off;
  for (std::size_t i = 0; i < comps.n(); ++i)
    if (std::find(subset.begin(), subset.end(), i) == subset.end()) off.push_back(i);
  // Mask the closure: the rim of a discrete component can still carry a > 0.
  NodeMask zero(model.grid());
  for (auto i : off) zero |= closure(comps.omega[i]);
  Candidate c{subset, minimize_constrained(model, zero, opts, init), {}, true};
  const double thr = 1e-6 * std::max(c.result.u.sup_norm(), std::numeric_limits<double>::min());
  for (std::size_t i = 0; i < comps.n(); ++i) {
    bool pos = true;
    for (auto k : comps.omega[i].nodes()) pos = pos && c.result.u[k] > thr;
    c.positive_on.push_back(pos);
    const bool wanted = std::find(subset.begin(), subset.end(), i) != subset.end();
    if (wanted != pos) c.pattern_matches = false;
  }
  if (!c.pattern_matches)
    c.result.diagnostic += (c.result.diagnostic.empty() ? "" : "; ") + std::string("positivity pattern mismatch");
  return c;
}

/// One constrained minimization per nonempty subset J of the components; the
/// components outside J are held at zero together with their one-ring.
inline std::vector<Candidate> enumerate_candidates(const ProblemModel& model, const ComponentSet& comps,
                                                   const SolveOptions& opts, const InitSpec& init = RandomInit{}) {
  if (!comps.a1_holds()) throw InputError("enumerate_candidates: no positivity component");
  std::vector<Candidate> out;
  for (const auto& s : nonempty_subsets(comps.n())) out.push_back(solve_candidate(model, comps, s, opts, init));
  return out;
}

struct BumpDecomposition {
  std::vector<ScalarField> bumps;
  std::vector<NodeMask> neighbourhoods;
  bool feasible = true;
  std::string diagnostic;
};

/// Splits U into U * chi_{Omega_i}, Omega_i = dilate(omega_i, eps0).
inline BumpDecomposition bump_decompose(const ScalarField& u, const ComponentSet& comps, double eps0) {
  BumpDecomposition bd;
  for (const auto& w : comps.omega) bd.neighbourhoods.push_back(dilate(w, eps0).mask);
  for (std::size_t i = 0; i < bd.neighbourhoods.size(); ++i)
    for (std::size_t j = i + 1; j < bd.neighbourhoods.size(); ++j)
      if (!(bd.neighbourhoods[i] & bd.neighbourhoods[j]).empty())
        throw InputError("bump_decompose: dilated neighbourhoods overlap; reduce eps0");
  NodeMask covered(u.grid);
  for (const auto& m : bd.neighbourhoods) {
    ScalarField b(u.grid);
    for (std::size_t k = 0; k < u.size(); ++k)
      if (m[k]) b[k] = u[k];
    bd.bumps.push_back(std::move(b));
    covered |= m;
  }
  for (std::size_t k = 0; k < u.size(); ++k)
    if (u[k] != 0.0 && !covered[k]) {
      bd.feasible = false;
      bd.diagnostic = "support leaves the union of neighbourhoods";
      break;
    }
  return bd;
}

/// Signed sum of bumps with pairwise disjoint supports.
inline ScalarField combine(const std::vector<ScalarField>& bumps, const std::vector<int>& signs) {
  if (bumps.empty() || bumps.size() != signs.size()) throw InputError("combine: need one sign per bump");
  ScalarField out(bumps.front().grid);
  for (std::size_t b = 0; b < bumps.size(); ++b) {
    if (signs[b] != 1 && signs[b] != -1 && signs[b] != 0) throw InputError("combine: signs must be +1, -1 or 0");
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (bumps[b][k] == 0.0 || signs[b] == 0) continue;
      if (out[k] != 0.0) throw InputError("combine: overlapping supports");
      out[k] = signs[b] * bumps[b][k];
    }
  }
  return out;
}

struct LimitProfile {
  SolveResult result;            // minimizer of I_0 over K({a < 0})
  SolveResult outside_closures;  // minimizer of I_0 over K(Omega \ union closure(omega_i))
  double agreement = 0.0;        // sup distance between the two
};

/// U_infinity: minimizer of the mu = 0 energy vanishing wherever a < 0.
inline LimitProfile limit_profile(const ProblemModel& model, const ComponentSet& comps, const SolveOptions& opts) {
  const ProblemModel m0 = model.with_mu(0.0);
  const NodeMask negative = mask_where(model.a_minus, [](double v) { return v > 0.0; });
  LimitProfile lp;
  lp.result = minimize_constrained(m0, negative, opts);
  NodeMask inside(model.grid());
  for (const auto& w : comps.omega) inside |= closure(w);
  lp.outside_closures = minimize_constrained(m0, ~inside, opts, lp.result.u);
  lp.agreement = sup_distance(lp.result.u, lp.outside_closures.u);
  return lp;
}

}  // namespace deadcore
