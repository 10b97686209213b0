// deadcore: command-line front end.
//
//   deadcore <verb> --config PATH [--out DIR] [--parallel N] [--seed S]
//
// Exit codes: 0 success, 2 config or data error, 3 nonconvergence or invalid
// candidate, 4 certificate refusal.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "deadcore/deadcore.hpp"

namespace fs = std::filesystem;
using namespace deadcore;

namespace {

constexpr int kOk = 0;
constexpr int kDataError = 2;
constexpr int kUnsolved = 3;
constexpr int kRefused = 4;

struct Common {
  std::string config;
  std::optional<std::string> out;
  std::optional<int> parallel;
  std::optional<std::uint64_t> seed;
};

RunConfig load(const Common& c) {
  RunConfig cfg = load_config(c.config);
  if (c.out) cfg.out = *c.out;
  if (c.parallel) cfg.parallel = *c.parallel;
  if (c.seed) cfg.seed = *c.seed;
  cfg.solver.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const RunConfig& cfg) {
  fs::path d(cfg.out);
  std::error_code ec;
  fs::create_directories(d, ec);
  if (ec) throw InputError("cannot create output directory " + d.string());
  return d;
}

std::string subset_tag(const std::vector<std::size_t>& s) {
  std::string t = "J";
  for (std::size_t i = 0; i < s.size(); ++i) t += (i ? "-" : "") + std::to_string(s[i] + 1);
  return t;
}

std::string mu_tag(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return buf;
}

std::string meta_csv(const SolveResult& r, const ProblemModel& m) {
  return "mu,p,q,energy,res_sup,valid\n" + format_double(m.mu) + ',' + format_double(m.p) + ',' + format_double(m.q) +
         ',' + format_double(r.energy) + ',' + format_double(r.res_sup) + ',' + (r.valid ? "1" : "0") + '\n';
}

void write_solution(const fs::path& dir, const std::string& name, const SolveResult& r, const ProblemModel& m) {
  write_text((dir / (name + ".csv")).string(), field_to_csv(r.u));
  write_text((dir / (name + ".meta.csv")).string(), meta_csv(r, m));
}

ComponentSet components_of(const RunConfig& cfg, const GridPtr& g) {
  return detect_components(cfg.weight_on(g).a);
}

int cmd_analyze(const RunConfig& cfg) {
  const GridPtr g = cfg.build();
  const ComponentSet cs = components_of(cfg, g);
  std::cout << "components: " << cs.n() << '\n';
  std::string csv = "component,nodes,surrounded\n";
  for (std::size_t i = 0; i < cs.n(); ++i) {
    std::cout << "  omega_" << i + 1 << ": " << cs.omega[i].count() << " nodes, surrounded="
              << (cs.surrounded[i] ? "true" : "false") << '\n';
    csv += std::to_string(i + 1) + ',' + std::to_string(cs.omega[i].count()) + ',' + (cs.surrounded[i] ? "1" : "0") +
           '\n';
    if (!cs.surrounded[i]) std::cerr << "warning: omega_" << i + 1 << " is not surrounded by {a < 0}\n";
  }
  if (!cs.zero_plateaus.empty()) std::cout << "zero plateaus: " << cs.zero_plateaus.size() << '\n';
  if (cs.n() > 1) std::cout << "min gap: " << format_double(min_component_gap(cs)) << '\n';
  write_text((out_dir(cfg) / "components.csv").string(), csv);
  if (!cs.a1_holds()) {
    std::cerr << "error: the weight has no positivity component\n";
    return kDataError;
  }
  return kOk;
}

int cmd_solve(const RunConfig& cfg) {
  const GridPtr g = cfg.build();
  const ProblemModel model = cfg.model_on(g);
  const fs::path dir = out_dir(cfg);
  if (!cfg.subset) {
    const SolveResult r = minimize_constrained(model, NodeMask(g), cfg.solver);
    write_solution(dir, "ground", r, model);
    std::cout << "ground: energy=" << format_double(r.energy) << " res_sup=" << format_double(r.res_sup)
              << " converged=" << r.converged << " valid=" << r.valid << '\n';
    if (!r.valid) {
      std::cerr << "ground state not converged/valid: " << r.diagnostic << '\n';
      return kUnsolved;
    }
    return kOk;
  }
  if (model.variant != Variant::pure_q) throw InputError("solve: subsets need the pure-q variant");
  const ComponentSet cs = components_of(cfg, g);
  for (auto i : *cfg.subset)
    if (i >= cs.n()) throw InputError("solve: subset names component " + std::to_string(i + 1) + " of " +
                                      std::to_string(cs.n()));
  const Candidate c = solve_candidate(model, cs, *cfg.subset, cfg.solver);
  const std::string tag = subset_tag(*cfg.subset);
  write_solution(dir, tag, c.result, model);
  std::cout << tag << ": energy=" << format_double(c.result.energy) << " res_sup=" << format_double(c.result.res_sup)
            << " valid=" << c.result.valid << " pattern=" << c.pattern_matches << '\n';
  if (!c.result.valid || !c.pattern_matches) {
    std::cerr << "candidate not a solution";
    if (!c.result.diagnostic.empty()) std::cerr << ": " << c.result.diagnostic;
    std::cerr << '\n';
    return kUnsolved;
  }
  return kOk;
}

int cmd_sweep(const RunConfig& cfg) {
  const GridPtr g = cfg.build();
  const ProblemModel model = cfg.model_on(g);
  if (model.variant != Variant::pure_q) throw InputError("sweep: pure-q variant only");
  const ComponentSet cs = components_of(cfg, g);
  SweepOptions o;
  o.solve = cfg.solver;
  o.eigen.seed = cfg.seed;
  o.parallel = cfg.parallel;
  const SweepReport rep = sweep(model, cfg.ladder, cs, o);
  const fs::path dir = out_dir(cfg);
  const fs::path fields = dir / "fields";
  fs::create_directories(fields);
  write_text((dir / "sweep.csv").string(), rep.to_csv());
  write_text((dir / "belt.csv").string(), mask_to_csv(rep.belt));
  bool all_ok = true;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const SweepRow& row = rep.rows[i];
    const ProblemModel m = model.with_mu(row.mu);
    write_solution(fields, "ground_" + mu_tag(i), row.ground, m);
    for (const auto& c : row.candidates)
      write_solution(fields, "candidate_" + mu_tag(i) + "_" + subset_tag(c.subset), c.result, m);
    write_text((fields / ("eigen_" + mu_tag(i) + ".csv")).string(), field_to_csv(row.eigen.phi));
    all_ok = all_ok && row.ok();
  }
  std::cout << rep.to_csv();
  return all_ok ? kOk : kUnsolved;
}

int cmd_eigen(const RunConfig& cfg) {
  const GridPtr g = cfg.build();
  const ProblemModel model = cfg.model_on(g);
  EigenOptions eo;
  eo.seed = cfg.seed;
  const EigenResult inf = lambda_infinity(model, eo);
  std::string csv = "mu,lambda1,converged,iterations\n";
  bool ok = inf.converged;
  std::optional<ScalarField> warm;
  for (double mu : cfg.ladder) {
    const EigenResult e = rayleigh_min(model.with_mu(mu), NodeMask(g), Normalization::p_norm, eo, warm);
    warm = e.phi;
    ok = ok && e.converged;
    csv += format_double(mu) + ',' + format_double(e.lambda) + ',' + (e.converged ? "1" : "0") + ',' +
           std::to_string(e.iterations) + '\n';
  }
  const fs::path dir = out_dir(cfg);
  write_text((dir / "eigen.csv").string(), csv);
  write_text((dir / "lambda_infinity.csv").string(), "lambda_infinity,converged\n" + format_double(inf.lambda) + ',' +
                                                         (inf.converged ? "1" : "0") + '\n');
  std::cout << csv << "lambda_infinity=" << format_double(inf.lambda) << '\n';
  return ok ? kOk : kUnsolved;
}

int cmd_barrier(const RunConfig& cfg) {
  const GridPtr g = cfg.build();
  BarrierSpec spec = cfg.barrier;
  spec.beta = BarrierSpec::beta_for(cfg.p, cfg.q);
  const BarrierThreshold t = barrier_threshold(g, spec, cfg.p, cfg.q);
  const bool at_zero = barrier_check(g, spec, 0.0, cfg.p, cfg.q).holds;
  const bool at_a0 = t.found && barrier_check(g, spec, t.A0, cfg.p, cfg.q).holds;
  const std::string csv = "p,q,beta,r_in,R,K,A0,ratio_max,holds_at_zero,holds_at_A0\n" + format_double(cfg.p) + ',' +
                          format_double(cfg.q) + ',' + format_double(spec.beta) + ',' + format_double(spec.r_in) + ',' +
                          format_double(spec.R) + ',' + format_double(spec.K) + ',' + format_double(t.A0) + ',' +
                          format_double(t.ratio_max) + ',' + (at_zero ? "1" : "0") + ',' + (at_a0 ? "1" : "0") + '\n';
  write_text((out_dir(cfg) / "barrier.csv").string(), csv);
  std::cout << "beta=" << format_double(spec.beta) << '\n';
  if (!t.found) {
    std::cout << "A0 not found\n";
    return kRefused;
  }
  std::cout << "A0=" << format_double(t.A0) << " ratio_max=" << format_double(t.ratio_max) << '\n';
  return kOk;
}

int cmd_extensions(const RunConfig& cfg) {
  const GridPtr g = cfg.build();
  const ProblemModel model = cfg.model_on(g);
  const ComponentSet cs = components_of(cfg, g);
  EigenOptions eo;
  eo.seed = cfg.seed;
  ExtensionResult ext;
  std::string method;
  if (model.variant == Variant::p_linear) {
    method = "r_eq_p";
    ext = solve_r_eq_p(model, cfg.solver, eo);
  } else if (model.variant == Variant::q_plus_r) {
    const bool subsuper = cfg.ext_method == "subsuper" || (cfg.ext_method == "auto" && !(*model.r < model.p_star()));
    if (subsuper) {
      method = "subsuper";
      ext = subsuper_solve(model, cfg.solver, eo).ext;
    } else {
      method = "nehari";
      ext = nehari_ground_state(model, cfg.solver, cfg.ext_seeds, cfg.gate_directions);
    }
  } else {
    throw InputError("extensions: needs the q-plus-r or p-linear variant");
  }
  std::cout << "method=" << method << '\n';
  if (ext.lambda1) std::cout << "lambda1=" << format_double(*ext.lambda1) << '\n';
  if (ext.refused) {
    std::cerr << "refused: " << ext.diagnostic << '\n';
    return kRefused;
  }
  if (ext.aborted) {
    std::cerr << "aborted: " << ext.diagnostic << '\n';
    return kUnsolved;
  }
  const fs::path dir = out_dir(cfg);
  write_solution(dir, "V", ext.result, model);

  // Single bumps of V: each one is checked as a solution in its own right.
  std::string csv = "solution,energy,res_sup,valid\n";
  std::vector<SolveResult> sols{ext.result};
  std::vector<std::string> names{"V"};
  const BumpDecomposition bd = bump_decompose(ext.result.u, cs, default_eps0(cs));
  if (bd.feasible && cs.n() > 1)
    for (std::size_t i = 0; i < cs.n(); ++i) {
      SolveResult b;
      b.u = bd.bumps[i];
      b.energy = Functional::from_model(model).value(b.u);
      b.res_sup = residual(b.u, model).sup_norm;
      b.converged = true;
      b.valid = b.res_sup <= default_tol_res(model);
      sols.push_back(b);
      names.push_back("bump_" + std::to_string(i + 1));
      write_solution(dir, names.back(), b, model);
    }
  bool ok = ext.result.valid && positive_on(ext.result.u, cs);
  std::vector<const ScalarField*> valid;
  for (std::size_t i = 0; i < sols.size(); ++i) {
    csv += names[i] + ',' + format_double(sols[i].energy) + ',' + format_double(sols[i].res_sup) + ',' +
           (sols[i].valid ? "1" : "0") + '\n';
    if (sols[i].valid) valid.push_back(&sols[i].u);
  }
  write_text((dir / "extensions.csv").string(), csv);
  std::cout << csv << "distinct_valid=" << count_distinct(valid) << '\n';
  if (!ext.diagnostic.empty()) std::cerr << "note: " << ext.diagnostic << '\n';
  return ok ? kOk : kUnsolved;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dead-core multiplicity experiments for the weighted sublinear p-Laplacian"};
  app.require_subcommand(1);
  Common common;
  struct Verb {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&);
  };
  const Verb verbs[] = {
      {"analyze", "report positivity components of the weight", cmd_analyze},
      {"solve", "solve for the ground state or one subset candidate at model.mu", cmd_solve},
      {"sweep", "sweep the mu ladder and write the report CSV and fields", cmd_sweep},
      {"eigen", "first eigenvalue along the mu ladder and lambda_infinity", cmd_eigen},
      {"barrier", "dead-core barrier exponent and threshold A0", cmd_barrier},
      {"extensions", "q+r and r=p problems (Nehari, coercive minimizer, sub/supersolutions)", cmd_extensions},
  };
  std::vector<std::pair<CLI::App*, const Verb*>> subs;
  for (const auto& v : verbs) {
    CLI::App* s = app.add_subcommand(v.name, v.help);
    s->add_option("--config", common.config, "configuration file")->required();
    s->add_option("--out", common.out, "output directory");
    s->add_option("--parallel", common.parallel, "worker threads")->check(CLI::PositiveNumber);
    s->add_option("--seed", common.seed, "random seed");
    subs.emplace_back(s, &v);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kDataError;
  }
  try {
    const RunConfig cfg = load(common);
    for (const auto& [s, v] : subs)
      if (s->parsed()) return v->run(cfg);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kOk;
}
