#pragma once

// Run configuration: an INI file (key = value lines under [section] headers).
//
//   [grid]       dim, n, extent              (n and extent take one value per axis)
//   [weight]     type = bumps | file; centers (";"-separated points), amplitudes,
//                widths, offset; file; positive_scale
//   [model]      p, q, r, variant = pure-q | q-plus-r | p-linear, mu
//   [ladder]     mu (space-separated, strictly increasing)
//   [solver]     tol_pg, max_iter, eps_reg, polish_iter
//   [solve]      subset = ground | 1,2,... (one-based component ids)
//   [barrier]    center, r_in, R, K
//   [extensions] method = auto | nehari | subsuper, seeds, gate_directions
//   [run]        seed, out, parallel

#include <filesystem>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "deadcore/analysis.hpp"

namespace deadcore {

struct RunConfig {
  GridSpec grid;
  WeightDef weight = GaussianBumps{{{0.25, 0.0}, {0.75, 0.0}}, {1.0, 1.0}, {0.06, 0.06}, 0.3};
  double positive_scale = 1.0;
  double p = 2.0;
  double q = 1.5;
  std::optional<double> r;
  Variant variant = Variant::pure_q;
  double mu = 1.0;
  std::vector<double> ladder{0.5, 1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
  SolveOptions solver;
  std::optional<std::vector<std::size_t>> subset;  // zero-based; nullopt = ground state
  BarrierSpec barrier;
  std::string ext_method = "auto";
  int ext_seeds = 3;
  int gate_directions = 200;
  std::uint64_t seed = 0;
  std::string out = "out";
  int parallel = 1;

  GridPtr build() const { return build_grid(grid); }

  WeightSplit weight_on(const GridPtr& g) const {
    WeightSplit w = make_weight(g, weight);
    return positive_scale == 1.0 ? w : scale_positive_part(w, positive_scale);
  }

  ProblemModel model_on(const GridPtr& g) const { return ProblemModel::make(weight_on(g), p, q, mu, variant, r); }

  void validate() const {
    if (ladder.empty()) throw InputError("config: empty mu ladder");
    for (std::size_t i = 1; i < ladder.size(); ++i)
      if (!(ladder[i] > ladder[i - 1])) throw InputError("config: mu ladder must be strictly increasing");
    if (!(ladder.front() >= 0.0)) throw InputError("config: mu must be nonnegative");
    if (const auto* f = std::get_if<WeightFile>(&weight))
      if (!std::filesystem::exists(f->path)) throw InputError("config: weight file not found: " + f->path);
    if (!(positive_scale > 0.0)) throw InputError("config: positive_scale must be positive");
    if (parallel < 1) throw InputError("config: parallel must be >= 1");
    if (ext_seeds < 1 || gate_directions < 1) throw InputError("config: extension counts must be >= 1");
    if (ext_method != "auto" && ext_method != "nehari" && ext_method != "subsuper")
      throw InputError("config: unknown extensions method '" + ext_method + "'");
    solver.validate();
  }
};

namespace detail {

inline std::vector<double> parse_reals(const std::string& key, const std::string& text) {
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream is(s);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || !std::isfinite(v)) throw InputError("config: " + key + ": bad number '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw InputError("config: " + key + ": expected a number");
  return out;
}

inline double parse_real(const std::string& key, const std::string& text) {
  const auto v = parse_reals(key, text);
  if (v.size() != 1) throw InputError("config: " + key + ": expected one number");
  return v.front();
}

inline long parse_int(const std::string& key, const std::string& text) {
  const double v = parse_real(key, text);
  if (v != std::floor(v) || std::abs(v) > 9e15) throw InputError("config: " + key + ": expected an integer");
  return static_cast<long>(v);
}

inline std::vector<std::array<double, 2>> parse_points(const std::string& key, const std::string& text) {
  std::vector<std::array<double, 2>> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ';')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    const auto v = parse_reals(key, item);
    if (v.size() > 2) throw InputError("config: " + key + ": points take one or two coordinates");
    out.push_back({v[0], v.size() > 1 ? v[1] : 0.0});
  }
  return out;
}

}  // namespace detail

/// Parses configuration text; relative file paths resolve against base_dir.
inline RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
  }

  static const std::map<std::string, std::set<std::string>> known{
      {"grid", {"dim", "n", "extent"}},
      {"weight", {"type", "centers", "amplitudes", "widths", "offset", "file", "positive_scale"}},
      {"model", {"p", "q", "r", "variant", "mu"}},
      {"ladder", {"mu"}},
      {"solver", {"tol_pg", "max_iter", "eps_reg", "polish_iter"}},
      {"solve", {"subset"}},
      {"barrier", {"center", "r_in", "R", "K"}},
      {"extensions", {"method", "seeds", "gate_directions"}},
      {"run", {"seed", "out", "parallel"}},
  };
  for (const auto& [sec, body] : tree) {
    const auto it = known.find(sec);
    if (it == known.end()) throw InputError("config: unknown section [" + sec + "]");
    if (!body.data().empty()) throw InputError("config: key '" + sec + "' outside a section");
    for (const auto& [key, _] : body)
      if (!it->second.count(key)) throw InputError("config: unknown key " + sec + "." + key);
  }

  auto get = [&](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return *v;
    return std::nullopt;
  };
  auto real = [&](const std::string& path, double& dst) {
    if (auto v = get(path)) dst = detail::parse_real(path, *v);
  };

  RunConfig c;
  if (auto v = get("grid.dim")) c.grid.dim = static_cast<int>(detail::parse_int("grid.dim", *v));
  if (c.grid.dim != 1 && c.grid.dim != 2) throw InputError("config: grid.dim must be 1 or 2");
  const auto axes = static_cast<std::size_t>(c.grid.dim);
  if (auto v = get("grid.n")) {
    const auto n = detail::parse_reals("grid.n", *v);
    if (n.size() != 1 && n.size() != axes) throw InputError("config: grid.n needs 1 or dim values");
    for (std::size_t a = 0; a < axes; ++a) {
      const double x = n[n.size() == 1 ? 0 : a];
      if (x != std::floor(x)) throw InputError("config: grid.n must be integral");
      c.grid.n[a] = static_cast<int>(x);
    }
  }
  if (auto v = get("grid.extent")) {
    const auto e = detail::parse_reals("grid.extent", *v);
    if (e.size() != 1 && e.size() != axes) throw InputError("config: grid.extent needs 1 or dim values");
    for (std::size_t a = 0; a < axes; ++a) c.grid.extent[a] = e[e.size() == 1 ? 0 : a];
  }

  const std::string wtype = get("weight.type").value_or("bumps");
  if (wtype == "file") {
    const auto f = get("weight.file");
    if (!f) throw InputError("config: weight.type = file needs weight.file");
    std::filesystem::path path(*f);
    if (path.is_relative()) path = base_dir / path;
    c.weight = WeightFile{path.string()};
  } else if (wtype == "bumps") {
    auto b = std::get<GaussianBumps>(c.weight);
    if (auto v = get("weight.centers")) b.centers = detail::parse_points("weight.centers", *v);
    if (auto v = get("weight.amplitudes")) b.amplitudes = detail::parse_reals("weight.amplitudes", *v);
    if (auto v = get("weight.widths")) b.widths = detail::parse_reals("weight.widths", *v);
    real("weight.offset", b.offset);
    if (b.centers.size() != b.amplitudes.size() || b.centers.size() != b.widths.size())
      throw InputError("config: weight centers, amplitudes and widths must have equal length");
    c.weight = b;
  } else {
    throw InputError("config: unknown weight.type '" + wtype + "'");
  }
  real("weight.positive_scale", c.positive_scale);

  real("model.p", c.p);
  real("model.q", c.q);
  real("model.mu", c.mu);
  if (auto v = get("model.r")) c.r = detail::parse_real("model.r", *v);
  if (auto v = get("model.variant")) c.variant = parse_variant(*v);
  if (auto v = get("ladder.mu")) c.ladder = detail::parse_reals("ladder.mu", *v);

  real("solver.tol_pg", c.solver.tol_pg);
  if (auto v = get("solver.max_iter")) c.solver.max_iter = detail::parse_int("solver.max_iter", *v);
  if (auto v = get("solver.eps_reg")) c.solver.eps_reg = detail::parse_real("solver.eps_reg", *v);
  if (auto v = get("solver.polish_iter"))
    c.solver.polish_iter = static_cast<int>(detail::parse_int("solver.polish_iter", *v));

  if (auto v = get("solve.subset"); v && *v != "ground") {
    std::vector<std::size_t> s;
    for (double x : detail::parse_reals("solve.subset", *v)) {
      if (x < 1 || x != std::floor(x)) throw InputError("config: solve.subset takes one-based component ids");
      s.push_back(static_cast<std::size_t>(x) - 1);
    }
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    c.subset = s;
  }

  if (auto v = get("barrier.center")) {
    const auto x = detail::parse_reals("barrier.center", *v);
    if (x.size() > 2) throw InputError("config: barrier.center takes one or two coordinates");
    c.barrier.center = {x[0], x.size() > 1 ? x[1] : 0.5};
  }
  real("barrier.r_in", c.barrier.r_in);
  real("barrier.R", c.barrier.R);
  real("barrier.K", c.barrier.K);

  if (auto v = get("extensions.method")) c.ext_method = *v;
  if (auto v = get("extensions.seeds")) c.ext_seeds = static_cast<int>(detail::parse_int("extensions.seeds", *v));
  if (auto v = get("extensions.gate_directions"))
    c.gate_directions = static_cast<int>(detail::parse_int("extensions.gate_directions", *v));

  if (auto v = get("run.seed")) {
    const long s = detail::parse_int("run.seed", *v);
    if (s < 0) throw InputError("config: run.seed must be nonnegative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (auto v = get("run.out")) c.out = *v;
  if (auto v = get("run.parallel")) c.parallel = static_cast<int>(detail::parse_int("run.parallel", *v));

  c.solver.seed = c.seed;
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  return parse_config(read_text(path), std::filesystem::path(path).parent_path());
}

}  // namespace deadcore
