#pragma once

#include <deque>
#include <limits>
#include <vector>

#include "deadcore/grid.hpp"

namespace deadcore {

/// Positivity components of a weight: the connected pieces of the discrete
/// interior of {a >= 0} that meet {a > 0}, plus the flat zero plateaus that don't.
struct ComponentSet {
  std::vector<NodeMask> omega;
  std::vector<bool> contains_positive;
  std::vector<bool> surrounded;
  std::vector<NodeMask> zero_plateaus;

  std::size_t n() const { return omega.size(); }
  bool a1_holds() const { return !omega.empty(); }
  bool a2_holds() const {
    return a1_holds() && std::all_of(surrounded.begin(), surrounded.end(), [](bool s) { return s; });
  }
  NodeMask union_of(const std::vector<std::size_t>& ids) const {
    NodeMask m(omega.front().grid);
    for (auto i : ids) m |= omega.at(i);
    return m;
  }
  NodeMask all() const {
    NodeMask m(omega.front().grid);
    for (const auto& w : omega) m |= w;
    return m;
  }
};

/// Mask plus its graph neighbours (one ring), restricted to the grid.
inline NodeMask grow_one_ring(const NodeMask& m) {
  const Grid& g = *m.grid;
  NodeMask out = m;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (m[k]) g.for_each_neighbor(k, [&](std::size_t nb) { out.set(nb); });
  return out;
}

/// Discrete closure: the component together with its one-ring.
inline NodeMask closure(const NodeMask& m) { return grow_one_ring(m); }

/// Nodes with a >= 0 at the node and at every graph neighbour, away from the grid boundary.
inline NodeMask nonnegative_interior(const ScalarField& a) {
  const Grid& g = *a.grid;
  NodeMask m(a.grid);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.on_boundary(k) || a[k] < 0.0) continue;
    bool ok = true;
    g.for_each_neighbor(k, [&](std::size_t nb) { ok = ok && a[nb] >= 0.0; });
    if (ok) m.set(k);
  }
  return m;
}

/// Connected components of a mask, labelled in increasing node order.
inline std::vector<NodeMask> connected_components(const NodeMask& m) {
  const Grid& g = *m.grid;
  std::vector<int> label(g.size(), -1);
  std::vector<NodeMask> out;
  for (std::size_t seed = 0; seed < g.size(); ++seed) {
    if (!m[seed] || label[seed] >= 0) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back(m.grid);
    std::deque<std::size_t> queue{seed};
    label[seed] = id;
    while (!queue.empty()) {
      const std::size_t k = queue.front();
      queue.pop_front();
      out.back().set(k);
      g.for_each_neighbor(k, [&](std::size_t nb) {
        if (m[nb] && label[nb] < 0) {
          label[nb] = id;
          queue.push_back(nb);
        }
      });
    }
  }
  return out;
}

inline ComponentSet detect_components(const ScalarField& a) {
  const Grid& g = *a.grid;
  ComponentSet cs;
  for (auto& comp : connected_components(nonnegative_interior(a))) {
    bool positive = false;
    for (std::size_t k = 0; k < g.size() && !positive; ++k) positive = comp[k] && a[k] > 0.0;
    if (!positive) {
      cs.zero_plateaus.push_back(std::move(comp));
      continue;
    }
    // The one-ring around the closure must lie inside the domain with a < 0.
    const NodeMask closed = closure(comp);
    const NodeMask ring = grow_one_ring(closed) - closed;
    bool surrounded = true;
    for (std::size_t k = 0; k < g.size(); ++k)
      if (ring[k] && (g.on_boundary(k) || !(a[k] < 0.0))) surrounded = false;
    if (ring.empty()) surrounded = false;
    for (std::size_t k = 0; k < g.size(); ++k)
      if (closed[k] && g.on_boundary(k)) surrounded = false;
    cs.omega.push_back(std::move(comp));
    cs.contains_positive.push_back(true);
    cs.surrounded.push_back(surrounded);
  }
  return cs;
}

struct Dilation {
  NodeMask mask;
  bool touches_boundary = false;
};

/// All interior nodes within Euclidean distance eps of the mask.
inline Dilation dilate(const NodeMask& m, double eps) {
  if (!(eps > 0.0)) throw InputError("dilate: eps must be positive");
  const Grid& g = *m.grid;
  const double h = g.h();
  const int r = static_cast<int>(std::floor(eps / h + 1e-9));
  const double lim2 = eps * eps * (1.0 + 1e-12) + 1e-24;
  Dilation out{m, false};
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!m[k]) continue;
    const int i0 = g.ix(k), j0 = g.iy(k);
    const int jr = g.dim() == 2 ? r : 0;
    for (int dj = -jr; dj <= jr; ++dj) {
      const int j = j0 + dj;
      if (j < 0 || j >= g.ny()) continue;
      for (int di = -r; di <= r; ++di) {
        const int i = i0 + di;
        if (i < 0 || i >= g.nx()) continue;
        const double d2 = (di * h) * (di * h) + (dj * h) * (dj * h);
        if (d2 > lim2) continue;
        const std::size_t nb = g.index(i, j);
        if (g.on_boundary(nb)) {
          out.touches_boundary = true;
          continue;
        }
        out.mask.set(nb);
      }
    }
  }
  return out;
}

/// True when the eps-dilations of all masks are pairwise disjoint.
inline bool dilations_disjoint(const std::vector<NodeMask>& masks, double eps) {
  std::vector<NodeMask> grown;
  for (const auto& m : masks) grown.push_back(dilate(m, eps).mask);
  for (std::size_t i = 0; i < grown.size(); ++i)
    for (std::size_t j = i + 1; j < grown.size(); ++j)
      if (!(grown[i] & grown[j]).empty()) return false;
  return true;
}

/// Directed distance sup_{x in A} dist(x, B).
inline double directed_distance(const NodeMask& a, const NodeMask& b) {
  const auto an = a.nodes();
  const auto bn = b.nodes();
  if (an.empty() || bn.empty()) throw InputError("hausdorff: empty set");
  const Grid& g = *a.grid;
  double worst = 0.0;
  for (auto x : an) {
    if (b[x]) continue;
    double best = std::numeric_limits<double>::infinity();
    for (auto y : bn) best = std::min(best, g.distance(x, y));
    worst = std::max(worst, best);
  }
  return worst;
}

inline double hausdorff(const NodeMask& a, const NodeMask& b) {
  require_same_grid(a.grid, b.grid, "hausdorff");
  return std::max(directed_distance(a, b), directed_distance(b, a));
}

/// Minimal Euclidean distance between two node sets.
inline double set_gap(const NodeMask& a, const NodeMask& b) {
  const Grid& g = *a.grid;
  double best = std::numeric_limits<double>::infinity();
  const auto bn = b.nodes();
  for (auto x : a.nodes())
    for (auto y : bn) best = std::min(best, g.distance(x, y));
  return best;
}

/// Smallest pairwise gap between the closures of the components (infinite for n = 1).
inline double min_component_gap(const ComponentSet& cs) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<NodeMask> closed;
  for (const auto& w : cs.omega) closed.push_back(closure(w));
  for (std::size_t i = 0; i < closed.size(); ++i)
    for (std::size_t j = i + 1; j < closed.size(); ++j) best = std::min(best, set_gap(closed[i], closed[j]));
  return best;
}

/// Half the minimal closure gap; the largest dilation keeping neighbourhoods disjoint.
inline double default_eps0(const ComponentSet& cs) {
  const double gap = min_component_gap(cs);
  if (std::isfinite(gap)) return 0.5 * gap;
  const auto ext = cs.omega.front().grid->extent();
  return std::max(ext[0], ext[1]);
}

}  // namespace deadcore
