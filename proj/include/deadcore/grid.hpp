#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace deadcore {

/// Raised for malformed inputs: bad grid specs, shape mismatches, unreadable files.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  int dim = 1;
  std::array<double, 2> extent{1.0, 1.0};
  std::array<int, 2> n{9, 9};
};

/// Uniform tensor grid on [0,L1] (x [0,L2]). Node k = i + nx*j, x fastest.
class Grid {
 public:
  explicit Grid(const GridSpec& spec) : dim_(spec.dim) {
    if (dim_ != 1 && dim_ != 2) throw InputError("grid dim must be 1 or 2");
    for (int a = 0; a < dim_; ++a) {
      if (spec.n[a] < 3) throw InputError("n too small: need at least 3 nodes per axis");
      if (!(spec.extent[a] > 0.0) || !std::isfinite(spec.extent[a]))
        throw InputError("nonpositive extent");
      n_[a] = spec.n[a];
      extent_[a] = spec.extent[a];
    }
    if (dim_ == 1) {
      n_[1] = 1;
      extent_[1] = 0.0;
    }
    h_ = extent_[0] / (n_[0] - 1);
    if (dim_ == 2) {
      const double hy = extent_[1] / (n_[1] - 1);
      if (std::abs(hy - h_) > 1e-12 * h_) throw InputError("grid spacing must be uniform across axes");
    }
  }

  int dim() const { return dim_; }
  int nx() const { return n_[0]; }
  int ny() const { return n_[1]; }
  std::size_t size() const { return static_cast<std::size_t>(n_[0]) * n_[1]; }
  double h() const { return h_; }
  double cell_volume() const { return dim_ == 1 ? h_ : h_ * h_; }
  std::array<double, 2> extent() const { return extent_; }

  std::size_t index(int i, int j = 0) const { return static_cast<std::size_t>(i) + static_cast<std::size_t>(n_[0]) * j; }
  int ix(std::size_t k) const { return static_cast<int>(k % n_[0]); }
  int iy(std::size_t k) const { return static_cast<int>(k / n_[0]); }

  std::array<double, 2> coord(std::size_t k) const {
    return {ix(k) * h_, dim_ == 2 ? iy(k) * h_ : 0.0};
  }

  double distance(std::size_t a, std::size_t b) const {
    const double dx = (ix(a) - ix(b)) * h_;
    const double dy = (iy(a) - iy(b)) * h_;
    return std::sqrt(dx * dx + dy * dy);
  }

  bool on_boundary(std::size_t k) const {
    const int i = ix(k);
    if (i == 0 || i == n_[0] - 1) return true;
    if (dim_ == 2) {
      const int j = iy(k);
      return j == 0 || j == n_[1] - 1;
    }
    return false;
  }

  /// Visits the graph neighbours of k (2 in 1D, 4-connectivity in 2D).
  template <class F>
  void for_each_neighbor(std::size_t k, F&& f) const {
    const int i = ix(k);
    if (i > 0) f(k - 1);
    if (i < n_[0] - 1) f(k + 1);
    if (dim_ == 2) {
      const int j = iy(k);
      if (j > 0) f(k - n_[0]);
      if (j < n_[1] - 1) f(k + n_[0]);
    }
  }

  bool same_shape(const Grid& o) const {
    return dim_ == o.dim_ && n_ == o.n_ && h_ == o.h_;
  }

 private:
  int dim_;
  std::array<int, 2> n_{1, 1};
  std::array<double, 2> extent_{0.0, 0.0};
  double h_ = 0.0;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr build_grid(const GridSpec& spec) { return std::make_shared<const Grid>(spec); }

inline void require_same_grid(const GridPtr& a, const GridPtr& b, const char* what) {
  if (!a || !b || (a != b && !a->same_shape(*b)))
    throw InputError(std::string(what) + ": fields live on different grids");
}

/// Node-indexed real values.
struct ScalarField {
  GridPtr grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(GridPtr g, double fill = 0.0) : grid(std::move(g)), values(grid->size(), fill) {}
  ScalarField(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid->size()) throw InputError("field size does not match grid");
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t k) { return values[k]; }
  double operator[](std::size_t k) const { return values[k]; }

  double sup_norm() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  double max() const { return *std::max_element(values.begin(), values.end()); }
  double min() const { return *std::min_element(values.begin(), values.end()); }
  bool all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
  bool vanishes_on_boundary() const {
    for (std::size_t k = 0; k < size(); ++k)
      if (grid->on_boundary(k) && values[k] != 0.0) return false;
    return true;
  }

  ScalarField& operator+=(const ScalarField& o) {
    require_same_grid(grid, o.grid, "field +=");
    for (std::size_t k = 0; k < size(); ++k) values[k] += o.values[k];
    return *this;
  }
  ScalarField& operator*=(double s) {
    for (double& v : values) v *= s;
    return *this;
  }
};

inline ScalarField operator*(double s, ScalarField f) { return f *= s; }
inline ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }

inline double sup_distance(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid, b.grid, "sup_distance");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

template <class F>
ScalarField sample(const GridPtr& g, F&& f) {
  ScalarField out(g);
  for (std::size_t k = 0; k < g->size(); ++k) out[k] = f(g->coord(k));
  return out;
}

/// Boolean node set; set algebra is closed on a fixed grid.
struct NodeMask {
  GridPtr grid;
  std::vector<std::uint8_t> member;

  NodeMask() = default;
  explicit NodeMask(GridPtr g, bool fill = false) : grid(std::move(g)), member(grid->size(), fill ? 1 : 0) {}

  std::size_t size() const { return member.size(); }
  bool operator[](std::size_t k) const { return member[k] != 0; }
  void set(std::size_t k, bool v = true) { member[k] = v ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(member.begin(), member.end(), std::uint8_t{1}));
  }
  bool empty() const { return count() == 0; }
  std::vector<std::size_t> nodes() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < size(); ++k)
      if (member[k]) out.push_back(k);
    return out;
  }

  NodeMask& operator|=(const NodeMask& o) {
    require_same_grid(grid, o.grid, "mask union");
    for (std::size_t k = 0; k < size(); ++k) member[k] = member[k] | o.member[k];
    return *this;
  }
  NodeMask& operator&=(const NodeMask& o) {
    require_same_grid(grid, o.grid, "mask intersection");
    for (std::size_t k = 0; k < size(); ++k) member[k] = member[k] & o.member[k];
    return *this;
  }
  NodeMask& operator-=(const NodeMask& o) {
    require_same_grid(grid, o.grid, "mask difference");
    for (std::size_t k = 0; k < size(); ++k) member[k] = member[k] && !o.member[k];
    return *this;
  }
  NodeMask operator~() const {
    NodeMask out = *this;
    for (auto& m : out.member) m = m ? 0 : 1;
    return out;
  }
  bool subset_of(const NodeMask& o) const {
    for (std::size_t k = 0; k < size(); ++k)
      if (member[k] && !o.member[k]) return false;
    return true;
  }
  bool operator==(const NodeMask& o) const { return member == o.member; }
};

inline NodeMask operator|(NodeMask a, const NodeMask& b) { return a |= b; }
inline NodeMask operator&(NodeMask a, const NodeMask& b) { return a &= b; }
inline NodeMask operator-(NodeMask a, const NodeMask& b) { return a -= b; }

inline NodeMask boundary_mask(const GridPtr& g) {
  NodeMask m(g);
  for (std::size_t k = 0; k < g->size(); ++k)
    if (g->on_boundary(k)) m.set(k);
  return m;
}

template <class Pred>
NodeMask mask_where(const ScalarField& f, Pred&& pred) {
  NodeMask m(f.grid);
  for (std::size_t k = 0; k < f.size(); ++k)
    if (pred(f[k])) m.set(k);
  return m;
}

/// Fixed-order sum of w_k * f(u_k) * h^d.
template <class F>
double quadrature(const ScalarField& u, F&& f) {
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += f(k, u[k]);
  return s * u.grid->cell_volume();
}

}  // namespace deadcore
