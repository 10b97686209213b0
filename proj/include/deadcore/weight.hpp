#pragma once

#include <string>
#include <variant>
#include <vector>

#include "deadcore/field_io.hpp"
#include "deadcore/grid.hpp"

namespace deadcore {

/// a(x) = sum_k amp_k * exp(-|x - c_k|^2 / (2 w_k^2)) - offset.
struct GaussianBumps {
  std::vector<std::array<double, 2>> centers;
  std::vector<double> amplitudes;
  std::vector<double> widths;
  double offset = 0.0;
};

struct WeightFile {
  std::string path;
};

using WeightDef = std::variant<GaussianBumps, WeightFile>;

struct WeightSplit {
  ScalarField a;
  ScalarField a_plus;
  ScalarField a_minus;
};

inline WeightSplit split_weight(ScalarField a) {
  WeightSplit w{a, ScalarField(a.grid), ScalarField(a.grid)};
  for (std::size_t k = 0; k < a.size(); ++k) {
    w.a_plus[k] = a[k] > 0.0 ? a[k] : 0.0;
    w.a_minus[k] = a[k] < 0.0 ? -a[k] : 0.0;
  }
  return w;
}

inline ScalarField evaluate_bumps(const GridPtr& grid, const GaussianBumps& b) {
  if (b.centers.size() != b.amplitudes.size() || b.centers.size() != b.widths.size())
    throw InputError("weight: centers, amplitudes and widths must have equal length");
  for (double w : b.widths)
    if (!(w > 0.0)) throw InputError("weight: widths must be positive");
  return sample(grid, [&](std::array<double, 2> x) {
    double v = -b.offset;
    for (std::size_t m = 0; m < b.centers.size(); ++m) {
      const double dx = x[0] - b.centers[m][0];
      const double dy = grid->dim() == 2 ? x[1] - b.centers[m][1] : 0.0;
      v += b.amplitudes[m] * std::exp(-(dx * dx + dy * dy) / (2.0 * b.widths[m] * b.widths[m]));
    }
    return v;
  });
}

inline WeightSplit make_weight(const GridPtr& grid, const WeightDef& def) {
  if (const auto* b = std::get_if<GaussianBumps>(&def)) return split_weight(evaluate_bumps(grid, *b));
  return split_weight(read_field_csv(std::get<WeightFile>(def).path, grid));
}

/// a_mu = a_plus - mu * a_minus.
inline ScalarField effective_weight(const ScalarField& a_plus, const ScalarField& a_minus, double mu) {
  require_same_grid(a_plus.grid, a_minus.grid, "effective_weight");
  ScalarField out(a_plus.grid);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a_plus[k] - mu * a_minus[k];
  return out;
}

/// Scales the positive part only; used to pass smallness gates on a^+.
inline WeightSplit scale_positive_part(const WeightSplit& w, double factor) {
  WeightSplit out = w;
  for (std::size_t k = 0; k < w.a.size(); ++k) {
    out.a_plus[k] = factor * w.a_plus[k];
    out.a[k] = out.a_plus[k] - w.a_minus[k];
  }
  return out;
}

}  // namespace deadcore
