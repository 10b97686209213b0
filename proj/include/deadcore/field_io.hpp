#pragma once

// Plain-text field and mask CSV. Layout: a header line "# grid <dim> <n> <h>",
// then one row per y-index holding nx comma-separated values (1D: a single row).

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "deadcore/grid.hpp"

namespace deadcore {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string grid_header(const Grid& g) {
  std::ostringstream os;
  os << "# grid " << g.dim() << ' ' << g.nx();
  if (g.dim() == 2 && g.ny() != g.nx()) os << 'x' << g.ny();
  os << ' ' << format_double(g.h());
  return os.str();
}

template <class Get>
std::string table_csv(const Grid& g, Get&& get) {
  std::string out = grid_header(g) + "\n";
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      if (i) out += ',';
      out += get(g.index(i, j));
    }
    out += '\n';
  }
  return out;
}

inline std::string field_to_csv(const ScalarField& f) {
  return table_csv(*f.grid, [&](std::size_t k) { return format_double(f[k]); });
}

inline std::string mask_to_csv(const NodeMask& m) {
  return table_csv(*m.grid, [&](std::size_t k) { return std::string(m[k] ? "1" : "0"); });
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path);
  os << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Parses a field CSV against an existing grid. Throws on any shape mismatch.
inline ScalarField field_from_csv(const std::string& text, const GridPtr& grid) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("# grid", 0) != 0) throw InputError("field CSV: missing '# grid' header");
  {
    std::istringstream hs(line.substr(6));
    int dim = 0;
    std::string nstr;
    double h = 0.0;
    if (!(hs >> dim >> nstr >> h)) throw InputError("field CSV: malformed header");
    int nx = 0, ny = 1;
    const auto xpos = nstr.find('x');
    try {
      nx = std::stoi(nstr.substr(0, xpos));
      ny = xpos == std::string::npos ? (dim == 2 ? nx : 1) : std::stoi(nstr.substr(xpos + 1));
    } catch (const std::exception&) {
      throw InputError("field CSV: malformed node count");
    }
    if (dim != grid->dim() || nx != grid->nx() || ny != grid->ny() || std::abs(h - grid->h()) > 1e-9 * grid->h())
      throw InputError("field CSV: file shape mismatch with configured grid");
  }
  ScalarField f(grid);
  std::size_t k = 0;
  for (int j = 0; j < grid->ny(); ++j) {
    if (!std::getline(is, line)) throw InputError("field CSV: file shape mismatch (too few rows)");
    std::istringstream rs(line);
    std::string cell;
    int i = 0;
    while (std::getline(rs, cell, ',')) {
      if (i >= grid->nx()) throw InputError("field CSV: file shape mismatch (row too long)");
      try {
        f[k++] = std::stod(cell);
      } catch (const std::exception&) {
        throw InputError("field CSV: non-numeric entry '" + cell + "'");
      }
      ++i;
    }
    if (i != grid->nx()) throw InputError("field CSV: file shape mismatch (row too short)");
  }
  while (std::getline(is, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) throw InputError("field CSV: file shape mismatch (extra rows)");
  if (!f.all_finite()) throw InputError("field CSV: non-finite value");
  return f;
}

inline ScalarField read_field_csv(const std::string& path, const GridPtr& grid) {
  return field_from_csv(read_text(path), grid);
}

inline NodeMask mask_from_csv(const std::string& text, const GridPtr& grid) {
  const ScalarField f = field_from_csv(text, grid);
  NodeMask m(grid);
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (f[k] != 0.0 && f[k] != 1.0) throw InputError("mask CSV: entries must be 0 or 1");
    m.set(k, f[k] == 1.0);
  }
  return m;
}

}  // namespace deadcore
