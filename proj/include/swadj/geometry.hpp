/*
 * Domain description, gridded bathymetry and cell averaging.
 *
 * Bathymetry is a raster of node samples defining a piecewise-bilinear
 * bottom elevation B(x, y). Cell averages are exact integrals of that
 * interpolant, so averages on different refinement levels are consistent.
 */
#pragma once

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "swadj/types.hpp"

namespace swadj {

enum class BoundaryKind { Wall, Extrapolation };

/// Faces are ordered x-lower, x-upper, y-lower, y-upper.
struct Domain {
  int dim = 1;
  std::array<double, 2> lower{0.0, 0.0};
  std::array<double, 2> upper{1.0, 1.0};
  std::array<BoundaryKind, 4> bc{BoundaryKind::Wall, BoundaryKind::Wall, BoundaryKind::Wall,
                                 BoundaryKind::Wall};

  void validate() const {
    if (dim != 1 && dim != 2) throw ConfigError("domain.dim must be 1 or 2");
    for (int d = 0; d < dim; ++d)
      if (!(upper[d] > lower[d])) throw ConfigError("domain upper bound must exceed lower bound");
  }
  double length(int d) const { return upper[d] - lower[d]; }
};

/// Geometry of a rectangular patch at one refinement level.
struct PatchGeometry {
  int dim = 1;
  Box box;
  double dx = 1.0, dy = 1.0;
  double xlo = 0.0, ylo = 0.0;  ///< domain lower corner

  double xc(int i) const { return xlo + (i + 0.5) * dx; }
  double yc(int j) const { return dim == 2 ? ylo + (j + 0.5) * dy : ylo; }
  double cell_area() const { return dim == 2 ? dx * dy : dx; }
};

/**
 * Node-sampled bottom elevation. Row 0 is the southern row.
 *
 * A raster with a single row is one-dimensional and ignores y.
 */
struct Bathymetry {
  double x0 = 0.0, y0 = 0.0;  ///< coordinates of node (0, 0)
  double hx = 1.0, hy = 1.0;  ///< node spacing
  int ncols = 0, nrows = 0;
  double nodata = -9999.0;
  std::vector<double> values;

  bool one_dimensional() const { return nrows == 1; }
  double x_max() const { return x0 + (ncols - 1) * hx; }
  double y_max() const { return y0 + (nrows - 1) * hy; }
  double node(int col, int row) const { return values[std::size_t(row) * ncols + col]; }
  bool is_nodata(double v) const { return v == nodata; }

  bool covers(double xa, double xb, double ya, double yb) const {
    const double tol = 1e-9 * std::max(1.0, std::abs(hx) * ncols);
    if (xa < x0 - tol || xb > x_max() + tol) return false;
    if (one_dimensional()) return true;
    const double toly = 1e-9 * std::max(1.0, std::abs(hy) * nrows);
    return ya >= y0 - toly && yb <= y_max() + toly;
  }

  /// Piecewise-bilinear evaluation; throws outside coverage or on nodata.
  double evaluate(double x, double y) const {
    if (!covers(x, x, y, y)) throw ConfigError("bathymetry evaluated outside its coverage");
    const auto [c, fx] = locate(x, x0, hx, ncols);
    if (one_dimensional()) {
      const double a = checked(node(c, 0)), b = checked(node(c + 1, 0));
      return a + fx * (b - a);
    }
    const auto [r, fy] = locate(y, y0, hy, nrows);
    return bilinear_in_cell(c, r, fx, fy);
  }

  /**
   * Exact mean of the bilinear interpolant over [xa,xb] x [ya,yb].
   *
   * On each raster cell the interpolant is bilinear, whose mean over any
   * sub-rectangle equals its value at the sub-rectangle midpoint.
   */
  double cell_average(double xa, double xb, double ya, double yb) const {
    if (!covers(xa, xb, ya, yb)) throw ConfigError("patch lies outside bathymetry coverage");
    const auto [c0, c1] = cell_span(xa, xb, x0, hx, ncols);
    double total = 0.0;
    if (one_dimensional()) {
      for (int c = c0; c <= c1; ++c) {
        const double sa = std::max(xa, x0 + c * hx), sb = std::min(xb, x0 + (c + 1) * hx);
        if (sb <= sa) continue;
        const double f = ((sa + sb) * 0.5 - (x0 + c * hx)) / hx;
        const double a = checked(node(c, 0)), b = checked(node(c + 1, 0));
        total += (sb - sa) * (a + f * (b - a));
      }
      return total / (xb - xa);
    }
    const auto [r0, r1] = cell_span(ya, yb, y0, hy, nrows);
    for (int r = r0; r <= r1; ++r) {
      const double ta = std::max(ya, y0 + r * hy), tb = std::min(yb, y0 + (r + 1) * hy);
      if (tb <= ta) continue;
      const double fy = ((ta + tb) * 0.5 - (y0 + r * hy)) / hy;
      for (int c = c0; c <= c1; ++c) {
        const double sa = std::max(xa, x0 + c * hx), sb = std::min(xb, x0 + (c + 1) * hx);
        if (sb <= sa) continue;
        const double fx = ((sa + sb) * 0.5 - (x0 + c * hx)) / hx;
        total += (sb - sa) * (tb - ta) * bilinear_in_cell(c, r, fx, fy);
      }
    }
    return total / ((xb - xa) * (yb - ya));
  }

 private:
  double checked(double v) const {
    if (is_nodata(v)) throw ConfigError("nodata bathymetry value inside the simulated region");
    return v;
  }

  double bilinear_in_cell(int c, int r, double fx, double fy) const {
    const double v00 = checked(node(c, r)), v10 = checked(node(c + 1, r));
    const double v01 = checked(node(c, r + 1)), v11 = checked(node(c + 1, r + 1));
    return (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11;
  }

  // Raster cell index and fractional offset for a coordinate inside coverage.
  static std::pair<int, double> locate(double x, double origin, double h, int n) {
    double s = (x - origin) / h;
    int c = std::clamp(int(std::floor(s)), 0, n - 2);
    return {c, std::clamp(s - c, 0.0, 1.0)};
  }

  static std::pair<int, int> cell_span(double a, double b, double origin, double h, int n) {
    int c0 = std::clamp(int(std::floor((a - origin) / h)), 0, n - 2);
    int c1 = std::clamp(int(std::ceil((b - origin) / h)) - 1, 0, n - 2);
    return {c0, std::max(c0, c1)};
  }
};

namespace detail {

inline bool parse_double(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string lower(std::string_view s) {
  std::string r(s);
  for (auto& ch : r) ch = char(std::tolower(static_cast<unsigned char>(ch)));
  return r;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

/**
 * Parse an ASCII raster: six header lines (ncols, nrows, xllcorner,
 * yllcorner, cellsize, nodata_value) followed by nrows rows, north row first.
 * xllcorner/yllcorner locate the south-west node.
 */
inline Bathymetry parse_bathymetry(std::istream& in) {
  Bathymetry b;
  const char* keys[] = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"};
  double header[6];
  bool seen[6] = {false, false, false, false, false, false};
  std::string line;
  int lineno = 0;
  int found = 0;
  while (found < 6) {
    if (!std::getline(in, line)) throw ParseError("truncated bathymetry header", lineno + 1);
    ++lineno;
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 2) throw ParseError("malformed header line '" + line + "'", lineno);
    const std::string key = detail::lower(toks[0]);
    int k = 0;
    while (k < 6 && key != keys[k]) ++k;
    if (k == 6) throw ParseError("unknown header key '" + std::string(toks[0]) + "'", lineno);
    if (seen[k]) throw ParseError("duplicate header key '" + key + "'", lineno);
    if (!detail::parse_double(toks[1], header[k]))
      throw ParseError("non-numeric header value for '" + key + "'", lineno);
    seen[k] = true;
    ++found;
  }
  if (header[0] < 2 || header[1] < 1 || header[0] != std::floor(header[0]) ||
      header[1] != std::floor(header[1]))
    throw ParseError("ncols must be >= 2 and nrows >= 1 (integers)", lineno);
  if (!(header[4] > 0)) throw ParseError("cellsize must be positive", lineno);
  b.ncols = int(header[0]);
  b.nrows = int(header[1]);
  b.x0 = header[2];
  b.y0 = header[3];
  b.hx = b.hy = header[4];
  b.nodata = header[5];
  b.values.assign(std::size_t(b.ncols) * b.nrows, 0.0);

  int row = 0;
  while (row < b.nrows) {
    if (!std::getline(in, line))
      throw ParseError("expected " + std::to_string(b.nrows) + " data rows, found " +
                           std::to_string(row),
                       lineno + 1);
    ++lineno;
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;
    if (int(toks.size()) != b.ncols)
      throw ParseError("data row " + std::to_string(row + 1) + " has " +
                           std::to_string(toks.size()) + " values, expected " +
                           std::to_string(b.ncols),
                       lineno);
    const int south_row = b.nrows - 1 - row;
    for (int c = 0; c < b.ncols; ++c) {
      double v;
      if (!detail::parse_double(toks[c], v))
        throw ParseError("non-numeric token '" + std::string(toks[c]) + "'", lineno);
      if (!std::isfinite(v)) throw ParseError("non-finite value", lineno);
      b.values[std::size_t(south_row) * b.ncols + c] = v;
    }
    ++row;
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!detail::split_ws(line).empty()) throw ParseError("trailing data after last row", lineno);
  }
  return b;
}

inline Bathymetry load_bathymetry(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open bathymetry file '" + path + "'");
  return parse_bathymetry(in);
}

inline void write_bathymetry(std::ostream& out, const Bathymetry& b) {
  if (b.hx != b.hy) throw ConfigError("ASCII raster requires equal node spacing in x and y");
  out << "ncols " << b.ncols << "\n"
      << "nrows " << b.nrows << "\n"
      << "xllcorner " << detail::format_double(b.x0) << "\n"
      << "yllcorner " << detail::format_double(b.y0) << "\n"
      << "cellsize " << detail::format_double(b.hx) << "\n"
      << "nodata_value " << detail::format_double(b.nodata) << "\n";
  for (int r = b.nrows - 1; r >= 0; --r) {
    for (int c = 0; c < b.ncols; ++c) {
      if (c) out << ' ';
      out << detail::format_double(b.node(c, r));
    }
    out << '\n';
  }
}

inline void write_bathymetry(const std::string& path, const Bathymetry& b) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write bathymetry file '" + path + "'");
  write_bathymetry(out, b);
}

/// Raster sampling an analytic elevation on a uniform node lattice.
template <typename F>
Bathymetry sample_bathymetry(F&& elevation, double x0, double x1, double y0, double y1,
                             double spacing, bool one_dimensional) {
  Bathymetry b;
  b.x0 = x0;
  b.y0 = y0;
  b.hx = b.hy = spacing;
  b.ncols = int(std::llround((x1 - x0) / spacing)) + 1;
  b.nrows = one_dimensional ? 1 : int(std::llround((y1 - y0) / spacing)) + 1;
  b.values.resize(std::size_t(b.ncols) * b.nrows);
  for (int r = 0; r < b.nrows; ++r)
    for (int c = 0; c < b.ncols; ++c)
      b.values[std::size_t(r) * b.ncols + c] = elevation(x0 + c * spacing, y0 + r * spacing);
  return b;
}

struct StepShelfParams {
  double shelf_edge = 50e3;
  double shelf_depth = 200.0;
  double ocean_depth = 4000.0;
  double spacing = 50.0;
};

/// Piecewise-constant continental shelf: shallow for x < shelf_edge.
inline Bathymetry step_shelf_1d(const Domain& dom, const StepShelfParams& p = {}) {
  return sample_bathymetry(
      [&](double x, double) { return x < p.shelf_edge ? -p.shelf_depth : -p.ocean_depth; },
      dom.lower[0], dom.upper[0], 0.0, 0.0, p.spacing, true);
}

struct RadialShelfParams {
  double center_x = 300e3, center_y = 200e3;
  double island_radius = 20e3;  ///< dry core
  double island_height = 10.0;
  double shelf_radius = 50e3;
  double slope_width = 30e3;
  double shelf_depth = 200.0;
  double ocean_depth = 4000.0;
  double spacing = 1000.0;
};

/// Circular island surrounded by a shelf and a linear slope into the deep ocean.
inline Bathymetry radial_shelf_2d(const Domain& dom, const RadialShelfParams& p = {}) {
  auto elev = [&](double x, double y) {
    const double r = std::hypot(x - p.center_x, y - p.center_y);
    if (r <= p.island_radius) return p.island_height;
    if (r <= p.shelf_radius) return -p.shelf_depth;
    if (r >= p.shelf_radius + p.slope_width) return -p.ocean_depth;
    const double f = (r - p.shelf_radius) / p.slope_width;
    return -p.shelf_depth + f * (p.shelf_depth - p.ocean_depth);
  };
  return sample_bathymetry(elev, dom.lower[0], dom.upper[0], dom.lower[1], dom.upper[1],
                           p.spacing, false);
}

/// Cell-averaged bottom elevation on every cell of `cells` (global indices of `g`).
inline Array2<double> cell_average_bathymetry(const Bathymetry& b, const PatchGeometry& g,
                                              const Box& cells) {
  if ((g.dim == 1) != b.one_dimensional())
    throw ConfigError("bathymetry raster dimension does not match the domain (1D needs nrows = 1)");
  Array2<double> out(cells, 0, 0);
  for (int j = cells.lo[1]; j <= cells.hi[1]; ++j) {
    const double ya = g.ylo + j * g.dy;
    for (int i = cells.lo[0]; i <= cells.hi[0]; ++i) {
      const double xa = g.xlo + i * g.dx;
      out(i, j) = b.cell_average(xa, xa + g.dx, ya, ya + g.dy);
    }
  }
  return out;
}

inline Array2<double> cell_average_bathymetry(const Bathymetry& b, const PatchGeometry& g) {
  return cell_average_bathymetry(b, g, g.box);
}

/// Mean depth hbar = max(mean_surface - B, 0); zero marks a dry cell.
inline double depth_from_elevation(double mean_surface, double b_avg) {
  return std::max(mean_surface - b_avg, 0.0);
}

inline Array2<double> depth_profile(const Array2<double>& b_avg, double mean_surface) {
  const Box& box = b_avg.box();
  Array2<double> h(box, 0, 0);
  for (int j = box.lo[1]; j <= box.hi[1]; ++j)
    for (int i = box.lo[0]; i <= box.hi[0]; ++i)
      h(i, j) = depth_from_elevation(mean_surface, b_avg(i, j));
  return h;
}

}  // namespace swadj
