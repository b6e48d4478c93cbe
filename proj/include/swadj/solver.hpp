/*
 * Single-patch wave-propagation stepping, boundary ghosts and gauges.
 *
 * The update is the unsplit high-resolution wave-propagation scheme
 *
 *     Q_i -= dt/dx (A+dQ_{i-1/2} + A-dQ_{i+1/2}) - dt/dx (F_{i+1/2} - F_{i-1/2})
 *
 * with F = 1/2 sum_p |s_p| (1 - dt/dx |s_p|) limited(W_p), applied in each
 * direction without transverse corrections. The eta equation is in flux
 * form, so sum(eta * area) is conserved with wall boundaries.
 */
#pragma once

#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "swadj/geometry.hpp"
#include "swadj/riemann.hpp"

namespace swadj {

constexpr int kGhostWidth = 2;

enum class Kernel { Forward, Adjoint };

struct SolverConfig {
  double g = 9.81;
  double cfl_target = 0.9;
  double cfl_max = 1.0;
  int order = 2;
  Limiter limiter = Limiter::MC;

  void validate() const {
    if (!(g > 0)) throw ConfigError("solver.g must be positive");
    if (!(cfl_target > 0 && cfl_target <= cfl_max && cfl_max <= 1.0))
      throw ConfigError("solver requires 0 < cfl_target <= cfl_max <= 1");
    if (order != 1 && order != 2) throw ConfigError("solver.order must be 1 or 2");
  }
};

/// One rectangular patch: geometry, state with ghosts and mean depth.
struct Patch {
  int level = 1;
  PatchGeometry geom;
  StateField q;
  StateField q_old;  ///< state at t_old, used for time interpolation by finer levels
  Array2<double> hbar;
  double t = 0.0, t_old = 0.0;

  Patch() = default;
  Patch(int lvl, const PatchGeometry& g)
      : level(lvl),
        geom(g),
        q(g.box, kGhostWidth, g.dim == 2 ? kGhostWidth : 0),
        q_old(g.box, kGhostWidth, g.dim == 2 ? kGhostWidth : 0),
        hbar(g.box, kGhostWidth, g.dim == 2 ? kGhostWidth : 0) {}

  const Box& box() const { return geom.box; }
  Box grown_box() const { return hbar.grown_box(); }
  int dim() const { return geom.dim; }
  bool wet(int i, int j) const { return hbar(i, j) > 0.0; }

  bool contains_point(double x, double y) const {
    const double xa = geom.xlo + box().lo[0] * geom.dx, xb = geom.xlo + (box().hi[0] + 1) * geom.dx;
    if (x < xa || x > xb) return false;
    if (dim() == 1) return true;
    const double ya = geom.ylo + box().lo[1] * geom.dy, yb = geom.ylo + (box().hi[1] + 1) * geom.dy;
    return y >= ya && y <= yb;
  }
};

/// Index extents of the whole domain at a patch's resolution.
struct LevelExtent {
  int nx = 1, ny = 1;
  Box box() const { return Box(0, 0, nx - 1, ny - 1); }
};

/**
 * Ghost cells outside the physical domain: Wall mirrors eta and negates the
 * normal momentum, Extrapolation copies the adjacent interior cell.
 * The interior is never written.
 */
inline void fill_physical_ghosts(Patch& p, const Domain& dom, const LevelExtent& ext,
                                 bool include_hbar = false) {
  const Box g = p.grown_box();
  auto apply = [&](int gi, int gj, int si, int sj, int negate) {
    for (int k = 0; k < 3; ++k) {
      double v = p.q.comp[k](si, sj);
      p.q.comp[k](gi, gj) = (k == negate) ? -v : v;
    }
    if (include_hbar) p.hbar(gi, gj) = p.hbar(si, sj);
  };
  const int gx = p.hbar.gx(), gy = p.hbar.gy();
  if (p.box().lo[0] == 0) {
    const bool wall = dom.bc[0] == BoundaryKind::Wall;
    for (int j = g.lo[1]; j <= g.hi[1]; ++j)
      for (int k = 1; k <= gx; ++k) apply(-k, j, wall ? k - 1 : 0, j, wall ? 1 : -1);
  }
  if (p.box().hi[0] == ext.nx - 1) {
    const bool wall = dom.bc[1] == BoundaryKind::Wall;
    const int n = ext.nx;
    for (int j = g.lo[1]; j <= g.hi[1]; ++j)
      for (int k = 1; k <= gx; ++k) apply(n - 1 + k, j, wall ? n - k : n - 1, j, wall ? 1 : -1);
  }
  if (p.dim() == 2) {
    if (p.box().lo[1] == 0) {
      const bool wall = dom.bc[2] == BoundaryKind::Wall;
      for (int i = g.lo[0]; i <= g.hi[0]; ++i)
        for (int k = 1; k <= gy; ++k) apply(i, -k, i, wall ? k - 1 : 0, wall ? 2 : -1);
    }
    if (p.box().hi[1] == ext.ny - 1) {
      const bool wall = dom.bc[3] == BoundaryKind::Wall;
      const int n = ext.ny;
      for (int i = g.lo[0]; i <= g.hi[0]; ++i)
        for (int k = 1; k <= gy; ++k) apply(i, n - 1 + k, i, wall ? n - k : n - 1, wall ? 2 : -1);
    }
  }
}

/// Copy interior values of same-level neighbors into this patch's ghost cells.
inline void copy_from_neighbors(Patch& p, std::span<const Patch> same_level) {
  const Box g = p.grown_box();
  for (const auto& nb : same_level) {
    if (&nb == &p) continue;
    const Box ov = intersect(g, nb.box());
    if (ov.empty()) continue;
    for (int j = ov.lo[1]; j <= ov.hi[1]; ++j)
      for (int i = ov.lo[0]; i <= ov.hi[0]; ++i) {
        if (p.box().contains(i, j)) continue;
        for (int k = 0; k < 3; ++k) p.q.comp[k](i, j) = nb.q.comp[k](i, j);
      }
  }
}

/// Largest wave speed sqrt(g hbar) over wet cells of `region`.
inline double max_wave_speed(const Patch& p, const Box& region, double g) {
  double hmax = 0.0;
  for (int j = region.lo[1]; j <= region.hi[1]; ++j)
    for (int i = region.lo[0]; i <= region.hi[0]; ++i) hmax = std::max(hmax, p.hbar(i, j));
  return std::sqrt(g * hmax);
}

/// Courant factor of one time unit: c_max (1/dx + 1/dy) for the unsplit sweeps.
inline double courant_rate(double cmax, const PatchGeometry& geom) {
  return cmax * (1.0 / geom.dx + (geom.dim == 2 ? 1.0 / geom.dy : 0.0));
}

/**
 * dt = cfl_target / (c_max (1/dx + 1/dy)); in 1D this is cfl_target dx / c_max.
 * The 2D form is the stability bound of unsplit sweeps without transverse terms.
 */
inline double compute_stable_dt(const Patch& p, const SolverConfig& cfg) {
  const double cmax = max_wave_speed(p, p.box(), cfg.g);
  if (cmax == 0.0) throw NumericalError("compute_stable_dt: patch has no wet cells");
  return cfg.cfl_target / courant_rate(cmax, p.geom);
}

namespace detail {

struct FaceWaves {
  RiemannOutput rp;
};

inline double wave_dot(const State& a, const State& b) { return dot(a, b); }

/// Sweep one grid line: faces f in [first, last], face f sits between cells f-1 and f.
template <typename GetState, typename GetH, typename AddDq>
void sweep_line(int first_cell, int last_cell, Direction dir, Kernel kernel, double dt_over_h,
                const SolverConfig& cfg, GetState&& state_at, GetH&& h_at, AddDq&& add_dq,
                std::vector<RiemannOutput>& faces) {
  const int f0 = first_cell - 1, f1 = last_cell + 2;
  faces.resize(std::size_t(f1 - f0 + 1));
  for (int f = f0; f <= f1; ++f) {
    RiemannInput in;
    in.left = state_at(f - 1);
    in.right = state_at(f);
    in.hbar_left = h_at(f - 1);
    in.hbar_right = h_at(f);
    in.g = cfg.g;
    in.dir = dir;
    faces[std::size_t(f - f0)] =
        kernel == Kernel::Forward ? forward_rp(in) : adjoint_rp(in, AdjointTime::Reversed);
  }
  auto face = [&](int f) -> const RiemannOutput& { return faces[std::size_t(f - f0)]; };

  for (int i = first_cell; i <= last_cell; ++i) {
    State d;
    const State& ap = face(i).apdq;
    const State& am = face(i + 1).amdq;
    for (int k = 0; k < 3; ++k) d[k] = -dt_over_h * (ap[k] + am[k]);
    add_dq(i, d);
  }
  if (cfg.order < 2) return;

  auto correction = [&](int f) {
    State F;
    const auto& rp = face(f);
    if (rp.dry || rp.wall) return F;
    for (int w = 0; w < 2; ++w) {
      const Wave& wave = rp.waves[w];
      const double s = wave.speed;
      const double wn = wave_dot(wave.jump, wave.jump);
      if (wn == 0.0) continue;
      const int fu = s > 0 ? f - 1 : f + 1;
      const double theta = wave_dot(face(fu).waves[w].jump, wave.jump) / wn;
      const double phi = limiter_phi(theta, cfg.limiter);
      const double coef = 0.5 * std::abs(s) * (1.0 - dt_over_h * std::abs(s)) * phi;
      for (int k = 0; k < 3; ++k) F[k] += coef * wave.jump[k];
    }
    return F;
  };
  State f_left = correction(first_cell);
  for (int i = first_cell; i <= last_cell; ++i) {
    State f_right = correction(i + 1);
    State d;
    for (int k = 0; k < 3; ++k) d[k] = -dt_over_h * (f_right[k] - f_left[k]);
    add_dq(i, d);
    f_left = f_right;
  }
}

}  // namespace detail

/**
 * Advance one patch by dt. Ghost cells must already be filled.
 *
 * Returns the observed Courant number; throws CflViolation (state untouched)
 * when it exceeds cfg.cfl_max. Dry cells stay identically zero.
 */
inline double step_patch(Patch& p, double dt, Kernel kernel, const SolverConfig& cfg) {
  const Box& box = p.box();
  const double cmax = max_wave_speed(p, grow(box, 1, p.dim()), cfg.g);
  const double cfl = dt * courant_rate(cmax, p.geom);
  if (cfl > cfg.cfl_max * (1.0 + 1e-12)) throw CflViolation(cfl, cfg.cfl_max);

  StateField dq(box, 0, 0);
  std::vector<RiemannOutput> faces;

  for (int j = box.lo[1]; j <= box.hi[1]; ++j) {
    detail::sweep_line(
        box.lo[0], box.hi[0], Direction::X, kernel, dt / p.geom.dx, cfg,
        [&](int i) { return p.q.at(i, j); }, [&](int i) { return p.hbar(i, j); },
        [&](int i, const State& d) {
          for (int k = 0; k < 3; ++k) dq.comp[k](i, j) += d[k];
        },
        faces);
  }
  if (p.dim() == 2) {
    for (int i = box.lo[0]; i <= box.hi[0]; ++i) {
      detail::sweep_line(
          box.lo[1], box.hi[1], Direction::Y, kernel, dt / p.geom.dy, cfg,
          [&](int j) { return p.q.at(i, j); }, [&](int j) { return p.hbar(i, j); },
          [&](int j, const State& d) {
            for (int k = 0; k < 3; ++k) dq.comp[k](i, j) += d[k];
          },
          faces);
    }
  }

  for (int j = box.lo[1]; j <= box.hi[1]; ++j)
    for (int i = box.lo[0]; i <= box.hi[0]; ++i) {
      if (!p.wet(i, j)) {
        p.q.set(i, j, State{});
        continue;
      }
      for (int k = 0; k < 3; ++k) p.q.comp[k](i, j) += dq.comp[k](i, j);
    }
  return cfl;
}

// ---------------------------------------------------------------------------
// Gauges

struct GaugeRecord {
  double t = 0.0;
  State q;
};

struct Gauge {
  int id = 0;
  double x = 0.0, y = 0.0;
  std::vector<GaugeRecord> records;
};

/**
 * Bilinear interpolation of cell-centered values. The stencil is clamped to
 * the interior, so points within half a cell of the patch edge extrapolate
 * with constant weights instead of touching stale ghosts.
 */
inline State interpolate_state(const Patch& p, double x, double y) {
  const auto& g = p.geom;
  auto axis = [](double s, int lo, int hi) {
    if (hi == lo) return std::pair<int, double>{lo, 0.0};
    const double f = s - 0.5;
    int i0 = std::clamp(int(std::floor(f)), lo, hi - 1);
    double w = std::clamp(f - i0, 0.0, 1.0);
    return std::pair<int, double>{i0, w};
  };
  const auto [i0, wx] = axis((x - g.xlo) / g.dx, p.box().lo[0], p.box().hi[0]);
  if (p.dim() == 1) {
    const int i1 = std::min(i0 + 1, p.box().hi[0]);
    State a = p.q.at(i0, 0), b = p.q.at(i1, 0), r;
    for (int k = 0; k < 3; ++k) r[k] = (1 - wx) * a[k] + wx * b[k];
    return r;
  }
  const auto [j0, wy] = axis((y - g.ylo) / g.dy, p.box().lo[1], p.box().hi[1]);
  const int i1 = std::min(i0 + 1, p.box().hi[0]), j1 = std::min(j0 + 1, p.box().hi[1]);
  State r;
  for (int k = 0; k < 3; ++k)
    r[k] = (1 - wx) * (1 - wy) * p.q.comp[k](i0, j0) + wx * (1 - wy) * p.q.comp[k](i1, j0) +
           (1 - wx) * wy * p.q.comp[k](i0, j1) + wx * wy * p.q.comp[k](i1, j1);
  return r;
}

/// Append the interpolated state for every gauge inside the patch.
inline void record_gauges(const Patch& p, std::span<Gauge> gauges, double t) {
  for (auto& gauge : gauges) {
    if (!p.contains_point(gauge.x, gauge.y)) continue;
    if (!gauge.records.empty() && !(t > gauge.records.back().t)) continue;
    gauge.records.push_back({t, interpolate_state(p, gauge.x, gauge.y)});
  }
}

inline void write_gauge_csv(const std::string& path, const Gauge& gauge, int dim) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write gauge file '" + path + "'");
  out << (dim == 2 ? "time,eta,mu,gamma\n" : "time,eta,mu\n");
  for (const auto& r : gauge.records) {
    out << detail::format_double(r.t) << ',' << detail::format_double(r.q.eta) << ','
        << detail::format_double(r.q.mu);
    if (dim == 2) out << ',' << detail::format_double(r.q.gamma);
    out << '\n';
  }
}

/// Time series read back from a gauge CSV.
struct GaugeSeries {
  std::vector<double> t, eta, mu, gamma;
};

inline GaugeSeries read_gauge_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open gauge file '" + path + "'");
  std::string line;
  int lineno = 1;
  if (!std::getline(in, line)) throw ParseError("empty gauge file '" + path + "'", lineno);
  if (line.rfind("time,eta,mu", 0) != 0) throw ParseError("unexpected gauge CSV header", lineno);
  const bool has_gamma = line.find("gamma") != std::string::npos;
  GaugeSeries s;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) comma = line.size();
      double v;
      if (!detail::parse_double(std::string_view(line).substr(start, comma - start), v))
        throw ParseError("non-numeric gauge value", lineno);
      vals.push_back(v);
      start = comma + 1;
    }
    if (vals.size() != (has_gamma ? 4u : 3u)) throw ParseError("wrong column count", lineno);
    if (!s.t.empty() && !(vals[0] > s.t.back()))
      throw ParseError("gauge times must be strictly increasing", lineno);
    s.t.push_back(vals[0]);
    s.eta.push_back(vals[1]);
    s.mu.push_back(vals[2]);
    s.gamma.push_back(has_gamma ? vals[3] : 0.0);
  }
  if (s.t.empty()) throw ParseError("gauge file '" + path + "' has no records", lineno);
  return s;
}

// ---------------------------------------------------------------------------
// Uniform single-patch integration

/// A single patch covering the whole domain at the given resolution.
inline Patch make_uniform_patch(const Domain& dom, const Bathymetry& bathy, int nx, int ny,
                                double mean_surface = 0.0) {
  PatchGeometry g;
  g.dim = dom.dim;
  g.box = Box(0, 0, nx - 1, dom.dim == 2 ? ny - 1 : 0);
  g.dx = dom.length(0) / nx;
  g.dy = dom.dim == 2 ? dom.length(1) / ny : 1.0;
  g.xlo = dom.lower[0];
  g.ylo = dom.dim == 2 ? dom.lower[1] : 0.0;
  Patch p(1, g);
  const auto bavg = cell_average_bathymetry(bathy, g);
  for (int j = g.box.lo[1]; j <= g.box.hi[1]; ++j)
    for (int i = g.box.lo[0]; i <= g.box.hi[0]; ++i)
      p.hbar(i, j) = depth_from_elevation(mean_surface, bavg(i, j));
  fill_physical_ghosts(p, dom, LevelExtent{nx, dom.dim == 2 ? ny : 1}, true);
  return p;
}

inline LevelExtent extent_of(const Patch& p) {
  return LevelExtent{p.box().size(0), p.box().size(1)};
}

/**
 * Take `nsteps` equal steps of size dt on a domain-covering patch.
 * `after_step(step_index, t)` runs after every step.
 */
inline void integrate_uniform(Patch& p, const Domain& dom, Kernel kernel, const SolverConfig& cfg,
                              double dt, int nsteps,
                              const std::function<void(int, double)>& after_step = {}) {
  const LevelExtent ext = extent_of(p);
  for (int n = 0; n < nsteps; ++n) {
    fill_physical_ghosts(p, dom, ext);
    step_patch(p, dt, kernel, cfg);
    p.t += dt;
    if (after_step) after_step(n, p.t);
  }
}

}  // namespace swadj
