/*
 * Block-structured AMR: flagging, regridding, subcycled advancement and restriction.
 *
 * Level 1 is a single patch covering the domain. Level l+1 patches are boxes
 * of level-l index space refined by ratio r_l, nested inside level l with a
 * margin of `buffer` level-l cells away from physical boundaries. Each level
 * takes r_l steps per step of level l-1 and is averaged back afterwards.
 */
#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <thread>

#include "swadj/adjoint.hpp"
#include "swadj/cluster.hpp"
#include "swadj/solver.hpp"

namespace swadj {

// ---------------------------------------------------------------------------
// Flagging

/// |eta| >= tol on wet cells.
inline FlagField flag_surface(const Patch& p, double tol) {
  if (!(tol > 0)) throw ConfigError("surface tolerance must be positive");
  FlagField f(p.box(), 0, 0);
  for (int j = p.box().lo[1]; j <= p.box().hi[1]; ++j)
    for (int i = p.box().lo[0]; i <= p.box().hi[0]; ++i)
      f(i, j) = p.wet(i, j) && std::abs(p.q.comp[0](i, j)) >= tol;
  return f;
}

/// Inner product with the adjoint >= tol; zero inner product on dry cells never flags.
inline FlagField flag_adjoint(const Patch& p, const SnapshotStore& store, double t, double tol,
                              const FunctionalSpec& spec) {
  FlagField f(p.box(), 0, 0);
  if (std::isinf(tol)) return f;
  const auto ip = inner_product_field(p, store, t, spec);
  for (int j = p.box().lo[1]; j <= p.box().hi[1]; ++j)
    for (int i = p.box().lo[0]; i <= p.box().hi[0]; ++i)
      f(i, j) = p.wet(i, j) && ip(i, j) >= tol && ip(i, j) > 0.0;
  return f;
}

// ---------------------------------------------------------------------------
// Configuration

/// Rectangle in which refinement is bounded below/above.
struct RefinementRegion {
  int min_level = 1, max_level = 1;
  double x1 = 0, x2 = 0, y1 = -std::numeric_limits<double>::infinity(),
         y2 = std::numeric_limits<double>::infinity();
  double t1 = -std::numeric_limits<double>::infinity(),
         t2 = std::numeric_limits<double>::infinity();

  bool contains(double x, double y, double t) const {
    return x >= x1 && x <= x2 && y >= y1 && y <= y2 && t >= t1 && t <= t2;
  }
};

struct AmrConfig {
  int max_levels = 1;
  std::vector<int> ratios;  ///< ratios[l-1] refines level l into l+1
  int regrid_interval = 2;
  int buffer = 2;
  double efficiency = 0.7;
  FlagCriterion criterion = FlagCriterion::Surface;
  double tol_surface = 0.1;
  double tol_adjoint = 0.1;
  std::vector<RefinementRegion> regions;
  int threads = 1;

  int ratio(int level) const { return ratios.at(std::size_t(level - 1)); }

  void validate() const {
    if (max_levels < 1) throw ConfigError("amr.levels must be >= 1");
    if (int(ratios.size()) < max_levels - 1)
      throw ConfigError("amr.ratios needs one entry per refined level");
    for (int l = 0; l < max_levels - 1; ++l)
      if (ratios[std::size_t(l)] < 2) throw ConfigError("amr.ratios entries must be >= 2");
    if (regrid_interval < 1) throw ConfigError("amr.regrid_interval must be >= 1");
    if (buffer < 0) throw ConfigError("amr.buffer must be >= 0");
    if (!(efficiency > 0 && efficiency <= 1)) throw ConfigError("amr.efficiency must lie in (0, 1]");
    if (!(tol_surface > 0)) throw ConfigError("amr.tol_surface must be positive");
    if (!(tol_adjoint > 0)) throw ConfigError("amr.tol_adjoint must be positive");
    for (const auto& r : regions)
      if (r.min_level < 1 || r.max_level < r.min_level)
        throw ConfigError("region requires 1 <= min_level <= max_level");
    if (threads < 1) throw ConfigError("threads must be >= 1");
  }
};

/// What one regrid decided for one level, reported to observers.
struct RegridLevelRecord {
  int level = 0;               ///< flagged level; boxes are for level + 1
  FlagField flags;             ///< criterion and region flags on old coverage
  FlagField buffered;          ///< after forcing, buffering and nesting restriction
  FlagField allowed;           ///< cells where level + 1 may exist
  std::vector<Box> boxes;      ///< clusters in this level's index space
};

struct RegridEvent {
  long index = 0;
  double t = 0.0;
  int lbase = 1;
  std::vector<RegridLevelRecord> levels;
};

namespace detail {

inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t k = 0; k < n; ++k) f(k);
    return;
  }
  const std::size_t nt = std::min<std::size_t>(std::size_t(threads), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(nt);
  for (std::size_t t = 0; t < nt; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t k = t; k < n; k += nt) f(k);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Level-wide copy of patch interiors, used as the coarse source for interpolation.
struct Composite {
  StateField q;
  FlagField covered;
};

inline double minmod(double a, double b) {
  if (a * b <= 0) return 0.0;
  return std::abs(a) < std::abs(b) ? a : b;
}

/**
 * Minmod-limited linear reconstruction of coarse data `c` (depth `h`) at the
 * center of fine cell (i, j), refinement ratio r. Averages over the children
 * equal the parent value, and linear data is reproduced exactly away from
 * dry or uncovered neighbors.
 */
inline State interpolate_coarse(const Composite& c, const Array2<double>& h, int r, int dim, int i,
                                int j) {
  const int ic = floor_div(i, r), jc = dim == 2 ? floor_div(j, r) : 0;
  if (!c.covered(ic, jc)) throw std::logic_error("coarse-fine interpolation outside coarse coverage");
  if (!(h(ic, jc) > 0.0)) return State{};
  const double fx = (i - ic * r + 0.5) / r - 0.5;
  const double fy = dim == 2 ? (j - jc * r + 0.5) / r - 0.5 : 0.0;
  const Box& dbox = c.q.box();
  auto usable = [&](int a, int b) { return dbox.contains(a, b) && c.covered(a, b) && h(a, b) > 0.0; };
  State out;
  for (int k = 0; k < 3; ++k) {
    const double v = c.q.comp[k](ic, jc);
    auto slope = [&](int di, int dj) {
      if (!usable(ic - di, jc - dj) || !usable(ic + di, jc + dj)) return 0.0;
      return minmod(v - c.q.comp[k](ic - di, jc - dj), c.q.comp[k](ic + di, jc + dj) - v);
    };
    out[k] = v + slope(1, 0) * fx + (dim == 2 ? slope(0, 1) * fy : 0.0);
  }
  return out;
}

/// Linear-in-time blend of two coarse states; w = 0 at the old time, 1 at the new.
inline State blend(const State& a, const State& b, double w) {
  State s;
  for (int k = 0; k < 3; ++k) s[k] = (1 - w) * a[k] + w * b[k];
  return s;
}

}  // namespace detail

struct Level {
  int number = 1;
  PatchGeometry geom;  ///< whole-domain geometry at this resolution
  std::vector<Patch> patches;
  double t = 0.0;
  long step_count = 0;
  long cell_steps = 0;

  long cells() const {
    long n = 0;
    for (const auto& p : patches) n += p.box().cells();
    return n;
  }
};

class Hierarchy {
 public:
  using InitialCondition = std::function<State(double, double)>;

  Hierarchy(const Domain& dom, const Bathymetry& bathy, int nx, int ny, double mean_surface,
            const SolverConfig& solver, const AmrConfig& amr)
      : dom_(dom), solver_(solver), amr_(amr) {
    dom_.validate();
    solver_.validate();
    amr_.validate();
    if (nx < 1 || (dom.dim == 2 && ny < 1)) throw ConfigError("base grid needs at least one cell");
    levels_.resize(std::size_t(amr_.max_levels) + 1);
    hbar_.resize(levels_.size());
    int rx = 1;
    for (int l = 1; l <= amr_.max_levels; ++l) {
      if (l > 1) rx *= amr_.ratio(l - 1);
      PatchGeometry g;
      g.dim = dom.dim;
      const int lnx = nx * rx, lny = dom.dim == 2 ? ny * rx : 1;
      g.box = Box(0, 0, lnx - 1, lny - 1);
      g.dx = dom.length(0) / lnx;
      g.dy = dom.dim == 2 ? dom.length(1) / lny : 1.0;
      g.xlo = dom.lower[0];
      g.ylo = dom.dim == 2 ? dom.lower[1] : 0.0;
      levels_[std::size_t(l)].number = l;
      levels_[std::size_t(l)].geom = g;

      // Whole-level mean depth, ghosts filled by the physical boundary rule.
      Patch whole(l, g);
      const auto bavg = cell_average_bathymetry(bathy, g);
      for (int j = g.box.lo[1]; j <= g.box.hi[1]; ++j)
        for (int i = g.box.lo[0]; i <= g.box.hi[0]; ++i)
          whole.hbar(i, j) = depth_from_elevation(mean_surface, bavg(i, j));
      fill_physical_ghosts(whole, dom_, extent(l), true);
      hbar_[std::size_t(l)] = std::move(whole.hbar);
    }
    coarse_old_.resize(levels_.size());
    coarse_new_.resize(levels_.size());
  }

  const Domain& domain() const { return dom_; }
  const AmrConfig& amr() const { return amr_; }
  const SolverConfig& solver() const { return solver_; }
  int max_levels() const { return amr_.max_levels; }
  const Level& level(int l) const { return levels_.at(std::size_t(l)); }
  Level& level(int l) { return levels_.at(std::size_t(l)); }
  const Array2<double>& level_hbar(int l) const { return hbar_.at(std::size_t(l)); }
  double time() const { return levels_[1].t; }
  LevelExtent extent(int l) const {
    const auto& b = levels_[std::size_t(l)].geom.box;
    return {b.size(0), b.size(1)};
  }

  /// Deepest level that currently has patches.
  int finest_level() const {
    int f = 1;
    for (int l = 2; l <= amr_.max_levels; ++l)
      if (!levels_[std::size_t(l)].patches.empty()) f = l;
    return f;
  }

  void set_adjoint(const SnapshotStore* store, const FunctionalSpec& spec) {
    store_ = store;
    spec_ = spec;
  }
  void set_gauges(std::vector<Gauge> g) { gauges_ = std::move(g); }
  std::vector<Gauge>& gauges() { return gauges_; }
  const std::vector<Gauge>& gauges() const { return gauges_; }

  void on_regrid(std::function<void(const RegridEvent&)> cb) { regrid_cb_ = std::move(cb); }
  /// Called with each flagged level's source patches before flagging (for property checks).
  void on_flag(std::function<void(int, const std::vector<Patch>&, double)> cb) {
    flag_cb_ = std::move(cb);
  }

  long regrid_count() const { return regrid_count_; }

  /// Criterion flags on one patch at time t.
  FlagField flag_patch(const Patch& p, double t) const { return flag_patch(p, t, tolerance()); }

  FlagField flag_patch(const Patch& p, double t, double tol) const {
    if (amr_.criterion == FlagCriterion::Surface) return flag_surface(p, tol);
    if (!store_) throw ConfigError("adjoint flagging requires a snapshot store");
    return flag_adjoint(p, *store_, t, tol, spec_);
  }

  double tolerance() const {
    return amr_.criterion == FlagCriterion::Surface ? amr_.tol_surface : amr_.tol_adjoint;
  }

  /**
   * Build level 1 from the initial condition, then add one level per pass by
   * flagging the freshly initialized data.
   */
  void initialize(const InitialCondition& ic, double t0) {
    ic_ = &ic;
    Level& base = levels_[1];
    base.patches.clear();
    base.patches.push_back(make_patch(1, base.geom.box));
    set_from_ic(base.patches.back(), ic);
    for (int l = 1; l <= amr_.max_levels; ++l) {
      levels_[std::size_t(l)].t = t0;
      levels_[std::size_t(l)].step_count = 0;
      levels_[std::size_t(l)].cell_steps = 0;
    }
    for (auto& p : base.patches) p.t = p.t_old = t0;
    for (int pass = 1; pass < amr_.max_levels; ++pass) regrid(1);
    ic_ = nullptr;
    record_gauges_at(t0);
  }

  /**
   * Largest coarse step keeping every level at or below cfl_target,
   * using whole-level depths so the bound does not change with the layout.
   */
  double stable_dt() const {
    double dt = std::numeric_limits<double>::infinity();
    double factor = 1.0;
    for (int l = 1; l <= amr_.max_levels; ++l) {
      if (l > 1) factor *= amr_.ratio(l - 1);
      const auto& h = hbar_[std::size_t(l)];
      double hmax = 0.0;
      for (double v : h.raw()) hmax = std::max(hmax, v);
      if (hmax == 0.0) throw NumericalError("domain has no wet cells");
      const double rate = courant_rate(std::sqrt(solver_.g * hmax), levels_[std::size_t(l)].geom);
      dt = std::min(dt, solver_.cfl_target / rate * factor);
    }
    return dt;
  }

  /// One coarse step of size dt; on a CFL violation restore and take two half steps.
  void advance(double dt, int depth = 0) {
    Backup backup = save();
    try {
      advance_level(1, dt);
    } catch (const CflViolation&) {
      restore(std::move(backup));
      if (depth >= 10) throw;
      advance(0.5 * dt, depth + 1);
      advance(0.5 * dt, depth + 1);
    }
  }

  /// Equal coarse steps from the current time to exactly t_target.
  void advance_to(double t_target) {
    const double span = t_target - time();
    if (span <= 0) return;
    const auto [n, dt] = uniform_steps(span, stable_dt());
    for (int k = 0; k < n; ++k) advance(dt);
    // Pin the clock to the target to avoid drift across many intervals.
    for (auto& L : levels_) {
      if (L.patches.empty() && L.number != 1) continue;
      L.t = t_target;
      for (auto& p : L.patches) p.t = t_target;
    }
  }

  long cell_steps(int l) const { return levels_.at(std::size_t(l)).cell_steps; }

  long cell_steps_at_or_above(int lmin) const {
    long n = 0;
    for (int l = lmin; l <= amr_.max_levels; ++l) n += levels_[std::size_t(l)].cell_steps;
    return n;
  }

  /// Value of the finest level covering each base cell is not needed; level 1 holds averages.
  const Patch& base_patch() const { return levels_[1].patches.front(); }

  /// Finest patch containing a point, or nullptr.
  const Patch* finest_patch_at(double x, double y) const {
    for (int l = amr_.max_levels; l >= 1; --l)
      for (const auto& p : levels_[std::size_t(l)].patches)
        if (p.contains_point(x, y)) return &p;
    return nullptr;
  }

  /**
   * Nesting check: each level-(l+1) box, coarsened and grown by the buffer
   * (clipped to the domain), lies in the union of level-l boxes; patches on
   * one level are disjoint. Returns an empty string when all hold.
   */
  std::string check_nesting() const {
    for (int l = 1; l <= amr_.max_levels; ++l) {
      const auto& P = levels_[std::size_t(l)].patches;
      for (std::size_t a = 0; a < P.size(); ++a)
        for (std::size_t b = a + 1; b < P.size(); ++b)
          if (!intersect(P[a].box(), P[b].box()).empty())
            return "overlapping patches on level " + std::to_string(l);
      if (l == 1) continue;
      const auto& C = levels_[std::size_t(l - 1)];
      const Box dom = C.geom.box;
      for (const auto& p : P) {
        const Box need = intersect(
            grow(coarsen(p.box(), amr_.ratio(l - 1), dom_.dim), amr_.buffer, dom_.dim), dom);
        for (int j = need.lo[1]; j <= need.hi[1]; ++j)
          for (int i = need.lo[0]; i <= need.hi[0]; ++i) {
            bool ok = false;
            for (const auto& c : C.patches) ok = ok || c.box().contains(i, j);
            if (!ok)
              return "level " + std::to_string(l) + " patch not nested in level " +
                     std::to_string(l - 1) + " with margin";
          }
      }
    }
    return {};
  }

 private:
  struct Backup {
    std::vector<Level> levels;
    std::vector<Gauge> gauges;
    long regrid_count;
  };

  Backup save() const { return {levels_, gauges_, regrid_count_}; }
  void restore(Backup b) {
    levels_ = std::move(b.levels);
    gauges_ = std::move(b.gauges);
    regrid_count_ = b.regrid_count;
  }

  Patch make_patch(int l, const Box& box) const {
    PatchGeometry g = levels_[std::size_t(l)].geom;
    g.box = box;
    Patch p(l, g);
    const Box gb = p.grown_box();
    const auto& h = hbar_[std::size_t(l)];
    const Box hb = h.grown_box();
    for (int j = gb.lo[1]; j <= gb.hi[1]; ++j)
      for (int i = gb.lo[0]; i <= gb.hi[0]; ++i)
        p.hbar(i, j) = hb.contains(i, j) ? h(i, j) : 0.0;
    p.t = p.t_old = levels_[std::size_t(l)].t;
    return p;
  }

  static void set_from_ic(Patch& p, const InitialCondition& ic) {
    for (int j = p.box().lo[1]; j <= p.box().hi[1]; ++j)
      for (int i = p.box().lo[0]; i <= p.box().hi[0]; ++i)
        p.q.set(i, j, p.wet(i, j) ? ic(p.geom.xc(i), p.geom.yc(j)) : State{});
  }

  detail::Composite composite(int l, bool old) const {
    const auto& L = levels_[std::size_t(l)];
    detail::Composite c{StateField(L.geom.box, 0, 0), FlagField(L.geom.box, 0, 0)};
    for (const auto& p : L.patches) {
      const auto& src = old ? p.q_old : p.q;
      for (int j = p.box().lo[1]; j <= p.box().hi[1]; ++j)
        for (int i = p.box().lo[0]; i <= p.box().hi[0]; ++i) {
          c.q.set(i, j, src.at(i, j));
          c.covered(i, j) = 1;
        }
    }
    return c;
  }

  State interpolate(int lc, const detail::Composite& c, int i, int j) const {
    return detail::interpolate_coarse(c, hbar_[std::size_t(lc)], amr_.ratio(lc), dom_.dim, i, j);
  }

  void fill_ghosts(int l) {
    auto& L = levels_[std::size_t(l)];
    if (l > 1) {
      const auto& C = levels_[std::size_t(l - 1)];
      const double t0c = C.patches.front().t_old, t1c = C.t;
      const double w = t1c > t0c ? (L.t - t0c) / (t1c - t0c) : 1.0;
      const auto& cold = coarse_old_[std::size_t(l - 1)];
      const auto& cnew = coarse_new_[std::size_t(l - 1)];
      const Box dom = L.geom.box;
      detail::parallel_for(L.patches.size(), amr_.threads, [&](std::size_t n) {
        Patch& p = L.patches[n];
        const Box gb = intersect(p.grown_box(), dom);
        for (int j = gb.lo[1]; j <= gb.hi[1]; ++j)
          for (int i = gb.lo[0]; i <= gb.hi[0]; ++i) {
            if (p.box().contains(i, j)) continue;
            if (!p.wet(i, j)) {
              p.q.set(i, j, State{});
              continue;
            }
            p.q.set(i, j, detail::blend(interpolate(l - 1, *cold, i, j),
                                        interpolate(l - 1, *cnew, i, j), w));
          }
      });
    }
    const LevelExtent ext = extent(l);
    for (auto& p : L.patches) {
      copy_from_neighbors(p, L.patches);
      fill_physical_ghosts(p, dom_, ext);
    }
  }

  void restrict_to(int lc) {
    const int r = amr_.ratio(lc);
    const int dim = dom_.dim;
    const double inv = 1.0 / (dim == 2 ? r * r : r);
    auto& C = levels_[std::size_t(lc)];
    const auto& F = levels_[std::size_t(lc + 1)];
    const auto& h = hbar_[std::size_t(lc)];
    for (const auto& fp : F.patches) {
      const Box cb = coarsen(fp.box(), r, dim);
      for (auto& cp : C.patches) {
        const Box ov = intersect(cb, cp.box());
        for (int j = ov.lo[1]; j <= ov.hi[1]; ++j)
          for (int i = ov.lo[0]; i <= ov.hi[0]; ++i) {
            if (!(h(i, j) > 0.0)) continue;
            State avg;
            for (int jj = 0; jj < (dim == 2 ? r : 1); ++jj)
              for (int ii = 0; ii < r; ++ii) {
                const State s = fp.q.at(i * r + ii, dim == 2 ? j * r + jj : 0);
                for (int k = 0; k < 3; ++k) avg[k] += s[k];
              }
            for (int k = 0; k < 3; ++k) avg[k] *= inv;
            cp.q.set(i, j, avg);
          }
      }
    }
  }

  void record_gauges_at(double) {
    for (auto& g : gauges_) {
      for (int l = amr_.max_levels; l >= 1; --l) {
        const auto& L = levels_[std::size_t(l)];
        const Patch* hit = nullptr;
        for (const auto& p : L.patches)
          if (p.contains_point(g.x, g.y)) hit = &p;
        if (!hit) continue;
        record_gauges(*hit, std::span<Gauge>(&g, 1), L.t);
        break;
      }
    }
  }

  /// Record gauges whose finest covering level is l.
  void record_level_gauges(int l) {
    const auto& L = levels_[std::size_t(l)];
    for (auto& g : gauges_) {
      bool finer = false;
      for (int m = l + 1; m <= amr_.max_levels && !finer; ++m)
        for (const auto& p : levels_[std::size_t(m)].patches)
          if (p.contains_point(g.x, g.y)) {
            finer = true;
            break;
          }
      if (finer) continue;
      for (const auto& p : L.patches)
        if (p.contains_point(g.x, g.y)) {
          record_gauges(p, std::span<Gauge>(&g, 1), L.t);
          break;
        }
    }
  }

  void advance_level(int l, double dt) {
    auto& L = levels_[std::size_t(l)];
    if (l < amr_.max_levels && L.step_count % amr_.regrid_interval == 0) regrid(l);

    for (auto& p : L.patches) {
      p.q_old = p.q;
      p.t_old = L.t;
    }
    fill_ghosts(l);
    detail::parallel_for(L.patches.size(), amr_.threads, [&](std::size_t n) {
      step_patch(L.patches[n], dt, Kernel::Forward, solver_);
    });
    L.cell_steps += L.cells();
    L.t += dt;
    ++L.step_count;
    for (auto& p : L.patches) p.t = L.t;

    if (l < amr_.max_levels && !levels_[std::size_t(l + 1)].patches.empty()) {
      coarse_old_[std::size_t(l)] = std::make_shared<detail::Composite>(composite(l, true));
      coarse_new_[std::size_t(l)] = std::make_shared<detail::Composite>(composite(l, false));
      const int r = amr_.ratio(l);
      for (int k = 0; k < r; ++k) advance_level(l + 1, dt / r);
      restrict_to(l);
    }
    record_level_gauges(l);
  }

  /// Refinement bounds at a cell center from the regions containing it.
  std::pair<int, int> level_bounds(double x, double y, double t) const {
    int lo = 1, hi = amr_.max_levels;
    bool any = false;
    for (const auto& r : amr_.regions) {
      if (!r.contains(x, y, t)) continue;
      if (!any) {
        lo = r.min_level;
        hi = r.max_level;
        any = true;
      } else {
        lo = std::max(lo, r.min_level);
        hi = std::max(hi, r.max_level);
      }
    }
    return {lo, std::min(hi, amr_.max_levels)};
  }

  /// Cells of level l whose buffer neighborhood (inside the domain) is covered by level l.
  FlagField nest_mask(int l) const {
    const auto& L = levels_[std::size_t(l)];
    const Box dom = L.geom.box;
    FlagField cov(dom, 0, 0), ok(dom, 0, 0);
    for (const auto& p : L.patches)
      for (int j = p.box().lo[1]; j <= p.box().hi[1]; ++j)
        for (int i = p.box().lo[0]; i <= p.box().hi[0]; ++i) cov(i, j) = 1;
    if (l == 1) return cov;
    const int m = amr_.buffer;
    for (const auto& p : L.patches)
      for (int j = p.box().lo[1]; j <= p.box().hi[1]; ++j)
        for (int i = p.box().lo[0]; i <= p.box().hi[0]; ++i) {
          const Box nb = intersect(grow(Box(i, j, i, j), m, dom_.dim), dom);
          ok(i, j) = count_flags(cov, nb) == nb.cells();
        }
    return ok;
  }

  /**
   * Rebuild levels lbase+1 .. max from flags on the old levels, finest first,
   * so each new level is forced to contain the next one with a margin.
   */
  void regrid(int lbase) {
    const int Lmax = amr_.max_levels;
    if (lbase >= Lmax) return;
    const int dim = dom_.dim;
    std::vector<std::vector<Box>> new_boxes(std::size_t(Lmax) + 2);
    RegridEvent ev;
    ev.index = regrid_count_++;
    ev.t = levels_[std::size_t(lbase)].t;
    ev.lbase = lbase;

    for (int lc = Lmax - 1; lc >= lbase; --lc) {
      const auto& L = levels_[std::size_t(lc)];
      if (L.patches.empty()) continue;
      const Box dom = L.geom.box;
      const double t = L.t;
      if (flag_cb_) flag_cb_(lc, L.patches, t);

      RegridLevelRecord rec;
      rec.level = lc;
      rec.flags = FlagField(dom, 0, 0);
      for (const auto& p : L.patches) {
        const FlagField f = flag_patch(p, t);
        for (int j = p.box().lo[1]; j <= p.box().hi[1]; ++j)
          for (int i = p.box().lo[0]; i <= p.box().hi[0]; ++i) {
            const auto [lmin, lmax] = level_bounds(p.geom.xc(i), p.geom.yc(j), t);
            std::uint8_t v = f(i, j);
            if (lc + 1 > lmax) v = 0;
            if (lc + 1 <= lmin && p.wet(i, j)) v = 1;
            rec.flags(i, j) = v;
          }
      }

      FlagField work = rec.flags;
      const int rf = amr_.ratio(lc);
      for (const auto& b : new_boxes[std::size_t(lc + 2)]) {
        const Box mid = grow(coarsen(b, amr_.ratio(lc + 1), dim), amr_.buffer, dim);
        const Box cb = intersect(coarsen(mid, rf, dim), dom);
        for (int j = cb.lo[1]; j <= cb.hi[1]; ++j)
          for (int i = cb.lo[0]; i <= cb.hi[0]; ++i) work(i, j) = 1;
      }
      rec.allowed = nest_mask(lc);
      rec.buffered = dilate(work, amr_.buffer, dim);
      for (int j = dom.lo[1]; j <= dom.hi[1]; ++j)
        for (int i = dom.lo[0]; i <= dom.hi[0]; ++i)
          if (!rec.allowed(i, j)) rec.buffered(i, j) = 0;

      rec.boxes = cluster_flags(rec.buffered, ClusterOptions{amr_.efficiency, dim, &rec.allowed});
      for (const auto& b : rec.boxes) new_boxes[std::size_t(lc + 1)].push_back(refine(b, rf, dim));
      ev.levels.push_back(std::move(rec));
    }

    for (int l = lbase + 1; l <= Lmax; ++l) {
      auto& L = levels_[std::size_t(l)];
      L.t = levels_[std::size_t(l - 1)].t;
      std::vector<Patch> old = std::move(L.patches);
      L.patches.clear();
      const auto& boxes = new_boxes[std::size_t(l)];
      if (boxes.empty()) continue;
      const auto src = composite(l - 1, false);
      for (const auto& b : boxes) {
        Patch p = make_patch(l, b);
        for (int j = b.lo[1]; j <= b.hi[1]; ++j)
          for (int i = b.lo[0]; i <= b.hi[0]; ++i)
            p.q.set(i, j, p.wet(i, j) ? interpolate(l - 1, src, i, j) : State{});
        for (const auto& o : old) {
          const Box ov = intersect(b, o.box());
          for (int j = ov.lo[1]; j <= ov.hi[1]; ++j)
            for (int i = ov.lo[0]; i <= ov.hi[0]; ++i) p.q.set(i, j, o.q.at(i, j));
        }
        if (ic_) set_from_ic(p, *ic_);
        p.q_old = p.q;
        L.patches.push_back(std::move(p));
      }
    }
    for (int l = lbase + 1; l <= Lmax; ++l)
      if (levels_[std::size_t(l)].patches.empty())
        for (int m = l + 1; m <= Lmax; ++m) levels_[std::size_t(m)].patches.clear();
    if (regrid_cb_) regrid_cb_(ev);
  }

  Domain dom_;
  SolverConfig solver_;
  AmrConfig amr_;
  std::vector<Level> levels_;          ///< index 0 unused
  std::vector<Array2<double>> hbar_;   ///< whole-level mean depth per level
  std::vector<std::shared_ptr<detail::Composite>> coarse_old_, coarse_new_;
  std::vector<Gauge> gauges_;
  const SnapshotStore* store_ = nullptr;
  FunctionalSpec spec_;
  const InitialCondition* ic_ = nullptr;
  std::function<void(const RegridEvent&)> regrid_cb_;
  std::function<void(int, const std::vector<Patch>&, double)> flag_cb_;
  long regrid_count_ = 0;
};

}  // namespace swadj
