/*
 * Functional definition, time-reversed adjoint runs, snapshot storage,
 * inner-product fields and adjoint identity checks.
 *
 * The adjoint q^ solves q^_t + (A^T q^)_x = 0 backward from q^(t_f) = phi.
 * It is computed as q~(s) = q^(t_f - s), which solves q~_s - (A^T q~)_x = 0
 * forward in s, and stored on one fixed uniform grid in increasing physical time.
 */
#pragma once

#include <Eigen/Dense>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include "swadj/solver.hpp"

namespace swadj {

enum class TargetShape { Interval, Disk };
enum class FunctionalMode { SingleTime, TimeRange };

/// Indicator functional phi = [I(x), 0, 0] over a target region.
struct FunctionalSpec {
  TargetShape shape = TargetShape::Interval;
  double x_min = 0.0, x_max = 0.0;               ///< Interval
  double cx = 0.0, cy = 0.0, radius = 0.0;       ///< Disk
  double t0 = 0.0, ts = 0.0, tf = 0.0;
  FunctionalMode mode = FunctionalMode::SingleTime;

  bool inside(double x, double y) const {
    if (shape == TargetShape::Interval) return x > x_min && x < x_max;
    return std::hypot(x - cx, y - cy) <= radius;
  }

  void validate() const {
    if (!(t0 <= ts && ts <= tf)) throw ConfigError("functional requires t0 <= ts <= tf");
    if (!(tf > t0)) throw ConfigError("functional requires tf > t0");
    if (shape == TargetShape::Interval && !(x_max > x_min))
      throw ConfigError("functional interval requires x_max > x_min");
    if (shape == TargetShape::Disk && !(radius > 0))
      throw ConfigError("functional disk requires radius > 0");
  }
};

/// phi on the cells of `g`; a cell belongs to the target when its center does.
inline StateField build_functional(const FunctionalSpec& spec, const PatchGeometry& g) {
  StateField phi(g.box, 0, 0);
  long count = 0;
  for (int j = g.box.lo[1]; j <= g.box.hi[1]; ++j)
    for (int i = g.box.lo[0]; i <= g.box.hi[0]; ++i)
      if (spec.inside(g.xc(i), g.yc(j))) {
        phi.comp[0](i, j) = 1.0;
        ++count;
      }
  if (count == 0) throw ConfigError("functional target contains no cell centers");
  return phi;
}

// ---------------------------------------------------------------------------
// Snapshot storage

/**
 * Time-ordered states on one uniform grid. Holds the adjoint snapshots and,
 * for identity checks, forward histories on the same grid.
 */
class SnapshotStore {
 public:
  struct Sample {
    State q;
    bool dry = false;
  };

  SnapshotStore() = default;
  SnapshotStore(const PatchGeometry& grid, Array2<double> hbar, double interval)
      : grid_(grid), hbar_(std::move(hbar)), interval_(interval) {}

  const PatchGeometry& grid() const { return grid_; }
  const Array2<double>& hbar() const { return hbar_; }
  double interval() const { return interval_; }
  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  const std::vector<double>& times() const { return times_; }
  double time(std::size_t k) const { return times_.at(k); }
  const StateField& snapshot(std::size_t k) const { return data_.at(k); }
  bool wet(int i, int j) const { return hbar_(i, j) > 0.0; }

  /// Append a snapshot; times must increase. Ghost layers are dropped.
  void push(double t, const StateField& q) {
    if (!times_.empty() && !(t > times_.back()))
      throw std::logic_error("snapshot times must be strictly increasing");
    StateField s(grid_.box, 0, 0);
    for (int j = grid_.box.lo[1]; j <= grid_.box.hi[1]; ++j)
      for (int i = grid_.box.lo[0]; i <= grid_.box.hi[0]; ++i) s.set(i, j, q.at(i, j));
    times_.push_back(t);
    data_.push_back(std::move(s));
  }

  /// Reverse the storage order (used when snapshots were generated in reversed time).
  void assign_reversed(std::vector<double> times, std::vector<StateField> data) {
    times_.assign(times.rbegin(), times.rend());
    data_.assign(std::make_move_iterator(data.rbegin()), std::make_move_iterator(data.rend()));
  }

  /// Index of a snapshot stored at exactly time t, if any.
  std::optional<std::size_t> find_exact(double t) const {
    const double tol = 1e-9 * std::max(1.0, std::abs(t));
    for (std::size_t k = 0; k < times_.size(); ++k)
      if (std::abs(times_[k] - t) <= tol) return k;
    return std::nullopt;
  }

  /// Snapshots at or just around t: {lo, hi} with time(lo) <= t <= time(hi), clamped to the stored range.
  std::pair<std::size_t, std::size_t> bracket(double t) const {
    if (times_.empty()) throw std::logic_error("bracket on empty snapshot store");
    if (auto k = find_exact(t)) return {*k, *k};
    if (t <= times_.front()) return {0, 0};
    if (t >= times_.back()) return {size() - 1, size() - 1};
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t hi = std::size_t(it - times_.begin());
    return {hi - 1, hi};
  }

  /**
   * Linear (1D) or bilinear (2D) interpolation from store cell centers.
   * A point whose stencil touches a dry store cell samples as dry.
   */
  Sample sample(double x, double y, std::size_t k) const {
    const auto& g = grid_;
    const double xa = g.xlo + g.box.lo[0] * g.dx, xb = g.xlo + (g.box.hi[0] + 1) * g.dx;
    const double tol = 1e-9 * g.dx;
    if (x < xa - tol || x > xb + tol) throw std::out_of_range("sample outside snapshot grid");
    auto axis = [](double s, int lo, int hi) {
      if (hi == lo) return std::pair<int, double>{lo, 0.0};
      const double f = s - 0.5;
      const int i0 = std::clamp(int(std::floor(f)), lo, hi - 1);
      return std::pair<int, double>{i0, std::clamp(f - i0, 0.0, 1.0)};
    };
    const auto [i0, wx] = axis((x - g.xlo) / g.dx, g.box.lo[0], g.box.hi[0]);
    const int i1 = std::min(i0 + 1, g.box.hi[0]);
    const auto& q = data_.at(k);
    Sample s;
    if (g.dim == 1) {
      if (!wet(i0, 0) || (wx > 0 && !wet(i1, 0))) return {State{}, true};
      for (int c = 0; c < 3; ++c) s.q[c] = (1 - wx) * q.comp[c](i0, 0) + wx * q.comp[c](i1, 0);
      return s;
    }
    const double ya = g.ylo + g.box.lo[1] * g.dy, yb = g.ylo + (g.box.hi[1] + 1) * g.dy;
    if (y < ya - 1e-9 * g.dy || y > yb + 1e-9 * g.dy)
      throw std::out_of_range("sample outside snapshot grid");
    const auto [j0, wy] = axis((y - g.ylo) / g.dy, g.box.lo[1], g.box.hi[1]);
    const int j1 = std::min(j0 + 1, g.box.hi[1]);
    const double w[4] = {(1 - wx) * (1 - wy), wx * (1 - wy), (1 - wx) * wy, wx * wy};
    const int ii[4] = {i0, i1, i0, i1}, jj[4] = {j0, j0, j1, j1};
    for (int n = 0; n < 4; ++n)
      if (w[n] > 0 && !wet(ii[n], jj[n])) return {State{}, true};
    for (int c = 0; c < 3; ++c) {
      double v = 0.0;
      for (int n = 0; n < 4; ++n) v += w[n] * q.comp[c](ii[n], jj[n]);
      s.q[c] = v;
    }
    return s;
  }

  /// One file per snapshot plus index.txt and depth.txt in `dir`.
  void save(const std::filesystem::path& dir) const;
  static SnapshotStore load(const std::filesystem::path& dir);

 private:
  PatchGeometry grid_;
  Array2<double> hbar_;
  double interval_ = 0.0;
  std::vector<double> times_;
  std::vector<StateField> data_;
};

namespace detail {

inline void write_grid_header(std::ostream& out, const PatchGeometry& g) {
  out << "dim " << g.dim << "\nnx " << g.box.size(0) << "\nny " << g.box.size(1) << "\ndx "
      << format_double(g.dx) << "\ndy " << format_double(g.dy) << "\nxlo " << format_double(g.xlo)
      << "\nylo " << format_double(g.ylo) << '\n';
}

inline void write_rows(std::ostream& out, const Array2<double>& a) {
  const Box& b = a.box();
  for (int j = b.lo[1]; j <= b.hi[1]; ++j) {
    for (int i = b.lo[0]; i <= b.hi[0]; ++i) {
      if (i > b.lo[0]) out << ' ';
      out << format_double(a(i, j));
    }
    out << '\n';
  }
}

/// Line reader with "key value" headers and numeric rows.
class TokenReader {
 public:
  TokenReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  double keyed(const std::string& key) {
    auto toks = next_tokens();
    double v;
    if (toks.size() != 2 || toks[0] != key || !parse_double(toks[1], v))
      throw ParseError(name_ + ": expected '" + key + " <value>'", line_);
    return v;
  }
  void expect(const std::string& word) {
    auto toks = next_tokens();
    if (toks.size() != 1 || toks[0] != word)
      throw ParseError(name_ + ": expected '" + word + "'", line_);
  }
  void read_rows(Array2<double>& a) {
    const Box& b = a.box();
    for (int j = b.lo[1]; j <= b.hi[1]; ++j) {
      auto toks = next_tokens();
      if (int(toks.size()) != b.size(0)) throw ParseError(name_ + ": row length mismatch", line_);
      for (int i = b.lo[0]; i <= b.hi[0]; ++i)
        if (!parse_double(toks[std::size_t(i - b.lo[0])], a(i, j)))
          throw ParseError(name_ + ": non-numeric value", line_);
    }
  }

 private:
  std::vector<std::string> next_tokens() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      auto sv = split_ws(line);
      if (sv.empty()) continue;
      return std::vector<std::string>(sv.begin(), sv.end());
    }
    throw ParseError(name_ + ": unexpected end of file", line_);
  }

  std::istream& in_;
  std::string name_;
  int line_ = 0;
};

inline PatchGeometry read_grid_header(TokenReader& r) {
  PatchGeometry g;
  g.dim = int(r.keyed("dim"));
  const int nx = int(r.keyed("nx")), ny = int(r.keyed("ny"));
  g.dx = r.keyed("dx");
  g.dy = r.keyed("dy");
  g.xlo = r.keyed("xlo");
  g.ylo = r.keyed("ylo");
  if ((g.dim != 1 && g.dim != 2) || nx < 1 || ny < 1 || (g.dim == 1 && ny != 1))
    throw ConfigError("invalid grid descriptor in snapshot file");
  g.box = Box(0, 0, nx - 1, ny - 1);
  return g;
}

inline std::string snapshot_name(std::size_t k) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "snapshot_%05zu.txt", k);
  return buf;
}

}  // namespace detail

inline void SnapshotStore::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream idx(dir / "index.txt");
    if (!idx) throw ConfigError("cannot write snapshot index in '" + dir.string() + "'");
    idx << "interval " << detail::format_double(interval_) << "\ncount " << size() << '\n';
    for (std::size_t k = 0; k < size(); ++k)
      idx << k << ' ' << detail::format_double(times_[k]) << ' ' << detail::snapshot_name(k) << '\n';
  }
  {
    std::ofstream d(dir / "depth.txt");
    detail::write_grid_header(d, grid_);
    Array2<double> h(grid_.box, 0, 0);
    for (int j = grid_.box.lo[1]; j <= grid_.box.hi[1]; ++j)
      for (int i = grid_.box.lo[0]; i <= grid_.box.hi[0]; ++i) h(i, j) = hbar_(i, j);
    d << "hbar\n";
    detail::write_rows(d, h);
  }
  static const char* names[3] = {"eta", "mu", "gamma"};
  for (std::size_t k = 0; k < size(); ++k) {
    std::ofstream out(dir / detail::snapshot_name(k));
    out << "time " << detail::format_double(times_[k]) << '\n';
    detail::write_grid_header(out, grid_);
    for (int c = 0; c < (grid_.dim == 2 ? 3 : 2); ++c) {
      out << names[c] << '\n';
      detail::write_rows(out, data_[k].comp[c]);
    }
  }
}

inline SnapshotStore SnapshotStore::load(const std::filesystem::path& dir) {
  std::ifstream d(dir / "depth.txt");
  if (!d) throw ConfigError("missing depth.txt in snapshot directory '" + dir.string() + "'");
  detail::TokenReader dr(d, "depth.txt");
  PatchGeometry g = detail::read_grid_header(dr);
  Array2<double> h(g.box, 0, 0);
  dr.expect("hbar");
  dr.read_rows(h);

  std::ifstream idx(dir / "index.txt");
  if (!idx) throw ConfigError("missing index.txt in snapshot directory '" + dir.string() + "'");
  detail::TokenReader ir(idx, "index.txt");
  const double interval = ir.keyed("interval");
  const auto count = std::size_t(ir.keyed("count"));
  SnapshotStore store(g, std::move(h), interval);
  static const char* names[3] = {"eta", "mu", "gamma"};
  for (std::size_t k = 0; k < count; ++k) {
    const std::string name = detail::snapshot_name(k);
    std::ifstream in(dir / name);
    if (!in) throw ConfigError("missing snapshot file '" + name + "'");
    detail::TokenReader r(in, name);
    const double t = r.keyed("time");
    const PatchGeometry gk = detail::read_grid_header(r);
    if (gk.box != g.box || gk.dim != g.dim) throw ConfigError(name + ": grid mismatch");
    StateField q(g.box, 0, 0);
    for (int c = 0; c < (g.dim == 2 ? 3 : 2); ++c) {
      r.expect(names[c]);
      r.read_rows(q.comp[c]);
    }
    store.push(t, q);
  }
  return store;
}

// ---------------------------------------------------------------------------
// Uniform-grid runs

/// Fixed uniform grid shared by adjoint solves and identity checks.
struct UniformGrid {
  Domain domain;
  const Bathymetry* bathymetry = nullptr;
  int nx = 100, ny = 1;
  double mean_surface = 0.0;
};

/// Number of equal steps and their size covering `interval` at or below the stable step.
inline std::pair<int, double> uniform_steps(double interval, double dt_stable) {
  const int m = std::max(1, int(std::ceil(interval / dt_stable * (1.0 - 1e-12))));
  return {m, interval / m};
}

/**
 * Advance `p` from `t_start`, saving its state every `interval` for `count` intervals.
 * Saved times are t_start + k*interval, k = 0..count (the initial state included).
 */
inline std::vector<StateField> run_with_snapshots(Patch& p, const Domain& dom, Kernel kernel,
                                                  const SolverConfig& cfg, double interval,
                                                  int count, double dt_stable) {
  std::vector<StateField> out;
  out.reserve(std::size_t(count) + 1);
  auto copy_interior = [&] {
    StateField s(p.box(), 0, 0);
    for (int j = p.box().lo[1]; j <= p.box().hi[1]; ++j)
      for (int i = p.box().lo[0]; i <= p.box().hi[0]; ++i) s.set(i, j, p.q.at(i, j));
    return s;
  };
  out.push_back(copy_interior());
  const auto [m, dt] = uniform_steps(interval, dt_stable);
  for (int k = 0; k < count; ++k) {
    integrate_uniform(p, dom, kernel, cfg, dt, m);
    out.push_back(copy_interior());
  }
  return out;
}

struct AdjointRunConfig {
  UniformGrid grid;
  SolverConfig solver;
  FunctionalSpec functional;
  double snapshot_interval = 0.0;  ///< 0 selects (tf - t0) / 100
  double dt_stable = 0.0;          ///< 0 selects the grid's own stable step
};

inline double snapshot_interval_of(const AdjointRunConfig& c) {
  return c.snapshot_interval > 0 ? c.snapshot_interval
                                 : (c.functional.tf - c.functional.t0) / 100.0;
}

/**
 * Solve the reversed adjoint from phi over s in [0, tf - t0] and store
 * q^(tf - s) at s = k * interval, ordered by increasing physical time.
 */
inline SnapshotStore run_adjoint(const AdjointRunConfig& c) {
  c.functional.validate();
  c.solver.validate();
  if (!c.grid.bathymetry) throw ConfigError("adjoint run needs a bathymetry");
  const auto& f = c.functional;
  Patch p = make_uniform_patch(c.grid.domain, *c.grid.bathymetry, c.grid.nx, c.grid.ny,
                               c.grid.mean_surface);
  const StateField phi = build_functional(f, p.geom);
  bool any_wet = false;
  for (int j = p.box().lo[1]; j <= p.box().hi[1]; ++j)
    for (int i = p.box().lo[0]; i <= p.box().hi[0]; ++i) {
      if (phi.comp[0](i, j) != 0.0 && p.wet(i, j)) {
        p.q.set(i, j, phi.at(i, j));
        any_wet = true;
      }
    }
  if (!any_wet) throw ConfigError("functional target lies entirely on dry cells");

  const double interval = snapshot_interval_of(c);
  if (!(interval > 0)) throw ConfigError("snapshot interval must be positive");
  const int count = int(std::floor((f.tf - f.t0) / interval * (1.0 + 1e-12)));
  const double dt_stable = c.dt_stable > 0 ? c.dt_stable : compute_stable_dt(p, c.solver);
  auto states = run_with_snapshots(p, c.grid.domain, Kernel::Adjoint, c.solver, interval, count,
                                   dt_stable);

  std::vector<double> times;
  for (int k = 0; k <= count; ++k) times.push_back(f.tf - k * interval);
  Array2<double> h(p.box(), 0, 0);
  for (int j = p.box().lo[1]; j <= p.box().hi[1]; ++j)
    for (int i = p.box().lo[0]; i <= p.box().hi[0]; ++i) h(i, j) = p.hbar(i, j);
  SnapshotStore store(p.geom, std::move(h), interval);
  store.assign_reversed(std::move(times), std::move(states));
  return store;
}

/// Forward history on the store's grid, saved at t0 + k * interval.
inline SnapshotStore run_forward_history(const UniformGrid& grid, const SolverConfig& cfg,
                                         const std::function<State(double, double)>& initial,
                                         double t0, double interval, int count,
                                         double dt_stable = 0.0) {
  Patch p = make_uniform_patch(grid.domain, *grid.bathymetry, grid.nx, grid.ny, grid.mean_surface);
  for (int j = p.box().lo[1]; j <= p.box().hi[1]; ++j)
    for (int i = p.box().lo[0]; i <= p.box().hi[0]; ++i)
      if (p.wet(i, j)) p.q.set(i, j, initial(p.geom.xc(i), p.geom.yc(j)));
  p.t = t0;
  if (!(dt_stable > 0)) dt_stable = compute_stable_dt(p, cfg);
  auto states = run_with_snapshots(p, grid.domain, Kernel::Forward, cfg, interval, count, dt_stable);
  Array2<double> h(p.box(), 0, 0);
  for (int j = p.box().lo[1]; j <= p.box().hi[1]; ++j)
    for (int i = p.box().lo[0]; i <= p.box().hi[0]; ++i) h(i, j) = p.hbar(i, j);
  SnapshotStore hist(p.geom, std::move(h), interval);
  for (int k = 0; k <= count; ++k) hist.push(t0 + k * interval, states[std::size_t(k)]);
  return hist;
}

// ---------------------------------------------------------------------------
// Inner products

/// Snapshot indices entering the inner-product maximum at time t.
inline std::vector<std::size_t> tau_set(const SnapshotStore& store, double t,
                                        const FunctionalSpec& spec) {
  std::vector<std::size_t> ks;
  auto add = [&](std::size_t k) {
    if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
  };
  auto [lo, hi] = store.bracket(t);
  add(lo);
  add(hi);
  if (spec.mode == FunctionalMode::TimeRange) {
    const double T = std::min(t + spec.tf - spec.ts, spec.tf);
    for (std::size_t k = 0; k < store.size(); ++k)
      if (store.time(k) >= t && store.time(k) <= T) add(k);
    auto [lo2, hi2] = store.bracket(T);
    add(lo2);
    add(hi2);
  }
  std::sort(ks.begin(), ks.end());
  if (ks.empty()) throw std::logic_error("empty tau set");
  return ks;
}

/// Per-cell max over the tau set of |q^(tau) . q(t)|; zero where either solution is dry.
inline Array2<double> inner_product_field(const Patch& p, const SnapshotStore& store, double t,
                                          const FunctionalSpec& spec) {
  const Box& box = p.box();
  Array2<double> ip(box, 0, 0);
  const auto ks = tau_set(store, t, spec);
  for (int j = box.lo[1]; j <= box.hi[1]; ++j)
    for (int i = box.lo[0]; i <= box.hi[0]; ++i) {
      if (!p.wet(i, j)) continue;
      const State q = p.q.at(i, j);
      if (q.eta == 0.0 && q.mu == 0.0 && q.gamma == 0.0) continue;
      double best = 0.0;
      for (auto k : ks) {
        const auto s = store.sample(p.geom.xc(i), p.geom.yc(j), k);
        if (s.dry) {
          best = 0.0;
          break;
        }
        best = std::max(best, std::abs(dot(s.q, q)));
      }
      ip(i, j) = best;
    }
  return ip;
}

/// Sum over cells of q^ . q * cell area for two states on the same grid.
inline double grid_inner_product(const StateField& a, const StateField& b, const PatchGeometry& g) {
  double s = 0.0;
  for (int j = g.box.lo[1]; j <= g.box.hi[1]; ++j)
    for (int i = g.box.lo[0]; i <= g.box.hi[0]; ++i) s += dot(a.at(i, j), b.at(i, j));
  return s * g.cell_area();
}

/**
 * |IP(t) - IP(t0)| / max(|IP(t0)|, 1e-14 * area) with IP(s) = sum q^(s).q(s) dA.
 * Both times must be stored exactly in both histories.
 */
inline double verify_adjoint_identity(const SnapshotStore& forward, const SnapshotStore& adjoint,
                                      double t, double t0) {
  const auto& gf = forward.grid();
  const auto& ga = adjoint.grid();
  if (gf.box != ga.box || gf.dim != ga.dim || std::abs(gf.dx - ga.dx) > 1e-12 * gf.dx ||
      std::abs(gf.dy - ga.dy) > 1e-12 * gf.dy)
    throw ConfigError("adjoint identity: forward and adjoint grids differ");
  auto at = [](const SnapshotStore& s, double time, const char* which) {
    auto k = s.find_exact(time);
    if (!k) throw ConfigError(std::string("adjoint identity: no ") + which + " state at t=" +
                              std::to_string(time));
    return *k;
  };
  const double ip_t = grid_inner_product(adjoint.snapshot(at(adjoint, t, "adjoint")),
                                         forward.snapshot(at(forward, t, "forward")), gf);
  const double ip_0 = grid_inner_product(adjoint.snapshot(at(adjoint, t0, "adjoint")),
                                         forward.snapshot(at(forward, t0, "forward")), gf);
  const double area = gf.box.cells() * gf.cell_area();
  return std::abs(ip_t - ip_0) / std::max(std::abs(ip_0), 1e-14 * area);
}

// ---------------------------------------------------------------------------
// Linear-algebra adjoint

struct AlgebraicAdjointReport {
  double j_forward = 0.0;       ///< phi . x
  double j_adjoint = 0.0;       ///< xhat . b
  double identity_error = 0.0;  ///< |j_forward - j_adjoint| / |j_forward|
  double sensitivity_error = 0.0;  ///< max_i |FD_i - xhat_i| / max|xhat|
  Eigen::VectorXd x, xhat;
};

/**
 * Solve A x = b and A^T xhat = phi by LU with partial pivoting, compare
 * J = phi.x with xhat.b, and check dJ/db_i = xhat_i by central differences.
 */
inline AlgebraicAdjointReport verify_algebraic_adjoint(const Eigen::MatrixXd& A,
                                                       const Eigen::VectorXd& b,
                                                       const Eigen::VectorXd& phi,
                                                       double eps = 1e-6) {
  if (A.rows() != A.cols() || A.rows() != b.size() || b.size() != phi.size())
    throw std::invalid_argument("verify_algebraic_adjoint: dimension mismatch");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  const double scale = A.cwiseAbs().maxCoeff();
  const auto& U = lu.matrixLU();
  for (Eigen::Index i = 0; i < U.rows(); ++i)
    if (!(std::abs(U(i, i)) > 1e-14 * scale)) throw NumericalError("singular matrix");

  AlgebraicAdjointReport r;
  r.x = lu.solve(b);
  r.xhat = lu.transpose().solve(phi);
  r.j_forward = phi.dot(r.x);
  r.j_adjoint = r.xhat.dot(b);
  r.identity_error = std::abs(r.j_forward - r.j_adjoint) / std::max(std::abs(r.j_forward), 1e-300);

  const double xhat_norm = std::max(r.xhat.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    Eigen::VectorXd bp = b, bm = b;
    bp[i] += eps;
    bm[i] -= eps;
    const double fd = (phi.dot(lu.solve(bp)) - phi.dot(lu.solve(bm))) / (2 * eps);
    r.sensitivity_error = std::max(r.sensitivity_error, std::abs(fd - r.xhat[i]) / xhat_norm);
  }
  return r;
}

/// Random diagonally dominant n x n system with fixed seed.
inline void random_well_conditioned(int n, std::uint32_t seed, Eigen::MatrixXd& A,
                                    Eigen::VectorXd& b, Eigen::VectorXd& phi) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  A.resize(n, n);
  b.resize(n);
  phi.resize(n);
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      A(i, j) = u(rng);
      row += std::abs(A(i, j));
    }
    A(i, i) = (u(rng) < 0 ? -1.0 : 1.0) * (row + 1.0);
    b[i] = u(rng);
    phi[i] = u(rng);
  }
}

}  // namespace swadj
