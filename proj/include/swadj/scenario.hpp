/*
 * Scenario configuration, the adjoint-then-forward run pipeline,
 * output files and gauge comparison.
 *
 * Config files are INI: `[section]` headers with `key = value` lines.
 * Every key has a default; the effective configuration is echoed to
 * `config_used.cfg` in the output directory.
 */
#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include "json.hpp"

#include <chrono>
#include <map>
#include <set>

#include "swadj/hierarchy.hpp"

namespace swadj {

enum class HumpShape { Gaussian, Cosine };

struct InitialHump {
  HumpShape shape = HumpShape::Gaussian;
  double amplitude = 0.4;
  double center_x = 125e3, center_y = 0.0;
  double width = 10e3;

  State operator()(double x, double y, int dim) const {
    const double r = dim == 2 ? std::hypot(x - center_x, y - center_y) : std::abs(x - center_x);
    State s;
    if (shape == HumpShape::Gaussian)
      s.eta = amplitude * std::exp(-(r / width) * (r / width));
    else if (r < width)
      s.eta = amplitude * 0.5 * (1.0 + std::cos(M_PI * r / width));
    return s;
  }
};

struct GaugeSpec {
  int id = 0;
  double x = 0.0, y = 0.0;
};

struct ScenarioConfig {
  Domain domain;
  int nx = 400, ny = 1;

  std::string bathymetry_source = "step_shelf_1d";  ///< builtin name or raster path
  double mean_surface = 0.0;
  StepShelfParams step_shelf;
  RadialShelfParams radial_shelf;

  InitialHump initial;
  bool has_functional = true;
  FunctionalSpec functional;

  SolverConfig solver;
  AmrConfig amr;

  int adjoint_nx = 0, adjoint_ny = 0;  ///< 0 selects the base grid
  double snapshot_interval = 0.0;      ///< 0 selects (tf - t0) / 100
  std::string adjoint_store;           ///< prior snapshot directory to load instead of solving
  bool save_snapshots = true;

  std::vector<GaugeSpec> gauges;

  std::string output_dir = "output";
  double t_end = 0.0;            ///< 0 selects functional tf
  double output_interval = 0.0;  ///< 0 selects the snapshot interval
  bool write_xt = true;
  bool write_flag_maps = true;
  bool write_frames = true;
  double xt_threshold = 0.1;

  std::string base_dir = ".";  ///< directory relative paths resolve against

  void validate() const;
  double end_time() const { return t_end > 0 ? t_end : functional.tf; }
  double snapshot_dt() const {
    return snapshot_interval > 0 ? snapshot_interval : (functional.tf - functional.t0) / 100.0;
  }
  double output_dt() const { return output_interval > 0 ? output_interval : snapshot_dt(); }
  bool needs_adjoint() const {
    return amr.criterion == FlagCriterion::Adjoint || (has_functional && domain.dim == 1 && write_xt);
  }
};

// ---------------------------------------------------------------------------
// INI parsing

namespace detail {

using boost::property_tree::ptree;

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"domain", {"dim", "x_lower", "x_upper", "y_lower", "y_upper", "nx", "ny", "bc_xlower",
                  "bc_xupper", "bc_ylower", "bc_yupper"}},
      {"bathymetry", {"source", "mean_surface", "shelf_edge", "shelf_depth", "ocean_depth",
                      "spacing", "center_x", "center_y", "island_radius", "island_height",
                      "shelf_radius", "slope_width"}},
      {"initial", {"shape", "amplitude", "center_x", "center_y", "width"}},
      {"functional", {"enabled", "target", "x_min", "x_max", "center_x", "center_y", "radius",
                      "t0", "ts", "tf", "mode"}},
      {"solver", {"g", "cfl_target", "cfl_max", "order", "limiter"}},
      {"amr", {"levels", "ratios", "regrid_interval", "buffer", "efficiency", "criterion",
               "tol_surface", "tol_adjoint", "threads"}},
      {"adjoint", {"nx", "ny", "snapshot_interval", "store", "save_snapshots"}},
      {"output", {"dir", "t_end", "interval", "xt", "flag_maps", "frames", "xt_threshold"}},
  };
  return keys;
}

inline const std::set<std::string>& region_keys() {
  static const std::set<std::string> k = {"min_level", "max_level", "x1", "x2", "y1", "y2", "t1", "t2"};
  return k;
}

class Reader {
 public:
  explicit Reader(const ptree& pt) : pt_(pt) {}

  double num(const std::string& sec, const std::string& key, double def) const {
    auto v = raw(sec, key);
    if (!v) return def;
    double out;
    if (!parse_double(trim(*v), out)) throw ConfigError(sec + "." + key + ": expected a number, got '" + *v + "'");
    return out;
  }
  int integer(const std::string& sec, const std::string& key, int def) const {
    const double v = num(sec, key, def);
    if (v != std::floor(v)) throw ConfigError(sec + "." + key + ": expected an integer");
    return int(v);
  }
  std::string str(const std::string& sec, const std::string& key, const std::string& def) const {
    auto v = raw(sec, key);
    return v ? trim(*v) : def;
  }
  bool boolean(const std::string& sec, const std::string& key, bool def) const {
    auto v = raw(sec, key);
    if (!v) return def;
    const std::string s = lower(trim(*v));
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(sec + "." + key + ": expected a boolean, got '" + *v + "'");
  }
  std::optional<std::string> raw(const std::string& sec, const std::string& key) const {
    auto s = pt_.get_child_optional(ptree::path_type(sec, '\0'));
    if (!s) return std::nullopt;
    auto v = s->get_optional<std::string>(ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return *v;
  }

  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

 private:
  const ptree& pt_;
};

inline BoundaryKind parse_bc(const std::string& s, const std::string& field) {
  const std::string v = lower(s);
  if (v == "wall") return BoundaryKind::Wall;
  if (v == "extrapolation" || v == "extrap") return BoundaryKind::Extrapolation;
  throw ConfigError(field + ": expected wall or extrapolation, got '" + s + "'");
}

inline Limiter parse_limiter(const std::string& s) {
  const std::string v = lower(s);
  if (v == "none") return Limiter::None;
  if (v == "minmod") return Limiter::Minmod;
  if (v == "superbee") return Limiter::Superbee;
  if (v == "vanleer") return Limiter::VanLeer;
  if (v == "mc") return Limiter::MC;
  throw ConfigError("solver.limiter: unknown limiter '" + s + "'");
}

inline std::string limiter_name(Limiter l) {
  switch (l) {
    case Limiter::None: return "none";
    case Limiter::Minmod: return "minmod";
    case Limiter::Superbee: return "superbee";
    case Limiter::VanLeer: return "vanleer";
    case Limiter::MC: return "mc";
  }
  return "mc";
}

inline std::vector<double> parse_list(const std::string& s, const std::string& field) {
  std::vector<double> out;
  std::string tok;
  std::stringstream ss(s);
  while (std::getline(ss, tok, ',')) {
    double v;
    if (!parse_double(Reader::trim(tok), v)) throw ConfigError(field + ": bad list entry '" + tok + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

inline void ScenarioConfig::validate() const {
  domain.validate();
  if (nx < 1 || (domain.dim == 2 && ny < 1)) throw ConfigError("domain.nx/ny must be >= 1");
  solver.validate();
  amr.validate();
  if (has_functional) functional.validate();
  if (amr.criterion == FlagCriterion::Adjoint && !has_functional)
    throw ConfigError("amr.criterion = adjoint requires a [functional] section");
  if (!(initial.width > 0)) throw ConfigError("initial.width must be positive");
  if (!(end_time() > functional.t0)) throw ConfigError("output.t_end must exceed functional.t0");
  if (!(output_dt() > 0)) throw ConfigError("output.interval must be positive");
  if (!(xt_threshold > 0)) throw ConfigError("output.xt_threshold must be positive");
  if (domain.dim == 1 && initial.center_y != 0.0) throw ConfigError("initial.center_y is 2D only");
}

/// Parse a property tree produced from INI text; unknown sections and keys are errors.
inline ScenarioConfig parse_config(const boost::property_tree::ptree& pt) {
  using detail::Reader;
  const auto& known = detail::known_keys();
  for (const auto& [sec, child] : pt) {
    const bool is_region = sec.rfind("region", 0) == 0;
    if (sec == "gauges" || is_region) {
      for (const auto& [key, v] : child)
        if (is_region && !detail::region_keys().count(key))
          throw ConfigError("unknown key '" + sec + "." + key + "'");
      continue;
    }
    auto it = known.find(sec);
    if (it == known.end()) throw ConfigError("unknown config section '" + sec + "'");
    for (const auto& [key, v] : child)
      if (!it->second.count(key)) throw ConfigError("unknown key '" + sec + "." + key + "'");
  }

  Reader r(pt);
  ScenarioConfig c;
  auto& d = c.domain;
  d.dim = r.integer("domain", "dim", 1);
  d.lower[0] = r.num("domain", "x_lower", 0.0);
  d.upper[0] = r.num("domain", "x_upper", 400e3);
  d.lower[1] = r.num("domain", "y_lower", 0.0);
  d.upper[1] = r.num("domain", "y_upper", d.dim == 2 ? 400e3 : 1.0);
  c.nx = r.integer("domain", "nx", 400);
  c.ny = r.integer("domain", "ny", d.dim == 2 ? c.nx : 1);
  d.bc[0] = detail::parse_bc(r.str("domain", "bc_xlower", "wall"), "domain.bc_xlower");
  d.bc[1] = detail::parse_bc(r.str("domain", "bc_xupper", "wall"), "domain.bc_xupper");
  d.bc[2] = detail::parse_bc(r.str("domain", "bc_ylower", "wall"), "domain.bc_ylower");
  d.bc[3] = detail::parse_bc(r.str("domain", "bc_yupper", "wall"), "domain.bc_yupper");

  c.bathymetry_source = r.str("bathymetry", "source", d.dim == 2 ? "radial_shelf_2d" : "step_shelf_1d");
  c.mean_surface = r.num("bathymetry", "mean_surface", 0.0);
  c.step_shelf.shelf_edge = r.num("bathymetry", "shelf_edge", c.step_shelf.shelf_edge);
  c.step_shelf.shelf_depth = r.num("bathymetry", "shelf_depth", c.step_shelf.shelf_depth);
  c.step_shelf.ocean_depth = r.num("bathymetry", "ocean_depth", c.step_shelf.ocean_depth);
  c.radial_shelf.shelf_depth = c.step_shelf.shelf_depth;
  c.radial_shelf.ocean_depth = c.step_shelf.ocean_depth;
  c.step_shelf.spacing = r.num("bathymetry", "spacing", c.step_shelf.spacing);
  c.radial_shelf.spacing = r.num("bathymetry", "spacing", c.radial_shelf.spacing);
  c.radial_shelf.center_x = r.num("bathymetry", "center_x", c.radial_shelf.center_x);
  c.radial_shelf.center_y = r.num("bathymetry", "center_y", c.radial_shelf.center_y);
  c.radial_shelf.island_radius = r.num("bathymetry", "island_radius", c.radial_shelf.island_radius);
  c.radial_shelf.island_height = r.num("bathymetry", "island_height", c.radial_shelf.island_height);
  c.radial_shelf.shelf_radius = r.num("bathymetry", "shelf_radius", c.radial_shelf.shelf_radius);
  c.radial_shelf.slope_width = r.num("bathymetry", "slope_width", c.radial_shelf.slope_width);

  const std::string shape = detail::lower(r.str("initial", "shape", "gaussian"));
  if (shape == "gaussian") c.initial.shape = HumpShape::Gaussian;
  else if (shape == "cosine") c.initial.shape = HumpShape::Cosine;
  else throw ConfigError("initial.shape: expected gaussian or cosine, got '" + shape + "'");
  c.initial.amplitude = r.num("initial", "amplitude", c.initial.amplitude);
  c.initial.center_x = r.num("initial", "center_x", c.initial.center_x);
  c.initial.center_y = r.num("initial", "center_y", 0.0);
  c.initial.width = r.num("initial", "width", c.initial.width);

  auto& f = c.functional;
  c.has_functional = r.boolean("functional", "enabled", true);
  const std::string target = detail::lower(r.str("functional", "target", d.dim == 2 ? "disk" : "interval"));
  if (target == "interval") f.shape = TargetShape::Interval;
  else if (target == "disk") f.shape = TargetShape::Disk;
  else throw ConfigError("functional.target: expected interval or disk, got '" + target + "'");
  f.x_min = r.num("functional", "x_min", 10e3);
  f.x_max = r.num("functional", "x_max", 25e3);
  f.cx = r.num("functional", "center_x", 0.0);
  f.cy = r.num("functional", "center_y", 0.0);
  f.radius = r.num("functional", "radius", 1.0);
  f.t0 = r.num("functional", "t0", 0.0);
  f.tf = r.num("functional", "tf", 4200.0);
  f.ts = r.num("functional", "ts", f.tf);
  const std::string mode = detail::lower(r.str("functional", "mode", "single_time"));
  if (mode == "single_time") f.mode = FunctionalMode::SingleTime;
  else if (mode == "time_range") f.mode = FunctionalMode::TimeRange;
  else throw ConfigError("functional.mode: expected single_time or time_range, got '" + mode + "'");

  c.solver.g = r.num("solver", "g", 9.81);
  c.solver.cfl_target = r.num("solver", "cfl_target", 0.9);
  c.solver.cfl_max = r.num("solver", "cfl_max", 1.0);
  c.solver.order = r.integer("solver", "order", 2);
  c.solver.limiter = detail::parse_limiter(r.str("solver", "limiter", "mc"));

  auto& a = c.amr;
  a.max_levels = r.integer("amr", "levels", 1);
  for (double v : detail::parse_list(r.str("amr", "ratios", ""), "amr.ratios")) {
    if (v != std::floor(v)) throw ConfigError("amr.ratios: entries must be integers");
    a.ratios.push_back(int(v));
  }
  a.regrid_interval = r.integer("amr", "regrid_interval", 2);
  a.buffer = r.integer("amr", "buffer", 2);
  a.efficiency = r.num("amr", "efficiency", 0.7);
  const std::string crit = detail::lower(r.str("amr", "criterion", "surface"));
  if (crit == "surface") a.criterion = FlagCriterion::Surface;
  else if (crit == "adjoint") a.criterion = FlagCriterion::Adjoint;
  else throw ConfigError("amr.criterion: expected surface or adjoint, got '" + crit + "'");
  a.tol_surface = r.num("amr", "tol_surface", 0.1);
  a.tol_adjoint = r.num("amr", "tol_adjoint", 0.1);
  a.threads = r.integer("amr", "threads", 1);

  for (const auto& [sec, child] : pt) {
    if (sec.rfind("region", 0) != 0) continue;
    RefinementRegion reg;
    reg.min_level = r.integer(sec, "min_level", 1);
    reg.max_level = r.integer(sec, "max_level", a.max_levels);
    reg.x1 = r.num(sec, "x1", d.lower[0]);
    reg.x2 = r.num(sec, "x2", d.upper[0]);
    reg.y1 = r.num(sec, "y1", reg.y1);
    reg.y2 = r.num(sec, "y2", reg.y2);
    reg.t1 = r.num(sec, "t1", reg.t1);
    reg.t2 = r.num(sec, "t2", reg.t2);
    a.regions.push_back(reg);
  }

  c.adjoint_nx = r.integer("adjoint", "nx", 0);
  c.adjoint_ny = r.integer("adjoint", "ny", 0);
  c.snapshot_interval = r.num("adjoint", "snapshot_interval", 0.0);
  c.adjoint_store = r.str("adjoint", "store", "");
  c.save_snapshots = r.boolean("adjoint", "save_snapshots", true);

  if (auto g = pt.get_child_optional("gauges")) {
    for (const auto& [key, v] : *g) {
      GaugeSpec gs;
      double id;
      if (!detail::parse_double(key, id) || id != std::floor(id))
        throw ConfigError("gauges." + key + ": gauge ids must be integers");
      gs.id = int(id);
      const auto xy = detail::parse_list(v.get_value<std::string>(), "gauges." + key);
      if (xy.size() != std::size_t(d.dim))
        throw ConfigError("gauges." + key + ": expected " + std::to_string(d.dim) + " coordinate(s)");
      gs.x = xy[0];
      gs.y = d.dim == 2 ? xy[1] : 0.0;
      c.gauges.push_back(gs);
    }
  }

  c.output_dir = r.str("output", "dir", "output");
  c.t_end = r.num("output", "t_end", 0.0);
  c.output_interval = r.num("output", "interval", 0.0);
  c.write_xt = r.boolean("output", "xt", true);
  c.write_flag_maps = r.boolean("output", "flag_maps", true);
  c.write_frames = r.boolean("output", "frames", true);
  c.xt_threshold = r.num("output", "xt_threshold", 0.1);
  c.validate();
  return c;
}

/// `overrides` hold "section.key=value" strings applied over the file contents.
inline boost::property_tree::ptree read_config_tree(const std::string& path,
                                                    const std::vector<std::string>& overrides = {}) {
  boost::property_tree::ptree pt;
  if (!path.empty()) {
    try {
      boost::property_tree::read_ini(path, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ParseError(e.message() + " in '" + e.filename() + "'", int(e.line()));
    }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq)
      throw ConfigError("override '" + o + "' must look like section.key=value");
    const std::string sec = o.substr(0, dot), key = o.substr(dot + 1, eq - dot - 1);
    const boost::property_tree::ptree::path_type sec_path(sec, '\0');
    if (!pt.get_child_optional(sec_path)) pt.add_child(sec_path, boost::property_tree::ptree());
    pt.get_child(sec_path).put(boost::property_tree::ptree::path_type(key, '\0'), o.substr(eq + 1));
  }
  return pt;
}

inline ScenarioConfig load_config(const std::string& path,
                                  const std::vector<std::string>& overrides = {}) {
  ScenarioConfig c = parse_config(read_config_tree(path, overrides));
  if (!path.empty()) c.base_dir = std::filesystem::path(path).parent_path().string();
  if (c.base_dir.empty()) c.base_dir = ".";
  return c;
}

/// Effective configuration as INI text, every key explicit.
inline std::string format_config(const ScenarioConfig& c) {
  using detail::format_double;
  auto bc = [](BoundaryKind k) { return k == BoundaryKind::Wall ? "wall" : "extrapolation"; };
  std::ostringstream o;
  const auto& d = c.domain;
  o << "[domain]\ndim = " << d.dim << "\nx_lower = " << format_double(d.lower[0])
    << "\nx_upper = " << format_double(d.upper[0]) << "\ny_lower = " << format_double(d.lower[1])
    << "\ny_upper = " << format_double(d.upper[1]) << "\nnx = " << c.nx << "\nny = " << c.ny
    << "\nbc_xlower = " << bc(d.bc[0]) << "\nbc_xupper = " << bc(d.bc[1])
    << "\nbc_ylower = " << bc(d.bc[2]) << "\nbc_yupper = " << bc(d.bc[3]) << "\n\n";
  const bool radial = c.bathymetry_source == "radial_shelf_2d";
  o << "[bathymetry]\nsource = " << c.bathymetry_source << "\nmean_surface = "
    << format_double(c.mean_surface) << "\nshelf_edge = " << format_double(c.step_shelf.shelf_edge)
    << "\nshelf_depth = " << format_double(c.step_shelf.shelf_depth)
    << "\nocean_depth = " << format_double(c.step_shelf.ocean_depth) << "\nspacing = "
    << format_double(radial ? c.radial_shelf.spacing : c.step_shelf.spacing)
    << "\ncenter_x = " << format_double(c.radial_shelf.center_x)
    << "\ncenter_y = " << format_double(c.radial_shelf.center_y)
    << "\nisland_radius = " << format_double(c.radial_shelf.island_radius)
    << "\nisland_height = " << format_double(c.radial_shelf.island_height)
    << "\nshelf_radius = " << format_double(c.radial_shelf.shelf_radius)
    << "\nslope_width = " << format_double(c.radial_shelf.slope_width) << "\n\n";
  o << "[initial]\nshape = " << (c.initial.shape == HumpShape::Gaussian ? "gaussian" : "cosine")
    << "\namplitude = " << format_double(c.initial.amplitude)
    << "\ncenter_x = " << format_double(c.initial.center_x)
    << "\ncenter_y = " << format_double(c.initial.center_y)
    << "\nwidth = " << format_double(c.initial.width) << "\n\n";
  const auto& f = c.functional;
  o << "[functional]\nenabled = " << (c.has_functional ? "true" : "false")
    << "\ntarget = " << (f.shape == TargetShape::Interval ? "interval" : "disk")
    << "\nx_min = " << format_double(f.x_min) << "\nx_max = " << format_double(f.x_max)
    << "\ncenter_x = " << format_double(f.cx) << "\ncenter_y = " << format_double(f.cy)
    << "\nradius = " << format_double(f.radius) << "\nt0 = " << format_double(f.t0)
    << "\nts = " << format_double(f.ts) << "\ntf = " << format_double(f.tf)
    << "\nmode = " << (f.mode == FunctionalMode::SingleTime ? "single_time" : "time_range") << "\n\n";
  o << "[solver]\ng = " << format_double(c.solver.g) << "\ncfl_target = "
    << format_double(c.solver.cfl_target) << "\ncfl_max = " << format_double(c.solver.cfl_max)
    << "\norder = " << c.solver.order << "\nlimiter = " << detail::limiter_name(c.solver.limiter)
    << "\n\n";
  const auto& a = c.amr;
  o << "[amr]\nlevels = " << a.max_levels << "\nratios = ";
  for (std::size_t k = 0; k < a.ratios.size(); ++k) o << (k ? "," : "") << a.ratios[k];
  o << "\nregrid_interval = " << a.regrid_interval << "\nbuffer = " << a.buffer
    << "\nefficiency = " << format_double(a.efficiency)
    << "\ncriterion = " << (a.criterion == FlagCriterion::Surface ? "surface" : "adjoint")
    << "\ntol_surface = " << format_double(a.tol_surface)
    << "\ntol_adjoint = " << format_double(a.tol_adjoint) << "\nthreads = " << a.threads << "\n\n";
  for (std::size_t k = 0; k < a.regions.size(); ++k) {
    const auto& g = a.regions[k];
    o << "[region" << k + 1 << "]\nmin_level = " << g.min_level << "\nmax_level = " << g.max_level
      << "\nx1 = " << format_double(g.x1) << "\nx2 = " << format_double(g.x2);
    if (std::isfinite(g.y1)) o << "\ny1 = " << format_double(g.y1);
    if (std::isfinite(g.y2)) o << "\ny2 = " << format_double(g.y2);
    if (std::isfinite(g.t1)) o << "\nt1 = " << format_double(g.t1);
    if (std::isfinite(g.t2)) o << "\nt2 = " << format_double(g.t2);
    o << "\n\n";
  }
  o << "[adjoint]\nnx = " << c.adjoint_nx << "\nny = " << c.adjoint_ny
    << "\nsnapshot_interval = " << format_double(c.snapshot_dt()) << "\nstore = " << c.adjoint_store
    << "\nsave_snapshots = " << (c.save_snapshots ? "true" : "false") << "\n\n";
  if (!c.gauges.empty()) {
    o << "[gauges]\n";
    for (const auto& g : c.gauges) {
      o << g.id << " = " << format_double(g.x);
      if (d.dim == 2) o << ", " << format_double(g.y);
      o << '\n';
    }
    o << '\n';
  }
  o << "[output]\ndir = " << c.output_dir << "\nt_end = " << format_double(c.end_time())
    << "\ninterval = " << format_double(c.output_dt()) << "\nxt = " << (c.write_xt ? "true" : "false")
    << "\nflag_maps = " << (c.write_flag_maps ? "true" : "false")
    << "\nframes = " << (c.write_frames ? "true" : "false")
    << "\nxt_threshold = " << format_double(c.xt_threshold) << '\n';
  return o.str();
}

inline Bathymetry make_bathymetry(const ScenarioConfig& c) {
  if (c.bathymetry_source == "step_shelf_1d") {
    if (c.domain.dim != 1) throw ConfigError("bathymetry.source step_shelf_1d needs domain.dim = 1");
    return step_shelf_1d(c.domain, c.step_shelf);
  }
  if (c.bathymetry_source == "radial_shelf_2d") {
    if (c.domain.dim != 2) throw ConfigError("bathymetry.source radial_shelf_2d needs domain.dim = 2");
    return radial_shelf_2d(c.domain, c.radial_shelf);
  }
  std::filesystem::path p(c.bathymetry_source);
  if (p.is_relative()) p = std::filesystem::path(c.base_dir) / p;
  return load_bathymetry(p.string());
}

// ---------------------------------------------------------------------------
// Running

struct RunReport {
  int dim = 1;
  std::string criterion;
  double wall_adjoint = 0.0, wall_forward = 0.0;
  std::vector<long> cell_steps;  ///< [l-1] for level l
  std::vector<std::string> gauge_files, flag_files;
  long regrid_events = 0;
  int finest_level = 1;
  std::string nesting_error;
  std::string snapshot_dir;

  long cell_steps_refined() const {
    long n = 0;
    for (std::size_t l = 1; l < cell_steps.size(); ++l) n += cell_steps[l];
    return n;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["dim"] = dim;
    j["criterion"] = criterion;
    j["wall_time_seconds"] = {{"adjoint", wall_adjoint}, {"forward", wall_forward}};
    j["cell_steps"] = cell_steps;
    j["cell_steps_refined"] = cell_steps_refined();
    j["gauge_files"] = gauge_files;
    j["flag_files"] = flag_files;
    j["regrid_events"] = regrid_events;
    j["finest_level"] = finest_level;
    j["nesting_ok"] = nesting_error.empty();
    if (!nesting_error.empty()) j["nesting_error"] = nesting_error;
    if (!snapshot_dir.empty()) j["snapshot_dir"] = snapshot_dir;
    return j;
  }
};

/// x-t aggregates on base cells: rows are output times.
struct XtData {
  std::vector<double> times;
  std::vector<std::vector<double>> eta, etahat, ip;
};

struct RunResult {
  RunReport report;
  std::vector<Gauge> gauges;
  XtData xt;
  std::shared_ptr<SnapshotStore> store;
};

struct RunHooks {
  std::function<void(const RegridEvent&, const Hierarchy&)> on_regrid;
  std::function<void(int, const std::vector<Patch>&, double, const Hierarchy&)> on_flag;
  bool write_files = true;
};

namespace detail {

inline void write_matrix(const std::filesystem::path& path, const std::vector<std::vector<double>>& m) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  for (const auto& row : m) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? " " : "") << format_double(row[k]);
    out << '\n';
  }
}

inline std::vector<std::vector<double>> read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    std::vector<double> row(toks.size());
    for (std::size_t k = 0; k < toks.size(); ++k)
      if (!parse_double(toks[k], row[k])) throw ParseError(path.filename().string() + ": non-numeric value", lineno);
    if (!m.empty() && row.size() != m.front().size())
      throw ParseError(path.filename().string() + ": ragged matrix", lineno);
    m.push_back(std::move(row));
  }
  return m;
}

inline void write_flag_block(std::ostream& out, long event, double t, const FlagField& f) {
  const Box& b = f.box();
  out << "# event " << event << " t " << format_double(t) << " nx " << b.size(0) << " ny "
      << b.size(1) << '\n';
  for (int j = b.lo[1]; j <= b.hi[1]; ++j) {
    for (int i = b.lo[0]; i <= b.hi[0]; ++i) out << (f(i, j) ? '1' : '0');
    out << '\n';
  }
}

}  // namespace detail

/// Adjoint phase alone: solve (or load) the snapshot store for a scenario.
inline std::shared_ptr<SnapshotStore> adjoint_phase(const ScenarioConfig& c, const Bathymetry& bathy) {
  if (!c.adjoint_store.empty()) {
    std::filesystem::path p(c.adjoint_store);
    if (p.is_relative()) p = std::filesystem::path(c.base_dir) / p;
    return std::make_shared<SnapshotStore>(SnapshotStore::load(p));
  }
  AdjointRunConfig ac;
  ac.grid = UniformGrid{c.domain, &bathy, c.adjoint_nx > 0 ? c.adjoint_nx : c.nx,
                        c.domain.dim == 2 ? (c.adjoint_ny > 0 ? c.adjoint_ny : c.ny) : 1,
                        c.mean_surface};
  ac.solver = c.solver;
  ac.functional = c.functional;
  ac.snapshot_interval = c.snapshot_dt();
  return std::make_shared<SnapshotStore>(run_adjoint(ac));
}

/**
 * Adjoint phase on a fixed grid (when needed), then the forward AMR phase.
 * With hooks.write_files, all outputs go to c.output_dir.
 */
inline RunResult run(const ScenarioConfig& c, const RunHooks& hooks = {}) {
  c.validate();
  namespace fs = std::filesystem;
  using clock = std::chrono::steady_clock;
  const bool files = hooks.write_files;
  const fs::path out = c.output_dir;
  if (files) {
    fs::create_directories(out);
    std::ofstream(out / "config_used.cfg") << format_config(c);
  }
  const Bathymetry bathy = make_bathymetry(c);

  RunResult res;
  res.report.dim = c.domain.dim;
  res.report.criterion = c.amr.criterion == FlagCriterion::Surface ? "surface" : "adjoint";

  if (c.needs_adjoint()) {
    const auto t0 = clock::now();
    res.store = adjoint_phase(c, bathy);
    res.report.wall_adjoint = std::chrono::duration<double>(clock::now() - t0).count();
    if (files && c.save_snapshots && c.adjoint_store.empty()) {
      res.store->save(out / "adjoint");
      res.report.snapshot_dir = (out / "adjoint").string();
    }
  }

  const auto tf0 = clock::now();
  Hierarchy h(c.domain, bathy, c.nx, c.ny, c.mean_surface, c.solver, c.amr);
  if (res.store) h.set_adjoint(res.store.get(), c.functional);
  std::vector<Gauge> gauges;
  for (const auto& g : c.gauges) gauges.push_back(Gauge{g.id, g.x, g.y, {}});
  h.set_gauges(std::move(gauges));

  std::map<int, std::ofstream> flag_out;
  std::ofstream patch_log;
  if (files) {
    patch_log.open(out / "patches.log");
    patch_log << "# event t level ilo jlo ihi jhi\n";
  }
  h.on_regrid([&](const RegridEvent& ev) {
    if (hooks.on_regrid) hooks.on_regrid(ev, h);
    if (!files) return;
    if (c.write_flag_maps)
      for (const auto& rec : ev.levels) {
        auto it = flag_out.find(rec.level);
        if (it == flag_out.end()) {
          const fs::path p = out / ("flags_level" + std::to_string(rec.level) + ".txt");
          it = flag_out.emplace(rec.level, std::ofstream(p)).first;
          res.report.flag_files.push_back(p.string());
        }
        detail::write_flag_block(it->second, ev.index, ev.t, rec.buffered);
      }
    for (int l = 1; l <= h.max_levels(); ++l)
      for (const auto& p : h.level(l).patches)
        patch_log << ev.index << ' ' << detail::format_double(ev.t) << ' ' << l << ' '
                  << p.box().lo[0] << ' ' << p.box().lo[1] << ' ' << p.box().hi[0] << ' '
                  << p.box().hi[1] << '\n';
  });
  if (hooks.on_flag)
    h.on_flag([&](int l, const std::vector<Patch>& ps, double t) { hooks.on_flag(l, ps, t, h); });

  const int dim = c.domain.dim;
  auto ic = [&](double x, double y) { return c.initial(x, y, dim); };
  const double t0 = c.functional.t0;
  h.initialize(ic, t0);

  const bool xt = c.write_xt && dim == 1;
  auto record_xt = [&](double t) {
    const Patch& base = h.base_patch();
    const Box& b = base.box();
    std::vector<double> eta, etahat, ip;
    for (int i = b.lo[0]; i <= b.hi[0]; ++i) eta.push_back(base.q.comp[0](i, 0));
    if (res.store) {
      const auto [lo, hi] = res.store->bracket(t);
      for (int i = b.lo[0]; i <= b.hi[0]; ++i) {
        double v = 0.0;
        for (auto k : {lo, hi}) {
          const auto s = res.store->sample(base.geom.xc(i), 0.0, k);
          if (!s.dry) v = std::max(v, std::abs(s.q.eta));
        }
        etahat.push_back(v);
      }
      const auto f = inner_product_field(base, *res.store, t, c.functional);
      for (int i = b.lo[0]; i <= b.hi[0]; ++i) ip.push_back(f(i, 0));
    }
    res.xt.times.push_back(t);
    res.xt.eta.push_back(std::move(eta));
    res.xt.etahat.push_back(std::move(etahat));
    res.xt.ip.push_back(std::move(ip));
  };
  int frame = 0;
  auto write_frame = [&](double t) {
    if (!files || !c.write_frames) return;
    const Patch& base = h.base_patch();
    SnapshotStore one(base.geom, base.hbar, c.output_dt());
    one.push(t, base.q);
    fs::create_directories(out / "frames");
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05d", frame++);
    one.save(out / "frames" / name);
  };

  const double t_end = c.end_time();
  const double dt_out = c.output_dt();
  const int n_out = std::max(1, int(std::ceil((t_end - t0) / dt_out * (1.0 - 1e-12))));
  if (xt) record_xt(t0);
  write_frame(t0);
  for (int k = 1; k <= n_out; ++k) {
    const double tk = std::min(t0 + k * dt_out, t_end);
    h.advance_to(tk);
    if (xt) record_xt(tk);
    write_frame(tk);
  }
  res.report.wall_forward = std::chrono::duration<double>(clock::now() - tf0).count();

  for (int l = 1; l <= h.max_levels(); ++l) res.report.cell_steps.push_back(h.cell_steps(l));
  res.report.regrid_events = h.regrid_count();
  res.report.finest_level = h.finest_level();
  res.report.nesting_error = h.check_nesting();
  res.gauges = h.gauges();

  if (files) {
    for (const auto& g : res.gauges) {
      const fs::path p = out / ("gauge_" + std::to_string(g.id) + ".csv");
      write_gauge_csv(p.string(), g, dim);
      res.report.gauge_files.push_back(p.string());
    }
    if (xt) {
      std::vector<std::vector<double>> times;
      for (double t : res.xt.times) times.push_back({t});
      detail::write_matrix(out / "xt_times.txt", times);
      detail::write_matrix(out / "xt_eta.txt", res.xt.eta);
      if (res.store) {
        detail::write_matrix(out / "xt_etahat.txt", res.xt.etahat);
        detail::write_matrix(out / "xt_ip.txt", res.xt.ip);
      }
    }
    for (auto& [l, s] : flag_out) s.close();
    std::ofstream(out / "report.json") << res.report.to_json().dump(2) << '\n';
  }
  return res;
}

// ---------------------------------------------------------------------------
// x-t masks

inline std::vector<std::vector<std::uint8_t>> threshold_mask(const std::vector<std::vector<double>>& m,
                                                             double threshold) {
  std::vector<std::vector<std::uint8_t>> out;
  for (const auto& row : m) {
    std::vector<std::uint8_t> r(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) r[k] = std::abs(row[k]) >= threshold;
    out.push_back(std::move(r));
  }
  return out;
}

/**
 * Read the x-t aggregates of a finished 1D run and write 0/1 masks
 * (mask_eta.txt, mask_etahat.txt, mask_ip.txt) at the threshold. Returns written paths.
 */
inline std::vector<std::string> emit_xt_aggregate(const std::filesystem::path& run_dir, double threshold) {
  namespace fs = std::filesystem;
  std::ifstream rep(run_dir / "report.json");
  if (!rep) throw ConfigError("no report.json in '" + run_dir.string() + "'");
  const auto j = nlohmann::json::parse(rep);
  if (j.value("dim", 1) != 1) throw ConfigError("x-t aggregates are only defined for 1D runs");
  if (!(threshold > 0)) throw ConfigError("x-t threshold must be positive");
  std::vector<std::string> written;
  for (const char* name : {"eta", "etahat", "ip"}) {
    const fs::path src = run_dir / (std::string("xt_") + name + ".txt");
    if (!fs::exists(src)) continue;
    const auto mask = threshold_mask(detail::read_matrix(src), threshold);
    const fs::path dst = run_dir / (std::string("mask_") + name + ".txt");
    std::ofstream out(dst);
    for (const auto& row : mask) {
      for (std::size_t k = 0; k < row.size(); ++k) out << (k ? " " : "") << int(row[k]);
      out << '\n';
    }
    written.push_back(dst.string());
  }
  if (written.empty()) throw ConfigError("no x-t data in '" + run_dir.string() + "'");
  return written;
}

// ---------------------------------------------------------------------------
// Gauge comparison

struct GaugeComparison {
  double max_abs_diff = 0.0;
  double rel_peak_error = 0.0;
  double arrival_time_diff = 0.0;
  double arrival_run = 0.0, arrival_ref = 0.0;
  double first_wave_error = 0.0;  ///< max |diff| / peak up to the end of the first wave
  double late_error = 0.0;        ///< max |diff| / peak afterwards
  bool first_wave_only = false;   ///< agreement degrades after the first wave

  nlohmann::json to_json() const {
    return {{"max_abs_diff", max_abs_diff},     {"rel_peak_error", rel_peak_error},
            {"arrival_time_diff", arrival_time_diff}, {"arrival_run", arrival_run},
            {"arrival_reference", arrival_ref}, {"first_wave_error", first_wave_error},
            {"late_error", late_error},         {"first_wave_only", first_wave_only}};
  }
};

/// Linear interpolation of (t, v) at time s; t strictly increasing, s inside [t.front, t.back].
inline double interp_series(const std::vector<double>& t, const std::vector<double>& v, double s) {
  if (s <= t.front()) return v.front();
  if (s >= t.back()) return v.back();
  const auto it = std::upper_bound(t.begin(), t.end(), s);
  const std::size_t k = std::size_t(it - t.begin());
  const double w = (s - t[k - 1]) / (t[k] - t[k - 1]);
  return (1 - w) * v[k - 1] + w * v[k];
}

/// First time |eta| reaches 10% of the series' peak |eta|.
inline double arrival_time(const std::vector<double>& t, const std::vector<double>& eta) {
  double peak = 0.0;
  for (double v : eta) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return t.empty() ? 0.0 : t.front();
  for (std::size_t k = 0; k < t.size(); ++k)
    if (std::abs(eta[k]) >= 0.1 * peak) {
      if (k == 0) return t[0];
      const double a = std::abs(eta[k - 1]), b = std::abs(eta[k]);
      return t[k - 1] + (0.1 * peak - a) / (b - a) * (t[k] - t[k - 1]);
    }
  return t.back();
}

/**
 * Compare a run's gauge series with a reference on the overlap of their time
 * ranges, resampling the run onto the reference times.
 */
inline GaugeComparison compare_gauges(const GaugeSeries& run, const GaugeSeries& ref) {
  const double lo = std::max(run.t.front(), ref.t.front());
  const double hi = std::min(run.t.back(), ref.t.back());
  if (!(hi > lo)) throw ConfigError("gauge series have disjoint time ranges");
  std::vector<double> ts, a, b;
  for (std::size_t k = 0; k < ref.t.size(); ++k) {
    if (ref.t[k] < lo || ref.t[k] > hi) continue;
    ts.push_back(ref.t[k]);
    b.push_back(ref.eta[k]);
    a.push_back(interp_series(run.t, run.eta, ref.t[k]));
  }
  GaugeComparison c;
  double peak_a = 0.0, peak_b = 0.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    c.max_abs_diff = std::max(c.max_abs_diff, std::abs(a[k] - b[k]));
    peak_a = std::max(peak_a, std::abs(a[k]));
    peak_b = std::max(peak_b, std::abs(b[k]));
  }
  c.rel_peak_error = peak_b > 0 ? std::abs(peak_a - peak_b) / peak_b : (peak_a > 0 ? 1.0 : 0.0);
  c.arrival_run = arrival_time(ts, a);
  c.arrival_ref = arrival_time(ts, b);
  c.arrival_time_diff = std::abs(c.arrival_run - c.arrival_ref);

  if (peak_b > 0) {
    // The first wave ends once the reference falls back below 10% of peak after its first crest.
    std::size_t k = 0;
    while (k < ts.size() && std::abs(b[k]) < 0.1 * peak_b) ++k;
    double crest = 0.0;
    std::size_t end = ts.size();
    for (; k < ts.size(); ++k) {
      crest = std::max(crest, std::abs(b[k]));
      if (crest >= 0.5 * peak_b && std::abs(b[k]) < 0.1 * peak_b) {
        end = k;
        break;
      }
    }
    for (std::size_t m = 0; m < ts.size(); ++m) {
      const double e = std::abs(a[m] - b[m]) / peak_b;
      if (m < end) c.first_wave_error = std::max(c.first_wave_error, e);
      else c.late_error = std::max(c.late_error, e);
    }
    c.first_wave_only = c.late_error > 0.1 && c.late_error > 2.0 * c.first_wave_error;
  }
  return c;
}

}  // namespace swadj
