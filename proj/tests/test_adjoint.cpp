#include <gtest/gtest.h>

#include <filesystem>

#include "swadj/adjoint.hpp"

using namespace swadj;

namespace {

Domain line(double length) {
  Domain d;
  d.upper = {length, 1.0};
  return d;
}

Bathymetry flat1d(const Domain& d, double depth) {
  return sample_bathymetry([=](double, double) { return -depth; }, d.lower[0], d.upper[0], 0, 0,
                           d.length(0) / 100, true);
}

PatchGeometry grid1d(int nx, double length) {
  PatchGeometry g;
  g.box = Box(0, 0, nx - 1, 0);
  g.dx = length / nx;
  return g;
}

FunctionalSpec shelf_target(double tf = 4200) {
  FunctionalSpec f;
  f.x_min = 10e3;
  f.x_max = 25e3;
  f.tf = f.ts = tf;
  return f;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "swadj_test_adjoint" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Functional, IntervalOnKilometerGrid) {
  const auto phi = build_functional(shelf_target(), grid1d(400, 400e3));
  int n = 0;
  for (int i = 0; i < 400; ++i) {
    n += phi.comp[0](i, 0) == 1.0;
    EXPECT_EQ(phi.comp[1](i, 0), 0.0);
  }
  EXPECT_EQ(n, 15);
  EXPECT_EQ(phi.comp[0](10, 0), 1.0);
  EXPECT_EQ(phi.comp[0](24, 0), 1.0);
  EXPECT_EQ(phi.comp[0](25, 0), 0.0);
}

TEST(Functional, DiskIndicatorUsesCellCenters) {
  FunctionalSpec f;
  f.shape = TargetShape::Disk;
  f.cx = 235.80917;
  f.cy = 41.74111;
  f.radius = 1.0;
  f.tf = f.ts = 1;
  PatchGeometry g;
  g.dim = 2;
  g.box = Box(0, 0, 99, 79);
  g.dx = g.dy = 0.1;
  g.xlo = 230;
  g.ylo = 38;
  const auto phi = build_functional(f, g);
  int n = 0;
  for (int j = 0; j < 80; ++j)
    for (int i = 0; i < 100; ++i) {
      const bool in = std::hypot(g.xc(i) - f.cx, g.yc(j) - f.cy) <= 1.0;
      EXPECT_EQ(phi.comp[0](i, j), in ? 1.0 : 0.0);
      n += in;
    }
  EXPECT_NEAR(n, M_PI / 0.01, 15);
}

TEST(Functional, EmptyTargetIsAnError) {
  auto f = shelf_target();
  f.x_min = 500e3;
  f.x_max = 600e3;
  EXPECT_THROW(build_functional(f, grid1d(400, 400e3)), ConfigError);
  f = shelf_target();
  f.ts = 5000;
  EXPECT_THROW(f.validate(), ConfigError);
}

TEST(AdjointRun, ZeroDataGivesZeroSnapshots) {
  const auto d = line(400e3);
  const auto b = step_shelf_1d(d);
  Patch p = make_uniform_patch(d, b, 200, 1, 0.0);
  const auto states = run_with_snapshots(p, d, Kernel::Adjoint, SolverConfig{}, 100, 10,
                                         compute_stable_dt(p, SolverConfig{}));
  ASSERT_EQ(states.size(), 11u);
  for (const auto& s : states)
    for (const auto& c : s.comp)
      for (double v : c.raw()) ASSERT_EQ(v, 0.0);
}

TEST(AdjointRun, SnapshotCountTimesAndFirstSnapshot) {
  const auto d = line(400e3);
  const auto b = step_shelf_1d(d);
  for (double interval : {100.0, 130.0}) {
    AdjointRunConfig c;
    c.grid = UniformGrid{d, &b, 400, 1, 0.0};
    c.functional = shelf_target();
    c.snapshot_interval = interval;
    const auto store = run_adjoint(c);
    const std::size_t expected = std::size_t(std::floor(4200 / interval)) + 1;
    ASSERT_EQ(store.size(), expected);
    for (std::size_t k = 1; k < store.size(); ++k) EXPECT_GT(store.time(k), store.time(k - 1));
    EXPECT_EQ(store.times().back(), 4200.0);
    EXPECT_GE(store.times().front(), 0.0);
    // Value at t_f is phi, bit for bit.
    const auto phi = build_functional(c.functional, store.grid());
    const auto& last = store.snapshot(store.size() - 1);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(last.comp[k].raw(), phi.comp[k].raw());
  }
  AdjointRunConfig c;
  c.grid = UniformGrid{d, &b, 400, 1, 0.0};
  c.functional = shelf_target();
  EXPECT_EQ(run_adjoint(c).size(), 101u);  // default interval (tf - t0) / 100
}

TEST(AdjointRun, DryTargetIsAnError) {
  const auto d = line(100e3);
  const auto b = sample_bathymetry([](double x, double) { return x < 30e3 ? 5.0 : -100.0; }, 0,
                                   100e3, 0, 0, 1000, true);
  AdjointRunConfig c;
  c.grid = UniformGrid{d, &b, 100, 1, 0.0};
  c.functional = shelf_target();
  EXPECT_THROW(run_adjoint(c), ConfigError);
}

TEST(AdjointRun, SquarePulseSplitsIntoEqualHalves) {
  const auto d = line(400e3);
  const auto b = flat1d(d, 4000);
  AdjointRunConfig c;
  c.grid = UniformGrid{d, &b, 1600, 1, 0.0};
  c.functional.x_min = 190e3;
  c.functional.x_max = 205e3;
  c.functional.tf = c.functional.ts = 300;
  c.snapshot_interval = 300;
  const auto store = run_adjoint(c);
  const auto& q = store.snapshot(0);  // 300 s of travel: centers 59.4 km either side
  const auto& g = store.grid();
  double left = 0, right = 0, lpeak = 0, rpeak = 0;
  for (int i = 0; i < 1600; ++i) {
    const double x = g.xc(i), v = q.comp[0](i, 0);
    if (x < 197.5e3) {
      left += v;
      lpeak = std::max(lpeak, v);
    } else {
      right += v;
      rpeak = std::max(rpeak, v);
    }
  }
  EXPECT_NEAR(left, right, 1e-9 * (left + right));
  EXPECT_NEAR(lpeak, 0.5, 0.02);
  EXPECT_NEAR(rpeak, 0.5, 0.02);
  EXPECT_LT(std::abs(q.comp[0](g.box.hi[0] / 2, 0)), 1e-6);  // nothing left at the center
}

TEST(AdjointRun, ShelfPulseMovesAwayFromTarget) {
  const auto d = line(400e3);
  const auto b = step_shelf_1d(d);
  AdjointRunConfig c;
  c.grid = UniformGrid{d, &b, 1600, 1, 0.0};
  c.functional = shelf_target();
  c.snapshot_interval = 42;
  const auto store = run_adjoint(c);
  const auto k = store.bracket(4200 - 378).first;
  const auto& g = store.grid();
  const auto& q = store.snapshot(k);
  const double travel = std::sqrt(9.81 * 200) * (4200 - store.time(k));
  // Right-going half on the shelf: eta^ about 0.5 centered at 17.5 km + travel.
  double peak = 0;
  for (int i = 0; i < 1600; ++i)
    if (std::abs(g.xc(i) - (17.5e3 + travel)) < 3e3) peak = std::max(peak, q.comp[0](i, 0));
  EXPECT_NEAR(peak, 0.5, 0.03);
  // Nothing has reached deep water yet.
  for (int i = 0; i < 1600; ++i)
    if (g.xc(i) > 50e3) {
      ASSERT_LT(std::abs(q.comp[0](i, 0)), 1e-6);
    }
}

TEST(AdjointRun, AutonomousInTime) {
  const auto d = line(400e3);
  const auto b = step_shelf_1d(d);
  AdjointRunConfig c;
  c.grid = UniformGrid{d, &b, 400, 1, 0.0};
  c.functional = shelf_target(4200);
  c.snapshot_interval = 42;
  c.dt_stable = 4.0;
  const auto a = run_adjoint(c);
  c.functional = shelf_target(3780);
  const auto s = run_adjoint(c);
  ASSERT_EQ(a.size(), 101u);
  ASSERT_EQ(s.size(), 91u);
  for (std::size_t k = 0; k < s.size(); ++k) {
    const std::size_t ka = a.size() - 1 - k, ks = s.size() - 1 - k;
    ASSERT_NEAR(a.time(ka) - s.time(ks), 420.0, 1e-9);
    for (int m = 0; m < 2; ++m)
      for (int i = 0; i < 400; ++i)
        ASSERT_NEAR(a.snapshot(ka).comp[m](i, 0), s.snapshot(ks).comp[m](i, 0), 1e-10);
  }
}

TEST(Sampling, CellCenterLinearAndDry) {
  PatchGeometry g;
  g.dim = 2;
  g.box = Box(0, 0, 9, 7);
  g.dx = 100;
  g.dy = 50;
  Array2<double> h(g.box, 0, 0, 10.0);
  h(9, 7) = 0.0;
  SnapshotStore store(g, h, 1.0);
  StateField q(g.box, 0, 0);
  auto plane = [](double x, double y) { return 1.0 + 0.01 * x - 0.02 * y; };
  for (int j = 0; j < 8; ++j)
    for (int i = 0; i < 10; ++i) q.set(i, j, {plane(g.xc(i), g.yc(j)), 2.0, -3.0});
  store.push(0.0, q);
  EXPECT_EQ(store.sample(g.xc(3), g.yc(4), 0).q.eta, q.comp[0](3, 4));
  EXPECT_NEAR(store.sample(333, 222, 0).q.eta, plane(333, 222), 1e-12);
  EXPECT_NEAR(store.sample(333, 222, 0).q.gamma, -3.0, 1e-12);
  EXPECT_TRUE(store.sample(g.xc(9) - 10, g.yc(7) - 10, 0).dry);
  EXPECT_FALSE(store.sample(g.xc(8), g.yc(6), 0).dry);
  EXPECT_THROW(store.sample(-500, 10, 0), std::out_of_range);
  EXPECT_THROW(store.push(0.0, q), std::logic_error);
}

TEST(Sampling, BracketClampsToStoredRange) {
  SnapshotStore store(grid1d(4, 4), Array2<double>(Box(0, 0, 3, 0), 0, 0, 1.0), 10);
  StateField q(Box(0, 0, 3, 0), 0, 0);
  for (double t : {10.0, 20.0, 30.0}) store.push(t, q);
  EXPECT_EQ(store.bracket(20.0), std::make_pair(std::size_t(1), std::size_t(1)));
  EXPECT_EQ(store.bracket(25.0), std::make_pair(std::size_t(1), std::size_t(2)));
  EXPECT_EQ(store.bracket(5.0), std::make_pair(std::size_t(0), std::size_t(0)));
  EXPECT_EQ(store.bracket(99.0), std::make_pair(std::size_t(2), std::size_t(2)));
}

TEST(InnerProduct, TauSets) {
  SnapshotStore store(grid1d(4, 4), Array2<double>(Box(0, 0, 3, 0), 0, 0, 1.0), 100);
  StateField q(Box(0, 0, 3, 0), 0, 0);
  for (int k = 0; k <= 42; ++k) store.push(100.0 * k, q);
  FunctionalSpec f = shelf_target();
  EXPECT_EQ(tau_set(store, 250, f), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(tau_set(store, 300, f), (std::vector<std::size_t>{3}));
  f.ts = 3800;
  f.mode = FunctionalMode::TimeRange;
  // tau in [250, 650] plus brackets at both ends
  EXPECT_EQ(tau_set(store, 250, f), (std::vector<std::size_t>{2, 3, 4, 5, 6, 7}));
  // Upper end clamps to tf
  EXPECT_EQ(tau_set(store, 4100, f), (std::vector<std::size_t>{41, 42}));
}

TEST(InnerProduct, ZeroStateDryCellsAndSymmetry) {
  const auto d = line(100e3);
  const auto b = sample_bathymetry([](double x, double) { return x < 20e3 ? 5.0 : -100.0; }, 0,
                                   100e3, 0, 0, 1000, true);
  Patch p = make_uniform_patch(d, b, 100, 1, 0.0);
  Array2<double> h(p.box(), 0, 0);
  for (int i = 0; i < 100; ++i) h(i, 0) = p.hbar(i, 0);
  SnapshotStore store(p.geom, h, 1.0);
  StateField a(p.box(), 0, 0);
  for (int i = 0; i < 100; ++i) a.set(i, 0, {std::sin(0.1 * i), 0.3, 0});
  store.push(0.0, a);
  auto f = shelf_target(1.0);
  auto ip = inner_product_field(p, store, 0.0, f);
  for (double v : ip.raw()) EXPECT_EQ(v, 0.0);
  for (int i = 0; i < 100; ++i) p.q.set(i, 0, {5.0, -1.0, 0});
  ip = inner_product_field(p, store, 0.0, f);
  int dry = 0;
  for (int i = 0; i < 100; ++i) {
    EXPECT_GE(ip(i, 0), 0.0);
    if (!p.wet(i, 0)) {
      EXPECT_EQ(ip(i, 0), 0.0);
      ++dry;
    } else if (i > 25) {
      EXPECT_NEAR(ip(i, 0), std::abs(5.0 * std::sin(0.1 * i) - 0.3), 1e-12);
    }
  }
  EXPECT_GE(dry, 19);
  // Exchanging the roles of the two histories leaves the identity residual unchanged.
  SnapshotStore x(p.geom, h, 1.0), y(p.geom, h, 1.0);
  StateField s1(p.box(), 0, 0), s2(p.box(), 0, 0);
  for (int i = 0; i < 100; ++i) {
    s1.set(i, 0, {0.1 * i, 1.0, 0});
    s2.set(i, 0, {1.0, -0.01 * i, 0});
  }
  x.push(0, s1);
  x.push(1, s2);
  y.push(0, s2);
  y.push(1, s1);
  EXPECT_EQ(verify_adjoint_identity(x, y, 1, 0), verify_adjoint_identity(y, x, 1, 0));
}

TEST(Identity, ZeroStatesGiveZeroResidual) {
  SnapshotStore a(grid1d(10, 10), Array2<double>(Box(0, 0, 9, 0), 0, 0, 1.0), 1);
  StateField z(Box(0, 0, 9, 0), 0, 0);
  a.push(0, z);
  a.push(1, z);
  EXPECT_EQ(verify_adjoint_identity(a, a, 1, 0), 0.0);
  EXPECT_THROW(verify_adjoint_identity(a, a, 0.5, 0), ConfigError);
  SnapshotStore other(grid1d(11, 10), Array2<double>(Box(0, 0, 10, 0), 0, 0, 1.0), 1);
  EXPECT_THROW(verify_adjoint_identity(a, other, 1, 0), ConfigError);
}

TEST(Identity, FirstOrderSchemesAreDiscreteTransposes) {
  const auto d = line(400e3);
  const auto b = step_shelf_1d(d);
  SolverConfig cfg;
  cfg.order = 1;
  const UniformGrid grid{d, &b, 400, 1, 0.0};
  AdjointRunConfig c;
  c.grid = grid;
  c.solver = cfg;
  c.functional = shelf_target();
  c.snapshot_interval = 420;
  c.dt_stable = 4.5;
  const auto adj = run_adjoint(c);
  auto hump = [](double x, double) { return State{0.4 * std::exp(-std::pow((x - 125e3) / 10e3, 2)), 0, 0}; };
  const auto fwd = run_forward_history(grid, cfg, hump, 0.0, 420, 10, 4.5);
  for (std::size_t k = 1; k < fwd.size(); ++k)
    EXPECT_LT(verify_adjoint_identity(fwd, adj, fwd.time(k), 0.0), 1e-12);
}

TEST(SnapshotStore, SaveLoadRoundTrip) {
  const auto d = line(400e3);
  const auto b = step_shelf_1d(d);
  AdjointRunConfig c;
  c.grid = UniformGrid{d, &b, 200, 1, 0.0};
  c.functional = shelf_target();
  c.snapshot_interval = 600;
  const auto store = run_adjoint(c);
  const auto dir = temp_dir("roundtrip");
  store.save(dir);
  const auto back = SnapshotStore::load(dir);
  ASSERT_EQ(back.size(), store.size());
  EXPECT_EQ(back.interval(), store.interval());
  EXPECT_EQ(back.grid().box, store.grid().box);
  EXPECT_EQ(back.grid().dx, store.grid().dx);
  EXPECT_EQ(back.hbar().raw(), store.hbar().raw());
  for (std::size_t k = 0; k < store.size(); ++k) {
    EXPECT_EQ(back.time(k), store.time(k));
    for (int m = 0; m < 3; ++m) EXPECT_EQ(back.snapshot(k).comp[m].raw(), store.snapshot(k).comp[m].raw());
  }
  std::filesystem::remove(dir / "snapshot_00003.txt");
  EXPECT_THROW(SnapshotStore::load(dir), ConfigError);
  EXPECT_THROW(SnapshotStore::load(temp_dir("nothing")), ConfigError);
}

TEST(AlgebraicAdjoint, IdentityMatrix) {
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(4, 4);
  Eigen::VectorXd b(4), phi(4);
  b << 1, -2, 3, 0.5;
  phi << 0.25, 1, 0, -1;
  const auto r = verify_algebraic_adjoint(A, b, phi);
  EXPECT_EQ((r.xhat - phi).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.j_forward, phi.dot(b));
  EXPECT_EQ(r.j_adjoint, phi.dot(b));
}

TEST(AlgebraicAdjoint, RandomSystems) {
  for (int n : {3, 10, 50}) {
    Eigen::MatrixXd A;
    Eigen::VectorXd b, phi;
    random_well_conditioned(n, 17u + n, A, b, phi);
    const auto r = verify_algebraic_adjoint(A, b, phi);
    EXPECT_LE(r.identity_error, 1e-10);
    EXPECT_LE(r.sensitivity_error, 1e-6);
    // Independent oracle: explicit inverse.
    const Eigen::VectorXd xhat = A.inverse().transpose() * phi;
    EXPECT_LE((xhat - r.xhat).cwiseAbs().maxCoeff(), 1e-12 * xhat.cwiseAbs().maxCoeff());
  }
}

TEST(AlgebraicAdjoint, SingularAndMismatched) {
  Eigen::MatrixXd A(2, 2);
  A << 1, 2, 2, 4;
  Eigen::VectorXd b(2), phi(2);
  b << 1, 1;
  phi << 1, 0;
  EXPECT_THROW(verify_algebraic_adjoint(A, b, phi), NumericalError);
  Eigen::VectorXd b3(3);
  b3 << 1, 2, 3;
  EXPECT_THROW(verify_algebraic_adjoint(Eigen::MatrixXd::Identity(2, 2), b3, phi), std::invalid_argument);
}
