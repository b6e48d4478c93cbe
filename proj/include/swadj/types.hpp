/*
 * Index boxes, ghosted 2D arrays and the error types shared by every module.
 *
 * One-dimensional problems are stored as 2D arrays with a single row and no
 * ghost layer in y, so every kernel and container below works for both cases.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace swadj {

/// Malformed input: config keys, bathymetry files, CSV series.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parse failure carrying the offending line number.
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, int line)
      : ConfigError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Numerical failure: unstable step, all-dry patch, singular system.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Step rejected because the observed Courant number exceeded cfl_max.
class CflViolation : public NumericalError {
 public:
  CflViolation(double cfl, double cfl_max)
      : NumericalError("CFL " + std::to_string(cfl) + " exceeds cfl_max " +
                       std::to_string(cfl_max)),
        cfl_(cfl) {}
  double cfl() const { return cfl_; }

 private:
  double cfl_;
};

inline int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

/// Closed integer index box [lo, hi] in the global index space of one level.
struct Box {
  std::array<int, 2> lo{0, 0};
  std::array<int, 2> hi{-1, -1};

  Box() = default;
  Box(int ilo, int jlo, int ihi, int jhi) : lo{ilo, jlo}, hi{ihi, jhi} {}

  bool empty() const { return hi[0] < lo[0] || hi[1] < lo[1]; }
  int size(int d) const { return empty() ? 0 : hi[d] - lo[d] + 1; }
  long cells() const { return empty() ? 0 : long(size(0)) * size(1); }
  bool contains(int i, int j) const {
    return i >= lo[0] && i <= hi[0] && j >= lo[1] && j <= hi[1];
  }
  bool contains(const Box& b) const {
    return b.empty() || (contains(b.lo[0], b.lo[1]) && contains(b.hi[0], b.hi[1]));
  }
  bool operator==(const Box& o) const { return lo == o.lo && hi == o.hi; }
  bool operator!=(const Box& o) const { return !(*this == o); }
};

inline Box intersect(const Box& a, const Box& b) {
  return Box(std::max(a.lo[0], b.lo[0]), std::max(a.lo[1], b.lo[1]),
             std::min(a.hi[0], b.hi[0]), std::min(a.hi[1], b.hi[1]));
}

/// Grow along the active dimensions only (y is inert in 1D).
inline Box grow(const Box& b, int n, int dim) {
  Box g = b;
  for (int d = 0; d < dim; ++d) {
    g.lo[d] -= n;
    g.hi[d] += n;
  }
  return g;
}

inline Box refine(const Box& b, int r, int dim) {
  Box f = b;
  for (int d = 0; d < dim; ++d) {
    f.lo[d] = b.lo[d] * r;
    f.hi[d] = (b.hi[d] + 1) * r - 1;
  }
  return f;
}

inline Box coarsen(const Box& b, int r, int dim) {
  Box c = b;
  for (int d = 0; d < dim; ++d) {
    c.lo[d] = floor_div(b.lo[d], r);
    c.hi[d] = floor_div(b.hi[d], r);
  }
  return c;
}

/**
 * Dense array over a box plus ghost layers, addressed by global indices.
 */
template <typename T>
class Array2 {
 public:
  Array2() = default;
  Array2(const Box& interior, int gx, int gy, T init = T{})
      : box_(interior), gx_(gx), gy_(gy) {
    nx_ = interior.size(0) + 2 * gx;
    ny_ = interior.size(1) + 2 * gy;
    data_.assign(std::size_t(nx_) * ny_, init);
  }

  const Box& box() const { return box_; }
  Box grown_box() const {
    return Box(box_.lo[0] - gx_, box_.lo[1] - gy_, box_.hi[0] + gx_, box_.hi[1] + gy_);
  }
  int gx() const { return gx_; }
  int gy() const { return gy_; }

  T& operator()(int i, int j) { return data_[index(i, j)]; }
  const T& operator()(int i, int j) const { return data_[index(i, j)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

 private:
  std::size_t index(int i, int j) const {
    const int li = i - box_.lo[0] + gx_;
    const int lj = j - box_.lo[1] + gy_;
    assert(li >= 0 && li < nx_ && lj >= 0 && lj < ny_);
    return std::size_t(lj) * nx_ + li;
  }

  Box box_;
  int gx_ = 0, gy_ = 0, nx_ = 0, ny_ = 0;
  std::vector<T> data_;
};

/// Linearized state (eta, mu, gamma). gamma stays zero in 1D.
struct State {
  double eta = 0.0, mu = 0.0, gamma = 0.0;

  double operator[](int k) const { return k == 0 ? eta : (k == 1 ? mu : gamma); }
  double& operator[](int k) { return k == 0 ? eta : (k == 1 ? mu : gamma); }
};

inline double dot(const State& a, const State& b) {
  return a.eta * b.eta + a.mu * b.mu + a.gamma * b.gamma;
}

/// Cell-centered state components on one patch, ghosts included.
struct StateField {
  std::array<Array2<double>, 3> comp;

  StateField() = default;
  StateField(const Box& interior, int gx, int gy)
      : comp{Array2<double>(interior, gx, gy), Array2<double>(interior, gx, gy),
             Array2<double>(interior, gx, gy)} {}

  State at(int i, int j) const { return {comp[0](i, j), comp[1](i, j), comp[2](i, j)}; }
  void set(int i, int j, const State& s) {
    comp[0](i, j) = s.eta;
    comp[1](i, j) = s.mu;
    comp[2](i, j) = s.gamma;
  }
  const Box& box() const { return comp[0].box(); }
  void fill(double v) {
    for (auto& c : comp) c.fill(v);
  }
};

}  // namespace swadj
