/*
 * Interface Riemann solvers for the linearized shallow water system and its adjoint.
 *
 * Forward system (per direction, normal momentum m):
 *
 *     eta_t + m_x = 0,      m_t + g hbar(x) eta_x = 0
 *
 * Adjoint system, conservative in A^T:
 *
 *     eta^_t + (g hbar m^)_x = 0,      m^_t + (eta^)_x = 0
 *
 * Both kernels use the eigenvectors of the cell on each side of the face:
 * left-going waves carry the left cell's speed, right-going waves the right
 * cell's, which yields the exact reflection/transmission at a depth jump.
 * The transverse momentum has zero speed in the normal direction and never
 * produces a wave.
 */
#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "swadj/types.hpp"

namespace swadj {

enum class Direction { X = 0, Y = 1 };

/// Time orientation of the adjoint equation being solved.
enum class AdjointTime {
  Backward,  ///< q^_t + (A^T q^)_x = 0 as written, integrated toward t0
  Reversed   ///< q~_t - (A^T q~)_x = 0, the same problem in reversed time t_f - t
};

struct RiemannInput {
  State left, right;
  double hbar_left = 0.0, hbar_right = 0.0;
  double g = 9.81;
  Direction dir = Direction::X;
};

struct Wave {
  double speed = 0.0;
  State jump;  ///< state-space jump carried by the wave
};

struct RiemannOutput {
  std::array<Wave, 2> waves{};  ///< [0] left-going, [1] right-going
  State amdq, apdq;             ///< left- and right-going fluctuations
  bool wall = false;            ///< one side dry, treated as a reflecting wall
  bool dry = false;             ///< both sides dry, no waves
};

enum class Limiter { None, Minmod, Superbee, VanLeer, MC };

/// Wave limiter phi(theta). `None` keeps the full second-order correction.
inline double limiter_phi(double theta, Limiter lim) {
  switch (lim) {
    case Limiter::None:
      return 1.0;
    case Limiter::Minmod:
      return std::max(0.0, std::min(1.0, theta));
    case Limiter::Superbee:
      return std::max({0.0, std::min(1.0, 2.0 * theta), std::min(2.0, theta)});
    case Limiter::VanLeer:
      return (theta + std::abs(theta)) / (1.0 + std::abs(theta));
    case Limiter::MC:
      return std::max(0.0, std::min({(1.0 + theta) * 0.5, 2.0, 2.0 * theta}));
  }
  return 0.0;
}

namespace detail {

inline int normal_component(Direction d) { return d == Direction::X ? 1 : 2; }

/// Replace the dry side by the mirror image of the wet side: eta kept, normal momentum negated.
inline State mirror(const State& s, Direction d) {
  State m = s;
  m[normal_component(d)] = -m[normal_component(d)];
  return m;
}

/// Common preprocessing: contract checks and wet/dry wall substitution.
struct FacePrep {
  State ql, qr;
  double cl = 0.0, cr = 0.0;
  bool wall = false, dry = false;
};

inline FacePrep prepare_face(const RiemannInput& in) {
  if (!(in.hbar_left >= 0.0) || !(in.hbar_right >= 0.0))
    throw std::invalid_argument("Riemann input with negative mean depth");
  FacePrep p;
  p.ql = in.left;
  p.qr = in.right;
  double hl = in.hbar_left, hr = in.hbar_right;
  if (hl == 0.0 && hr == 0.0) {
    p.dry = true;
    return p;
  }
  if (hl == 0.0) {
    p.ql = mirror(in.right, in.dir);
    hl = hr;
    p.wall = true;
  } else if (hr == 0.0) {
    p.qr = mirror(in.left, in.dir);
    hr = hl;
    p.wall = true;
  }
  p.cl = std::sqrt(in.g * hl);
  p.cr = std::sqrt(in.g * hr);
  return p;
}

inline State pair_state(double eta, double normal, Direction d) {
  State s;
  s.eta = eta;
  s[normal_component(d)] = normal;
  return s;
}

}  // namespace detail

/**
 * Forward kernel: splits the jump onto [1, -cL] (speed -cL) and [1, cR] (speed +cR).
 */
inline RiemannOutput forward_rp(const RiemannInput& in) {
  RiemannOutput out;
  const auto p = detail::prepare_face(in);
  out.wall = p.wall;
  out.dry = p.dry;
  if (p.dry) return out;
  const int n = detail::normal_component(in.dir);
  const double d_eta = p.qr.eta - p.ql.eta;
  const double d_mom = p.qr[n] - p.ql[n];
  const double csum = p.cl + p.cr;
  const double a1 = (p.cr * d_eta - d_mom) / csum;
  const double a2 = (p.cl * d_eta + d_mom) / csum;

  out.waves[0] = {-p.cl, detail::pair_state(a1, -a1 * p.cl, in.dir)};
  out.waves[1] = {p.cr, detail::pair_state(a2, a2 * p.cr, in.dir)};
  out.amdq = detail::pair_state(-p.cl * a1, p.cl * p.cl * a1, in.dir);
  out.apdq = detail::pair_state(p.cr * a2, p.cr * p.cr * a2, in.dir);
  return out;
}

/**
 * Adjoint kernel: f-wave decomposition of the flux jump sigma * (A^T q)_R - (A^T q)_L
 * with sigma = +1 for the backward-in-time form and -1 for the reversed form.
 *
 * Eigenvectors are [-sigma cL, 1] (speed -cL) and [sigma cR, 1] (speed +cR);
 * resolving the flux jump keeps the hbar jump inside the derivative.
 */
inline RiemannOutput adjoint_rp(const RiemannInput& in, AdjointTime time = AdjointTime::Reversed) {
  RiemannOutput out;
  const auto p = detail::prepare_face(in);
  out.wall = p.wall;
  out.dry = p.dry;
  if (p.dry) return out;
  const int n = detail::normal_component(in.dir);
  const double sigma = time == AdjointTime::Backward ? 1.0 : -1.0;
  const double cl2 = p.cl * p.cl, cr2 = p.cr * p.cr;
  const double df0 = sigma * (cr2 * p.qr[n] - cl2 * p.ql[n]);
  const double df1 = sigma * (p.qr.eta - p.ql.eta);
  const double b1 = (p.cr * df1 - sigma * df0) / (p.cl + p.cr);
  const double b2 = df1 - b1;

  const State z1 = detail::pair_state(-sigma * p.cl * b1, b1, in.dir);
  const State z2 = detail::pair_state(sigma * p.cr * b2, b2, in.dir);
  out.amdq = z1;
  out.apdq = z2;
  out.waves[0] = {-p.cl, detail::pair_state(z1.eta / -p.cl, z1[n] / -p.cl, in.dir)};
  out.waves[1] = {p.cr, detail::pair_state(z2.eta / p.cr, z2[n] / p.cr, in.dir)};
  return out;
}

}  // namespace swadj
