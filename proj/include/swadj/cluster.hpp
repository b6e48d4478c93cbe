/*
 * Flag fields, buffer dilation and Berger-Rigoutsos clustering into boxes.
 */
#pragma once

#include <cstdint>
#include <vector>

#include "swadj/types.hpp"

namespace swadj {

enum class FlagCriterion { Surface, Adjoint };

using FlagField = Array2<std::uint8_t>;

inline long count_flags(const FlagField& f, const Box& b) {
  long n = 0;
  for (int j = b.lo[1]; j <= b.hi[1]; ++j)
    for (int i = b.lo[0]; i <= b.hi[0]; ++i) n += f(i, j) != 0;
  return n;
}

/// Every flagged cell grows into a (2w+1)^dim block, clipped to the field's box.
inline FlagField dilate(const FlagField& f, int width, int dim) {
  const Box& box = f.box();
  FlagField out(box, 0, 0);
  for (int j = box.lo[1]; j <= box.hi[1]; ++j)
    for (int i = box.lo[0]; i <= box.hi[0]; ++i) {
      if (!f(i, j)) continue;
      const Box g = intersect(grow(Box(i, j, i, j), width, dim), box);
      for (int jj = g.lo[1]; jj <= g.hi[1]; ++jj)
        for (int ii = g.lo[0]; ii <= g.hi[0]; ++ii) out(ii, jj) = 1;
    }
  return out;
}

struct ClusterOptions {
  double efficiency = 0.7;
  int dim = 2;
  const FlagField* allowed = nullptr;  ///< boxes must lie entirely on nonzero cells, if set
};

namespace detail {

inline Box flag_bounding_box(const FlagField& f, const Box& b) {
  Box bb(b.hi[0] + 1, b.hi[1] + 1, b.lo[0] - 1, b.lo[1] - 1);
  for (int j = b.lo[1]; j <= b.hi[1]; ++j)
    for (int i = b.lo[0]; i <= b.hi[0]; ++i)
      if (f(i, j)) {
        bb.lo[0] = std::min(bb.lo[0], i);
        bb.hi[0] = std::max(bb.hi[0], i);
        bb.lo[1] = std::min(bb.lo[1], j);
        bb.hi[1] = std::max(bb.hi[1], j);
      }
  return bb;
}

/// Count of cells satisfying `pred` in each slice normal to dimension d.
template <typename Pred>
std::vector<long> signature(const Box& b, int d, Pred&& pred) {
  std::vector<long> sig(std::size_t(b.size(d)), 0);
  for (int j = b.lo[1]; j <= b.hi[1]; ++j)
    for (int i = b.lo[0]; i <= b.hi[0]; ++i)
      if (pred(i, j)) ++sig[std::size_t((d == 0 ? i : j) - b.lo[d])];
  return sig;
}

struct Cut {
  int dim = -1;
  int after = 0;  ///< offset of the last slice in the lower half
  double score = 0.0;
};

/// Choose a cut: zero-signature hole nearest the middle, else strongest
/// Laplacian sign change, else bisect the longest side.
inline Cut choose_cut(const FlagField& f, const Box& b, int dim) {
  Cut best;
  for (int d = 0; d < dim; ++d) {
    const int n = b.size(d);
    if (n < 2) continue;
    auto sig = signature(b, d, [&](int i, int j) { return f(i, j) != 0; });
    for (int k = 1; k + 1 < n; ++k) {
      if (sig[std::size_t(k)] != 0) continue;
      const double score = 1e6 - std::abs(k - 0.5 * (n - 1));
      if (score > best.score) best = {d, k, score};  // hole slice goes to the lower half
    }
  }
  if (best.dim >= 0) return best;

  for (int d = 0; d < dim; ++d) {
    const int n = b.size(d);
    if (n < 4) continue;
    auto sig = signature(b, d, [&](int i, int j) { return f(i, j) != 0; });
    std::vector<long> lap(std::size_t(n), 0);
    for (int k = 1; k + 1 < n; ++k)
      lap[std::size_t(k)] = sig[std::size_t(k - 1)] - 2 * sig[std::size_t(k)] + sig[std::size_t(k + 1)];
    for (int k = 1; k + 2 < n; ++k) {
      const long a = lap[std::size_t(k)], c = lap[std::size_t(k + 1)];
      if ((a < 0 && c > 0) || (a > 0 && c < 0)) {
        const double score = double(std::abs(c - a)) - 1e-6 * std::abs(k + 0.5 - 0.5 * (n - 1));
        if (score > best.score) best = {d, k, score};
      }
    }
  }
  if (best.dim >= 0) return best;

  int d = 0;
  for (int e = 1; e < dim; ++e)
    if (b.size(e) > b.size(d)) d = e;
  return {d, b.size(d) / 2 - 1, 0.0};
}

/// Cut where the allowed mask changes across slices, nearest the middle.
inline Cut allowed_cut(const FlagField& allowed, const Box& b, int dim) {
  Cut best;
  double best_dist = 1e300;
  for (int d = 0; d < dim; ++d) {
    const int n = b.size(d);
    if (n < 2) continue;
    auto bad = signature(b, d, [&](int i, int j) { return allowed(i, j) == 0; });
    for (int k = 0; k + 1 < n; ++k) {
      if (bad[std::size_t(k)] == bad[std::size_t(k + 1)]) continue;
      const double dist = std::abs(k + 0.5 - 0.5 * (n - 1));
      if (dist < best_dist) {
        best_dist = dist;
        best = {d, k, 1.0};
      }
    }
  }
  if (best.dim >= 0) return best;
  int d = 0;
  for (int e = 1; e < dim; ++e)
    if (b.size(e) > b.size(d)) d = e;
  return {d, b.size(d) / 2 - 1, 0.0};
}

inline void cluster_recursive(const FlagField& f, Box b, const ClusterOptions& opt,
                              std::vector<Box>& out) {
  b = flag_bounding_box(f, b);
  if (b.empty()) return;
  const double eff = double(count_flags(f, b)) / double(b.cells());
  bool inside = true;
  if (opt.allowed) inside = count_flags(*opt.allowed, b) == b.cells();
  if ((eff >= opt.efficiency && inside) || b.cells() == 1) {
    out.push_back(b);
    return;
  }
  const Cut cut = inside ? choose_cut(f, b, opt.dim) : allowed_cut(*opt.allowed, b, opt.dim);
  Box lo = b, hi = b;
  lo.hi[cut.dim] = b.lo[cut.dim] + cut.after;
  hi.lo[cut.dim] = lo.hi[cut.dim] + 1;
  cluster_recursive(f, lo, opt, out);
  cluster_recursive(f, hi, opt, out);
}

}  // namespace detail

/**
 * Cover every flagged cell with disjoint boxes whose flagged fraction is at
 * least opt.efficiency. Flags outside opt.allowed are an error of the caller.
 */
inline std::vector<Box> cluster_flags(const FlagField& f, const ClusterOptions& opt) {
  if (!(opt.efficiency > 0 && opt.efficiency <= 1))
    throw ConfigError("cluster efficiency must lie in (0, 1]");
  std::vector<Box> out;
  detail::cluster_recursive(f, f.box(), opt, out);
  return out;
}

inline std::vector<Box> cluster_flags(const FlagField& f, double efficiency, int dim = 2) {
  return cluster_flags(f, ClusterOptions{efficiency, dim, nullptr});
}

}  // namespace swadj
