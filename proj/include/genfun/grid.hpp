#pragma once

#include "genfun/types.hpp"

#include <vector>

namespace genfun {

/// Uniform tensor grid on a box; node index is row-major with the last axis
/// fastest.
struct Grid {
  Box box;
  std::vector<int> counts;

  static Grid uniform(const Box& b, int per_axis) {
    if (per_axis < 2) throw std::invalid_argument("Grid: need at least 2 nodes per axis");
    return Grid{b, std::vector<int>(b.dim(), per_axis)};
  }

  int dim() const { return box.dim(); }
  long size() const {
    long s = 1;
    for (int c : counts) s *= c;
    return s;
  }
  double spacing(int axis) const { return (box.hi[axis] - box.lo[axis]) / (counts[axis] - 1); }
  /// Largest axis spacing (the h_grid of the tolerances).
  double h() const {
    double m = 0;
    for (int i = 0; i < dim(); ++i) m = std::max(m, spacing(i));
    return m;
  }

  std::vector<int> multi(long idx) const {
    std::vector<int> m(dim());
    for (int i = dim() - 1; i >= 0; --i) {
      m[i] = static_cast<int>(idx % counts[i]);
      idx /= counts[i];
    }
    return m;
  }
  long index(const std::vector<int>& m) const {
    long idx = 0;
    for (int i = 0; i < dim(); ++i) idx = idx * counts[i] + m[i];
    return idx;
  }
  Vec node(long idx) const {
    const auto m = multi(idx);
    Vec x(dim());
    for (int i = 0; i < dim(); ++i) x[i] = (m[i] == counts[i] - 1) ? box.hi[i] : box.lo[i] + m[i] * spacing(i);
    return x;
  }
  /// Index of the node nearest to x (clamped to the box).
  long nearest(const Vec& x) const {
    std::vector<int> m(dim());
    for (int i = 0; i < dim(); ++i) {
      const double t = (x[i] - box.lo[i]) / spacing(i);
      m[i] = std::clamp(static_cast<int>(std::lround(t)), 0, counts[i] - 1);
    }
    return index(m);
  }
  /// Indices of the axis neighbours (+-1 along each axis) inside the grid.
  std::vector<long> neighbours(long idx) const {
    auto m = multi(idx);
    std::vector<long> out;
    for (int i = 0; i < dim(); ++i) {
      for (int d : {-1, 1}) {
        const int v = m[i] + d;
        if (v < 0 || v >= counts[i]) continue;
        m[i] = v;
        out.push_back(index(m));
        m[i] -= d;
      }
    }
    return out;
  }
};

}  // namespace genfun
