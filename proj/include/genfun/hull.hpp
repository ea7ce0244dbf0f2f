#pragma once

// Convexity of sampled point sets via the hull defect: the largest distance
// from a point of the convex hull to the nearest sample.

#include "genfun/rng.hpp"
#include "genfun/types.hpp"

#include <algorithm>
#include <unordered_map>
#include <vector>

namespace genfun {

using Point2 = Eigen::Vector2d;

/// Counter-clockwise convex hull (Andrew's monotone chain); collinear points
/// are dropped.
inline std::vector<Point2> convex_hull_2d(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Point2& o, const Point2& a, const Point2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Point2> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

/// Inside-or-on test for a counter-clockwise convex polygon.
inline bool in_convex_polygon(const std::vector<Point2>& poly, const Point2& p) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % n];
    if ((b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x()) < -1e-12) return false;
  }
  return true;
}

/// Nearest-neighbour queries on a fixed planar point set through a uniform
/// bucket grid.
class BucketIndex2 {
 public:
  BucketIndex2(const std::vector<Point2>& pts, double cell) : pts_(pts), cell_(cell) {
    for (std::size_t i = 0; i < pts_.size(); ++i) buckets_[key(cell_of(pts_[i]))].push_back(i);
  }

  /// Distance to the nearest point and its index.
  std::pair<double, std::size_t> nearest(const Point2& q) const {
    const auto c = cell_of(q);
    double best = kInf;
    std::size_t arg = 0;
    for (long ring = 0;; ++ring) {
      // Any point in a ring >= r lies at least (r - 1) * cell away.
      if (ring > 0 && best <= (ring - 1) * cell_) break;
      for (long dx = -ring; dx <= ring; ++dx) {
        for (long dy = -ring; dy <= ring; ++dy) {
          if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
          auto it = buckets_.find(key({c.first + dx, c.second + dy}));
          if (it == buckets_.end()) continue;
          for (std::size_t i : it->second) {
            const double d = (pts_[i] - q).norm();
            if (d < best || (d == best && i < arg)) {
              best = d;
              arg = i;
            }
          }
        }
      }
    }
    return {best, arg};
  }

 private:
  std::pair<long, long> cell_of(const Point2& p) const {
    return {static_cast<long>(std::floor(p.x() / cell_)), static_cast<long>(std::floor(p.y() / cell_))};
  }
  static long long key(std::pair<long, long> c) {
    return (static_cast<long long>(c.first) << 32) ^ (static_cast<long long>(c.second) & 0xffffffffLL);
  }

  std::vector<Point2> pts_;
  double cell_;
  std::unordered_map<long long, std::vector<std::size_t>> buckets_;
};

struct HullDefect {
  double defect = 0.0;
  /// Hull point attaining the defect.
  Vec where;
  long probes = 0;
};

/// Largest distance from a probe point of conv(pts) to the nearest sample.
/// In the plane the hull is rasterized with spacing `step`; in higher
/// dimensions probes are placed on segments between seeded sample pairs.
inline HullDefect hull_defect(const std::vector<Vec>& pts, double step, std::uint64_t seed = 0) {
  HullDefect out;
  if (pts.size() < 2) return out;
  const int n = static_cast<int>(pts.front().size());
  if (n == 1) return out;  // intervals are convex; gaps are covered by the allowance
  if (n == 2) {
    std::vector<Point2> p2;
    p2.reserve(pts.size());
    for (const auto& p : pts) p2.emplace_back(p[0], p[1]);
    const auto hull = convex_hull_2d(p2);
    if (hull.size() < 3) return out;
    Point2 lo = hull[0], hi = hull[0];
    for (const auto& h : hull) {
      lo = lo.cwiseMin(h);
      hi = hi.cwiseMax(h);
    }
    // Keep the raster bounded: at most ~2000 probes per axis.
    step = std::max(step, std::max(hi.x() - lo.x(), hi.y() - lo.y()) / 2000.0);
    const BucketIndex2 index(p2, std::max(step * 2.0, 1e-300));
    const long nx = static_cast<long>(std::ceil((hi.x() - lo.x()) / step)) + 1;
    const long ny = static_cast<long>(std::ceil((hi.y() - lo.y()) / step)) + 1;
    out.where = Vec::Zero(2);
    for (long i = 0; i < nx; ++i) {
      for (long j = 0; j < ny; ++j) {
        const Point2 q(std::min(lo.x() + i * step, hi.x()), std::min(lo.y() + j * step, hi.y()));
        if (!in_convex_polygon(hull, q)) continue;
        ++out.probes;
        const double d = index.nearest(q).first;
        if (d > out.defect) {
          out.defect = d;
          out.where = Vec(q);
        }
      }
    }
    return out;
  }
  Rng rng(seed);
  const int pairs = 2000;
  const int per_pair = 16;
  out.where = pts.front();
  for (int k = 0; k < pairs; ++k) {
    const auto& a = pts[static_cast<std::size_t>(rng.uniform() * pts.size()) % pts.size()];
    const auto& b = pts[static_cast<std::size_t>(rng.uniform() * pts.size()) % pts.size()];
    for (int s = 1; s < per_pair; ++s) {
      const Vec q = a + (b - a) * (static_cast<double>(s) / per_pair);
      double best = kInf;
      for (const auto& p : pts) best = std::min(best, (p - q).squaredNorm());
      ++out.probes;
      if (std::sqrt(best) > out.defect) {
        out.defect = std::sqrt(best);
        out.where = q;
      }
    }
  }
  return out;
}

/// Largest distance of the points from the line through the two points that
/// are farthest apart (a collinearity defect).
inline double collinearity_defect(const std::vector<Vec>& pts) {
  if (pts.size() < 3) return 0.0;
  std::size_t ia = 0, ib = 0;
  double far = -1;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double d = (pts[i] - pts[j]).squaredNorm();
      if (d > far) {
        far = d;
        ia = i;
        ib = j;
      }
    }
  const Vec dir = (pts[ib] - pts[ia]).normalized();
  double worst = 0;
  for (const auto& p : pts) {
    const Vec r = p - pts[ia];
    worst = std::max(worst, (r - r.dot(dir) * dir).norm());
  }
  return worst;
}

}  // namespace genfun
