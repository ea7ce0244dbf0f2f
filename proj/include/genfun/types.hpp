#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace genfun {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
/// Stand-in for +inf in serialized reports (JSON has no infinity).
inline constexpr double kLargestFinite = std::numeric_limits<double>::max();

/// Open interval (lo, hi).
struct Interval {
  double lo = -kInf;
  double hi = kInf;

  bool contains(double z) const { return z > lo && z < hi; }
  double mid() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
  bool empty() const { return !(hi > lo); }

  Interval shrunk(double margin) const { return {lo + margin, hi - margin}; }
};

/// Axis-aligned box [lo, hi] in R^n.
struct Box {
  Vec lo;
  Vec hi;

  Box() = default;
  Box(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw std::invalid_argument("Box: dimension mismatch");
  }

  static Box cube(const Vec& center, double half_width) {
    Vec h = Vec::Constant(center.size(), half_width);
    return {center - h, center + h};
  }

  int dim() const { return static_cast<int>(lo.size()); }
  Vec center() const { return 0.5 * (lo + hi); }
  Vec half_widths() const { return 0.5 * (hi - lo); }
  /// Half-diagonal length.
  double radius() const { return half_widths().norm(); }
  double diameter() const { return (hi - lo).norm(); }

  bool contains(const Vec& x) const {
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
    return true;
  }

  /// Shrinks each side by `margin` (absolute).
  Box shrunk(double margin) const {
    Vec m = Vec::Constant(lo.size(), margin);
    return {lo + m, hi - m};
  }

  /// Scales the box about its center by `factor`.
  Box scaled(double factor) const {
    Vec c = center();
    Vec h = half_widths() * factor;
    return {c - h, c + h};
  }
};

inline double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// max(1, |v|_inf): the scale used for relative finite-difference steps.
inline double unit_scale(double v) { return std::max(1.0, std::abs(v)); }

}  // namespace genfun
