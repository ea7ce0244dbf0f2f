#pragma once

// Generating functions g(x, y, z) on a domain Gamma in R^n x R^n x R, their
// derivative jets, and domain validation.

#include "genfun/error.hpp"
#include "genfun/report.hpp"
#include "genfun/rng.hpp"
#include "genfun/types.hpp"

#include <functional>
#include <map>
#include <string>

namespace genfun {

using ScalarFn = std::function<double(const Vec&, const Vec&, double)>;
using VecFn = std::function<Vec(const Vec&, const Vec&, double)>;
using MatFn = std::function<Mat(const Vec&, const Vec&, double)>;

/// Value and first partials at one point.
struct FirstOrder {
  double g = 0.0;
  Vec gx;
  Vec gy;
  double gz = 0.0;
};
using FirstFn = std::function<FirstOrder(const Vec&, const Vec&, double)>;

/// Optional analytic partials. An empty callable means "not available";
/// eval_jet then falls back to central differences.
struct Partials {
  VecFn gx;
  VecFn gy;
  ScalarFn gz;
  MatFn gxx;
  MatFn gxy;
  VecFn gxz;
  /// Fused value + first partials, used in preference to the separate
  /// callables when present.
  FirstFn first;
  /// Set when the second-order callables are themselves finite differences
  /// of exact first derivatives (the dual construction does this).
  bool second_order_is_fd = false;
};

/// Relative finite-difference steps: h = eps * max(1, |coordinate|).
struct FdSteps {
  double first = 1e-5;
  double second = 1e-3;
};

/// Newton settings shared by every root solve on a generating function.
struct SolverSettings {
  /// Absolute residual tolerance, scaled by 1 + |u| + |p| (or 1 + |q|).
  double newton_tol = 1e-12;
  int max_iter = 50;
  int max_halvings = 20;
};

/// Gamma = x_box x y_box x I(x, y), optionally restricted by a predicate on
/// (x, y). I(x, y) is open; `margin` keeps evaluations off its endpoints.
struct Gamma {
  Box x_box;
  Box y_box;
  std::function<Interval(const Vec&, const Vec&)> z_interval;
  std::function<bool(const Vec&, const Vec&)> pair_ok;
  double margin = 1e-9;

  bool contains_pair(const Vec& x, const Vec& y) const {
    return x_box.contains(x) && y_box.contains(y) && (!pair_ok || pair_ok(x, y));
  }
  bool contains(const Vec& x, const Vec& y, double z) const {
    return contains_pair(x, y) && z_interval(x, y).contains(z);
  }
  /// I(x, y) shrunk by `margin`.
  Interval interior(const Vec& x, const Vec& y) const { return z_interval(x, y).shrunk(margin); }
};

struct GeneratingFunction {
  int dim = 0;
  ScalarFn eval;
  Partials partials;
  Gamma gamma;
  std::string name;
  std::map<std::string, double> params;
  FdSteps fd;
  SolverSettings solver;

  double operator()(const Vec& x, const Vec& y, double z) const { return eval(x, y, z); }
};

/// A point (x, y, z) of Gamma.
struct FiberPoint {
  Vec x;
  Vec y;
  double z = 0.0;
};

/// A point (x, u, p) of the one-jet set U = {(x, g, g_x)}.
struct JetPoint {
  Vec x;
  double u = 0.0;
  Vec p;
};

enum class JetSource { analytic, finite_difference, mixed };

inline std::string_view to_string(JetSource s) {
  switch (s) {
    case JetSource::analytic: return "analytic";
    case JetSource::finite_difference: return "finite_difference";
    case JetSource::mixed: return "mixed";
  }
  return "mixed";
}

/// Value, first partials and the second partials g_xx, g_xy, g_xz.
struct GJet {
  double g = 0.0;
  Vec gx;
  Vec gy;
  double gz = 0.0;
  Mat gxx;
  Mat gxy;
  Vec gxz;
  JetSource source = JetSource::analytic;
};

namespace detail {

inline double step(double eps, double coord) { return eps * unit_scale(coord); }

// Fourth-order central difference of a scalar function of one shifted coordinate.
template <typename F>
double central5(F&& f, double h) {
  return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h);
}

inline Vec fd_gx(const GeneratingFunction& gf, const Vec& x, const Vec& y, double z) {
  const int n = gf.dim;
  Vec out(n);
  Vec xs = x;
  for (int i = 0; i < n; ++i) {
    const double h = step(gf.fd.first, x[i]);
    out[i] = central5(
        [&](double d) {
          xs[i] = x[i] + d;
          return gf.eval(xs, y, z);
        },
        h);
    xs[i] = x[i];
  }
  return out;
}

inline Vec fd_gy(const GeneratingFunction& gf, const Vec& x, const Vec& y, double z) {
  const int n = gf.dim;
  Vec out(n);
  Vec ys = y;
  for (int i = 0; i < n; ++i) {
    const double h = step(gf.fd.first, y[i]);
    out[i] = central5(
        [&](double d) {
          ys[i] = y[i] + d;
          return gf.eval(x, ys, z);
        },
        h);
    ys[i] = y[i];
  }
  return out;
}

inline double fd_gz(const GeneratingFunction& gf, const Vec& x, const Vec& y, double z) {
  const double h = step(gf.fd.first, z);
  return central5([&](double d) { return gf.eval(x, y, z + d); }, h);
}

}  // namespace detail

/// g_z alone (analytic when declared).
inline double eval_gz(const GeneratingFunction& gf, const Vec& x, const Vec& y, double z) {
  if (gf.partials.gz) return gf.partials.gz(x, y, z);
  if (gf.partials.first) return gf.partials.first(x, y, z).gz;
  return detail::fd_gz(gf, x, y, z);
}

/// g_x alone (analytic when declared).
inline Vec eval_gx(const GeneratingFunction& gf, const Vec& x, const Vec& y, double z) {
  if (gf.partials.gx) return gf.partials.gx(x, y, z);
  if (gf.partials.first) return gf.partials.first(x, y, z).gx;
  return detail::fd_gx(gf, x, y, z);
}

/// Value and first partials without a membership check.
inline FirstOrder eval_first(const GeneratingFunction& gf, const Vec& x, const Vec& y, double z) {
  if (gf.partials.first) return gf.partials.first(x, y, z);
  FirstOrder f;
  f.g = gf.eval(x, y, z);
  f.gx = gf.partials.gx ? gf.partials.gx(x, y, z) : detail::fd_gx(gf, x, y, z);
  f.gy = gf.partials.gy ? gf.partials.gy(x, y, z) : detail::fd_gy(gf, x, y, z);
  f.gz = gf.partials.gz ? gf.partials.gz(x, y, z) : detail::fd_gz(gf, x, y, z);
  return f;
}

/// Full jet without a membership check. Second partials come from the
/// analytic callables, else from central differences of the analytic g_x
/// (step fd.first), else from second differences of g (step fd.second).
inline GJet jet_unchecked(const GeneratingFunction& gf, const Vec& x, const Vec& y, double z) {
  const int n = gf.dim;
  const Partials& pa = gf.partials;
  GJet j;
  FirstOrder f = eval_first(gf, x, y, z);
  j.g = f.g;
  j.gx = std::move(f.gx);
  j.gy = std::move(f.gy);
  j.gz = f.gz;

  const bool gx_exact = static_cast<bool>(pa.gx) || static_cast<bool>(pa.first);
  auto gx_at = [&](const Vec& xs, const Vec& ys, double zs) { return eval_gx(gf, xs, ys, zs); };
  int analytic = 0;
  int numeric = 0;

  if (pa.gxx) {
    j.gxx = pa.gxx(x, y, z);
    ++analytic;
  } else if (gx_exact) {
    j.gxx.resize(n, n);
    Vec xs = x;
    for (int k = 0; k < n; ++k) {
      const double h = detail::step(gf.fd.first, x[k]);
      xs[k] = x[k] + h;
      Vec plus = gx_at(xs, y, z);
      xs[k] = x[k] - h;
      Vec minus = gx_at(xs, y, z);
      xs[k] = x[k];
      j.gxx.col(k) = (plus - minus) / (2 * h);
    }
    ++numeric;
  } else {
    j.gxx.resize(n, n);
    const double g0 = j.g;
    Vec xs = x;
    for (int a = 0; a < n; ++a) {
      const double ha = detail::step(gf.fd.second, x[a]);
      xs[a] = x[a] + ha;
      const double fp = gf.eval(xs, y, z);
      xs[a] = x[a] - ha;
      const double fm = gf.eval(xs, y, z);
      xs[a] = x[a];
      j.gxx(a, a) = (fp - 2 * g0 + fm) / (ha * ha);
      for (int b = a + 1; b < n; ++b) {
        const double hb = detail::step(gf.fd.second, x[b]);
        auto at = [&](double sa, double sb) {
          xs[a] = x[a] + sa * ha;
          xs[b] = x[b] + sb * hb;
          const double v = gf.eval(xs, y, z);
          xs[a] = x[a];
          xs[b] = x[b];
          return v;
        };
        const double m = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * ha * hb);
        j.gxx(a, b) = m;
        j.gxx(b, a) = m;
      }
    }
    ++numeric;
  }

  if (pa.gxy) {
    j.gxy = pa.gxy(x, y, z);
    ++analytic;
  } else if (gx_exact) {
    j.gxy.resize(n, n);
    Vec ys = y;
    for (int k = 0; k < n; ++k) {
      const double h = detail::step(gf.fd.first, y[k]);
      ys[k] = y[k] + h;
      Vec plus = gx_at(x, ys, z);
      ys[k] = y[k] - h;
      Vec minus = gx_at(x, ys, z);
      ys[k] = y[k];
      j.gxy.col(k) = (plus - minus) / (2 * h);
    }
    ++numeric;
  } else {
    j.gxy.resize(n, n);
    Vec xs = x;
    Vec ys = y;
    for (int a = 0; a < n; ++a) {
      const double ha = detail::step(gf.fd.second, x[a]);
      for (int b = 0; b < n; ++b) {
        const double hb = detail::step(gf.fd.second, y[b]);
        auto at = [&](double sa, double sb) {
          xs[a] = x[a] + sa * ha;
          ys[b] = y[b] + sb * hb;
          const double v = gf.eval(xs, ys, z);
          xs[a] = x[a];
          ys[b] = y[b];
          return v;
        };
        j.gxy(a, b) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * ha * hb);
      }
    }
    ++numeric;
  }

  if (pa.gxz) {
    j.gxz = pa.gxz(x, y, z);
    ++analytic;
  } else if (gx_exact) {
    const double h = detail::step(gf.fd.first, z);
    j.gxz = (gx_at(x, y, z + h) - gx_at(x, y, z - h)) / (2 * h);
    ++numeric;
  } else {
    j.gxz.resize(n);
    Vec xs = x;
    const double hz = detail::step(gf.fd.second, z);
    for (int a = 0; a < n; ++a) {
      const double ha = detail::step(gf.fd.second, x[a]);
      auto at = [&](double sa, double sz) {
        xs[a] = x[a] + sa * ha;
        const double v = gf.eval(xs, y, z + sz * hz);
        xs[a] = x[a];
        return v;
      };
      j.gxz[a] = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * ha * hz);
    }
    ++numeric;
  }

  j.gxx = 0.5 * (j.gxx + j.gxx.transpose()).eval();

  const bool first_exact = static_cast<bool>(pa.first) ||
                           (pa.gx && pa.gy && pa.gz);
  if (pa.second_order_is_fd) numeric += analytic, analytic = 0;
  if (first_exact && numeric == 0)
    j.source = JetSource::analytic;
  else if (!first_exact && !pa.gx && !pa.gy && !pa.gz && analytic == 0)
    j.source = JetSource::finite_difference;
  else
    j.source = JetSource::mixed;
  return j;
}

/// All partials entering E and A at a point of Gamma.
inline GJet eval_jet(const GeneratingFunction& gf, const Vec& x, const Vec& y, double z) {
  if (!gf.gamma.contains(x, y, z)) throw Error(ErrorKind::OutOfGamma, "eval_jet: point outside Gamma");
  GJet j = jet_unchecked(gf, x, y, z);
  if (!(j.gz < 0.0)) throw Error(ErrorKind::DegenerateGz, "eval_jet: g_z >= 0");
  return j;
}

/// Uniform sample of Gamma: x and y uniform in their boxes (rejecting pairs
/// that fail `pair_ok`), z uniform in the interior of I(x, y). Unbounded
/// intervals are truncated to +-1e3.
inline FiberPoint sample_gamma(const GeneratingFunction& gf, Rng& rng, double box_scale = 1.0) {
  const Box xb = gf.gamma.x_box.scaled(box_scale);
  const Box yb = gf.gamma.y_box.scaled(box_scale);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    FiberPoint fp;
    fp.x = rng.point_in(xb);
    fp.y = rng.point_in(yb);
    if (!gf.gamma.contains_pair(fp.x, fp.y)) continue;
    Interval I = gf.gamma.interior(fp.x, fp.y);
    I.lo = std::max(I.lo, -1e3);
    I.hi = std::min(I.hi, 1e3);
    if (I.empty()) continue;
    fp.z = rng.uniform(I.lo, I.hi);
    return fp;
  }
  throw Error(ErrorKind::OutOfGamma, "sample_gamma: could not draw an admissible (x, y) pair");
}

/// Samples Gamma and reports min(-g_z); holds iff that minimum is positive
/// and membership is consistent with the sampled interval (samples inside,
/// the raw interval endpoints outside).
inline ConditionReport validate_gamma(const GeneratingFunction& gf, long samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("validate_gamma: samples must be >= 1");
  Rng rng(seed);
  ConditionReport r;
  r.condition_id = "gamma";
  r.seed = seed;
  double best = kInf;
  long inconsistent = 0;
  std::optional<Witness> worst;
  std::optional<Witness> first_bad;
  for (long s = 0; s < samples; ++s) {
    FiberPoint fp = sample_gamma(gf, rng);
    const Interval raw = gf.gamma.z_interval(fp.x, fp.y);
    const bool member = gf.gamma.contains(fp.x, fp.y, fp.z);
    const bool lo_out = !std::isfinite(raw.lo) || !gf.gamma.contains(fp.x, fp.y, raw.lo);
    const bool hi_out = !std::isfinite(raw.hi) || !gf.gamma.contains(fp.x, fp.y, raw.hi);
    if (!member || !lo_out || !hi_out) {
      ++inconsistent;
      if (!first_bad) first_bad = Witness{}.add("x", fp.x).add("y", fp.y).add("z", fp.z).add("membership_inconsistent", 1.0);
    }
    const double neg_gz = -eval_gz(gf, fp.x, fp.y, fp.z);
    if (neg_gz < best) {
      best = neg_gz;
      worst = Witness{}.add("x", fp.x).add("y", fp.y).add("z", fp.z).add("gz", -neg_gz);
    }
  }
  r.samples_used = samples;
  r.margin = best;
  r.extra("membership_inconsistencies", static_cast<double>(inconsistent));
  r.verdict = (best > 0.0 && inconsistent == 0) ? Verdict::holds : Verdict::fails;
  if (inconsistent > 0)
    r.witness = first_bad;
  else
    r.witness = worst;
  return r;
}

}  // namespace genfun
