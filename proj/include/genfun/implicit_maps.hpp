#pragma once

// Root solves that move between the fiber coordinates (x, y, z) and the jet
// coordinates (x, u, p): Y, Z, g*, Q, P, the inverse of Q in x, and the
// matrices E and A.

#include "genfun/core.hpp"

#include <optional>

namespace genfun {

struct YZSolution {
  Vec y;
  double z = 0.0;
  /// inf-norm of (g_x - p, g - u) at the returned point.
  double residual = 0.0;
  int iterations = 0;
};

struct EMatrix {
  Mat E;
  double det = 0.0;
};

/// E = g_xy - g_xz g_y^T / g_z from an already evaluated jet.
inline Mat matrix_E_from(const GJet& j) { return j.gxy - j.gxz * j.gy.transpose() / j.gz; }

inline EMatrix matrix_E(const GeneratingFunction& gf, const FiberPoint& fp) {
  const GJet j = eval_jet(gf, fp.x, fp.y, fp.z);
  EMatrix out;
  out.E = matrix_E_from(j);
  out.det = out.E.determinant();
  return out;
}

namespace detail {

inline bool fd_first_only(const GeneratingFunction& gf) {
  return !gf.partials.first && !(gf.partials.gx && gf.partials.gy && gf.partials.gz);
}

// A finite stand-in for an unbounded interval, used only to place starts.
inline Interval finite_part(Interval I) {
  if (!std::isfinite(I.lo)) I.lo = std::isfinite(I.hi) ? I.hi - 20.0 : -10.0;
  if (!std::isfinite(I.hi)) I.hi = I.lo + 20.0;
  return I;
}

enum class NewtonEnd { converged, stalled, singular, left_domain };

struct NewtonRun {
  NewtonEnd end = NewtonEnd::stalled;
  Vec y;
  double z = 0.0;
  double residual = kInf;
  int iterations = 0;
};

inline double yz_residual(const GeneratingFunction& gf, const JetPoint& jet, const Vec& y, double z) {
  const FirstOrder f = eval_first(gf, jet.x, y, z);
  return std::max(inf_norm(f.gx - jet.p), std::abs(f.g - jet.u));
}

inline NewtonRun newton_yz(const GeneratingFunction& gf, const JetPoint& jet, Vec y, double z) {
  const int n = gf.dim;
  const SolverSettings& s = gf.solver;
  const double tol = s.newton_tol * (1.0 + std::abs(jet.u) + inf_norm(jet.p));
  const double floor_tol = fd_first_only(gf) ? 1e3 * tol : tol;
  NewtonRun run;
  run.y = y;
  run.z = z;
  if (!gf.gamma.contains(jet.x, y, z)) {
    run.end = NewtonEnd::left_domain;
    return run;
  }
  Vec F(n + 1);
  Mat J(n + 1, n + 1);
  int polish = 0;
  for (int it = 0; it <= s.max_iter; ++it) {
    const GJet j = jet_unchecked(gf, jet.x, y, z);
    F.head(n) = j.gx - jet.p;
    F[n] = j.g - jet.u;
    const double res = inf_norm(F);
    run.y = y;
    run.z = z;
    run.residual = res;
    run.iterations = it;
    if (res <= tol) {
      // A couple of extra steps push the point to roundoff level, which
      // keeps downstream second differences in p clean.
      if (polish >= 2) break;
      ++polish;
    }
    if (it == s.max_iter) break;
    J.topLeftCorner(n, n) = j.gxy;
    J.topRightCorner(n, 1) = j.gxz;
    J.bottomLeftCorner(1, n) = j.gy.transpose();
    J(n, n) = j.gz;
    Eigen::PartialPivLU<Mat> lu(J);
    const double det = lu.determinant();
    const double scale = std::pow(std::max(1e-300, J.cwiseAbs().maxCoeff()), n + 1);
    if (!(std::abs(det) > 1e-13 * scale)) {
      run.end = res <= floor_tol ? NewtonEnd::converged : NewtonEnd::singular;
      return run;
    }
    const Vec step = lu.solve(-F);
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k <= s.max_halvings; ++k, lambda *= 0.5) {
      const Vec yt = y + lambda * step.head(n);
      const double zt = z + lambda * step[n];
      if (!gf.gamma.contains(jet.x, yt, zt)) continue;
      const double rt = yz_residual(gf, jet, yt, zt);
      if (rt < res || (res <= tol && rt <= res)) {
        y = yt;
        z = zt;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      run.end = res <= floor_tol ? NewtonEnd::converged : NewtonEnd::stalled;
      return run;
    }
  }
  run.end = run.residual <= floor_tol ? NewtonEnd::converged : NewtonEnd::stalled;
  return run;
}

}  // namespace detail

/// Solves g(x, y, z) = u, g_x(x, y, z) = p for (y, z) by damped Newton, with
/// a 3^n x 3 grid of restarts over y_box x I when the first start fails.
inline YZSolution solve_YZ(const GeneratingFunction& gf, const JetPoint& jet,
                           const std::optional<FiberPoint>& init = std::nullopt) {
  const int n = gf.dim;
  if (jet.x.size() != n || jet.p.size() != n) throw std::invalid_argument("solve_YZ: dimension mismatch");
  if (!gf.gamma.x_box.contains(jet.x)) throw Error(ErrorKind::OutOfGamma, "solve_YZ: x outside x_box");

  auto finish = [](const detail::NewtonRun& r) {
    return YZSolution{r.y, r.z, r.residual, r.iterations};
  };

  std::vector<std::pair<Vec, double>> starts;
  if (init && gf.gamma.contains(jet.x, init->y, init->z)) starts.emplace_back(init->y, init->z);
  {
    const Vec y = gf.gamma.y_box.center();
    if (gf.gamma.contains_pair(jet.x, y)) starts.emplace_back(y, detail::finite_part(gf.gamma.interior(jet.x, y)).mid());
  }
  int singular = 0;
  int attempts = 0;
  int total_iterations = 0;
  auto try_start = [&](const Vec& y, double z) -> std::optional<YZSolution> {
    const detail::NewtonRun r = detail::newton_yz(gf, jet, y, z);
    ++attempts;
    total_iterations += r.iterations;
    if (r.end == detail::NewtonEnd::converged) return finish(r);
    if (r.end == detail::NewtonEnd::singular) ++singular;
    return std::nullopt;
  };
  for (const auto& [y, z] : starts)
    if (auto s = try_start(y, z)) return *s;

  // Restart grid: y fractions {1/6, 1/2, 5/6} per axis, z fractions {1/4, 1/2, 3/4}.
  const double yf[3] = {1.0 / 6.0, 0.5, 5.0 / 6.0};
  const double zf[3] = {0.25, 0.5, 0.75};
  long combos = 1;
  for (int i = 0; i < n; ++i) combos *= 3;
  const Box& yb = gf.gamma.y_box;
  for (long c = 0; c < combos; ++c) {
    Vec y(n);
    long k = c;
    for (int i = 0; i < n; ++i, k /= 3) y[i] = yb.lo[i] + yf[k % 3] * (yb.hi[i] - yb.lo[i]);
    if (!gf.gamma.contains_pair(jet.x, y)) continue;
    const Interval I = detail::finite_part(gf.gamma.interior(jet.x, y));
    for (double f : zf)
      if (auto s = try_start(y, I.lo + f * I.width())) return *s;
  }
  if (attempts > 0 && singular == attempts)
    throw Error(ErrorKind::SingularJacobian, "solve_YZ: Jacobian singular at every start");
  throw Error(ErrorKind::NoConvergence, "solve_YZ: no start converged (jet not in U numerically)");
}

namespace detail {

// Newton on z -> g(x, y, z) - u inside I, falling back to bracketed
// Newton-bisection. Returns nullopt when u is outside g(x, y, I).
inline std::optional<double> gstar_try(const GeneratingFunction& gf, const Vec& x, const Vec& y, double u,
                                       std::optional<double> guess = std::nullopt) {
  const Interval I = gf.gamma.interior(x, y);
  const double tol = gf.solver.newton_tol * (1.0 + std::abs(u));
  auto gz_at = [&](double z) { return eval_gz(gf, x, y, z); };

  const Interval F = finite_part(I);
  double z = (guess && I.contains(*guess)) ? *guess : F.mid();
  for (int it = 0; it < 12; ++it) {
    const double r = gf.eval(x, y, z) - u;
    if (std::abs(r) <= tol) {
      // One free correction step to land at roundoff level.
      const double gz = gz_at(z);
      if (gz < 0) {
        const double zn = z - r / gz;
        if (I.contains(zn) && std::abs(gf.eval(x, y, zn) - u) <= std::abs(r)) z = zn;
      }
      return z;
    }
    const double gz = gz_at(z);
    if (!(gz < 0)) break;
    const double zn = z - r / gz;
    if (!I.contains(zn)) break;
    z = zn;
  }

  // Bracket [a, b] with g(a) >= u >= g(b); g is decreasing in z.
  double a = I.lo;
  double b = I.hi;
  if (!std::isfinite(a) || !std::isfinite(b)) {
    double step = 1.0;
    double m = F.mid();
    a = std::isfinite(I.lo) ? I.lo : m - step;
    b = std::isfinite(I.hi) ? I.hi : m + step;
    for (int k = 0; k < 200 && !std::isfinite(I.lo) && gf.eval(x, y, a) < u; ++k) a = m - (step *= 2.0);
    step = 1.0;
    for (int k = 0; k < 200 && !std::isfinite(I.hi) && gf.eval(x, y, b) > u; ++k) b = m + (step *= 2.0);
  }
  double ga = gf.eval(x, y, a) - u;
  double gb = gf.eval(x, y, b) - u;
  if (std::abs(ga) <= tol) return a;
  if (std::abs(gb) <= tol) return b;
  if (ga < 0 || gb > 0) return std::nullopt;
  z = 0.5 * (a + b);
  for (int it = 0; it < 400; ++it) {
    const double r = gf.eval(x, y, z) - u;
    if (std::abs(r) <= tol) return z;
    if (r > 0)
      a = z;
    else
      b = z;
    const double gz = gz_at(z);
    double zn = gz < 0 ? z - r / gz : 0.5 * (a + b);
    if (!(zn > a && zn < b)) zn = 0.5 * (a + b);
    if (b - a <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(z))) return z;
    z = zn;
  }
  return z;
}

}  // namespace detail

/// The root z of g(x, y, z) = u in I(x, y).
inline double eval_gstar(const GeneratingFunction& gf, const Vec& x, const Vec& y, double u,
                         std::optional<double> guess = std::nullopt) {
  if (!gf.gamma.contains_pair(x, y)) throw Error(ErrorKind::OutOfGamma, "eval_gstar: (x, y) outside Gamma");
  if (auto z = detail::gstar_try(gf, x, y, u, guess)) return *z;
  throw Error(ErrorKind::OutOfRange, "eval_gstar: u outside g(x, y, I(x, y))");
}

/// Q = -g_y / g_z.
inline Vec map_Q(const GeneratingFunction& gf, const FiberPoint& fp) {
  if (!gf.gamma.contains(fp.x, fp.y, fp.z)) throw Error(ErrorKind::OutOfGamma, "map_Q: point outside Gamma");
  const FirstOrder f = eval_first(gf, fp.x, fp.y, fp.z);
  return -f.gy / f.gz;
}

/// P = g_x at the g*-lifted point.
inline Vec map_P(const GeneratingFunction& gf, const Vec& x, const Vec& y, double u) {
  const double z = eval_gstar(gf, x, y, u);
  return eval_gx(gf, x, y, z);
}

/// Solves Q(x, y, z) = q for x by Newton with Jacobian -E^T / g_z, restarting
/// from a 3^n grid over x_box on failure.
inline Vec invert_Q(const GeneratingFunction& gf, const Vec& q, const Vec& y, double z, const Vec& x_init) {
  const int n = gf.dim;
  const double tol = gf.solver.newton_tol * (1.0 + inf_norm(q));
  const double floor_tol = detail::fd_first_only(gf) ? 1e3 * tol : tol;
  auto resid = [&](const Vec& x) { return inf_norm(map_Q(gf, {x, y, z}) - q); };
  int singular = 0;
  int attempts = 0;

  auto run = [&](Vec x) -> std::optional<Vec> {
    ++attempts;
    if (!gf.gamma.contains(x, y, z)) return std::nullopt;
    int polish = 0;
    for (int it = 0; it <= gf.solver.max_iter; ++it) {
      const GJet j = jet_unchecked(gf, x, y, z);
      const Vec F = -j.gy / j.gz - q;
      const double res = inf_norm(F);
      if (res <= tol) {
        if (polish >= 1) return x;
        ++polish;
      }
      const Mat J = -matrix_E_from(j).transpose() / j.gz;
      Eigen::PartialPivLU<Mat> lu(J);
      const double scale = std::pow(std::max(1e-300, J.cwiseAbs().maxCoeff()), n);
      if (!(std::abs(lu.determinant()) > 1e-13 * scale)) {
        if (res <= floor_tol) return x;
        ++singular;
        return std::nullopt;
      }
      const Vec step = lu.solve(-F);
      double lambda = 1.0;
      bool accepted = false;
      for (int k = 0; k <= gf.solver.max_halvings; ++k, lambda *= 0.5) {
        const Vec xt = x + lambda * step;
        if (!gf.gamma.contains(xt, y, z)) continue;
        const double rt = resid(xt);
        if (rt < res || (res <= tol && rt <= res)) {
          x = xt;
          accepted = true;
          break;
        }
      }
      if (!accepted) return res <= floor_tol ? std::optional<Vec>(x) : std::nullopt;
    }
    return resid(x) <= floor_tol ? std::optional<Vec>(x) : std::nullopt;
  };

  if (auto x = run(x_init)) return *x;
  const Box& xb = gf.gamma.x_box;
  if (auto x = run(xb.center())) return *x;
  const double fr[3] = {1.0 / 6.0, 0.5, 5.0 / 6.0};
  long combos = 1;
  for (int i = 0; i < n; ++i) combos *= 3;
  for (long c = 0; c < combos; ++c) {
    Vec x(n);
    long k = c;
    for (int i = 0; i < n; ++i, k /= 3) x[i] = xb.lo[i] + fr[k % 3] * (xb.hi[i] - xb.lo[i]);
    if (auto r = run(x)) return *r;
  }
  if (singular > 0 && singular == attempts)
    throw Error(ErrorKind::SingularJacobian, "invert_Q: singular Jacobian at every start");
  throw Error(ErrorKind::NoConvergence, "invert_Q: q not reached from any start");
}

struct AMatrix {
  Mat A;
  YZSolution fiber;
};

/// A(x, u, p) = g_xx at the fiber point solving the generating equations.
inline AMatrix matrix_A_full(const GeneratingFunction& gf, const JetPoint& jet,
                             const std::optional<FiberPoint>& init = std::nullopt) {
  AMatrix out;
  out.fiber = solve_YZ(gf, jet, init);
  const GJet j = jet_unchecked(gf, jet.x, out.fiber.y, out.fiber.z);
  out.A = j.gxx;
  return out;
}

inline Mat matrix_A(const GeneratingFunction& gf, const JetPoint& jet,
                    const std::optional<FiberPoint>& init = std::nullopt) {
  return matrix_A_full(gf, jet, init).A;
}

/// The jet (x, g, g_x) of a fiber point.
inline JetPoint jet_of(const GeneratingFunction& gf, const FiberPoint& fp) {
  const FirstOrder f = eval_first(gf, fp.x, fp.y, fp.z);
  return JetPoint{fp.x, f.g, f.gx};
}

}  // namespace genfun
