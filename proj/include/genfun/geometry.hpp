#pragma once

// Dual segments (y_theta, z_theta), the height functions h_theta, sections,
// local g-convexity through Q-images, the max principle in its weak and
// quantitative forms, and monotonicity of the boundary curvature of S_theta.

#include "genfun/conditions.hpp"
#include "genfun/grid.hpp"
#include "genfun/hull.hpp"

namespace genfun {

struct GeometrySettings {
  /// Neighbourhood radius as a fraction of diam(x_box) when none is given.
  double radius_rel = 0.1;
  /// Nodes per axis of the section grid.
  int section_points = 129;
  /// Nodes per axis of the max-principle grid (adapted frame).
  int mp_points = 41;
  double mp_tol_rel = 1e-9;
  double ff_tol = 1e-6;
  /// Relative FD step for Hessians of h_theta.
  double hess_step = 1e-4;
  /// Hull defect allowance in units of h_grid * Lip(Q).
  double allowance_factor = 2.0;
  /// delta0* counts as positive when it exceeds this multiple of the floor
  /// mp_tol / max(weight) that the tolerance alone would admit.
  double delta0_floor_factor = 10.0;
  int xi_count = 16;
};

inline double default_radius(const GeneratingFunction& gf, const GeometrySettings& gs = {}) {
  return gs.radius_rel * gf.gamma.x_box.diameter();
}

struct DualSegment {
  SegmentConfig base;
  std::vector<Vec> y_theta;
  std::vector<double> z_theta;
  /// max over theta of |Z(x0, u0, p_theta) - g*(x0, y_theta, u0)|.
  double z_route_gap = 0.0;

  FiberPoint fiber(int k) const { return {base.x0, y_theta[k], z_theta[k]}; }
  Vec dp() const { return base.p1 - base.p0; }
};

inline DualSegment dual_segment(const GeneratingFunction& gf, const SegmentConfig& seg) {
  DualSegment ds;
  ds.base = seg;
  std::optional<FiberPoint> guess;
  for (int k = 0; k <= seg.m; ++k) {
    YZSolution s;
    try {
      s = solve_YZ(gf, seg.jet_at(seg.theta(k)), guess);
    } catch (const Error& e) {
      throw Error(ErrorKind::NotInU, std::string("dual_segment: ") + e.what());
    }
    guess = FiberPoint{seg.x0, s.y, s.z};
    ds.y_theta.push_back(s.y);
    ds.z_theta.push_back(s.z);
    const auto z2 = detail::gstar_try(gf, seg.x0, s.y, seg.u0, s.z);
    ds.z_route_gap = std::max(ds.z_route_gap, z2 ? std::abs(*z2 - s.z) : kInf);
  }
  return ds;
}

inline double h_theta(const GeneratingFunction& gf, const DualSegment& ds, int k, const Vec& x) {
  if (!gf.gamma.contains(x, ds.y_theta[k], ds.z_theta[k]) || !gf.gamma.contains(x, ds.y_theta[0], ds.z_theta[0]))
    throw Error(ErrorKind::OutOfGamma, "h_theta: x outside the fibers of the segment");
  return gf.eval(x, ds.y_theta[k], ds.z_theta[k]) - gf.eval(x, ds.y_theta[0], ds.z_theta[0]);
}

inline double h_theta_delta(const GeneratingFunction& gf, const DualSegment& ds, int k, double delta, const Vec& x) {
  if (delta < 0) throw std::invalid_argument("h_theta_delta: delta must be >= 0");
  const double h = h_theta(gf, ds, k, x);
  if (delta == 0.0) return h;
  const Vec dpt = ds.base.p_at(ds.base.theta(k)) - ds.base.p0;
  return h - 0.5 * delta * dpt.squaredNorm() * (x - ds.base.x0).squaredNorm();
}

/// The g-hyperplane E^{-1}(x0, y0, z0)(p1 - p0) . [Q(x, y0, z0) - Q(x0, y0, z0)].
inline double h_zero(const GeneratingFunction& gf, const DualSegment& ds, const Vec& x) {
  const FiberPoint f0 = ds.fiber(0);
  const EMatrix e = matrix_E(gf, f0);
  Eigen::FullPivLU<Mat> lu(e.E);
  if (!lu.isInvertible()) throw Error(ErrorKind::SingularJacobian, "h_zero: E singular at the base point");
  const Vec dir = lu.solve(ds.dp());
  return dir.dot(map_Q(gf, {x, f0.y, f0.z}) - map_Q(gf, f0));
}

/// h_{theta,delta} sampled on a cube grid around x0; mask marks h < 0.
struct SectionSample {
  Grid grid;
  Vec x0;
  int theta_index = 0;
  double theta = 0.0;
  double delta = 0.0;
  std::vector<double> values;         // NaN where clipped
  std::vector<std::uint8_t> mask;     // h < 0
  std::vector<std::uint8_t> valid;    // node inside Gamma for both fibers
  double clipped_fraction = 0.0;
};

inline SectionSample section_sample(const GeneratingFunction& gf, const DualSegment& ds, int k, double radius,
                                    int points_per_axis, double delta = 0.0) {
  SectionSample s;
  s.grid = Grid::uniform(Box::cube(ds.base.x0, radius), points_per_axis);
  s.x0 = ds.base.x0;
  s.theta_index = k;
  s.theta = ds.base.theta(k);
  s.delta = delta;
  const long N = s.grid.size();
  s.values.assign(N, std::numeric_limits<double>::quiet_NaN());
  s.mask.assign(N, 0);
  s.valid.assign(N, 0);
  parallel_for(static_cast<std::size_t>(N), [&](std::size_t i) {
    const Vec x = s.grid.node(static_cast<long>(i));
    if (!gf.gamma.contains(x, ds.y_theta[k], ds.z_theta[k]) || !gf.gamma.contains(x, ds.y_theta[0], ds.z_theta[0]))
      return;
    s.valid[i] = 1;
    s.values[i] = h_theta_delta(gf, ds, k, delta, x);
    s.mask[i] = s.values[i] < 0.0;
  });
  long clipped = 0;
  for (auto v : s.valid) clipped += v ? 0 : 1;
  s.clipped_fraction = static_cast<double>(clipped) / static_cast<double>(N);
  return s;
}

/// Q(., y0, z0) image of the masked nodes within `radius` of x0 must be
/// convex up to the discretization allowance 2 h_grid Lip(Q).
/// margin = allowance - hull defect.
inline ConditionReport check_local_gconvexity(const GeneratingFunction& gf, const SectionSample& section,
                                              const Vec& y0, double z0, double radius,
                                              const GeometrySettings& gs = {}) {
  if (gf.dim == 1) return vacuous_report("A3w(1)");
  const Grid& G = section.grid;
  const long N = G.size();
  std::vector<std::uint8_t> use(N, 0);
  std::vector<Vec> q(N);
  parallel_for(static_cast<std::size_t>(N), [&](std::size_t i) {
    const Vec x = G.node(static_cast<long>(i));
    if ((x - section.x0).norm() > radius) return;
    if (!gf.gamma.contains(x, y0, z0)) return;
    q[i] = map_Q(gf, {x, y0, z0});
    use[i] = 1;
  });
  double lip = 0.0;
  for (long i = 0; i < N; ++i) {
    if (!use[i]) continue;
    for (long j : G.neighbours(i)) {
      if (j < i || !use[j]) continue;
      lip = std::max(lip, (q[i] - q[j]).norm() / (G.node(i) - G.node(j)).norm());
    }
  }
  std::vector<Vec> image;
  for (long i = 0; i < N; ++i)
    if (use[i] && section.mask[i]) image.push_back(q[i]);
  const double h = G.h();
  const double allowance = gs.allowance_factor * h * lip;
  ConditionReport r;
  r.condition_id = "A3w(1)";
  r.samples_used = static_cast<long>(image.size());
  const HullDefect hd = hull_defect(image, std::max(0.5 * h * lip, 1e-15));
  r.margin = allowance - hd.defect;
  r.verdict = hd.defect <= allowance ? Verdict::holds : Verdict::fails;
  r.extra("hull_defect", hd.defect).extra("allowance", allowance).extra("lip_Q", lip).extra("h_grid", h);
  r.extra("theta", section.theta).extra("clipped_fraction", section.clipped_fraction);
  r.witness = Witness{}.add("x0", section.x0).add("y0", y0).add("z0", z0).add("q_defect_point", hd.where.size() ? hd.where : Vec::Zero(gf.dim));
  if (image.size() < 3) r.notes.push_back("section contains fewer than 3 nodes; convexity is trivial");
  return r;
}

/// Precomputed terms of the max principle on a ball around x0:
/// gap = max(g(x,y0,z0), g(x,y1,z1)) - g(x,y_theta,z_theta) and
/// weight = (theta(1-theta)|p1-p0||x-x0|)^2, one entry per admissible
/// (x, theta) pair.
struct MaxPrincipleScan {
  double radius = 0.0;
  double h_grid = 0.0;
  std::vector<double> gap;
  std::vector<double> weight;
  std::vector<int> theta_index;
  std::vector<Vec> x;
  double mp_tol = 0.0;
  double clipped_fraction = 0.0;

  /// min(gap - delta0 * weight) and its first minimizer.
  std::pair<double, long> margin(double delta0) const {
    double best = kInf;
    long arg = -1;
    for (std::size_t i = 0; i < gap.size(); ++i) {
      const double v = gap[i] - delta0 * weight[i];
      if (v < best) {
        best = v;
        arg = static_cast<long>(i);
      }
    }
    return {best, arg};
  }
  bool holds(double delta0) const { return gap.empty() || margin(delta0).first >= -mp_tol; }
};

/// Orthonormal frame whose first vector is along d.
inline Mat adapted_frame(const Vec& d) {
  const int n = static_cast<int>(d.size());
  Mat M(n, n + 1);
  M.col(0) = d.norm() > 0 ? Vec(d.normalized()) : Vec(Vec::Unit(n, 0));
  M.rightCols(n) = Mat::Identity(n, n);
  Eigen::HouseholderQR<Mat> qr(M);
  Mat Qm = qr.householderQ() * Mat::Identity(n, n);
  if (Qm.col(0).dot(M.col(0)) < 0) Qm.col(0) *= -1.0;
  return Qm;
}

inline MaxPrincipleScan max_principle_scan(const GeneratingFunction& gf, const DualSegment& ds, double radius,
                                           const GeometrySettings& gs = {}) {
  const int n = gf.dim;
  const int N = gs.mp_points;
  const Mat frame = adapted_frame(ds.dp());
  const int m = ds.base.m;
  const double dpn = ds.dp().norm();
  MaxPrincipleScan sc;
  sc.radius = radius;
  sc.h_grid = 2.0 * radius / (N - 1);
  // Ball nodes in the adapted frame. The worst case of the max principle
  // sits on the contact set {g(., y0, z0) = g(., y1, z1)}, which a grid only
  // approaches to first order in h; along every grid line in the p1 - p0
  // direction the crossings of that set are located by bisection and added.
  Grid unit = Grid::uniform(Box::cube(Vec::Zero(n), 1.0), N);
  std::vector<Vec> nodes;
  const Vec& y0 = ds.y_theta[0];
  const Vec& y1 = ds.y_theta[m];
  const double z0 = ds.z_theta[0], z1 = ds.z_theta[m];
  auto contact = [&](const Vec& x) -> std::optional<double> {
    if (!gf.gamma.contains(x, y0, z0) || !gf.gamma.contains(x, y1, z1)) return std::nullopt;
    return gf.eval(x, y1, z1) - gf.eval(x, y0, z0);
  };
  const long lines = unit.size() / N;
  for (long line = 0; line < lines; ++line) {
    std::optional<double> prev_val;
    Vec prev_t;
    for (int i0 = 0; i0 < N; ++i0) {
      const Vec t = unit.node(static_cast<long>(i0) * lines + line);
      if (t.norm() > 1.0 + 1e-12) {
        prev_val.reset();
        continue;
      }
      const Vec x = ds.base.x0 + radius * (frame * t);
      nodes.push_back(x);
      const auto v = contact(x);
      if (v && prev_val && ((*v > 0) != (*prev_val > 0))) {
        Vec a = prev_t, b = t;
        double fa = *prev_val;
        for (int it = 0; it < 60; ++it) {
          const Vec c = 0.5 * (a + b);
          const auto fc = contact(ds.base.x0 + radius * (frame * c));
          if (!fc) break;
          if ((*fc > 0) == (fa > 0)) {
            a = c;
            fa = *fc;
          } else {
            b = c;
          }
        }
        nodes.push_back(ds.base.x0 + radius * (frame * (0.5 * (a + b))));
      }
      prev_val = v;
      prev_t = t;
    }
  }
  struct Row {
    std::vector<double> gap, w;
    std::vector<int> k;
    double gmax = 0;
    long clipped = 0;
  };
  std::vector<Row> rows(nodes.size());
  parallel_for(nodes.size(), [&](std::size_t i) {
    const Vec& x = nodes[i];
    Row& row = rows[i];
    const bool ok0 = gf.gamma.contains(x, ds.y_theta[0], ds.z_theta[0]);
    const bool ok1 = gf.gamma.contains(x, ds.y_theta[m], ds.z_theta[m]);
    if (!ok0 || !ok1) {
      row.clipped = m + 1;
      return;
    }
    const double g0 = gf.eval(x, ds.y_theta[0], ds.z_theta[0]);
    const double g1 = gf.eval(x, ds.y_theta[m], ds.z_theta[m]);
    const double r2 = (x - ds.base.x0).squaredNorm();
    row.gmax = std::max(std::abs(g0), std::abs(g1));
    for (int k = 0; k <= m; ++k) {
      if (!gf.gamma.contains(x, ds.y_theta[k], ds.z_theta[k])) {
        ++row.clipped;
        continue;
      }
      const double gt = gf.eval(x, ds.y_theta[k], ds.z_theta[k]);
      const double th = ds.base.theta(k);
      const double s = th * (1 - th) * dpn;
      row.gap.push_back(std::max(g0, g1) - gt);
      row.w.push_back(s * s * r2);
      row.k.push_back(k);
      row.gmax = std::max(row.gmax, std::abs(gt));
    }
  });
  double gscale = 1.0;
  long clipped = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    gscale = std::max(gscale, rows[i].gmax);
    clipped += rows[i].clipped;
    for (std::size_t j = 0; j < rows[i].gap.size(); ++j) {
      sc.gap.push_back(rows[i].gap[j]);
      sc.weight.push_back(rows[i].w[j]);
      sc.theta_index.push_back(rows[i].k[j]);
      sc.x.push_back(nodes[i]);
    }
  }
  sc.mp_tol = gs.mp_tol_rel * gscale;
  sc.clipped_fraction = static_cast<double>(clipped) / static_cast<double>(nodes.size() * (m + 1));
  return sc;
}

/// g(x, y_theta, z_theta) <= max(g(x, y0, z0), g(x, y1, z1)) - delta0 (theta(1-theta)|p1-p0||x-x0|)^2
/// on a ball around x0. On failure the radius is halved (grid node count
/// fixed) until it drops below 4 times the initial spacing.
inline ConditionReport check_max_principle(const GeneratingFunction& gf, const DualSegment& ds, double radius,
                                           double delta0, const GeometrySettings& gs = {}) {
  if (delta0 < 0) throw std::invalid_argument("check_max_principle: delta0 must be >= 0");
  ConditionReport r;
  r.condition_id = delta0 > 0 ? "A3s(2)" : "A3w(2)";
  if (gf.dim == 1) return vacuous_report(r.condition_id);
  const double h0 = 2.0 * radius / (gs.mp_points - 1);
  std::string radii;
  MaxPrincipleScan sc;
  std::pair<double, long> m{kInf, -1};
  for (double rad = radius; rad >= 4.0 * h0 - 1e-15; rad *= 0.5) {
    sc = max_principle_scan(gf, ds, rad, gs);
    m = sc.margin(delta0);
    radii += (radii.empty() ? "" : ",") + std::to_string(rad);
    if (m.first >= -sc.mp_tol) break;
  }
  r.samples_used = static_cast<long>(sc.gap.size());
  r.margin = std::isfinite(m.first) ? m.first : kLargestFinite;
  r.verdict = (sc.gap.empty() || m.first >= -sc.mp_tol) ? Verdict::holds : Verdict::fails;
  r.extra("radius_used", sc.radius).extra("mp_tol", sc.mp_tol).extra("clipped_fraction", sc.clipped_fraction);
  r.extra("delta0", delta0);
  r.notes.push_back("radii tried: " + radii);
  Witness w;
  w.add("x0", ds.base.x0).add("u0", ds.base.u0).add("p0", ds.base.p0).add("p1", ds.base.p1);
  if (m.second >= 0) {
    w.add("x", sc.x[m.second]).add("theta", ds.base.theta(sc.theta_index[m.second]));
  }
  r.witness = w;
  return r;
}

/// Largest delta0 for which the quantitative max principle holds, found by
/// bisection on the scan at the radius where the weak form holds. Returns a
/// negative value when the weak form fails at every radius.
struct Delta0Result {
  double delta0 = -1.0;
  /// mp_tol / max weight: the delta0 admitted by the tolerance alone.
  double floor = 0.0;
  bool positive = false;
  MaxPrincipleScan scan;
};

inline Delta0Result max_principle_delta0(const GeneratingFunction& gf, const DualSegment& ds, double radius,
                                         const GeometrySettings& gs = {}) {
  Delta0Result out;
  const double h0 = 2.0 * radius / (gs.mp_points - 1);
  bool weak = false;
  for (double rad = radius; rad >= 4.0 * h0 - 1e-15; rad *= 0.5) {
    out.scan = max_principle_scan(gf, ds, rad, gs);
    if (out.scan.holds(0.0)) {
      weak = true;
      break;
    }
  }
  if (!weak) return out;
  const auto& sc = out.scan;
  double wmax = 0;
  for (double w : sc.weight) wmax = std::max(wmax, w);
  if (wmax == 0.0) {
    out.delta0 = kLargestFinite;
    out.positive = true;
    return out;
  }
  out.floor = sc.mp_tol / wmax;
  double lo = 0.0, hi = 1.0;
  while (sc.holds(hi) && hi < 1e12) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (sc.holds(mid) ? lo : hi) = mid;
  }
  out.delta0 = lo;
  out.positive = lo > gs.delta0_floor_factor * out.floor;
  return out;
}

/// Hessian at x of h_theta, by central differences of its analytic x-gradient.
inline Mat hessian_h_theta(const GeneratingFunction& gf, const DualSegment& ds, int k, const Vec& x, double step_rel) {
  const int n = gf.dim;
  Mat H(n, n);
  auto grad = [&](const Vec& xs) {
    return Vec(eval_gx(gf, xs, ds.y_theta[k], ds.z_theta[k]) - eval_gx(gf, xs, ds.y_theta[0], ds.z_theta[0]));
  };
  Vec xs = x;
  for (int j = 0; j < n; ++j) {
    const double h = step_rel * unit_scale(x[j]);
    xs[j] = x[j] + h;
    const Vec gp = grad(xs);
    xs[j] = x[j] - h;
    const Vec gm = grad(xs);
    xs[j] = x[j];
    H.col(j) = (gp - gm) / (2 * h);
  }
  return 0.5 * (H + H.transpose());
}

/// (D^2 h_theta xi, xi)(x0) / theta must be non-decreasing in theta for xi
/// tangent to the level sets at x0. margin = min over theta < theta' and xi
/// of [(D^2 h_theta' xi, xi)/theta' - (D^2 h_theta xi, xi)/theta].
inline ConditionReport fundamental_form_monotonicity(const GeneratingFunction& gf, const DualSegment& ds,
                                                     std::uint64_t seed = 0, const GeometrySettings& gs = {}) {
  if (gf.dim == 1) return vacuous_report("ff_monotonicity", seed);
  const int m = ds.base.m;
  const Vec& x0 = ds.base.x0;
  for (int k = 1; k <= m; ++k) {
    const Vec grad = eval_gx(gf, x0, ds.y_theta[k], ds.z_theta[k]) - eval_gx(gf, x0, ds.y_theta[0], ds.z_theta[0]);
    if (grad.norm() < 1e-12) throw Error(ErrorKind::DegenerateGradient, "fundamental_form_monotonicity: grad h_theta(x0) = 0");
  }
  const auto xis = xi_directions(ds.dp(), gs.xi_count, seed);
  std::vector<std::vector<double>> c(xis.size(), std::vector<double>(m + 1, 0.0));
  std::vector<Mat> H(m + 1);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
    const int k = static_cast<int>(i) + 1;
    H[k] = hessian_h_theta(gf, ds, k, x0, gs.hess_step);
  });
  for (std::size_t j = 0; j < xis.size(); ++j)
    for (int k = 1; k <= m; ++k) c[j][k] = xis[j].dot(H[k] * xis[j]) / ds.base.theta(k);
  double best = kInf;
  int ka = -1, kb = -1;
  long jx = -1;
  for (int a = 1; a <= m; ++a)
    for (int b = a + 1; b <= m; ++b)
      for (std::size_t j = 0; j < xis.size(); ++j) {
        const double v = c[j][b] - c[j][a];
        if (v < best) {
          best = v;
          ka = a;
          kb = b;
          jx = static_cast<long>(j);
        }
      }
  ConditionReport r;
  r.condition_id = "ff_monotonicity";
  r.seed = seed;
  r.samples_used = static_cast<long>(xis.size()) * m * (m - 1) / 2;
  if (ka < 0) {
    r.verdict = Verdict::holds;
    r.margin = kLargestFinite;
    return r;
  }
  r.margin = best;
  r.verdict = best >= -gs.ff_tol ? Verdict::holds : Verdict::fails;
  r.extra("ff_tol", gs.ff_tol);
  r.witness = Witness{}
                  .add("x0", x0)
                  .add("p0", ds.base.p0)
                  .add("p1", ds.base.p1)
                  .add("theta", ds.base.theta(ka))
                  .add("theta_prime", ds.base.theta(kb))
                  .add("xi", xis[jx]);
  return r;
}

/// The sub-segment [p_a, p_b] of a segment, re-gridded with the same m.
inline SegmentConfig sub_segment(const SegmentConfig& seg, double theta_a, double theta_b) {
  return SegmentConfig{seg.x0, seg.u0, seg.p_at(theta_a), seg.p_at(theta_b), seg.m};
}

/// Sub-segment carrying the A3w witness of a report from check_A3w.
inline SegmentConfig witness_segment(const ConditionReport& a3w) {
  if (!a3w.witness) throw std::invalid_argument("witness_segment: report has no witness");
  const Witness& w = *a3w.witness;
  SegmentConfig seg{w.vector("x0"), w.scalar("u0"), w.vector("p0"), w.vector("p1"), 32};
  return sub_segment(seg, w.scalar("theta_a"), w.scalar("theta_b"));
}

/// Local g-convexity of S_1 and the weak max principle for one segment.
struct ChainResult {
  ConditionReport a3w;
  ConditionReport local;
  ConditionReport max_principle;
};

inline ChainResult equivalence_chain_at(const GeneratingFunction& gf, const SegmentConfig& seg, double radius,
                                std::uint64_t seed, const ConditionSettings& cs, const GeometrySettings& gs) {
  ChainResult out;
  out.a3w = check_A3w(gf, seg, seed, cs);
  SegmentConfig probe = seg;
  if (out.a3w.fails()) probe = witness_segment(out.a3w), probe.m = seg.m;
  const DualSegment ds = dual_segment(gf, probe);
  const SectionSample s1 = section_sample(gf, ds, probe.m, radius, gs.section_points);
  out.local = check_local_gconvexity(gf, s1, ds.y_theta[0], ds.z_theta[0], radius, gs);
  out.max_principle = check_max_principle(gf, ds, radius, 0.0, gs);
  return out;
}

/// The equivalence chain on a segment family: where A3w holds, both A3w(1)
/// and A3w(2) hold; where it fails with margin
/// below -10 conv_tol, at least one of them fails on the witness
/// sub-segment. margin = -(number of segments breaking the chain).
inline ConditionReport check_equivalence_chain(const GeneratingFunction& gf, std::span<const SegmentConfig> segs,
                                       double radius, std::uint64_t seed = 0, const ConditionSettings& cs = {},
                                       const GeometrySettings& gs = {}) {
  if (gf.dim == 1) return vacuous_report("thm2.1", seed);
  std::vector<ChainResult> res(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) res[i] = equivalence_chain_at(gf, segs[i], radius, derive_seed(seed, i), cs, gs);
  long broken = 0, positive = 0, negative = 0, undecided = 0;
  double min_local = kInf, min_mp = kInf;
  long first_broken = -1;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const auto& c = res[i];
    const double tol = c.a3w.extra_value("conv_tol");
    const double m = c.a3w.margin - tol;  // raw minimal defect
    min_local = std::min(min_local, c.local.margin);
    min_mp = std::min(min_mp, c.max_principle.margin);
    bool ok = true;
    if (c.a3w.verdict == Verdict::inconclusive) {
      ++undecided;
    } else if (c.a3w.holds()) {
      ++positive;
      ok = c.local.holds() && c.max_principle.holds();
    } else if (m < -10 * tol) {
      ++negative;
      ok = c.local.fails() || c.max_principle.fails();
    } else {
      ++undecided;
    }
    if (!ok) {
      ++broken;
      if (first_broken < 0) first_broken = static_cast<long>(i);
    }
  }
  ConditionReport r;
  r.condition_id = "thm2.1";
  r.seed = seed;
  r.samples_used = static_cast<long>(segs.size());
  r.margin = broken == 0 ? 0.0 : -static_cast<double>(broken);
  r.verdict = broken == 0 ? Verdict::holds : Verdict::fails;
  if (undecided == static_cast<long>(segs.size())) r.verdict = Verdict::inconclusive;
  r.extra("segments_a3w_holds", static_cast<double>(positive));
  r.extra("segments_a3w_fails", static_cast<double>(negative));
  r.extra("segments_undecided", static_cast<double>(undecided));
  r.extra("min_local_gconvexity_margin", min_local);
  r.extra("min_max_principle_margin", min_mp);
  if (first_broken >= 0) r.witness = res[first_broken].a3w.witness;
  return r;
}

/// Quantitative chain: sign(delta_hat) from check_A3s agrees with the sign
/// of the largest admissible delta0 in the max principle (minimum over the
/// family), and curvature monotonicity holds wherever A3w holds.
/// margin = 0 when both agree, -1 otherwise.
inline ConditionReport check_quantitative_chain(const GeneratingFunction& gf, std::span<const SegmentConfig> segs,
                                       double radius, std::uint64_t seed = 0, const ConditionSettings& cs = {},
                                       const GeometrySettings& gs = {}) {
  if (gf.dim == 1) return vacuous_report("thm2.2", seed);
  const ConditionReport a3s = check_A3s(gf, segs, seed, cs);
  const ConditionReport a3w = check_A3w(gf, segs, seed, cs);
  double d0 = kInf;
  double ff = kInf;
  bool any_negative = false;
  bool all_positive = true;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const DualSegment ds = dual_segment(gf, segs[i]);
    const Delta0Result dr = max_principle_delta0(gf, ds, radius, gs);
    if (dr.delta0 < 0) any_negative = true;
    if (!dr.positive) all_positive = false;
    d0 = std::min(d0, dr.delta0);
    ff = std::min(ff, fundamental_form_monotonicity(gf, ds, derive_seed(seed, i), gs).margin);
  }
  const int sign_hat = a3s.extra_value("delta_hat") > cs.a3s_tol ? 1 : (a3w.holds() ? 0 : -1);
  const int sign_d0 = any_negative ? -1 : (all_positive ? 1 : 0);
  const bool ff_ok = !a3w.holds() || ff >= -gs.ff_tol;
  ConditionReport r;
  r.condition_id = "thm2.2";
  r.seed = seed;
  r.samples_used = static_cast<long>(segs.size());
  r.margin = (sign_hat == sign_d0 && ff_ok) ? 0.0 : -1.0;
  r.verdict = (sign_hat == sign_d0 && ff_ok) ? Verdict::holds : Verdict::fails;
  if (a3s.verdict == Verdict::inconclusive) r.verdict = Verdict::inconclusive;
  r.extra("delta_hat", a3s.extra_value("delta_hat"));
  r.extra("delta0_star", d0 < 0 ? -1.0 : d0);
  r.extra("sign_delta_hat", sign_hat).extra("sign_delta0_star", sign_d0);
  r.extra("ff_monotonicity_margin", ff);
  r.witness = a3s.witness;
  return r;
}

}  // namespace genfun
