#pragma once

// g-affine functions, sampled g-convex functions, the g-transform and its
// biconjugate envelope, the g-normal map, sections, and the section /
// normal-map / local-to-global checks on grids.

#include "genfun/conditions.hpp"
#include "genfun/geometry.hpp"
#include "genfun/grid.hpp"
#include "genfun/hull.hpp"

#include <Eigen/Eigenvalues>

namespace genfun {

/// The g-affine function x -> g(x, y, z).
struct GAffine {
  Vec y;
  double z = 0.0;
};

inline double g_affine_eval(const GeneratingFunction& gf, const GAffine& ga, const Vec& x) {
  if (!gf.gamma.contains(x, ga.y, ga.z)) throw Error(ErrorKind::OutOfGamma, "g_affine_eval: point outside Gamma");
  return gf.eval(x, ga.y, ga.z);
}

/// Node values of a function on a uniform grid. `active` (empty = every
/// node) restricts the domain Omega to a subset of the grid box.
struct SampledFunction {
  Grid grid;
  std::vector<double> values;
  std::vector<std::uint8_t> active;

  long size() const { return grid.size(); }
  bool is_active(long i) const { return active.empty() || active[static_cast<std::size_t>(i)] != 0; }
  double operator[](long i) const { return values[static_cast<std::size_t>(i)]; }
  std::vector<long> active_nodes() const {
    std::vector<long> out;
    for (long i = 0; i < size(); ++i)
      if (is_active(i)) out.push_back(i);
    return out;
  }
};

template <class F>
SampledFunction sample_function(const Grid& grid, F&& fn) {
  SampledFunction u{grid, std::vector<double>(static_cast<std::size_t>(grid.size())), {}};
  for (long i = 0; i < grid.size(); ++i) u.values[static_cast<std::size_t>(i)] = fn(grid.node(i));
  return u;
}

/// max_i g(x, y_i, z_i) on the grid.
inline SampledFunction max_of_affines(const GeneratingFunction& gf, const Grid& grid, const std::vector<GAffine>& parts) {
  if (parts.empty()) throw std::invalid_argument("max_of_affines: no parts");
  return sample_function(grid, [&](const Vec& x) {
    double m = -kInf;
    for (const auto& p : parts) m = std::max(m, g_affine_eval(gf, p, x));
    return m;
  });
}

inline SampledFunction min_of_affines(const GeneratingFunction& gf, const Grid& grid, const std::vector<GAffine>& parts) {
  if (parts.empty()) throw std::invalid_argument("min_of_affines: no parts");
  return sample_function(grid, [&](const Vec& x) {
    double m = kInf;
    for (const auto& p : parts) m = std::min(m, g_affine_eval(gf, p, x));
    return m;
  });
}

/// Marks the grid nodes inside the closed ball |x - center| <= radius.
inline std::vector<std::uint8_t> disk_mask(const Grid& grid, const Vec& center, double radius) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(grid.size()));
  for (long i = 0; i < grid.size(); ++i) m[static_cast<std::size_t>(i)] = (grid.node(i) - center).norm() <= radius;
  return m;
}

inline std::vector<std::uint8_t> annulus_mask(const Grid& grid, const Vec& center, double inner, double outer) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(grid.size()));
  for (long i = 0; i < grid.size(); ++i) {
    const double r = (grid.node(i) - center).norm();
    m[static_cast<std::size_t>(i)] = r >= inner && r <= outer;
  }
  return m;
}

/// Largest difference quotient over pairs of active axis neighbours.
inline double lipschitz_estimate(const SampledFunction& u) {
  double lip = 0.0;
  for (long i = 0; i < u.size(); ++i) {
    if (!u.is_active(i)) continue;
    const auto m = u.grid.multi(i);
    for (int a = 0; a < u.grid.dim(); ++a) {
      if (m[a] + 1 >= u.grid.counts[a]) continue;
      auto mn = m;
      ++mn[a];
      const long j = u.grid.index(mn);
      if (u.is_active(j)) lip = std::max(lip, std::abs(u[j] - u[i]) / u.grid.spacing(a));
    }
  }
  return lip;
}

struct GConvexSettings {
  /// Attaining set of the g-normal map: g*(x0, y, u0) >= v(y) - attain_tol (1 + |u0|).
  double attain_tol = 1e-9;
  /// support_tol = support_tol_abs + lip_factor * Lip(u) * h_grid.
  double support_tol_abs = 1e-8;
  double lip_factor = 2.0;
  /// A node is a kink when its grid subdifferential has diameter > kink_factor * h * Lip.
  double kink_factor = 10.0;
  /// Radius of the local support ball in units of h_grid.
  double r_loc_factor = 5.0;
  double contact_tol = 1e-9;
  int hypothesis_samples = 64;
  double max_fail_fraction = 0.01;
  int segment_m = 16;
  int domain_samples = 8;
};

struct TransformResult {
  /// v(y) = max over active x of g*(x, y, u(x)), one value per y-node.
  SampledFunction v;
  /// Lowest-index attaining x-node for every y-node.
  std::vector<long> argmax;
  long pairs = 0;
  long clipped_pairs = 0;
  double clipped_fraction() const { return pairs ? static_cast<double>(clipped_pairs) / pairs : 0.0; }
};

inline TransformResult g_transform_full(const GeneratingFunction& gf, const SampledFunction& u, const Grid& y_grid) {
  const auto xs_idx = u.active_nodes();
  std::vector<Vec> xs;
  xs.reserve(xs_idx.size());
  for (long i : xs_idx) xs.push_back(u.grid.node(i));
  const long M = y_grid.size();
  TransformResult out;
  out.v = SampledFunction{y_grid, std::vector<double>(static_cast<std::size_t>(M), -kInf), {}};
  out.argmax.assign(static_cast<std::size_t>(M), -1);
  std::vector<long> clipped(static_cast<std::size_t>(M), 0);
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t j) {
    const Vec y = y_grid.node(static_cast<long>(j));
    double best = -kInf;
    long arg = -1;
    std::optional<double> guess;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      if (!gf.gamma.contains_pair(xs[k], y)) {
        ++clipped[j];
        continue;
      }
      const auto z = detail::gstar_try(gf, xs[k], y, u[xs_idx[k]], guess);
      if (!z) {
        ++clipped[j];
        continue;
      }
      guess = *z;
      if (*z > best) {
        best = *z;
        arg = xs_idx[k];
      }
    }
    out.v.values[j] = best;
    out.argmax[j] = arg;
  });
  out.pairs = static_cast<long>(xs.size()) * M;
  for (std::size_t j = 0; j < clipped.size(); ++j) {
    out.clipped_pairs += clipped[j];
    if (out.argmax[j] < 0)
      throw Error(ErrorKind::AllClipped, "g_transform: no admissible x-node for y-node " + std::to_string(j));
  }
  return out;
}

inline SampledFunction g_transform(const GeneratingFunction& gf, const SampledFunction& u, const Grid& y_grid) {
  return g_transform_full(gf, u, y_grid).v;
}

struct EnvelopeResult {
  /// u**(x) = max over y-nodes of g(x, y, v(y)), on every node of u's grid.
  SampledFunction u2;
  TransformResult transform;
  /// Attaining y-node per x-node (-1 if none admissible).
  std::vector<long> argmax;
};

inline EnvelopeResult g_biconjugate_full(const GeneratingFunction& gf, const SampledFunction& u, const Grid& y_grid) {
  EnvelopeResult out;
  out.transform = g_transform_full(gf, u, y_grid);
  const SampledFunction& v = out.transform.v;
  std::vector<Vec> ys;
  for (long j = 0; j < y_grid.size(); ++j) ys.push_back(y_grid.node(j));
  const long N = u.size();
  out.u2 = SampledFunction{u.grid, std::vector<double>(static_cast<std::size_t>(N), -kInf), u.active};
  out.argmax.assign(static_cast<std::size_t>(N), -1);
  parallel_for(static_cast<std::size_t>(N), [&](std::size_t i) {
    const Vec x = u.grid.node(static_cast<long>(i));
    double best = -kInf;
    long arg = -1;
    for (std::size_t j = 0; j < ys.size(); ++j) {
      if (!gf.gamma.contains(x, ys[j], v.values[j])) continue;
      const double val = gf.eval(x, ys[j], v.values[j]);
      if (val > best) {
        best = val;
        arg = static_cast<long>(j);
      }
    }
    out.u2.values[i] = best;
    out.argmax[i] = arg;
  });
  return out;
}

inline SampledFunction g_biconjugate(const GeneratingFunction& gf, const SampledFunction& u, const Grid& y_grid) {
  return g_biconjugate_full(gf, u, y_grid).u2;
}

/// Holds iff max over active nodes of (u - u**) <= tol; tol <= 0 selects
/// 2 * Lip(u) * h_grid. margin = tol - max defect.
inline ConditionReport is_g_convex(const GeneratingFunction& gf, const SampledFunction& u, const Grid& y_grid,
                                   double tol = -1.0, const GConvexSettings& s = {}) {
  const double lip = lipschitz_estimate(u);
  const double h = u.grid.h();
  if (tol <= 0) tol = s.lip_factor * lip * h;
  const EnvelopeResult env = g_biconjugate_full(gf, u, y_grid);
  double worst = -kInf;
  long at = -1;
  for (long i = 0; i < u.size(); ++i) {
    if (!u.is_active(i)) continue;
    const double d = u[i] - env.u2[i];
    if (d > worst) {
      worst = d;
      at = i;
    }
  }
  ConditionReport r;
  r.condition_id = "g_convex";
  r.samples_used = static_cast<long>(u.active_nodes().size());
  r.margin = tol - worst;
  r.verdict = worst <= tol ? Verdict::holds : Verdict::fails;
  r.extra("max_defect", worst).extra("tol", tol).extra("lip_u", lip).extra("h_grid", h);
  r.extra("clipped_fraction", env.transform.clipped_fraction());
  if (at >= 0) r.witness = Witness{}.add("x", u.grid.node(at)).add("u", u[at]).add("u_envelope", env.u2[at]);
  return r;
}

/// Grid subdifferential at a node: the 2^n vertices built from forward or
/// backward difference quotients along each axis (one-sided at the border).
inline std::vector<Vec> grid_subdifferential(const SampledFunction& u, long node) {
  const int n = u.grid.dim();
  const auto m = u.grid.multi(node);
  std::vector<std::vector<double>> choices(n);
  for (int a = 0; a < n; ++a) {
    const double h = u.grid.spacing(a);
    // Inactive neighbours with finite values are used only when the node
    // has no active neighbour along the axis (e.g. the rim of a disk).
    for (bool allow_inactive : {false, true}) {
      for (int d : {-1, 1}) {
        auto mn = m;
        mn[a] += d;
        if (mn[a] < 0 || mn[a] >= u.grid.counts[a]) continue;
        const long j = u.grid.index(mn);
        if (!(u.is_active(j) || (allow_inactive && std::isfinite(u[j])))) continue;
        choices[a].push_back(d * (u[j] - u[node]) / h);
      }
      if (!choices[a].empty()) break;
    }
    if (choices[a].empty()) throw Error(ErrorKind::OutOfRange, "grid_subdifferential: isolated node along an axis");
  }
  std::vector<Vec> verts{Vec::Zero(n)};
  for (int a = 0; a < n; ++a) {
    std::vector<Vec> next;
    for (const Vec& v : verts)
      for (double c : choices[a]) {
        Vec w = v;
        w[a] = c;
        next.push_back(w);
      }
    verts = std::move(next);
  }
  return verts;
}

inline double diameter(const std::vector<Vec>& pts) {
  double d = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, (pts[i] - pts[j]).norm());
  return d;
}

struct NormalMapResult {
  Vec x0;
  double u0 = 0.0;
  long node = -1;
  std::vector<GAffine> supports;
  /// y-grid indices of the supports.
  std::vector<long> support_nodes;
  /// Y-images of the grid-subdifferential vertices.
  std::vector<Vec> sigma0;
  double subdiff_diameter = 0.0;
  bool kink = false;
  double support_tol = 0.0;
  /// Largest violation max_x (g(x, y, z) - u(x)) over the returned supports.
  double worst_violation = -kInf;
};

/// Supports at the grid node nearest x0: y-nodes whose g-affine through
/// (x0, u(x0)) attains the g-transform and stays below u on the grid.
inline NormalMapResult g_normal_map(const GeneratingFunction& gf, const SampledFunction& u, const Vec& x0,
                                    const Grid& y_grid, const GConvexSettings& s = {},
                                    const EnvelopeResult* precomputed = nullptr) {
  EnvelopeResult local;
  if (!precomputed) local = g_biconjugate_full(gf, u, y_grid);
  const EnvelopeResult& env = precomputed ? *precomputed : local;
  const double lip = lipschitz_estimate(u);
  const double h = u.grid.h();
  NormalMapResult out;
  out.support_tol = s.support_tol_abs + s.lip_factor * lip * h;
  double defect = -kInf;
  for (long i = 0; i < u.size(); ++i)
    if (u.is_active(i)) defect = std::max(defect, u[i] - env.u2[i]);
  if (defect > s.lip_factor * lip * h) throw Error(ErrorKind::NotGConvex, "g_normal_map: u is not g-convex on the grid");

  out.node = u.grid.nearest(x0);
  if (!u.is_active(out.node)) throw Error(ErrorKind::OutOfRange, "g_normal_map: x0 is outside Omega");
  out.x0 = u.grid.node(out.node);
  out.u0 = u[out.node];
  const auto active = u.active_nodes();
  const double atol = s.attain_tol * (1.0 + std::abs(out.u0));
  for (long j = 0; j < y_grid.size(); ++j) {
    const Vec y = y_grid.node(j);
    if (!gf.gamma.contains_pair(out.x0, y)) continue;
    const auto z = detail::gstar_try(gf, out.x0, y, out.u0);
    if (!z || *z < env.transform.v[j] - atol) continue;
    double viol = -kInf;
    for (long i : active) {
      const Vec x = u.grid.node(i);
      if (gf.gamma.contains(x, y, *z)) viol = std::max(viol, gf.eval(x, y, *z) - u[i]);
    }
    if (viol > out.support_tol) continue;
    out.worst_violation = std::max(out.worst_violation, viol);
    out.supports.push_back({y, *z});
    out.support_nodes.push_back(j);
  }

  const auto verts = grid_subdifferential(u, out.node);
  out.subdiff_diameter = diameter(verts);
  out.kink = out.subdiff_diameter > s.kink_factor * h * lip;
  for (const Vec& p : verts) {
    try {
      out.sigma0.push_back(solve_YZ(gf, {out.x0, out.u0, p}).y);
    } catch (const Error&) {
      throw Error(ErrorKind::NotInU, "g_normal_map: a subdifferential vertex leaves the one-jet set");
    }
  }
  return out;
}

enum class SectionMode { open, closed, contact };

/// values = u - g(., y, z); mask by u < g (open), u <= g + tol (closed) or
/// |u - g| <= tol (contact). Nodes outside Omega or Gamma are left unmasked.
inline SectionSample section_of(const GeneratingFunction& gf, const SampledFunction& u, const GAffine& ga,
                                SectionMode mode, const GConvexSettings& s = {}) {
  SectionSample out;
  out.grid = u.grid;
  out.x0 = u.grid.box.center();
  const long N = u.size();
  out.values.assign(static_cast<std::size_t>(N), std::numeric_limits<double>::quiet_NaN());
  out.mask.assign(static_cast<std::size_t>(N), 0);
  out.valid.assign(static_cast<std::size_t>(N), 0);
  double scale = 1.0;
  for (double v : u.values) scale = std::max(scale, std::abs(v));
  const double tol = s.contact_tol * scale;
  long clipped = 0, domain = 0;
  for (long i = 0; i < N; ++i) {
    if (!u.is_active(i)) continue;
    ++domain;
    const Vec x = u.grid.node(i);
    if (!gf.gamma.contains(x, ga.y, ga.z)) {
      ++clipped;
      continue;
    }
    const double d = u[i] - gf.eval(x, ga.y, ga.z);
    const auto k = static_cast<std::size_t>(i);
    out.values[k] = d;
    out.valid[k] = 1;
    switch (mode) {
      case SectionMode::open: out.mask[k] = d < 0; break;
      case SectionMode::closed: out.mask[k] = d <= tol; break;
      case SectionMode::contact: out.mask[k] = std::abs(d) <= tol; break;
    }
  }
  if (domain == 0) throw Error(ErrorKind::OutOfGamma, "section_of: empty domain");
  if (clipped == domain) throw Error(ErrorKind::OutOfGamma, "section_of: g-affine not evaluable on Omega");
  out.clipped_fraction = static_cast<double>(clipped) / static_cast<double>(domain);
  return out;
}

namespace detail {

// Q(., y, z)-image hull defect of the masked nodes against 2 h Lip(Q).
inline ConditionReport q_image_convexity(const GeneratingFunction& gf, const Grid& grid,
                                         const std::vector<std::uint8_t>& mask, const GAffine& ga) {
  SectionSample sec;
  sec.grid = grid;
  sec.x0 = grid.box.center();
  sec.mask = mask;
  return check_local_gconvexity(gf, sec, ga.y, ga.z, kInf);
}

// Local support at a node: the candidate y's are Y(x, u, p) for the central
// gradient and every grid-subdifferential vertex; the first whose g-affine
// stays below u on the ball of radius r_loc (within tol) is returned.
inline std::optional<GAffine> local_support(const GeneratingFunction& gf, const SampledFunction& u, long node,
                                            double r_loc, double tol) {
  const Vec x0 = u.grid.node(node);
  const int n = u.grid.dim();
  std::vector<Vec> cands;
  const auto verts = grid_subdifferential(u, node);
  Vec mean = Vec::Zero(n);
  for (const Vec& p : verts) mean += p;
  cands.push_back(mean / static_cast<double>(verts.size()));
  cands.insert(cands.end(), verts.begin(), verts.end());
  std::vector<long> ball;
  const int reach = static_cast<int>(std::ceil(r_loc / u.grid.h())) + 1;
  const auto m0 = u.grid.multi(node);
  for (long i = 0; i < u.size(); ++i) {
    const auto m = u.grid.multi(i);
    bool near = true;
    for (int a = 0; a < n && near; ++a) near = std::abs(m[a] - m0[a]) <= reach;
    if (near && u.is_active(i) && (u.grid.node(i) - x0).norm() <= r_loc) ball.push_back(i);
  }
  for (const Vec& p : cands) {
    try {
      const YZSolution s = solve_YZ(gf, {x0, u[node], p});
      bool ok = true;
      for (long i : ball) {
        const Vec x = u.grid.node(i);
        if (!gf.gamma.contains(x, s.y, s.z) || gf.eval(x, s.y, s.z) - u[i] > tol) {
          ok = false;
          break;
        }
      }
      if (ok) return GAffine{s.y, s.z};
    } catch (const Error&) {
    }
  }
  return std::nullopt;
}

inline std::vector<long> sample_nodes(const std::vector<long>& nodes, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<long> out;
  for (int k = 0; k < count && !nodes.empty(); ++k)
    out.push_back(nodes[static_cast<std::size_t>(rng.uniform() * static_cast<double>(nodes.size())) % nodes.size()]);
  return out;
}

}  // namespace detail

/// Section g-convexity: the Q(., y0, z0)-image of S(u, g0) must be convex up
/// to the grid allowance. Gated on the Q-image of Omega being convex and on
/// sampled solvability of the segments (x, g0(x), [Dg0(x), g_x(x, y, g*(x, y, g0(x)))])
/// for local supports y of u.
inline ConditionReport check_section_gconvexity(const GeneratingFunction& gf, const SampledFunction& u, const GAffine& ga,
                                       std::uint64_t seed = 0, const GConvexSettings& s = {}) {
  ConditionReport r;
  r.condition_id = "thm3.1";
  r.seed = seed;
  if (gf.dim == 1) return vacuous_report("thm3.1", seed);
  const auto nodes = u.active_nodes();
  std::vector<std::uint8_t> omega(static_cast<std::size_t>(u.size()), 0);
  for (long i : nodes) omega[static_cast<std::size_t>(i)] = 1;
  const ConditionReport dom = detail::q_image_convexity(gf, u.grid, omega, ga);
  r.extra("domain_hull_defect", dom.extra_value("hull_defect"));
  if (!dom.holds()) {
    r.verdict = Verdict::inconclusive;
    r.notes.push_back("hypothesis: Omega is not g-convex with respect to (y0, z0)");
    return r;
  }

  const double h = u.grid.h();
  const double tol = s.support_tol_abs + s.lip_factor * lipschitz_estimate(u) * h;
  const auto picks = detail::sample_nodes(nodes, s.hypothesis_samples, seed);
  std::vector<std::uint8_t> bad(picks.size(), 0);
  parallel_for(picks.size(), [&](std::size_t k) {
    const Vec x = u.grid.node(picks[k]);
    try {
      const auto sup = detail::local_support(gf, u, picks[k], s.r_loc_factor * h, tol);
      if (!sup) {
        bad[k] = 1;
        return;
      }
      const double g0 = gf.eval(x, ga.y, ga.z);
      const double z = eval_gstar(gf, x, sup->y, g0);
      const SegmentConfig seg{x, g0, eval_gx(gf, x, ga.y, ga.z), eval_gx(gf, x, sup->y, z), s.segment_m};
      bad[k] = !segment_solvable(gf, seg);
    } catch (const Error&) {
      bad[k] = 1;
    }
  });
  const long failed = std::count(bad.begin(), bad.end(), 1);
  r.extra("hypothesis_samples", static_cast<double>(picks.size())).extra("hypothesis_failures", static_cast<double>(failed));
  if (static_cast<double>(failed) > s.max_fail_fraction * static_cast<double>(picks.size()))
    throw Error(ErrorKind::HypothesisUnverifiable,
                "check_section_gconvexity: " + std::to_string(failed) + " of " + std::to_string(picks.size()) +
                    " sampled segments leave the one-jet set");

  const SectionSample sec = section_of(gf, u, ga, SectionMode::open, s);
  const ConditionReport q = check_local_gconvexity(gf, sec, ga.y, ga.z, kInf);
  r.verdict = q.verdict;
  r.margin = q.margin;
  r.samples_used = q.samples_used;
  r.witness = q.witness;
  for (const char* k : {"hull_defect", "allowance", "lip_Q", "h_grid"}) r.extra(k, q.extra_value(k));
  r.notes.insert(r.notes.end(), q.notes.begin(), q.notes.end());
  return r;
}

/// At a kink x0 the P(x0, ., u0)-image of the attaining set must be a
/// convex set: collinear within 2 h (y grid) for a segment, otherwise a hull
/// defect within 2 h. A single support holds vacuously unless require_kink.
inline ConditionReport check_kink_image(const GeneratingFunction& gf, const SampledFunction& u, const Vec& x0,
                                         const Grid& y_grid, bool require_kink = false,
                                         const GConvexSettings& s = {}) {
  const NormalMapResult nm = g_normal_map(gf, u, x0, y_grid, s);
  ConditionReport r;
  r.condition_id = "cor3.1";
  r.samples_used = static_cast<long>(nm.supports.size());
  r.extra("supports", static_cast<double>(nm.supports.size())).extra("subdiff_diameter", nm.subdiff_diameter);
  if (require_kink && (!nm.kink || nm.supports.size() < 2))
    throw Error(ErrorKind::NotAKink, "check_kink_image: x0 has fewer than two supports");
  const double allowance = 2.0 * y_grid.h();
  r.extra("allowance", allowance);
  if (nm.supports.size() < 2) {
    r.verdict = Verdict::holds;
    r.vacuous = true;
    r.margin = allowance;
    r.notes.push_back("single support; the image is a point");
    return r;
  }
  std::vector<Vec> image;
  for (const auto& ga : nm.supports) image.push_back(eval_gx(gf, nm.x0, ga.y, ga.z));
  const double coll = collinearity_defect(image);
  double defect = coll;
  if (coll > allowance && gf.dim >= 2) defect = hull_defect(image, 0.5 * allowance).defect;
  r.extra("collinearity_defect", coll).extra("p_image_defect", defect);
  r.margin = allowance - defect;
  r.verdict = defect <= allowance ? Verdict::holds : Verdict::fails;
  r.witness = Witness{}.add("x0", nm.x0).add("u0", nm.u0).add("p_first", image.front()).add("p_last", image.back());
  return r;
}

/// Local-to-global: every node of u must carry a local g-support on the ball
/// of radius r_loc; then the global verdict is is_g_convex. Inconclusive
/// when the domain hypothesis (Q-image of Omega convex for sampled (y, z))
/// or the sampled g*-segment solvability fails.
inline ConditionReport check_local_to_global(const GeneratingFunction& gf, const SampledFunction& u, const Grid& y_grid,
                                       std::uint64_t seed = 0, const GConvexSettings& s = {}) {
  ConditionReport r;
  r.condition_id = "thm3.2";
  r.seed = seed;
  const auto nodes = u.active_nodes();
  const double h = u.grid.h();
  const double tol = s.support_tol_abs + s.lip_factor * lipschitz_estimate(u) * h;

  std::vector<std::optional<GAffine>> sup(nodes.size());
  parallel_for(nodes.size(), [&](std::size_t k) {
    try {
      sup[k] = detail::local_support(gf, u, nodes[k], s.r_loc_factor * h, tol);
    } catch (const Error&) {
    }
  });
  for (std::size_t k = 0; k < nodes.size(); ++k)
    if (!sup[k])
      throw Error(ErrorKind::NotLocallyGConvex,
                  "check_local_to_global: no local g-support at node " + std::to_string(nodes[k]));

  if (gf.dim >= 2) {
    std::vector<std::uint8_t> omega(static_cast<std::size_t>(u.size()), 0);
    for (long i : nodes) omega[static_cast<std::size_t>(i)] = 1;
    Rng rng(seed);
    double worst = -kInf;
    for (int k = 0; k < s.domain_samples; ++k) {
      const std::size_t pick = static_cast<std::size_t>(rng.uniform() * static_cast<double>(nodes.size())) % nodes.size();
      const ConditionReport dom = detail::q_image_convexity(gf, u.grid, omega, *sup[pick]);
      worst = std::max(worst, dom.extra_value("hull_defect") - dom.extra_value("allowance"));
      if (!dom.holds()) {
        r.verdict = Verdict::inconclusive;
        r.extra("domain_excess", worst);
        r.notes.push_back("domain hypothesis: Omega is not g-convex with respect to a sampled support");
        return r;
      }
    }
    r.extra("domain_excess", worst);

    // Segment hypothesis: g*-segments between supports of sampled nodes.
    const auto picks = detail::sample_nodes(nodes, s.hypothesis_samples, derive_seed(seed, 1));
    Rng pr(derive_seed(seed, 2));
    long failed = 0;
    for (long node : picks) {
      const std::size_t a = static_cast<std::size_t>(std::lower_bound(nodes.begin(), nodes.end(), node) - nodes.begin());
      const std::size_t b = static_cast<std::size_t>(pr.uniform() * static_cast<double>(nodes.size())) % nodes.size();
      const Vec x = u.grid.node(node);
      try {
        const double u0 = u[node];
        const Vec pa = map_P(gf, x, sup[a]->y, u0);
        const Vec pb = map_P(gf, x, sup[b]->y, u0);
        failed += !segment_solvable(gf, SegmentConfig{x, u0, pa, pb, s.segment_m});
      } catch (const Error&) {
        ++failed;
      }
    }
    r.extra("hypothesis_failures", static_cast<double>(failed));
    if (static_cast<double>(failed) > s.max_fail_fraction * static_cast<double>(picks.size())) {
      r.verdict = Verdict::inconclusive;
      r.notes.push_back("segment hypothesis: sampled g*-segments leave the one-jet set");
      return r;
    }
  }

  const ConditionReport global = is_g_convex(gf, u, y_grid, -1.0, s);
  r.verdict = global.verdict;
  r.margin = global.margin;
  r.samples_used = static_cast<long>(nodes.size());
  r.witness = global.witness;
  r.extra("max_defect", global.extra_value("max_defect")).extra("tol", global.extra_value("tol"));
  return r;
}

/// Minimum eigenvalue of D^2 u - A(x, u, Du) with central differences at an
/// interior node.
inline double ellipticity_margin(const GeneratingFunction& gf, const SampledFunction& u, long node) {
  const int n = u.grid.dim();
  const auto m = u.grid.multi(node);
  auto at = [&](std::vector<int> mm) { return u[u.grid.index(mm)]; };
  Vec grad(n);
  Mat H(n, n);
  for (int a = 0; a < n; ++a) {
    if (m[a] < 1 || m[a] + 1 >= u.grid.counts[a]) throw Error(ErrorKind::OutOfRange, "ellipticity_margin: boundary node");
    const double ha = u.grid.spacing(a);
    auto p = m, q = m;
    ++p[a];
    --q[a];
    grad[a] = (at(p) - at(q)) / (2 * ha);
    H(a, a) = (at(p) - 2 * u[node] + at(q)) / (ha * ha);
    for (int b = a + 1; b < n; ++b) {
      const double hb = u.grid.spacing(b);
      auto pp = m, pm = m, mp = m, mm = m;
      ++pp[a], ++pp[b];
      ++pm[a], --pm[b];
      --mp[a], ++mp[b];
      --mm[a], --mm[b];
      H(a, b) = H(b, a) = (at(pp) - at(pm) - at(mp) + at(mm)) / (4 * ha * hb);
    }
  }
  const Mat A = matrix_A(gf, {u.grid.node(node), u[node], grad});
  return Eigen::SelfAdjointEigenSolver<Mat>(H - A).eigenvalues().minCoeff();
}

}  // namespace genfun
