#pragma once

// Conditions A1, A1*, A2 (sampled) and A3w, A3s (tensor and segment forms).

#include "genfun/implicit_maps.hpp"
#include "genfun/parallel.hpp"

#include <algorithm>
#include <numeric>
#include <span>

namespace genfun {

struct ConditionSettings {
  int theta_m = 32;
  /// conv_tol = conv_tol_rel * max(1, max |f|).
  double conv_tol_rel = 1e-7;
  double a3s_tol = 1e-6;
  double a2_tol = 1e-8;
  double sep_tol = 1e-3;
  double coll_tol = 1e-6;
  /// mtw_form step h = mtw_h_rel * max(1, |p|).
  double mtw_h_rel = 1e-3;
  int xi_count = 16;
  double max_fail_fraction = 0.01;
  /// Segments are seeded in the boxes scaled about their centers by this
  /// factor (the compact subset on which A3s is measured).
  double region_scale = 0.8;
  /// Seeded segments shorter than this in p are redrawn; the delta_hat
  /// quotient divides by |p1 - p0|^2 and amplifies jet noise on short ones.
  double min_segment_dp = 0.02;
};

/// A datum (x0, u0, [p0, p1]) with the grid theta_k = k / m.
struct SegmentConfig {
  Vec x0;
  double u0 = 0.0;
  Vec p0;
  Vec p1;
  int m = 32;

  double theta(int k) const { return static_cast<double>(k) / m; }
  Vec p_at(double t) const { return (1.0 - t) * p0 + t * p1; }
  JetPoint jet_at(double t) const { return {x0, u0, p_at(t)}; }
};

/// The 2-by-2 (or n-by-n) A2 margin: |det E| / (1 + |E|_2^n).
inline double a2_margin(const Mat& E) {
  const double norm2 = E.jacobiSvd().singularValues()[0];
  return std::abs(E.determinant()) / (1.0 + std::pow(norm2, E.rows()));
}

inline ConditionReport check_A2(const GeneratingFunction& gf, long samples, std::uint64_t seed,
                                const ConditionSettings& cs = {}) {
  if (samples < 1) throw std::invalid_argument("check_A2: samples must be >= 1");
  std::vector<double> margin(samples);
  std::vector<FiberPoint> pts(samples);
  std::vector<double> dets(samples);
  parallel_for(static_cast<std::size_t>(samples), [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    pts[i] = sample_gamma(gf, rng);
    const Mat E = matrix_E_from(jet_unchecked(gf, pts[i].x, pts[i].y, pts[i].z));
    dets[i] = E.determinant();
    margin[i] = a2_margin(E);
  });
  const auto it = std::min_element(margin.begin(), margin.end());
  const std::size_t k = static_cast<std::size_t>(it - margin.begin());
  ConditionReport r;
  r.condition_id = "A2";
  r.seed = seed;
  r.samples_used = samples;
  r.margin = *it;
  r.verdict = *it > cs.a2_tol ? Verdict::holds : Verdict::fails;
  r.witness = Witness{}.add("x", pts[k].x).add("y", pts[k].y).add("z", pts[k].z).add("det_E", dets[k]);
  r.extra("a2_tol", cs.a2_tol);
  return r;
}

namespace detail {

struct CollisionResult {
  double min_distance = kInf;
  long i = -1;
  long j = -1;
};

// Smallest image distance (inf-norm) over pairs whose sources are more than
// sep_tol apart (inf-norm). Sorting by the first image coordinate lets the
// inner loop stop once that coordinate alone exceeds the current best.
inline CollisionResult min_separated_image_distance(const std::vector<Vec>& src, const std::vector<Vec>& img,
                                                    double sep_tol) {
  const std::size_t N = src.size();
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return img[a][0] < img[b][0]; });
  CollisionResult best;
  for (std::size_t ai = 0; ai < N; ++ai) {
    const std::size_t a = order[ai];
    for (std::size_t bi = ai + 1; bi < N; ++bi) {
      const std::size_t b = order[bi];
      if (img[b][0] - img[a][0] > best.min_distance) break;
      if (inf_norm(src[a] - src[b]) <= sep_tol) continue;
      const double d = inf_norm(img[a] - img[b]);
      const long lo = static_cast<long>(std::min(a, b)), hi = static_cast<long>(std::max(a, b));
      if (d < best.min_distance || (d == best.min_distance && std::pair(lo, hi) < std::pair(best.i, best.j))) {
        best.min_distance = d;
        best.i = lo;
        best.j = hi;
      }
    }
  }
  return best;
}

inline ConditionReport collision_report(std::string id, const std::vector<Vec>& src, const std::vector<Vec>& img,
                                        const char* src_name, const char* img_name, std::uint64_t seed,
                                        const ConditionSettings& cs) {
  const CollisionResult c = min_separated_image_distance(src, img, cs.sep_tol);
  ConditionReport r;
  r.condition_id = std::move(id);
  r.seed = seed;
  r.samples_used = static_cast<long>(src.size());
  r.margin = std::isfinite(c.min_distance) ? c.min_distance - cs.coll_tol : kLargestFinite;
  r.verdict = c.min_distance < cs.coll_tol ? Verdict::fails : Verdict::holds;
  r.extra("min_separated_image_distance", std::isfinite(c.min_distance) ? c.min_distance : kLargestFinite);
  if (c.i >= 0) {
    r.witness = Witness{}
                    .add(std::string(src_name) + "_a", src[c.i])
                    .add(std::string(src_name) + "_b", src[c.j])
                    .add(std::string(img_name) + "_a", img[c.i])
                    .add(std::string(img_name) + "_b", img[c.j]);
  }
  r.notes.push_back("sampled collision scan: evidence of injectivity, not a proof");
  return r;
}

}  // namespace detail

/// A1 at a fixed x: (y, z) -> (g, g_x)(x, y, z) has no sampled collisions.
/// Sources are stacked as (y, z), images as (u, p).
inline ConditionReport check_A1_sampled(const GeneratingFunction& gf, const Vec& x, long samples,
                                        std::uint64_t seed, const ConditionSettings& cs = {}) {
  if (!gf.gamma.x_box.contains(x)) throw Error(ErrorKind::OutOfGamma, "check_A1_sampled: x outside x_box");
  const int n = gf.dim;
  std::vector<Vec> src(samples), img(samples);
  parallel_for(static_cast<std::size_t>(samples), [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    Vec y;
    for (int attempt = 0;; ++attempt) {
      y = rng.point_in(gf.gamma.y_box);
      if (gf.gamma.contains_pair(x, y)) break;
      if (attempt > 10000) throw Error(ErrorKind::OutOfGamma, "check_A1_sampled: no admissible y for this x");
    }
    const Interval I = detail::finite_part(gf.gamma.interior(x, y));
    const double z = rng.uniform(I.lo, I.hi);
    const FirstOrder f = eval_first(gf, x, y, z);
    src[i].resize(n + 1);
    src[i] << y, z;
    img[i].resize(n + 1);
    img[i] << f.g, f.gx;
  });
  auto r = detail::collision_report("A1", src, img, "yz", "up", seed, cs);
  if (r.witness) r.witness->add("x", x);
  return r;
}

/// A1* at fixed (y, z): x -> Q(x, y, z) has no sampled collisions.
inline ConditionReport check_A1star_sampled(const GeneratingFunction& gf, const Vec& y, double z, long samples,
                                            std::uint64_t seed, const ConditionSettings& cs = {}) {
  std::vector<Vec> src(samples), img(samples);
  parallel_for(static_cast<std::size_t>(samples), [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    for (int attempt = 0;; ++attempt) {
      Vec x = rng.point_in(gf.gamma.x_box);
      if (gf.gamma.contains(x, y, z)) {
        img[i] = map_Q(gf, {x, y, z});
        src[i] = std::move(x);
        return;
      }
      if (attempt > 10000) throw Error(ErrorKind::OutOfGamma, "check_A1star_sampled: fiber (., y, z) misses Gamma");
    }
  });
  auto r = detail::collision_report("A1*", src, img, "x", "q", seed, cs);
  if (r.witness) r.witness->add("y", y).add("z", z);
  return r;
}

/// Discrete D_pp form: second difference of (A xi, xi) along eta after
/// orthonormalizing (xi, eta). h <= 0 selects mtw_h_rel * max(1, |p|).
inline double mtw_form(const GeneratingFunction& gf, const JetPoint& jet, const Vec& xi_in, const Vec& eta_in,
                       double h = 0.0, const ConditionSettings& cs = {}) {
  const Vec xi = xi_in.normalized();
  Vec eta = eta_in - eta_in.dot(xi) * xi;
  if (eta.norm() < 1e-14) throw std::invalid_argument("mtw_form: eta parallel to xi");
  eta.normalize();
  if (h <= 0.0) h = cs.mtw_h_rel * std::max(1.0, jet.p.norm());
  auto form_at = [&](const Vec& p, const std::optional<FiberPoint>& init) -> std::pair<double, FiberPoint> {
    try {
      const AMatrix a = matrix_A_full(gf, {jet.x, jet.u, p}, init);
      return {xi.dot(a.A * xi), FiberPoint{jet.x, a.fiber.y, a.fiber.z}};
    } catch (const Error& e) {
      throw Error(ErrorKind::NotInU, std::string("mtw_form: stencil point not solvable: ") + e.what());
    }
  };
  const auto [f0, fiber] = form_at(jet.p, std::nullopt);
  const double fp = form_at(jet.p + h * eta, fiber).first;
  const double fm = form_at(jet.p - h * eta, fiber).first;
  return (fp - 2.0 * f0 + fm) / (h * h);
}

/// Unit directions orthogonal to d: one for n = 2, `count` seeded projected
/// directions for n >= 3, none for n = 1.
inline std::vector<Vec> xi_directions(const Vec& d, int count, std::uint64_t seed) {
  const int n = static_cast<int>(d.size());
  std::vector<Vec> out;
  if (n == 1) return out;
  const Vec dn = d.normalized();
  if (n == 2) {
    Vec xi(2);
    xi << -dn[1], dn[0];
    out.push_back(xi);
    return out;
  }
  Rng rng(seed);
  while (static_cast<int>(out.size()) < count) {
    Vec v = rng.unit_vector(n);
    v -= v.dot(dn) * dn;
    if (v.norm() < 1e-6) continue;
    v.normalize();
    v -= v.dot(dn) * dn;
    out.push_back(v.normalized());
  }
  return out;
}

/// (A xi, xi) along one segment for every direction; NaN marks a failed solve.
struct SegmentProfile {
  std::vector<Vec> xis;
  std::vector<std::vector<double>> f;  // [xi][theta index]
  std::vector<FiberPoint> fibers;      // solved fiber per theta (x0, y_theta, z_theta)
  long solves = 0;
  long failures = 0;
};

inline SegmentProfile segment_profile(const GeneratingFunction& gf, const SegmentConfig& seg,
                                      const std::vector<Vec>& xis) {
  SegmentProfile prof;
  prof.xis = xis;
  prof.f.assign(xis.size(), std::vector<double>(seg.m + 1, std::numeric_limits<double>::quiet_NaN()));
  prof.fibers.resize(seg.m + 1);
  std::optional<FiberPoint> guess;
  for (int k = 0; k <= seg.m; ++k) {
    ++prof.solves;
    try {
      const AMatrix a = matrix_A_full(gf, seg.jet_at(seg.theta(k)), guess);
      prof.fibers[k] = FiberPoint{seg.x0, a.fiber.y, a.fiber.z};
      guess = prof.fibers[k];
      for (std::size_t i = 0; i < xis.size(); ++i) prof.f[i][k] = xis[i].dot(a.A * xis[i]);
    } catch (const Error&) {
      ++prof.failures;
    }
  }
  return prof;
}

namespace detail {

// Extremal quantities of the midpoint-convexity scan over a segment family.
struct ConvexityScan {
  double min_defect = kInf;
  double delta_hat = kInf;
  double conv_tol = 0.0;
  double f_scale = 1.0;
  long solves = 0;
  long failures = 0;
  long triples = 0;
  // Lexicographic-first minimizer (segment, a, b, xi) of the defect.
  long seg_w = -1, a_w = -1, b_w = -1, xi_w = -1;
  // Same for the delta_hat quotient.
  long seg_d = -1, a_d = -1, b_d = -1, xi_d = -1;
  // Minimal adjacent-triple defect (theta spacing 1/m), the local version.
  double local_defect = kInf;
  long seg_l = -1, k_l = -1, xi_l = -1;
  std::vector<SegmentProfile> profiles;
};

inline ConvexityScan convexity_scan(const GeneratingFunction& gf, std::span<const SegmentConfig> segs,
                                    std::uint64_t seed, const ConditionSettings& cs) {
  ConvexityScan sc;
  sc.profiles.resize(segs.size());
  parallel_for(segs.size(), [&](std::size_t s) {
    const SegmentConfig& seg = segs[s];
    const auto xis = xi_directions(seg.p1 - seg.p0, cs.xi_count, derive_seed(seed, s));
    sc.profiles[s] = segment_profile(gf, seg, xis);
  });
  double fmax = 0.0;
  for (const auto& p : sc.profiles) {
    sc.solves += p.solves;
    sc.failures += p.failures;
    for (const auto& row : p.f)
      for (double v : row)
        if (std::isfinite(v)) fmax = std::max(fmax, std::abs(v));
  }
  sc.f_scale = std::max(1.0, fmax);
  sc.conv_tol = cs.conv_tol_rel * sc.f_scale;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const SegmentConfig& seg = segs[s];
    const double dp2 = (seg.p1 - seg.p0).squaredNorm();
    const SegmentProfile& prof = sc.profiles[s];
    const int m = seg.m;
    for (int a = 0; a <= m; ++a) {
      for (int b = a + 2; b <= m; b += 2) {
        const int mid = (a + b) / 2;
        for (std::size_t i = 0; i < prof.xis.size(); ++i) {
          const auto& f = prof.f[i];
          if (!std::isfinite(f[a]) || !std::isfinite(f[b]) || !std::isfinite(f[mid])) continue;
          ++sc.triples;
          const double defect = 0.5 * (f[a] + f[b]) - f[mid];
          if (defect < sc.min_defect) {
            sc.min_defect = defect;
            sc.seg_w = static_cast<long>(s), sc.a_w = a, sc.b_w = b, sc.xi_w = static_cast<long>(i);
          }
          const double half = 0.5 * (seg.theta(b) - seg.theta(a));
          const double q = 2.0 * defect / (half * half * dp2);
          if (q < sc.delta_hat) {
            sc.delta_hat = q;
            sc.seg_d = static_cast<long>(s), sc.a_d = a, sc.b_d = b, sc.xi_d = static_cast<long>(i);
          }
          if (b == a + 2 && defect < sc.local_defect) {
            sc.local_defect = defect;
            sc.seg_l = static_cast<long>(s), sc.k_l = mid, sc.xi_l = static_cast<long>(i);
          }
        }
      }
    }
  }
  return sc;
}

inline Witness segment_witness(const SegmentConfig& seg, long seg_index, long a, long b, const Vec& xi) {
  Witness w;
  w.add("segment_index", static_cast<double>(seg_index));
  w.add("x0", seg.x0).add("u0", seg.u0).add("p0", seg.p0).add("p1", seg.p1);
  w.add("theta_a", seg.theta(static_cast<int>(a)));
  w.add("theta_mid", seg.theta(static_cast<int>((a + b) / 2)));
  w.add("theta_b", seg.theta(static_cast<int>(b)));
  w.add("xi", xi);
  return w;
}

inline ConditionReport scan_report(std::string id, const ConvexityScan& sc, std::span<const SegmentConfig> segs,
                                   std::uint64_t seed, const ConditionSettings& cs) {
  ConditionReport r;
  r.condition_id = std::move(id);
  r.seed = seed;
  r.samples_used = static_cast<long>(segs.size());
  r.verdict = Verdict::holds;
  r.extra("solves", static_cast<double>(sc.solves));
  r.extra("failed_solves", static_cast<double>(sc.failures));
  r.extra("conv_tol", sc.conv_tol);
  r.extra("triples", static_cast<double>(sc.triples));
  if (sc.solves > 0 && static_cast<double>(sc.failures) > cs.max_fail_fraction * static_cast<double>(sc.solves)) {
    r.verdict = Verdict::inconclusive;
    r.notes.push_back("more than the allowed fraction of segment solves failed (segment leaves U)");
  }
  return r;
}

}  // namespace detail

/// A3w over a family of segments: f(theta) = (A xi, xi)(x0, u0, p_theta) must
/// be midpoint convex on every grid triple. margin = min defect + conv_tol.
inline ConditionReport check_A3w(const GeneratingFunction& gf, std::span<const SegmentConfig> segs,
                                 std::uint64_t seed = 0, const ConditionSettings& cs = {}) {
  if (gf.dim == 1) return vacuous_report("A3w", seed);
  if (segs.empty()) throw std::invalid_argument("check_A3w: no segments");
  const auto sc = detail::convexity_scan(gf, segs, seed, cs);
  ConditionReport r = detail::scan_report("A3w", sc, segs, seed, cs);
  if (sc.seg_w < 0) {
    r.verdict = Verdict::inconclusive;
    r.margin = 0.0;
    return r;
  }
  r.margin = sc.min_defect + sc.conv_tol;
  if (r.verdict != Verdict::inconclusive) r.verdict = r.margin >= 0.0 ? Verdict::holds : Verdict::fails;
  const auto& seg = segs[sc.seg_w];
  r.witness = detail::segment_witness(seg, sc.seg_w, sc.a_w, sc.b_w, sc.profiles[sc.seg_w].xis[sc.xi_w]);
  const auto& sl = segs[sc.seg_l];
  r.witness->add("local_segment_index", static_cast<double>(sc.seg_l))
      .add("theta_local", sl.theta(static_cast<int>(sc.k_l)))
      .add("xi_local", sc.profiles[sc.seg_l].xis[sc.xi_l])
      .add("local_defect", sc.local_defect);
  r.extra("min_defect", sc.min_defect);
  r.extra("delta_hat", sc.delta_hat);
  return r;
}

inline ConditionReport check_A3w(const GeneratingFunction& gf, const SegmentConfig& seg, std::uint64_t seed = 0,
                                 const ConditionSettings& cs = {}) {
  return check_A3w(gf, std::span<const SegmentConfig>(&seg, 1), seed, cs);
}

/// A3s over a region: delta_hat = min of the normalized second-difference
/// quotient; holds iff delta_hat > a3s_tol. margin = delta_hat.
inline ConditionReport check_A3s(const GeneratingFunction& gf, std::span<const SegmentConfig> region,
                                 std::uint64_t seed = 0, const ConditionSettings& cs = {}) {
  if (gf.dim == 1) {
    auto r = vacuous_report("A3s", seed);
    r.extra("delta_hat", kLargestFinite);
    return r;
  }
  if (region.empty()) throw std::invalid_argument("check_A3s: empty region");
  const auto sc = detail::convexity_scan(gf, region, seed, cs);
  ConditionReport r = detail::scan_report("A3s", sc, region, seed, cs);
  if (sc.seg_d < 0) {
    r.verdict = Verdict::inconclusive;
    return r;
  }
  r.margin = sc.delta_hat;
  r.extra("delta_hat", sc.delta_hat);
  r.extra("a3s_tol", cs.a3s_tol);
  if (r.verdict != Verdict::inconclusive) r.verdict = sc.delta_hat > cs.a3s_tol ? Verdict::holds : Verdict::fails;
  r.witness = detail::segment_witness(region[sc.seg_d], sc.seg_d, sc.a_d, sc.b_d, sc.profiles[sc.seg_d].xis[sc.xi_d]);
  return r;
}

/// Every grid theta of the segment solves (starting each solve from the
/// previous theta's fiber).
inline bool segment_solvable(const GeneratingFunction& gf, const SegmentConfig& seg,
                             std::vector<FiberPoint>* fibers = nullptr) {
  std::optional<FiberPoint> guess;
  if (fibers) fibers->clear();
  for (int k = 0; k <= seg.m; ++k) {
    try {
      const YZSolution s = solve_YZ(gf, seg.jet_at(seg.theta(k)), guess);
      guess = FiberPoint{seg.x0, s.y, s.z};
      if (fibers) fibers->push_back(*guess);
    } catch (const Error&) {
      return false;
    }
  }
  return true;
}

/// Seeded segment family inside the scaled boxes: a base fiber (x0, y0, z0)
/// gives (u0, p0); a second y1 at the same (x0, u0) gives p1 = g_x(x0, y1,
/// g*(x0, y1, u0)). The segment is shortened (halved up to 3 times) until
/// every grid theta solves.
inline std::vector<SegmentConfig> seed_segments(const GeneratingFunction& gf, int count, std::uint64_t seed,
                                                const ConditionSettings& cs = {}) {
  std::vector<std::optional<SegmentConfig>> slots(count);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
    Rng rng(derive_seed(seed, i));
    for (int attempt = 0; attempt < 200; ++attempt) {
      const FiberPoint fp = sample_gamma(gf, rng, cs.region_scale);
      Vec y1 = rng.point_in(gf.gamma.y_box.scaled(cs.region_scale));
      if (!gf.gamma.contains_pair(fp.x, y1) || (y1 - fp.y).norm() < 1e-3) continue;
      const FirstOrder f0 = eval_first(gf, fp.x, fp.y, fp.z);
      const auto z1 = detail::gstar_try(gf, fp.x, y1, f0.g);
      if (!z1) continue;
      const Vec p1 = eval_gx(gf, fp.x, y1, *z1);
      SegmentConfig seg{fp.x, f0.g, f0.gx, p1, cs.theta_m};
      for (int shrink = 0; shrink < 4; ++shrink) {
        if ((seg.p1 - seg.p0).norm() < cs.min_segment_dp) break;
        if (segment_solvable(gf, seg)) {
          slots[i] = seg;
          return;
        }
        seg.p1 = 0.5 * (seg.p0 + seg.p1);
      }
    }
  });
  std::vector<SegmentConfig> out;
  for (auto& s : slots)
    if (s) out.push_back(*s);
  return out;
}

}  // namespace genfun
