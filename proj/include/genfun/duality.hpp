#pragma once

// The dual generating function gbar(y, x, u) = g*(x, y, u), jet
// correspondence between the two pictures, and duality invariance of A3w/A3s.

#include "genfun/conditions.hpp"

#include <memory>

namespace genfun {

/// Builds the dual: base variable y, target variable x, scalar u. Values
/// are roots of g(x, y, .) = u; first partials use
/// g*_x = -g_x/g_z, g*_y = -g_y/g_z, g*_u = 1/g_z at the lifted point; second
/// partials are central differences of those identities. The dual domain is
/// y_box x x_box x (g(x, y, hi), g(x, y, lo)) with [lo, hi] = I(x, y) shrunk.
inline GeneratingFunction build_dual(const GeneratingFunction& gf) {
  // The primal is shared so the dual stays cheap to copy.
  auto g = std::make_shared<const GeneratingFunction>(gf);
  GeneratingFunction d;
  d.dim = gf.dim;
  d.name = gf.name + "*";
  d.params = gf.params;
  d.fd = gf.fd;
  d.solver = gf.solver;

  auto lift = [g](const Vec& y, const Vec& x, double u) -> double {
    if (auto z = detail::gstar_try(*g, x, y, u)) return *z;
    throw Error(ErrorKind::OutOfRange, "dual: u outside g(x, y, I(x, y))");
  };
  d.eval = lift;
  d.partials.first = [g, lift](const Vec& y, const Vec& x, double u) {
    const double z = lift(y, x, u);
    const FirstOrder f = eval_first(*g, x, y, z);
    return FirstOrder{z, -f.gy / f.gz, -f.gx / f.gz, 1.0 / f.gz};
  };
  // -g_y/g_z at the lifted point, as a function of the dual arguments.
  auto dual_gx = [g, lift](const Vec& y, const Vec& x, double u) -> Vec {
    const double z = lift(y, x, u);
    const FirstOrder f = eval_first(*g, x, y, z);
    return -f.gy / f.gz;
  };
  d.partials.gx = dual_gx;
  d.partials.gy = [g, lift](const Vec& y, const Vec& x, double u) -> Vec {
    const double z = lift(y, x, u);
    const FirstOrder f = eval_first(*g, x, y, z);
    return -f.gx / f.gz;
  };
  d.partials.gz = [g, lift](const Vec& y, const Vec& x, double u) {
    return 1.0 / eval_gz(*g, x, y, lift(y, x, u));
  };
  const double eps = gf.fd.first;
  d.partials.gxx = [dual_gx, eps](const Vec& y, const Vec& x, double u) -> Mat {
    const int n = static_cast<int>(y.size());
    Mat H(n, n);
    Vec ys = y;
    for (int k = 0; k < n; ++k) {
      const double h = eps * unit_scale(y[k]);
      ys[k] = y[k] + h;
      const Vec a = dual_gx(ys, x, u);
      ys[k] = y[k] - h;
      const Vec b = dual_gx(ys, x, u);
      ys[k] = y[k];
      H.col(k) = (a - b) / (2 * h);
    }
    return H;
  };
  d.partials.gxy = [dual_gx, eps](const Vec& y, const Vec& x, double u) -> Mat {
    const int n = static_cast<int>(y.size());
    Mat H(n, n);
    Vec xs = x;
    for (int k = 0; k < n; ++k) {
      const double h = eps * unit_scale(x[k]);
      xs[k] = x[k] + h;
      const Vec a = dual_gx(y, xs, u);
      xs[k] = x[k] - h;
      const Vec b = dual_gx(y, xs, u);
      xs[k] = x[k];
      H.col(k) = (a - b) / (2 * h);
    }
    return H;
  };
  d.partials.gxz = [dual_gx, eps](const Vec& y, const Vec& x, double u) -> Vec {
    const double h = eps * unit_scale(u);
    return (dual_gx(y, x, u + h) - dual_gx(y, x, u - h)) / (2 * h);
  };
  d.partials.second_order_is_fd = true;

  d.gamma.x_box = gf.gamma.y_box;
  d.gamma.y_box = gf.gamma.x_box;
  d.gamma.margin = gf.gamma.margin;
  if (gf.gamma.pair_ok) {
    auto ok = gf.gamma.pair_ok;
    d.gamma.pair_ok = [ok](const Vec& y, const Vec& x) { return ok(x, y); };
  }
  d.gamma.z_interval = [g](const Vec& y, const Vec& x) {
    const Interval I = g->gamma.interior(x, y);
    const double lo = std::isfinite(I.hi) ? g->eval(x, y, I.hi) : -kInf;
    const double hi = std::isfinite(I.lo) ? g->eval(x, y, I.lo) : kInf;
    if (!(hi > lo)) throw Error(ErrorKind::OutOfRange, "dual: empty u-interval");
    return Interval{lo, hi};
  };
  return d;
}

/// A primal jet with its fiber and the dual coordinates (y, z, q).
struct JetCorrespondence {
  JetPoint primal;
  FiberPoint fiber;
  /// Dual jet: base point y, value z, gradient q = Q(x, y, z).
  JetPoint dual;
};

inline JetCorrespondence correspond_jet(const GeneratingFunction& gf, const JetPoint& primal,
                                        const std::optional<FiberPoint>& init = std::nullopt) {
  const YZSolution s = solve_YZ(gf, primal, init);
  JetCorrespondence c;
  c.primal = primal;
  c.fiber = FiberPoint{primal.x, s.y, s.z};
  c.dual = JetPoint{s.y, s.z, map_Q(gf, c.fiber)};
  return c;
}

/// Dual segment family built from primal segments: base dual jet
/// (y0, z0, Q(x0, y0, z0)) and endpoint Q(x1, y0, z0) with
/// x1 = x0 - s (y1 - y0), s halved until every grid theta solves on the dual.
inline std::vector<SegmentConfig> corresponding_dual_segments(const GeneratingFunction& gf,
                                                              const GeneratingFunction& dual,
                                                              std::span<const SegmentConfig> primal) {
  std::vector<std::optional<SegmentConfig>> slots(primal.size());
  parallel_for(primal.size(), [&](std::size_t i) {
    const SegmentConfig& seg = primal[i];
    try {
      const JetCorrespondence c0 = correspond_jet(gf, seg.jet_at(0.0));
      const YZSolution s1 = solve_YZ(gf, seg.jet_at(1.0), c0.fiber);
      const Vec dy = s1.y - c0.fiber.y;
      for (double s = 1.0; s > 1e-3; s *= 0.5) {
        const Vec x1 = seg.x0 - s * dy;
        if (!gf.gamma.contains(x1, c0.fiber.y, c0.fiber.z)) continue;
        const Vec q1 = map_Q(gf, {x1, c0.fiber.y, c0.fiber.z});
        SegmentConfig ds{c0.dual.x, c0.dual.u, c0.dual.p, q1, seg.m};
        if (segment_solvable(dual, ds)) {
          slots[i] = ds;
          return;
        }
      }
    } catch (const Error&) {
    }
  });
  std::vector<SegmentConfig> out;
  for (auto& s : slots)
    if (s) out.push_back(*s);
  return out;
}

namespace detail {

inline int delta_sign(double delta_hat, double tol) { return delta_hat > tol ? 1 : (delta_hat < -tol ? -1 : 0); }

// Minimum over 64 directions xi (eta = xi rotated by 90 degrees in the
// plane; seeded pairs for n >= 3) of the primal mtw_form at a jet.
inline double min_form_over_directions(const GeneratingFunction& gf, const JetPoint& jet, std::uint64_t seed,
                                       const ConditionSettings& cs) {
  const int n = gf.dim;
  double best = kInf;
  Rng rng(seed);
  for (int k = 0; k < 64; ++k) {
    Vec xi(n), eta(n);
    if (n == 2) {
      const double a = M_PI * k / 64.0;
      xi << std::cos(a), std::sin(a);
      eta << -std::sin(a), std::cos(a);
    } else {
      xi = rng.unit_vector(n);
      eta = rng.unit_vector(n);
    }
    best = std::min(best, mtw_form(gf, jet, xi, eta, 0.0, cs));
  }
  return best;
}

}  // namespace detail

/// Runs A3w or A3s on the primal and on the dual over corresponded segment
/// families. Holds iff the verdicts (A3w) or the signs of delta_hat (A3s)
/// agree; when both sides fail, the dual witness is transported back to a
/// primal jet where a violation must be confirmed.
inline ConditionReport check_duality_invariance(const GeneratingFunction& gf, const std::string& condition_id,
                                                int samples, std::uint64_t seed, const ConditionSettings& cs = {}) {
  if (condition_id != "A3w" && condition_id != "A3s")
    throw Error(ErrorKind::ConfigError, "check_duality_invariance: condition must be A3w or A3s");
  const std::string id = "duality:" + condition_id;
  if (gf.dim == 1) return vacuous_report(id, seed);
  const bool weak = condition_id == "A3w";
  const GeneratingFunction dual = build_dual(gf);
  const auto primal_segs = seed_segments(gf, samples, seed, cs);
  const auto dual_segs = corresponding_dual_segments(gf, dual, primal_segs);
  ConditionReport r;
  r.condition_id = id;
  r.seed = seed;
  r.samples_used = static_cast<long>(primal_segs.size());
  r.extra("primal_segments", static_cast<double>(primal_segs.size()));
  r.extra("dual_segments", static_cast<double>(dual_segs.size()));
  const double rejected = static_cast<double>(primal_segs.size() - dual_segs.size());
  r.extra("dual_rejected", rejected);
  if (primal_segs.empty() || dual_segs.empty()) {
    r.verdict = Verdict::inconclusive;
    r.notes.push_back("no usable segment family on one side");
    return r;
  }
  const ConditionReport p = weak ? check_A3w(gf, primal_segs, seed, cs) : check_A3s(gf, primal_segs, seed, cs);
  const ConditionReport d = weak ? check_A3w(dual, dual_segs, seed, cs) : check_A3s(dual, dual_segs, seed, cs);
  r.extra("primal_margin", p.margin).extra("dual_margin", d.margin);
  if (!weak) {
    r.extra("primal_delta_hat", p.extra_value("delta_hat")).extra("dual_delta_hat", d.extra_value("delta_hat"));
  }
  r.notes.push_back(std::string("primal ") + std::string(to_string(p.verdict)) + ", dual " +
                    std::string(to_string(d.verdict)));
  if (p.verdict == Verdict::inconclusive || d.verdict == Verdict::inconclusive) {
    r.verdict = Verdict::inconclusive;
    r.margin = 0.0;
    return r;
  }
  bool agree = p.verdict == d.verdict;
  if (!weak)
    agree = agree && detail::delta_sign(p.margin, cs.a3s_tol) == detail::delta_sign(d.margin, cs.a3s_tol);
  r.verdict = agree ? Verdict::holds : Verdict::fails;
  r.margin = agree ? 0.0 : -1.0;
  if (agree && p.fails() && d.witness) {
    // Transport: dual witness jet (y0, z0, q_mid) -> dual solve gives
    // (x_m, u_m) -> primal fiber (x_m, y0, z0) -> primal jet.
    const Witness& w = *d.witness;
    const auto at = static_cast<std::size_t>(w.scalar(weak ? "local_segment_index" : "segment_index"));
    const SegmentConfig& dseg = dual_segs.at(at);
    const JetPoint djet = dseg.jet_at(w.scalar(weak ? "theta_local" : "theta_mid"));
    try {
      const YZSolution back = solve_YZ(dual, djet);
      const FiberPoint fiber{back.y, djet.x, djet.u};
      const JetPoint pjet = jet_of(gf, fiber);
      const double form = detail::min_form_over_directions(gf, pjet, seed, cs);
      const double conv_tol = p.extra_value("conv_tol");
      const bool confirmed = weak ? form < -10.0 * conv_tol : form <= cs.a3s_tol + 10.0 * conv_tol;
      r.extra("transported_min_form", form);
      r.witness = Witness{}.add("x", fiber.x).add("y", fiber.y).add("z", fiber.z).add("min_form", form);
      if (!confirmed) {
        r.verdict = Verdict::fails;
        r.margin = -1.0;
        r.notes.push_back("dual witness did not transport to a primal violation");
      }
    } catch (const Error& e) {
      r.verdict = Verdict::inconclusive;
      r.notes.push_back(std::string("witness transport failed: ") + e.what());
    }
  }
  return r;
}

}  // namespace genfun
