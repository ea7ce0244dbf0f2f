#include "genfun/catalog.hpp"
#include "genfun/geometry.hpp"

#include <gtest/gtest.h>

using namespace genfun;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

// x0 = 0, u0 = 0, p from 0 to e1. For the quadratic cost y = x0 + p and
// z = -|p|^2/2 - u0, so h_theta(x) = theta x1 exactly.
SegmentConfig quad_segment(int m = 32) { return SegmentConfig{v2(0, 0), 0.0, v2(0, 0), v2(1, 0), m}; }

SegmentConfig log_segment(const GeneratingFunction& gf, int m = 32) {
  const FiberPoint f0{v2(0.0, 0.0), v2(2.0, 0.0), 0.0};
  const JetPoint j0 = jet_of(gf, f0);
  const FiberPoint f1{v2(0.0, 0.0), v2(2.0, 0.3), 0.0};
  const auto z1 = eval_gstar(gf, f1.x, f1.y, j0.u, 0.0);
  return SegmentConfig{j0.x, j0.u, j0.p, eval_gx(gf, f1.x, f1.y, z1), m};
}

}  // namespace

TEST(DualSegment, QuadraticClosedForm) {
  const auto gf = build("ot_quad");
  const auto ds = dual_segment(gf, quad_segment());
  ASSERT_EQ(ds.y_theta.size(), 33u);
  EXPECT_LT((ds.y_theta[16] - v2(0.5, 0.0)).norm(), 1e-10);
  EXPECT_NEAR(ds.z_theta[16], -0.125, 1e-10);
  for (int k = 0; k <= 32; ++k) {
    const double t = k / 32.0;
    EXPECT_LT((ds.y_theta[k] - v2(t, 0.0)).norm(), 1e-10);
    EXPECT_NEAR(ds.z_theta[k], -0.5 * t * t, 1e-10);
  }
  EXPECT_LT(ds.z_route_gap, 1e-10);
}

TEST(HeightFunctions, QuadraticValues) {
  const auto gf = build("ot_quad");
  const auto ds = dual_segment(gf, quad_segment());
  EXPECT_NEAR(h_theta(gf, ds, 16, v2(1.0, 0.0)), 0.5, 1e-10);
  EXPECT_NEAR(h_theta(gf, ds, 16, v2(0.3, 0.9)), 0.15, 1e-10);
  // theta = 1, delta = 1: 1 - 1/2 * 1 * 1 = 1/2.
  EXPECT_NEAR(h_theta_delta(gf, ds, 32, 1.0, v2(1.0, 0.0)), 0.5, 1e-10);
  // h_0 = (p1 - p0) . (x - x0) for E = I and Q(x, y0, z0) = x - y0.
  EXPECT_NEAR(h_zero(gf, ds, v2(0.7, -0.4)), 0.7, 1e-8);
  EXPECT_THROW(h_theta_delta(gf, ds, 4, -1.0, v2(0, 0)), std::invalid_argument);
}

TEST(HeightFunctions, ScaledHeightConvergesToHZeroAtFirstOrder) {
  const auto gf = build("ot_log");
  const auto ds = dual_segment(gf, log_segment(gf, 32));
  const Vec x = v2(0.2, -0.15);
  const double h0 = h_zero(gf, ds, x);
  const double e1 = h_theta(gf, ds, 2, x) / ds.base.theta(2) - h0;   // theta = 1/16
  const double e2 = h_theta(gf, ds, 1, x) / ds.base.theta(1) - h0;   // theta = 1/32
  ASSERT_GT(std::abs(e2), 1e-8);
  EXPECT_NEAR(e1 / e2, 2.0, 0.1);
}

TEST(HeightFunctions, GradientAtBasePointIsThetaTimesDp) {
  const auto gf = build("ot_log");
  const auto ds = dual_segment(gf, log_segment(gf));
  const Vec& x0 = ds.base.x0;
  for (int k : {4, 16, 32}) {
    Vec grad(2);
    for (int a = 0; a < 2; ++a) {
      const double h = 1e-6;
      Vec xp = x0, xm = x0;
      xp[a] += h;
      xm[a] -= h;
      grad[a] = (h_theta(gf, ds, k, xp) - h_theta(gf, ds, k, xm)) / (2 * h);
    }
    EXPECT_LT((grad - ds.base.theta(k) * ds.dp()).norm(), 1e-6) << "k=" << k;
  }
}

TEST(Sections, MaskGrowsWithDelta) {
  const auto gf = build("ot_log");
  const auto ds = dual_segment(gf, log_segment(gf));
  const double r = default_radius(gf);
  const auto s0 = section_sample(gf, ds, 32, r, 33, 0.0);
  const auto s1 = section_sample(gf, ds, 32, r, 33, 0.5);
  const auto s2 = section_sample(gf, ds, 32, r, 33, 2.0);
  long c0 = 0, c2 = 0;
  for (std::size_t i = 0; i < s0.mask.size(); ++i) {
    if (s0.mask[i]) EXPECT_TRUE(s1.mask[i]);
    if (s1.mask[i]) EXPECT_TRUE(s2.mask[i]);
    c0 += s0.mask[i];
    c2 += s2.mask[i];
  }
  EXPECT_GT(c0, 0);
  EXPECT_GE(c2, c0);
  EXPECT_EQ(s0.clipped_fraction, 0.0);
}

TEST(LocalGConvexity, HoldsOnLogAndQuadratic) {
  GeometrySettings gs;
  for (const char* id : {"ot_quad", "ot_log"}) {
    const auto gf = build(id);
    const auto seg = std::string(id) == "ot_quad" ? quad_segment() : log_segment(gf);
    const auto ds = dual_segment(gf, seg);
    const double r = default_radius(gf, gs);
    const auto s = section_sample(gf, ds, seg.m, r, gs.section_points);
    const auto rep = check_local_gconvexity(gf, s, ds.y_theta[0], ds.z_theta[0], r, gs);
    EXPECT_TRUE(rep.holds()) << id << " defect " << rep.extra_value("hull_defect");
    EXPECT_GE(rep.margin, 0.0);
    EXPECT_GT(rep.samples_used, 10);
  }
}

TEST(MaxPrinciple, WeakFormHoldsOnQuadraticAndLog) {
  for (const char* id : {"ot_quad", "ot_log"}) {
    const auto gf = build(id);
    const auto seg = std::string(id) == "ot_quad" ? quad_segment() : log_segment(gf);
    const auto ds = dual_segment(gf, seg);
    const auto rep = check_max_principle(gf, ds, default_radius(gf), 0.0);
    EXPECT_TRUE(rep.holds()) << id;
    EXPECT_EQ(rep.condition_id, "A3w(2)");
  }
}

TEST(MaxPrinciple, Delta0MatchesClosedFormOnScan) {
  const auto gf = build("ot_log");
  const auto ds = dual_segment(gf, log_segment(gf));
  const auto d = max_principle_delta0(gf, ds, default_radius(gf));
  ASSERT_GT(d.delta0, 0.0);
  EXPECT_TRUE(d.positive);
  // holds(delta) <=> delta <= (gap_i + tol) / w_i for every w_i > 0.
  double oracle = kInf;
  for (std::size_t i = 0; i < d.scan.gap.size(); ++i)
    if (d.scan.weight[i] > 0) oracle = std::min(oracle, (d.scan.gap[i] + d.scan.mp_tol) / d.scan.weight[i]);
  EXPECT_NEAR(d.delta0, oracle, 1e-10 * std::max(1.0, oracle));
  EXPECT_TRUE(check_max_principle(gf, ds, d.scan.radius, 0.99 * d.delta0).holds());
}

TEST(MaxPrinciple, QuadraticHasNoPositiveDelta0) {
  const auto gf = build("ot_quad");
  const auto ds = dual_segment(gf, quad_segment());
  const auto d = max_principle_delta0(gf, ds, default_radius(gf));
  // The gap vanishes along x1 = const lines, so only the tolerance floor is admitted.
  EXPECT_FALSE(d.positive);
  EXPECT_LE(d.delta0, 10 * d.floor + 1e-15);
}

TEST(FundamentalForm, MonotoneOnLogFlatOnQuadratic) {
  const auto log = build("ot_log");
  const auto rl = fundamental_form_monotonicity(log, dual_segment(log, log_segment(log)), 3);
  EXPECT_TRUE(rl.holds()) << rl.margin;
  const auto quad = build("ot_quad");
  const auto rq = fundamental_form_monotonicity(quad, dual_segment(quad, quad_segment()), 3);
  EXPECT_TRUE(rq.holds());
  EXPECT_LT(std::abs(rq.margin), 1e-6);
}

TEST(Equivalence, ChainHoldsOnCatalog) {
  for (auto [id, p] : {std::pair<const char*, double>{"ot_quad", 0}, {"ot_log", 0}, {"ot_power", 4.0}}) {
    Params params;
    if (p > 0) params["p"] = p;
    const auto gf = build(id, params);
    const auto segs = seed_segments(gf, 6, 5);
    ASSERT_FALSE(segs.empty());
    const auto r = check_equivalence_chain(gf, segs, default_radius(gf), 5);
    EXPECT_TRUE(r.holds()) << id << " margin " << r.margin;
  }
}

TEST(Equivalence, PowerWitnessBreaksLocalGeometry) {
  const auto gf = build("ot_power", {{"p", 4.0}});
  const auto segs = seed_segments(gf, 6, 5);
  const auto r = check_equivalence_chain(gf, segs, default_radius(gf), 5);
  ASSERT_TRUE(r.holds());
  EXPECT_GT(r.extra_value("segments_a3w_fails"), 0.0);
}

TEST(Equivalence, QuantitativeSignAgreement) {
  for (auto [id, p] : {std::pair<const char*, double>{"ot_log", 0}, {"ot_quad", 0}}) {
    Params params;
    if (p > 0) params["p"] = p;
    const auto gf = build(id, params);
    const auto segs = seed_segments(gf, 4, 9);
    const auto r = check_quantitative_chain(gf, segs, default_radius(gf), 9);
    EXPECT_TRUE(r.holds()) << id;
    EXPECT_EQ(r.extra_value("sign_delta_hat"), r.extra_value("sign_delta0_star")) << id;
  }
}
