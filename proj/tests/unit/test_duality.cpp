#include "genfun/catalog.hpp"
#include "genfun/duality.hpp"

#include <gtest/gtest.h>

using namespace genfun;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

const char* const kIds[] = {"ot_quad", "ot_log", "ot_power", "synthetic_z"};

Params params_for(const std::string& id) { return id == "ot_power" ? Params{{"p", 4.0}} : Params{}; }

}  // namespace

TEST(Dual, DefiningIdentityOnSamples) {
  for (const char* id : kIds) {
    const auto gf = build(id, params_for(id));
    const auto dual = build_dual(gf);
    EXPECT_EQ(dual.name, gf.name + "*");
    Rng rng(31);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const FiberPoint fp = sample_gamma(gf, rng);
      const double u = gf.eval(fp.x, fp.y, fp.z);
      const double zs = dual.eval(fp.y, fp.x, u);
      worst = std::max(worst, std::abs(gf.eval(fp.x, fp.y, zs) - u));
      worst = std::max(worst, std::abs(zs - fp.z) / unit_scale(fp.z));
    }
    EXPECT_LT(worst, 1e-9) << id;
  }
}

TEST(Dual, QuadraticIsSelfDual) {
  const auto dual = build_dual(build("ot_quad"));
  const Vec x = v2(0.3, -0.4), y = v2(-1.1, 0.5);
  EXPECT_NEAR(dual.eval(y, x, 0.25), -0.5 * (x - y).squaredNorm() - 0.25, 1e-12);
}

TEST(Dual, FirstPartialsMatchFiniteDifferences) {
  for (const char* id : kIds) {
    const auto gf = build(id, params_for(id));
    const auto dual = build_dual(gf);
    Rng rng(44);
    for (int i = 0; i < 30; ++i) {
      const FiberPoint fp = sample_gamma(gf, rng, 0.8);
      const double u = gf.eval(fp.x, fp.y, fp.z);
      const FirstOrder f = eval_first(dual, fp.y, fp.x, u);
      const Vec fx = detail::fd_gx(dual, fp.y, fp.x, u);
      const Vec fy = detail::fd_gy(dual, fp.y, fp.x, u);
      const double fz = detail::fd_gz(dual, fp.y, fp.x, u);
      EXPECT_LT((f.gx - fx).norm(), 1e-5 * std::max(1.0, fx.norm())) << id;
      EXPECT_LT((f.gy - fy).norm(), 1e-5 * std::max(1.0, fy.norm())) << id;
      EXPECT_NEAR(f.gz, fz, 1e-5 * std::max(1.0, std::abs(fz))) << id;
      EXPECT_LT(f.gz, 0.0) << id;
    }
  }
}

TEST(Dual, SecondPartialsOfLogDualMatchClosedForm) {
  // The log cost is self-dual up to swapping the roles of x and y.
  const auto gf = build("ot_log");
  const auto dual = build_dual(gf);
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    const FiberPoint fp = sample_gamma(gf, rng, 0.8);
    const double u = gf.eval(fp.x, fp.y, fp.z);
    const GJet j = eval_jet(dual, fp.y, fp.x, u);
    const Mat want = gf.partials.gxx(fp.y, fp.x, 0.0);
    EXPECT_LT((j.gxx - want).norm(), 1e-5 * std::max(1.0, want.norm()));
    EXPECT_LT(j.gxz.norm(), 1e-6);
  }
}

TEST(Dual, DoubleDualReproducesPrimal) {
  for (const char* id : kIds) {
    const auto gf = build(id, params_for(id));
    const auto dd = build_dual(build_dual(gf));
    Rng rng(12);
    for (int i = 0; i < 50; ++i) {
      const FiberPoint fp = sample_gamma(gf, rng, 0.8);
      EXPECT_NEAR(dd.eval(fp.x, fp.y, fp.z), gf.eval(fp.x, fp.y, fp.z), 1e-8) << id;
    }
  }
}

TEST(Dual, DomainOutsideThrows) {
  const auto dual = build_dual(build("ot_quad"));
  // |x - y|^2 / 2 = 0 and z in (-10, 10) give u in (-10, 10).
  EXPECT_THROW(dual.eval(v2(0, 0), v2(0, 0), 50.0), Error);
}

TEST(CorrespondJet, QuadraticClosedForm) {
  const auto gf = build("ot_quad");
  const JetPoint jet{v2(0.2, 0.1), 0.3, v2(0.5, -0.25)};
  const auto c = correspond_jet(gf, jet);
  EXPECT_LT((c.fiber.y - (jet.x + jet.p)).norm(), 1e-10);
  EXPECT_NEAR(c.fiber.z, -0.5 * jet.p.squaredNorm() - jet.u, 1e-10);
  EXPECT_LT((c.dual.x - c.fiber.y).norm(), 1e-14);
  EXPECT_EQ(c.dual.u, c.fiber.z);
  EXPECT_LT((c.dual.p + jet.p).norm(), 1e-10);
}

TEST(CorrespondJet, RoundTripThroughDual) {
  for (const char* id : {"ot_log", "synthetic_z"}) {
    const auto gf = build(id);
    const auto dual = build_dual(gf);
    Rng rng(8);
    for (int i = 0; i < 10; ++i) {
      const JetPoint jet = jet_of(gf, sample_gamma(gf, rng, 0.7));
      const auto there = correspond_jet(gf, jet);
      const auto back = correspond_jet(dual, there.dual, FiberPoint{there.dual.x, jet.x, jet.u});
      EXPECT_LT((back.dual.x - jet.x).norm(), 1e-8) << id;
      EXPECT_NEAR(back.dual.u, jet.u, 1e-8) << id;
      EXPECT_LT((back.dual.p - jet.p).norm(), 1e-6 * std::max(1.0, jet.p.norm())) << id;
    }
  }
}

TEST(Invariance, VerdictsAgreeOnCatalog) {
  for (const char* id : kIds) {
    const auto gf = build(id, params_for(id));
    for (const char* cond : {"A3w", "A3s"}) {
      const auto r = check_duality_invariance(gf, cond, 6, 3);
      EXPECT_EQ(r.condition_id, std::string("duality:") + cond);
      EXPECT_TRUE(r.holds()) << id << ' ' << cond;
      EXPECT_GT(r.extra_value("dual_segments"), 0.0) << id << ' ' << cond;
    }
  }
}

TEST(Invariance, PowerViolationTransportsToPrimal) {
  const auto gf = build("ot_power", {{"p", 4.0}});
  const auto r = check_duality_invariance(gf, "A3w", 6, 3);
  ASSERT_TRUE(r.holds());
  EXPECT_LT(r.extra_value("primal_margin"), 0.0);
  EXPECT_LT(r.extra_value("dual_margin"), 0.0);
  EXPECT_LT(r.extra_value("transported_min_form"), 0.0);
}

TEST(Invariance, UnknownConditionRejected) {
  EXPECT_ANY_THROW(check_duality_invariance(build("ot_quad"), "A2", 4, 1));
}
