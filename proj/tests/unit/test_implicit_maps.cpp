#include "genfun/catalog.hpp"
#include "genfun/implicit_maps.hpp"

#include <gtest/gtest.h>

using namespace genfun;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

const char* kIds[] = {"ot_quad", "ot_log", "ot_power", "synthetic_z"};

}  // namespace

TEST(SolveYZ, QuadraticClosedForm) {
  const auto gf = build("ot_quad");
  const auto s = solve_YZ(gf, {v2(0, 0), 0.0, v2(1, 0)});
  EXPECT_NEAR((s.y - v2(1, 0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(s.z, -0.5, 1e-12);
  EXPECT_LT(s.residual, 1e-12);
}

TEST(SolveYZ, LogCostForwardOracle) {
  const auto gf = build("ot_log");
  const auto s = solve_YZ(gf, {v2(0, 0), std::log(2.0), v2(-0.5, 0)});
  EXPECT_LT((s.y - v2(2, 0)).norm(), 1e-10);
  EXPECT_NEAR(s.z, 0.0, 1e-10);
}

TEST(SolveYZ, RoundTripAllEntries) {
  for (const char* id : kIds) {
    for (double analytic : {1.0, 0.0}) {
      const auto gf = build(id, {{"analytic", analytic}});
      Rng rng(99);
      for (int s = 0; s < 50; ++s) {
        const FiberPoint fp = sample_gamma(gf, rng, 0.95);
        const JetPoint jet = jet_of(gf, fp);
        const auto sol = solve_YZ(gf, jet);
        EXPECT_LT((sol.y - fp.y).norm(), analytic ? 1e-9 : 1e-7) << id;
        EXPECT_NEAR(sol.z, fp.z, analytic ? 1e-9 : 1e-7) << id;
      }
    }
  }
}

TEST(SolveYZ, FailsOutsideJetSet) {
  const auto gf = build("ot_log");
  // |p| = 1/|x - y| cannot exceed 1/r0 ~ 1.7 on the separated layout.
  try {
    solve_YZ(gf, {v2(0, 0), 0.0, v2(-10, 0)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.kind() == ErrorKind::NoConvergence || e.kind() == ErrorKind::SingularJacobian);
  }
}

TEST(SolveYZ, JacobianDeterminantIsGzTimesDetE) {
  const auto gf = build("synthetic_z");
  Rng rng(3);
  for (int s = 0; s < 20; ++s) {
    const FiberPoint fp = sample_gamma(gf, rng);
    const GJet j = eval_jet(gf, fp.x, fp.y, fp.z);
    Mat J(3, 3);
    J.topLeftCorner(2, 2) = j.gxy;
    J.topRightCorner(2, 1) = j.gxz;
    J.bottomLeftCorner(1, 2) = j.gy.transpose();
    J(2, 2) = j.gz;
    EXPECT_NEAR(J.determinant(), j.gz * matrix_E_from(j).determinant(), 1e-12);
  }
}

TEST(Gstar, ClosedFormAndIdentity) {
  const auto quad = build("ot_quad");
  EXPECT_NEAR(eval_gstar(quad, v2(0, 0), v2(1, 0), 0.0), -0.5, 1e-14);
  for (const char* id : kIds) {
    const auto gf = build(id);
    Rng rng(5);
    for (int s = 0; s < 100; ++s) {
      const FiberPoint fp = sample_gamma(gf, rng);
      EXPECT_NEAR(eval_gstar(gf, fp.x, fp.y, gf(fp.x, fp.y, fp.z)), fp.z, 1e-10) << id;
    }
  }
}

TEST(Gstar, OutOfRange) {
  const auto gf = build("synthetic_z");
  try {
    eval_gstar(gf, v2(0, 0), v2(0, 0), 5.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutOfRange);
  }
}

TEST(MapQ, QuadraticAndJacobianIdentity) {
  const auto quad = build("ot_quad");
  EXPECT_EQ(map_Q(quad, {v2(1, 1), v2(0.5, -1), 0.0}), v2(0.5, 2));
  for (const char* id : {"ot_quad", "ot_log", "synthetic_z"}) {
    const auto gf = build(id);
    Rng rng(17);
    for (int s = 0; s < 100; ++s) {
      const FiberPoint fp = sample_gamma(gf, rng, 0.9);
      const GJet j = eval_jet(gf, fp.x, fp.y, fp.z);
      const Mat expected = -matrix_E_from(j).transpose() / j.gz;
      Mat fd(2, 2);
      for (int k = 0; k < 2; ++k) {
        Vec e = Vec::Zero(2);
        e[k] = 1e-6;
        fd.col(k) = (map_Q(gf, {fp.x + e, fp.y, fp.z}) - map_Q(gf, {fp.x - e, fp.y, fp.z})) / 2e-6;
      }
      EXPECT_LT((fd - expected).norm(), 1e-5 * std::max(1.0, expected.norm())) << id;
    }
  }
}

TEST(MapP, IdentitiesAndContinuity) {
  const auto quad = build("ot_quad");
  EXPECT_LT((map_P(quad, v2(0.2, 0.1), v2(1, 1), 0.3) - v2(0.8, 0.9)).norm(), 1e-14);
  for (const char* id : kIds) {
    const auto gf = build(id);
    Rng rng(8);
    for (int s = 0; s < 50; ++s) {
      const FiberPoint fp = sample_gamma(gf, rng);
      const double u = gf(fp.x, fp.y, fp.z);
      EXPECT_LT((map_P(gf, fp.x, fp.y, u) - eval_gx(gf, fp.x, fp.y, fp.z)).norm(), 1e-10) << id;
    }
  }
  const auto log = build("ot_log");
  const Vec x = v2(0.1, 0.2), y = v2(2.1, -0.1);
  const double u = log(x, y, 0.3);
  EXPECT_LT((map_P(log, x, y, u + 1e-6) - map_P(log, x, y, u)).norm(), 1e-5);
}

TEST(InvertQ, ClosedFormAndRoundTrip) {
  const auto quad = build("ot_quad");
  EXPECT_LT((invert_Q(quad, v2(1, 1), v2(0, 0), 0.0, v2(0, 0)) - v2(1, 1)).norm(), 1e-14);
  for (const char* id : kIds) {
    const auto gf = build(id);
    Rng rng(41);
    double worst = 0;
    for (int s = 0; s < 100; ++s) {
      const FiberPoint fp = sample_gamma(gf, rng);
      const Vec q = map_Q(gf, fp);
      const Vec x = invert_Q(gf, q, fp.y, fp.z, gf.gamma.x_box.center());
      worst = std::max(worst, (x - fp.x).norm());
    }
    EXPECT_LT(worst, 1e-9) << id;
  }
}

TEST(MatrixE, ClosedForms) {
  const auto quad = build("ot_quad");
  const auto e = matrix_E(quad, {v2(0.3, 0.1), v2(-1, 1), 0.0});
  EXPECT_EQ(e.E, Mat::Identity(2, 2));
  EXPECT_EQ(e.det, 1.0);
  const auto synth = build("synthetic_z");
  EXPECT_LT((matrix_E(synth, {v2(0.3, 0.1), v2(0.3, 0.1), 0.0}).E - Mat::Identity(2, 2)).norm(), 1e-15);
  // Off the diagonal, at z = 0: I - eps r r^T / (1 + eps c).
  const Vec x = v2(0.5, -0.2), y = v2(-0.4, 0.3);
  const Vec r = x - y;
  const double eps = 0.1, c = 0.5 * r.squaredNorm();
  const Mat expected = Mat::Identity(2, 2) - eps * r * r.transpose() / (1 + eps * c);
  EXPECT_LT((matrix_E(synth, {x, y, 0.0}).E - expected).norm(), 1e-14);
}

// Y_p = E^{-1}: the p-Jacobian of the solved y against E^{-1}.
TEST(MatrixE, InverseIsPJacobianOfY) {
  for (const char* id : kIds) {
    const auto gf = build(id);
    Rng rng(123);
    for (int s = 0; s < 25; ++s) {
      const FiberPoint fp = sample_gamma(gf, rng, 0.8);
      const JetPoint jet = jet_of(gf, fp);
      const Mat Einv = matrix_E(gf, fp).E.inverse();
      Mat fd(2, 2);
      const double h = 1e-5 * std::max(1.0, jet.p.norm());
      for (int k = 0; k < 2; ++k) {
        JetPoint jp = jet, jm = jet;
        jp.p[k] += h;
        jm.p[k] -= h;
        fd.col(k) = (solve_YZ(gf, jp, fp).y - solve_YZ(gf, jm, fp).y) / (2 * h);
      }
      EXPECT_LT((fd - Einv).norm(), 1e-5 * Einv.norm()) << id;
    }
  }
}

TEST(MatrixA, ClosedFormsAndIdentity) {
  const auto quad = build("ot_quad");
  EXPECT_EQ(matrix_A(quad, {v2(0.1, 0.2), 0.4, v2(0.3, -0.7)}), -Mat::Identity(2, 2));
  const auto log = build("ot_log");
  const Mat A = matrix_A(log, {v2(0, 0), std::log(2.0), v2(-0.5, 0)});
  Mat fd(2, 2);
  for (int k = 0; k < 2; ++k) {
    Vec e = Vec::Zero(2);
    e[k] = 1e-5;
    fd.col(k) = (log.partials.gx(e, v2(2, 0), 0) - log.partials.gx(-e, v2(2, 0), 0)) / 2e-5;
  }
  EXPECT_LT((A - fd).norm(), 1e-6);
  for (const char* id : kIds) {
    const auto gf = build(id);
    Rng rng(77);
    for (int s = 0; s < 30; ++s) {
      const FiberPoint fp = sample_gamma(gf, rng);
      const Mat a = matrix_A(gf, jet_of(gf, fp));
      EXPECT_LT((a - eval_jet(gf, fp.x, fp.y, fp.z).gxx).norm(), 1e-9) << id;
    }
  }
}
