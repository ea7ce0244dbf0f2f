#include "genfun/catalog.hpp"
#include "genfun/parallel.hpp"

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

TEST(EvalJet, QuadraticClosedForm) {
  const auto gf = build("ot_quad");
  const GJet j = eval_jet(gf, v2(0, 0), v2(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(j.g, -0.5);
  EXPECT_EQ(j.gx, v2(1, 0));
  EXPECT_EQ(j.gy, v2(-1, 0));
  EXPECT_EQ(j.gz, -1.0);
  EXPECT_EQ(j.gxx, -Mat::Identity(2, 2));
  EXPECT_EQ(j.gxy, Mat::Identity(2, 2));
  EXPECT_EQ(j.gxz, Vec::Zero(2));
  EXPECT_EQ(j.source, JetSource::analytic);
}

TEST(EvalJet, LogCostAgainstDifferencesOfGradient) {
  const auto gf = build("ot_log");
  const Vec x = v2(0, 0), y = v2(2, 0);
  const GJet j = eval_jet(gf, x, y, 0.0);
  EXPECT_NEAR(j.g, std::log(2.0), 1e-15);
  EXPECT_NEAR(j.gx[0], -0.5, 1e-15);
  EXPECT_NEAR(j.gx[1], 0.0, 1e-15);
  EXPECT_EQ(j.gz, -1.0);
  const double h = 1e-5;
  for (int k = 0; k < 2; ++k) {
    Vec e = Vec::Zero(2);
    e[k] = h;
    const Vec col = (gf.partials.gx(x + e, y, 0) - gf.partials.gx(x - e, y, 0)) / (2 * h);
    EXPECT_LT((col - j.gxx.col(k)).norm(), 1e-6);
  }
}

TEST(EvalJet, SymmetricHessianForEveryEntryAndMode) {
  for (const char* id : kIds) {
    for (double analytic : {0.0, 1.0}) {
      const auto gf = build(id, {{"analytic", analytic}});
      Rng rng(7);
      for (int s = 0; s < 20; ++s) {
        const FiberPoint fp = sample_gamma(gf, rng, 0.9);
        const GJet j = eval_jet(gf, fp.x, fp.y, fp.z);
        EXPECT_EQ(j.gxx, j.gxx.transpose()) << id;
        EXPECT_LT(j.gz, 0.0);
        EXPECT_EQ(j.source, analytic == 1.0 ? JetSource::analytic : JetSource::finite_difference);
      }
    }
  }
}

TEST(EvalJet, FallbackMatchesAnalyticJet) {
  for (const char* id : kIds) {
    const auto exact = build(id);
    const auto fd = build(id, {{"analytic", 0.0}});
    Rng rng(11);
    for (int s = 0; s < 20; ++s) {
      const FiberPoint fp = sample_gamma(exact, rng, 0.9);
      const GJet a = eval_jet(exact, fp.x, fp.y, fp.z);
      const GJet b = eval_jet(fd, fp.x, fp.y, fp.z);
      const double sc = 1.0 + a.gxx.norm() + a.gxy.norm();
      EXPECT_LT((a.gx - b.gx).norm(), 1e-8 * (1 + a.gx.norm())) << id;
      EXPECT_LT((a.gy - b.gy).norm(), 1e-8 * (1 + a.gy.norm())) << id;
      EXPECT_NEAR(a.gz, b.gz, 1e-8) << id;
      EXPECT_LT((a.gxx - b.gxx).norm(), 1e-4 * sc) << id;
      EXPECT_LT((a.gxy - b.gxy).norm(), 1e-4 * sc) << id;
      EXPECT_LT((a.gxz - b.gxz).norm(), 1e-4 * sc) << id;
    }
  }
}

// Analytic first partials against plain central differences of eval.
TEST(EvalJet, FirstPartialsMatchCentralDifferences) {
  for (const char* id : kIds) {
    const auto gf = build(id);
    Rng rng(2024);
    for (int s = 0; s < 100; ++s) {
      const FiberPoint fp = sample_gamma(gf, rng, 0.9);
      const GJet j = eval_jet(gf, fp.x, fp.y, fp.z);
      for (int i = 0; i < 2; ++i) {
        Vec e = Vec::Zero(2);
        const double hx = 1e-5 * unit_scale(fp.x[i]);
        e[i] = hx;
        const double dx = (gf(fp.x + e, fp.y, fp.z) - gf(fp.x - e, fp.y, fp.z)) / (2 * hx);
        EXPECT_NEAR(dx, j.gx[i], 1e-6 * std::max(1.0, std::abs(j.gx[i]))) << id;
        e[i] = 1e-5 * unit_scale(fp.y[i]);
        const double dy = (gf(fp.x, fp.y + e, fp.z) - gf(fp.x, fp.y - e, fp.z)) / (2 * e[i]);
        EXPECT_NEAR(dy, j.gy[i], 1e-6 * std::max(1.0, std::abs(j.gy[i]))) << id;
      }
      const double hz = 1e-5 * unit_scale(fp.z);
      const double dz = (gf(fp.x, fp.y, fp.z + hz) - gf(fp.x, fp.y, fp.z - hz)) / (2 * hz);
      EXPECT_NEAR(dz, j.gz, 1e-6 * std::max(1.0, std::abs(j.gz))) << id;
    }
  }
}

TEST(EvalJet, DeterministicBitForBit) {
  const auto gf = build("synthetic_z", {{"analytic", 0.0}});
  const GJet a = eval_jet(gf, v2(0.1, 0.2), v2(-0.3, 0.4), 0.25);
  const GJet b = eval_jet(gf, v2(0.1, 0.2), v2(-0.3, 0.4), 0.25);
  EXPECT_EQ(a.g, b.g);
  EXPECT_EQ(a.gxx, b.gxx);
  EXPECT_EQ(a.gxy, b.gxy);
  EXPECT_EQ(a.gxz, b.gxz);
}

TEST(EvalJet, Errors) {
  const auto gf = build("ot_quad");
  try {
    eval_jet(gf, v2(5, 0), v2(0, 0), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutOfGamma);
  }
  auto flipped = gf;
  flipped.eval = [](const Vec& x, const Vec& y, double z) { return -0.5 * (x - y).squaredNorm() + z; };
  flipped.partials.first = nullptr;
  flipped.partials.gz = [](const Vec&, const Vec&, double) { return 1.0; };
  try {
    eval_jet(flipped, v2(0, 0), v2(0, 0), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateGz);
  }
}

TEST(ValidateGamma, CatalogEntriesPass) {
  const auto quad = validate_gamma(build("ot_quad"), 1000, 1);
  EXPECT_TRUE(quad.holds());
  EXPECT_EQ(quad.margin, 1.0);
  const auto synth = validate_gamma(build("synthetic_z"), 1000, 1);
  EXPECT_TRUE(synth.holds());
  EXPECT_GE(synth.margin, 1.0);
  for (const char* id : kIds) EXPECT_TRUE(validate_gamma(build(id), 200, 3).holds()) << id;
}

TEST(ValidateGamma, SignFlipFailsWithWitness) {
  auto gf = build("ot_quad");
  gf.partials = Partials{};
  gf.eval = [](const Vec& x, const Vec& y, double z) { return -0.5 * (x - y).squaredNorm() + z; };
  const auto r = validate_gamma(gf, 100, 5);
  EXPECT_TRUE(r.fails());
  ASSERT_TRUE(r.witness);
  EXPECT_NEAR(r.witness->scalar("gz"), 1.0, 1e-8);
  EXPECT_EQ(r.witness->vector("x").size(), 2);
}

TEST(Catalog, ListsRequiredEntriesWithProvenance) {
  const auto cat = list_catalog();
  for (const char* id : kIds) {
    auto it = std::find_if(cat.begin(), cat.end(), [&](const CatalogEntry& e) { return e.id == id; });
    ASSERT_NE(it, cat.end()) << id;
    for (const auto& kp : it->known_properties) EXPECT_FALSE(kp.provenance.empty());
  }
  auto quad = find_entry("ot_quad");
  auto a3w = std::find_if(quad.known_properties.begin(), quad.known_properties.end(),
                          [](const KnownProperty& k) { return k.condition == "A3w"; });
  EXPECT_EQ(a3w->expected, "holds");
  EXPECT_THROW(build("nope"), Error);
  EXPECT_THROW(build("ot_quad", {{"bogus", 1.0}}), Error);
}

TEST(Catalog, SeparatedLayoutRadius) {
  const auto gf = build("ot_log");
  EXPECT_FALSE(gf.gamma.contains_pair(v2(0, 0), v2(0.5, 0)));
  EXPECT_TRUE(gf.gamma.contains_pair(v2(0.5, 0.5), v2(1.5, 0.5)));
}

TEST(Catalog, PluginRegistry) {
  CatalogEntry e = find_entry("ot_quad");
  e.id = "my_quad";
  register_plugin(e);
  EXPECT_EQ(build("my_quad").dim, 2);
  EXPECT_THROW(register_plugin(e), Error);
}

TEST(Parallel, IndependentOfWorkerCount) {
  std::vector<double> a(1000), b(1000);
  parallel_for(a.size(), [&](std::size_t i) { a[i] = std::sin(double(i)); }, 1);
  parallel_for(b.size(), [&](std::size_t i) { b[i] = std::sin(double(i)); }, 4);
  EXPECT_EQ(a, b);
  EXPECT_THROW(parallel_for(10, [](std::size_t i) { if (i == 3) throw std::runtime_error("x"); }, 3),
               std::runtime_error);
}
