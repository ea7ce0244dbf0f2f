#include "genfun/io.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace genfun;
namespace fs = std::filesystem;

namespace {

const std::string kCli = GENFUN_CLI_PATH;
const std::string kConfigs = GENFUN_CONFIG_DIR;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("genfun_cli_") + info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the CLI with stdout/stderr captured in the temp dir; returns the exit code.
  int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" + kCli + "' " + args + " > '" +
                            (dir_ / "stdout.txt").string() + "' 2> '" + (dir_ / "stderr.txt").string() + "'";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string slurp(const fs::path& p) const {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }
  std::string out() const { return slurp(dir_ / "stdout.txt"); }
  std::string config(const std::string& name) const { return "'" + kConfigs + "/" + name + "'"; }
  std::string sub(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream f(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    rows.push_back(detail::split(line, ','));
  }
  return rows;
}

}  // namespace

TEST_F(Cli, ListShowsCatalog) {
  ASSERT_EQ(run("list"), 0);
  const std::string text = out();
  for (const char* id : {"ot_quad", "ot_log", "ot_power", "synthetic_z"}) EXPECT_NE(text.find(id), std::string::npos) << id;
  EXPECT_NE(text.find("A3s"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitThree) {
  EXPECT_EQ(run(""), 3);
  EXPECT_EQ(run("frobnicate"), 3);
  EXPECT_EQ(run("check"), 3);
  EXPECT_EQ(run("list --bogus"), 3);
}

TEST_F(Cli, UnknownIdExitsThree) {
  EXPECT_EQ(run("check " + config("unknown_id.ini") + " -o '" + sub("unk") + "'"), 3);
}

TEST_F(Cli, MissingConfigIsAnError) {
  const int code = run("check '" + sub("nope.ini") + "'");
  EXPECT_TRUE(code == 3 || code == 4) << code;
}

TEST_F(Cli, QuadraticBasicExitsOneWithReports) {
  const std::string o = sub("quad");
  ASSERT_EQ(run("check " + config("ot_quad_basic.ini") + " -o '" + o + "'"), 1);
  const auto rows = read_csv(o + "/margins.csv");
  ASSERT_EQ(rows.size(), 4u);  // header + A2, A3w, A3s
  EXPECT_EQ(rows[0][0], "check_id");
  EXPECT_EQ(rows[1][0], "A2");
  EXPECT_EQ(rows[1][2], "holds");
  EXPECT_EQ(rows[3][0], "A3s");
  EXPECT_EQ(rows[3][2], "fails");

  const auto j = nlohmann::json::parse(slurp(o + "/report.json"));
  EXPECT_EQ(j["exit_code"], 1);
  EXPECT_EQ(j["overall"], "fails");
  ASSERT_EQ(j["checks"].size(), 3u);
  EXPECT_EQ(j["checks"][0]["id"], "A2");
  EXPECT_NEAR(j["checks"][0]["margin"].get<double>(), 0.5, 1e-9);
  EXPECT_TRUE(fs::exists(o + "/timing.csv"));
}

TEST_F(Cli, LogFullExitsZero) {
  const std::string o = sub("log");
  EXPECT_EQ(run("check " + config("ot_log_full.ini") + " -o '" + o + "'"), 0) << out();
  const auto rows = read_csv(o + "/margins.csv");
  EXPECT_EQ(rows.size(), 14u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][2], "holds") << rows[i][0];
}

TEST_F(Cli, ReportIndependentOfThreadCount) {
  const std::string a = sub("t1"), b = sub("t4");
  EXPECT_EQ(run("check " + config("ot_power_a3w.ini") + " -o '" + a + "'", "GENFUN_THREADS=1"), 1);
  EXPECT_EQ(run("check " + config("ot_power_a3w.ini") + " -o '" + b + "'", "GENFUN_THREADS=4"), 1);
  auto ja = nlohmann::json::parse(slurp(a + "/report.json"));
  auto jb = nlohmann::json::parse(slurp(b + "/report.json"));
  // Only the output directory differs between the two runs.
  ja["config"].erase("output_dir");
  jb["config"].erase("output_dir");
  EXPECT_EQ(ja.dump(), jb.dump());
  EXPECT_EQ(slurp(a + "/margins.csv"), slurp(b + "/margins.csv"));
}

TEST_F(Cli, TransformOfHalfSquare) {
  const Grid xg = Grid::uniform(Box::cube(Vec::Zero(2), 1.0), 65);
  const auto u = sample_function(xg, [](const Vec& x) { return 0.5 * x.squaredNorm(); });
  write_sampled_function(sub("u.csv"), u);
  ASSERT_EQ(run("transform " + config("transform_quad.ini") + " '" + sub("u.csv") + "' -o '" + sub("v.csv") + "'"), 0);
  const auto v = read_sampled_function(sub("v.csv"));
  EXPECT_EQ(v.grid.counts, (std::vector<int>{65, 65}));
  double err = 0.0;
  for (long j = 0; j < v.size(); ++j) err = std::max(err, std::abs(v[j] + 0.25 * v.grid.node(j).squaredNorm()));
  EXPECT_LT(err, 5e-3);
}

TEST_F(Cli, TransformRejectsBadCsv) {
  std::ofstream(sub("bad.csv")) << "# n: 2\nx1,x2,value\n0,0,1\n";
  EXPECT_EQ(run("transform " + config("transform_quad.ini") + " '" + sub("bad.csv") + "' -o '" + sub("v.csv") + "'"), 4);
}

TEST_F(Cli, DualizeQuadraticTable) {
  ASSERT_EQ(run("dualize " + config("ot_quad_basic.ini") + " --samples 50 -o '" + sub("d.csv") + "'"), 0);
  const auto rows = read_csv(sub("d.csv"));
  ASSERT_EQ(rows.size(), 51u);
  const auto& h = rows[0];
  ASSERT_EQ(h.size(), 11u);
  EXPECT_EQ(h[4], "u");
  EXPECT_EQ(h[5], "gstar");
  EXPECT_EQ(h.back(), "gstar_u");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double x1 = std::stod(r[0]), x2 = std::stod(r[1]), y1 = std::stod(r[2]), y2 = std::stod(r[3]);
    const double uu = std::stod(r[4]), gs = std::stod(r[5]);
    // g* = -|x - y|^2/2 - u and g*_u = -1.
    EXPECT_NEAR(gs, -0.5 * ((x1 - y1) * (x1 - y1) + (x2 - y2) * (x2 - y2)) - uu, 1e-10);
    EXPECT_NEAR(std::stod(r.back()), -1.0, 1e-12);
  }
}
