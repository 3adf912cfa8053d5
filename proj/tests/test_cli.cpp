#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "vbald/bench.hpp"

namespace {

struct Run {
  int code = -1;
  std::string out;
};

/// Runs the CLI with `args`; stderr is discarded.
Run run(const std::string& args) {
  const std::string command = std::string(VBALD_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

/// Value column of a `moments` listing.
std::vector<double> moment_values(const std::string& out) {
  std::istringstream in(out);
  std::string line;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("i,", 0) == 0) continue;
    const auto a = line.find(','), b = line.find(',', a + 1);
    values.push_back(std::stod(line.substr(a + 1, b - a - 1)));
  }
  return values;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("vbald_cli_" + name)).string();
}

}  // namespace

TEST(Cli, MomentsOfIdentityAreOnes) {
  const auto r = run("moments --identity 6 --basis power -m 4 -d 3");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(moment_values(r.out), (std::vector<double>{1, 1, 1, 1, 1}));
}

TEST(Cli, MomentsOfDiagonalAreExact) {
  const auto r = run("moments --diag 1,2,4 --basis power -m 2 -d 2");
  ASSERT_EQ(r.code, 0);
  const auto v = moment_values(r.out);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0], 1.0);
  EXPECT_DOUBLE_EQ(v[1], 7.0 / 12.0);
  EXPECT_DOUBLE_EQ(v[2], 21.0 / 48.0);
}

TEST(Cli, MomentsCsvFile) {
  const std::string path = temp_path("moments.csv");
  ASSERT_EQ(run("moments --identity 3 -m 2 -d 1 --csv " + path).code, 0);
  std::ifstream in(path);
  std::stringstream text;
  text << in.rdbuf();
  EXPECT_EQ(moment_values(text.str()).size(), 3u);
  std::filesystem::remove(path);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run("moments --identity 4 --basis hermite").code, 2);
  EXPECT_EQ(run("logdet --identity 4 --method cholesky").code, 2);
  EXPECT_EQ(run("logdet").code, 2);
  EXPECT_EQ(run("logdet --identity 4 --diag 1,2").code, 2);
  EXPECT_EQ(run("logdet --identity 4 -m 0").code, 2);
  EXPECT_EQ(run("logdet --se-kernel n=10,dim=2 --method exact").code, 2);
  EXPECT_EQ(run("bench --identity 4 --methods ''").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, InputErrors) {
  EXPECT_EQ(run("logdet --mtx /nonexistent/matrix.mtx --method exact").code, 3);
  const std::string path = temp_path("bad.mtx");
  std::ofstream(path) << "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1\n";
  EXPECT_EQ(run("logdet --mtx " + path + " --method exact").code, 3);
  std::filesystem::remove(path);
}

TEST(Cli, NumericalFailure) {
  EXPECT_EQ(run("logdet --diag 1,-1 --method exact").code, 4);
}

TEST(Cli, ExactOnDiagonal) {
  const auto r = run("logdet --diag 1,2,4 --method exact --json");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j.at("value").get<double>(), std::log(8.0), 1e-12);
}

TEST(Cli, VbaldIdentityFlagsNonConvergence) {
  const auto r = run("logdet --identity 100 --method vbald --json");
  EXPECT_EQ(r.code, 5);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j.at("value").get<double>(), 0.0, 0.05 * 100);
  EXPECT_FALSE(j.at("diagnostics").at("converged").get<bool>());
}

TEST(Cli, CompareReportsRelativeError) {
  const auto r = run("logdet --mtx " VBALD_TEST_DATA "/bcsstk01.mtx --method lanczos -m 20 -d 20 --compare --json");
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_LT(j.at("rel_error").get<double>(), 0.05);
  EXPECT_EQ(j.at("n"), 48);
}

TEST(Cli, BenchLengthscaleSweepShape) {
  const std::string path = temp_path("bench.csv");
  const auto r = run("bench --lengthscales 0.05:0.85:0.1 --methods vbald,chebyshev,lanczos --n 120 --scale 0.1 "
                     "-m 10 -d 10 --csv " + path);
  ASSERT_EQ(r.code, 0);
  std::ifstream in(path);
  const auto rows = vbald::read_bench_csv(in);
  ASSERT_EQ(rows.size(), 27u);
  for (const auto& row : rows) {
    EXPECT_TRUE(row.exact.has_value());
    EXPECT_TRUE(row.rel_error.has_value());
    EXPECT_TRUE(row.kappa.has_value());
    EXPECT_EQ(row.n, 120);
  }
  EXPECT_NEAR(*rows.front().lengthscale, 0.05, 1e-12);
  EXPECT_NEAR(*rows.back().lengthscale, 0.85, 1e-12);
  std::filesystem::remove(path);
}

TEST(Cli, BenchIdentityAllMethods) {
  const auto r = run("bench --identity 20 --methods vbald,taylor,chebyshev,lanczos,exact -m 8 -d 4 --verbose");
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  const auto rows = vbald::read_bench_csv(in);
  ASSERT_EQ(rows.size(), 5u);
  for (const auto& row : rows) {
    if (row.method == "vbald") continue;
    EXPECT_LE(*row.rel_error, 1e-6) << row.method;
  }
}
