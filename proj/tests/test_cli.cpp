#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fitnet/fitnet.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(FITNET_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::map<std::string, std::string> key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos && !kv.count(line.substr(0, eq))) kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return kv;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("fitnet_cli_" + std::to_string(getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // small run shared by the data-driven subcommands
  void simulate(const std::string& name) {
    const auto r = run("simulate --out " + path(name) + " --m 3 --c 0.5 --steps 13000 --snapshot-interval 1000 --seed 5");
    ASSERT_EQ(r.code, 0) << r.out;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("nonsense").code, 2);
  EXPECT_EQ(run("theory --c notanumber").code, 2);
  EXPECT_EQ(run("estimate").code, 2);  // --in is required
  EXPECT_EQ(run("estimate --in " + path("missing")).code, 1);
  EXPECT_EQ(run("theory --fitness delta --eta-max 0").code, 1);
}

TEST_F(Cli, SimulateIsDeterministic) {
  simulate("a");
  simulate("b");
  EXPECT_EQ(slurp(path("a/manifest.json")), slurp(path("b/manifest.json")));
  EXPECT_EQ(slurp(path("a/snapshot_0013.tsv")), slurp(path("b/snapshot_0013.tsv")));
  EXPECT_FALSE(fs::exists(path("a/PARTIAL")));
  const auto m = nlohmann::json::parse(slurp(path("a/manifest.json")));
  EXPECT_EQ(m["params"]["m"], 3);
  EXPECT_EQ(m["params"]["seed"], 5);
  EXPECT_EQ(m["snapshots"].size(), 13u);
}

TEST_F(Cli, RerunFromManifestOrConfigReproduces) {
  simulate("a");
  ASSERT_EQ(run("simulate --config " + path("a/manifest.json") + " --out " + path("b")).code, 0);
  ASSERT_EQ(run("simulate --config " + path("a/config.txt") + " --out " + path("c")).code, 0);
  for (const char* other : {"b", "c"})
    for (const char* file : {"manifest.json", "snapshot_0007.tsv", "ground_truth.tsv"})
      EXPECT_EQ(slurp(path(std::string("a/") + file)), slurp(path(std::string(other) + "/" + file))) << other << file;
}

TEST_F(Cli, SimulateRejectsBadConfig) {
  {
    std::ofstream cfg(path("bad.txt"));
    cfg << "m = 3\nbogus = 1\n";
  }
  EXPECT_EQ(run("simulate --config " + path("bad.txt") + " --out " + path("x")).code, 1);
  EXPECT_EQ(run("simulate --c 1.5 --out " + path("x")).code, 1);
}

TEST_F(Cli, TheoryStabilisesNearTwo) {
  const auto r = run("theory --fitness trunc-exp --lambda 3.316 --eta-max 2.0 --c 0.9");
  ASSERT_EQ(r.code, 0);
  const auto kv = key_values(r.out);
  EXPECT_NEAR(std::stod(kv.at("gamma_pred")), 2.0, 0.05);
  EXPECT_NEAR(std::stod(kv.at("A")), fitnet::solve_A(0.9, fitnet::fitness::TruncatedExponential{3.316, 2.0}), 1e-9);
}

TEST_F(Cli, TheoryGridIsCsv) {
  const auto r = run("theory --fitness delta --eta-max 1 --grid 0 0.5 3 --out " + path("grid.csv"));
  ASSERT_EQ(r.code, 0);
  std::istringstream in(slurp(path("grid.csv")));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "c,A,ln_pole_gap,beta_max,gamma_pred");
  std::vector<double> gammas;
  while (std::getline(in, line)) gammas.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  ASSERT_EQ(gammas.size(), 3u);
  // 1 + 2 / (1 - c) for Delta fitness
  EXPECT_NEAR(gammas[0], 3.0, 1e-6);
  EXPECT_NEAR(gammas[1], 1.0 + 2.0 / 0.75, 1e-6);
  EXPECT_NEAR(gammas[2], 5.0, 1e-6);
  EXPECT_TRUE(fs::exists(path("grid.csv.manifest.json")));
}

TEST_F(Cli, WinnersMatchesLibrary) {
  const auto r = run("winners --ktg 1000 --T 13 --lambda 3.316 --beta-max 2.0 --gamma-init 1.8");
  ASSERT_EQ(r.code, 0);
  const auto kv = key_values(r.out);
  EXPECT_NEAR(std::stod(kv.at("r_tw")), fitnet::winners(1000, 13, 3.316, 2.0, 1.8).r_tw, 1e-8);
  EXPECT_NEAR(std::stod(kv.at("TW")), std::stod(kv.at("EL")), 1e-9);
}

TEST_F(Cli, EstimateWritesFitTable) {
  simulate("run");
  const auto r = run("estimate --in " + path("run") + " --out " + path("fits.csv"));
  ASSERT_EQ(r.code, 0);
  std::istringstream in(slurp(path("fits.csv")));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "id,beta,intercept,r,points,zero_growth");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5) << line;
  }
  EXPECT_GT(rows, 1000u);
  const auto kv = key_values(r.out);
  EXPECT_EQ(std::stoul(kv.at("fitted")), rows);
  EXPECT_TRUE(fs::exists(path("fits.csv.manifest.json")));
  EXPECT_TRUE(fs::exists(path("estimate_report.txt")));
}

TEST_F(Cli, RankWritesPermutations) {
  simulate("run");
  const auto r = run("rank --in " + path("run") + " --alpha 0 --out " + path("rank.csv"));
  ASSERT_EQ(r.code, 0);
  std::istringstream in(slurp(path("rank.csv")));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "id,base,fitness,boosted,rank_base,rank_boosted");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    ASSERT_EQ(f.size(), 6u);
    EXPECT_EQ(f[4], f[5]);  // alpha = 0 keeps the base order
  }
  EXPECT_GT(rows, 100u);
  EXPECT_EQ(run("rank --in " + path("run") + " --alpha 1 --fitness-source eta").code, 1);  // needs --A
  EXPECT_EQ(run("rank --in " + path("run") + " --alpha -1").code, 2);
}

TEST_F(Cli, ReportWritesFigureData) {
  simulate("run");
  const auto r = run("report --in " + path("run") + " --out " + path("rep") + " --ktg 40 --gnuplot");
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"fig1_talented_winners.tsv", "fig1_experienced_losers.tsv", "fig1_theory_talented_winners.tsv",
                        "fig2_beta_density.tsv", "fig2_beta_fit.tsv", "fig3_experience.tsv", "fig4_cohort_ccdf.tsv",
                        "fig5_degree_0001.tsv", "fig5_degree_0013.tsv", "plot.gp", "report.txt", "manifest.json"})
    EXPECT_TRUE(fs::exists(path(std::string("rep/") + f))) << f;
  // every data row has two tab-separated columns
  std::istringstream in(slurp(path("rep/fig5_degree_0013.tsv")));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 1);
  }
  EXPECT_GT(rows, 5u);
}

TEST_F(Cli, WinnersFromData) {
  simulate("run");
  const auto r = run("winners --in " + path("run") + " --ktg 40 --curve " + path("curve.tsv"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("# empirical"), std::string::npos);
  EXPECT_NE(r.out.find("# prediction"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("curve.tsv")));
  EXPECT_EQ(run("winners --in " + path("run") + " --ktg 40 --raw-histogram").code, 0);
}
