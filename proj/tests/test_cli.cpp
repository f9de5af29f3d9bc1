#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kzpsd_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + KZPSD_CLI_PATH + " " + args + " > " + (dir_ / "stdout").string() + " 2> " +
                            (dir_ / "stderr").string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(dir_ / "stdout"), slurp(dir_ / "stderr")};
  }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }

  fs::path dir_;
};

const char* kSmallProcess = R"({
  "units": "dimensionless",
  "grid": { "period": { "value": 32, "unit": "1" }, "samples": 32 },
  "link": { "eps": 1.0 },
  "input": { "kind": "gaussian_process", "shape": "gaussian", "amplitude": { "value": 0.2, "unit": "1" } },
  "distance": { "value": 1.0, "unit": "1" },
  "realizations": 64,
  "seed": 3
})";

}  // namespace

TEST_F(Cli, DispersionlessBoxGivesOnlyTrivialQuartets) {
  const Result r = run("quartets --zeta k^2 --box 32");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "l,m,n,k,class,resonant");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_TRUE(line.find(",SPM,1") != std::string::npos || line.find(",XPM,1") != std::string::npos) << line;
  }
  EXPECT_EQ(rows, 2u * 65 * 65 - 65);
}

TEST_F(Cli, CubicDispersionFindsNontrivialQuartet) {
  const Result r = run("quartets --zeta 'k^3 + 3k^2' --box 4");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\n1,-3,0,-2,"), std::string::npos);
  EXPECT_NE(r.err.find("nontrivial"), std::string::npos);
}

TEST_F(Cli, BadPolynomialFails) {
  const Result r = run("quartets --zeta 'k^^2' --box 4");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("polynomial"), std::string::npos);
}

TEST_F(Cli, UnknownKeyReportsItsLine) {
  const auto p = write("bad.json", R"({
  "units": "dimensionless",
  "grid": { "period": { "value": 32, "unit": "1" }, "samples": 32 },
  "link": { "eps": 1.0 },
  "distanse": { "value": 1.0, "unit": "1" }
})");
  const Result r = run("gn --config " + p.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.json:5:"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("distanse"), std::string::npos);
}

TEST_F(Cli, WrongUnitReportsItsLine) {
  const auto p = write("unit.json", R"({
  "units": "dimensionless",
  "grid": {
    "period": { "value": 32, "unit": "ps" },
    "samples": 32
  }
})");
  const Result r = run("gn --config " + p.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("unit.json:4:"), std::string::npos) << r.err;
}

TEST_F(Cli, MalformedJsonReportsItsLine) {
  const auto p = write("broken.json", "{\n  \"units\": \"dimensionless\",\n  \"grid\": {,\n}\n");
  const Result r = run("gn --config " + p.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("broken.json:3:"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingKeyAndBadValue) {
  const auto p = write("missing.json", R"({
  "units": "dimensionless",
  "grid": { "period": { "value": 32, "unit": "1" }, "samples": 30 }
})");
  Result r = run("gn --config " + p.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing.json:3:"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("power of two"), std::string::npos);

  const auto q = write("nodist.json", R"({
  "units": "dimensionless",
  "grid": { "period": { "value": 32, "unit": "1" }, "samples": 32 },
  "input": { "kind": "gaussian_process", "shape": "gaussian", "amplitude": { "value": 0.2, "unit": "1" } }
})");
  r = run("gn --config " + q.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("distance"), std::string::npos) << r.err;
}

TEST_F(Cli, LibraryFailureNamesTheModule) {
  const auto p = write("wdm.json", R"({
  "units": "dimensionless",
  "grid": { "period": { "value": 16, "unit": "1" }, "samples": 16 },
  "link": { "eps": 1.0 },
  "input": { "kind": "wdm", "half_users": 1, "modes_per_user": 4, "basis": { "kind": "tones" },
             "symbols": { "law": "qam16", "power": { "value": 0.1, "unit": "1" } } },
  "distance": { "value": 1.0, "unit": "1" },
  "cost_limit": 10
})");
  const Result r = run("wdm --config " + p.string() + " --out " + dir_.string());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("error in wdm"), std::string::npos) << r.err;
}

TEST_F(Cli, CompareIsReproducibleAcrossThreadCounts) {
  const auto p = write("small.json", kSmallProcess);
  const Result a = run("compare --config " + p.string() + " --out " + (dir_ / "a").string(), "KZPSD_THREADS=1");
  const Result b = run("compare --config " + p.string() + " --out " + (dir_ / "b").string(), "KZPSD_THREADS=3");
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_NE(a.out.find("L2(GN-MC) = "), std::string::npos);
  for (const char* f : {"kzpsd_compare.csv", "kzpsd_compare.json", "kzpsd_compare.csv.gp"}) {
    ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  const std::string csv = slurp(dir_ / "a" / "kzpsd_compare.csv");
  EXPECT_EQ(csv.rfind("# kzpsd csv v1 compare\nk,omega,S0,S_GN,S_KZ,S_MC,stderr\n", 0), 0u);
}

TEST_F(Cli, EverySubcommandRuns) {
  const auto proc = write("proc.json", kSmallProcess);
  const auto pulse = write("pulse.json", R"({
  "units": "dimensionless",
  "grid": { "period": { "value": 32, "unit": "1" }, "samples": 64 },
  "link": { "eps": 1.0 },
  "input": { "kind": "pulse", "amplitude": { "value": 1.0, "unit": "1" } },
  "distance": { "value": 0.5, "unit": "1" },
  "modes": [0, -32],
  "z_samples": { "start": { "value": 0, "unit": "1" }, "stop": { "value": 1, "unit": "1" }, "count": 5 },
  "amplitudes": [{ "value": 0.1, "unit": "1" }, { "value": 0.5, "unit": "1" }]
})");
  const std::string out = " --out " + dir_.string();
  struct Case {
    std::string cmd;
    const char* file;
  };
  for (const Case& c : {Case{"oracle --config " + pulse.string(), "kzpsd_summary.json"},
                        Case{"oracle --config " + proc.string(), "kzpsd_mc.csv"},
                        Case{"gn --config " + proc.string(), "kzpsd_gn.csv"},
                        Case{"kz --config " + proc.string(), "kzpsd_kz.json"},
                        Case{"perturb --config " + pulse.string(), "kzpsd_perturb.csv"},
                        Case{"modes --config " + pulse.string(), "kzpsd_modes.json"}}) {
    const Result r = run(c.cmd + out);
    EXPECT_EQ(r.code, 0) << c.cmd << "\n" << r.err;
    EXPECT_TRUE(fs::exists(dir_ / c.file)) << c.file;
  }
  const std::string perturb = slurp(dir_ / "kzpsd_perturb.csv");
  EXPECT_EQ(std::count(perturb.begin(), perturb.end(), '\n'), 4);
}

TEST_F(Cli, ShippedConfigsRun) {
  const std::string cfg = KZPSD_CONFIG_DIR;
  const std::string out = " --out " + dir_.string();
  for (const std::string& c : {"gn --config " + cfg + "/psds.json", "multispan --config " + cfg + "/multispan.json",
                               "wdm --config " + cfg + "/wdm.json"}) {
    const Result r = run(c + out);
    EXPECT_EQ(r.code, 0) << c << "\n" << r.err;
  }
  EXPECT_TRUE(fs::exists(dir_ / "psds_gn.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "multispan_multispan.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "wdm_interference_kz.json"));
  EXPECT_TRUE(fs::exists(dir_ / "wdm_wdm_gn.csv"));
}
