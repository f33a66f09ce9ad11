#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "ewboot/io.hpp"
#include "json.hpp"

namespace ewboot::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ewboot_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::size_t data_rows(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t rows = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    ++rows;
  }
  return rows;
}

TEST_F(CliTest, SimulateWritesRequestedRows) {
  const auto r = invoke({"simulate", "--out", path("d.csv"), "--n", "5", "--seed", "3"});
  ASSERT_EQ(r.code, kPass) << r.err;
  const auto text = read_text_file(path("d.csv"));
  EXPECT_EQ(data_rows(text), 5u);
  EXPECT_NE(text.find("\ny,delta,z1\n"), std::string::npos);
  EXPECT_NE(text.find("# ewboot "), std::string::npos);
  EXPECT_NE(text.find("# seed = 3"), std::string::npos);
}

TEST_F(CliTest, SimulateIsByteIdentical) {
  ASSERT_EQ(invoke({"simulate", "--out", path("a.csv"), "--n", "50", "--seed", "8"}).code, kPass);
  ASSERT_EQ(invoke({"simulate", "--out", path("b.csv"), "--n", "50", "--seed", "8", "--threads", "8"}).code,
            kPass);
  EXPECT_EQ(read_text_file(path("a.csv")), read_text_file(path("b.csv")));
}

TEST_F(CliTest, InvalidRateExitsWithConfigError) {
  const auto r = invoke({"simulate", "--out", path("d.csv"), "--set", "simulation.baseline_rate=-1"});
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("simulation.baseline_rate"), std::string::npos);
  write_text_file(path("cfg.ini"), "[simulation]\ncensoring_rate = -1\n");
  const auto f = invoke({"--config", path("cfg.ini"), "simulate", "--out", path("d.csv")});
  EXPECT_EQ(f.code, kConfigError);
  EXPECT_NE(f.err.find("simulation.censoring_rate"), std::string::npos);
}

TEST_F(CliTest, UnknownConfigKeyIsRejected) {
  write_text_file(path("cfg.ini"), "[rng]\nseed = 1\nsalt = 2\n");
  const auto r = invoke({"--config", path("cfg.ini"), "simulate", "--out", path("d.csv")});
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("rng.salt"), std::string::npos);
}

TEST_F(CliTest, BadArgumentsAreConfigErrors) {
  EXPECT_EQ(invoke({}).code, kConfigError);
  EXPECT_EQ(invoke({"simulate"}).code, kConfigError);
  EXPECT_EQ(invoke({"simulate", "--out", path("d.csv"), "--threads", "0"}).code, kConfigError);
  EXPECT_EQ(invoke({"verify", "nonsense", "--out-dir", path("v")}).code, kConfigError);
  EXPECT_EQ(invoke({"--help"}).code, kPass);
}

TEST_F(CliTest, MissingDatasetIsIoError) {
  EXPECT_EQ(invoke({"fit", "--data", path("missing.csv")}).code, kIoError);
  write_text_file(path("bad.csv"), "y,delta,z1\n1,2,0\n");
  const auto r = invoke({"fit", "--data", path("bad.csv")});
  EXPECT_EQ(r.code, kIoError);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
}

TEST_F(CliTest, FitWithFixedThetaReportsNelsonAalen) {
  write_text_file(path("na.csv"), "y,delta,z1\n1,1,0.5\n2,1,-1\n3,0,2\n");
  const auto r = invoke({"fit", "--data", path("na.csv"), "--fix-theta", "0", "--out", path("fit.json")});
  ASSERT_EQ(r.code, kPass) << r.err;
  const auto j = nlohmann::json::parse(read_text_file(path("fit.json")));
  EXPECT_EQ(j["theta_fixed"], true);
  const auto& table = j["eta_hat"];
  ASSERT_EQ(table.size(), 2u);
  EXPECT_DOUBLE_EQ(table[1]["time"].get<double>(), 2.0);
  EXPECT_DOUBLE_EQ(table[1]["eta"].get<double>(), 5.0 / 6.0);
  EXPECT_EQ(j["version"], EWBOOT_TEST_VERSION);
  EXPECT_TRUE(j.contains("config"));
}

TEST_F(CliTest, FitReportsSeparation) {
  write_text_file(path("sep.csv"), "y,delta,z1\n1,1,1\n2,1,0\n");
  const auto r = invoke({"fit", "--data", path("sep.csv"), "--out", path("fit.json")});
  EXPECT_EQ(r.code, kCheckFailed);
  const auto j = nlohmann::json::parse(read_text_file(path("fit.json")));
  EXPECT_EQ(j["monotone_likelihood"], true);
  EXPECT_EQ(j["converged"], false);
}

TEST_F(CliTest, BootstrapOnesIsDegenerate) {
  ASSERT_EQ(invoke({"simulate", "--out", path("d.csv"), "--n", "120"}).code, kPass);
  const auto r = invoke({"bootstrap", "--data", path("d.csv"), "--scheme", "ones", "--B", "20",
                         "--out-dir", path("boot")});
  ASSERT_EQ(r.code, kPass) << r.err;
  EXPECT_NE(r.out.find("degenerate"), std::string::npos);
  const auto j = nlohmann::json::parse(read_text_file(path("boot/bootstrap_report.json")));
  EXPECT_EQ(j["degenerate"], true);
  EXPECT_EQ(j["sigma_star"][0][0].get<double>(), 0.0);
  for (const auto& cs : j["confidence_sets"]) {
    EXPECT_EQ(cs["lower"], j["theta_hat"][0]);
    EXPECT_EQ(cs["upper"], j["theta_hat"][0]);
  }
}

TEST_F(CliTest, BootstrapArtifactsIgnoreThreadCount) {
  ASSERT_EQ(invoke({"simulate", "--out", path("d.csv"), "--n", "150"}).code, kPass);
  for (const char* threads : {"1", "8"}) {
    const auto r = invoke({"bootstrap", "--data", path("d.csv"), "--B", "100", "--scheme",
                           "polya(alpha=1)", "--threads", threads, "--out-dir",
                           path(std::string("boot") + threads)});
    ASSERT_EQ(r.code, kPass) << r.err;
  }
  for (const char* file : {"bootstrap_replicates.csv", "bootstrap_report.json", "confidence_sets.csv"}) {
    EXPECT_EQ(read_text_file(dir_ / "boot1" / file), read_text_file(dir_ / "boot8" / file)) << file;
  }
  const auto reps = read_text_file(path("boot1/bootstrap_replicates.csv"));
  EXPECT_NE(reps.find("# scheme = polya(alpha=1)"), std::string::npos);
  EXPECT_NE(reps.find("# excluded = "), std::string::npos);
  EXPECT_EQ(data_rows(reps), 100u);
}

TEST_F(CliTest, VerifyWeightsEfron) {
  const auto r = invoke({"verify", "weights", "--scheme", "efron", "--out-dir", path("v"),
                         "--set", "weights.moment_samples=1000000"});
  ASSERT_EQ(r.code, kPass) << r.out << r.err;
  const auto j = nlohmann::json::parse(read_text_file(path("v/verify_weights.json")));
  EXPECT_EQ(j["all_pass"], true);
  int fifth_lines = 0;
  for (const auto& rec : j["records"]) {
    if (rec["statistic"] == "fifth_moment") {
      EXPECT_LT(rec["value"].get<double>(), 52.0);
      EXPECT_EQ(rec["pass"], true);
      ++fifth_lines;
    }
  }
  EXPECT_EQ(fifth_lines, 3);
  EXPECT_TRUE(fs::exists(path("v/verify_weights_fifth_moment.csv")));
}

TEST_F(CliTest, VerifyDistributionRejectsOnes) {
  const auto r = invoke({"verify", "distribution", "--scheme", "ones", "--n", "80", "--mc-reps",
                         "2", "--B", "10", "--out-dir", path("v")});
  EXPECT_EQ(r.code, kCheckFailed);
  EXPECT_NE(r.err.find("zero variance"), std::string::npos);
}

TEST_F(CliTest, VerifyOutputsIgnoreThreadCount) {
  for (const char* threads : {"1", "8"}) {
    const auto r = invoke({"verify", "coverage", "--n", "100", "--mc-reps", "6", "--B", "50",
                           "--threads", threads, "--out-dir", path(std::string("v") + threads)});
    ASSERT_NE(r.code, kConfigError) << r.err;
  }
  EXPECT_EQ(read_text_file(path("v1/verify_coverage.json")),
            read_text_file(path("v8/verify_coverage.json")));
  EXPECT_EQ(read_text_file(path("v1/verify_coverage_coverage_t_type.csv")),
            read_text_file(path("v8/verify_coverage_coverage_t_type.csv")));
}

}  // namespace
}  // namespace ewboot::cli
