// End-to-end checks of the command-line tool: exit codes, reproducible
// outputs, and the documented file formats.

#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult RunCli(const std::string& args) {
  std::string cmd = std::string(PERFLOW_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  EXPECT_NE(pipe, nullptr);
  std::string out;
  char buf[4096];
  while (size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  int status = pclose(pipe);
  return {WEXITSTATUS(status), out};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("perflow_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    scenario_ = dir_ / "two_tcp.scn";
    std::ofstream(scenario_) <<
        "capacity_mbps = 10\nbuffer_kb = 150\ndiscipline = fq\n"
        "horizon_s = 20\nseed = 5\n"
        "[flow] kind=tcp rtt_ms=20\n[flow] kind=tcp rtt_ms=50\n";
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
  fs::path scenario_;
};

TEST_F(CliTest, AnalyticPrintsTableAndWritesJson) {
  RunResult r = RunCli("analytic --scenario " + scenario_.string() + " --out " +
                    (dir_ / "out").string());
  EXPECT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("Xbar_mbps"), std::string::npos);
  EXPECT_NE(r.output.find("5.00"), std::string::npos);
  std::string json = Slurp(dir_ / "out" / "analytic_summary.json");
  EXPECT_NE(json.find("\"throughput_mbps\""), std::string::npos);
  EXPECT_NE(json.find("\"discipline\": \"fq\""), std::string::npos);
}

TEST_F(CliTest, InvalidScenarioFailsWithDiagnostic) {
  fs::path bad = dir_ / "bad.scn";
  std::ofstream(bad) << "capacity_mbps = 10\nbuffer_kb = 150\n"
                        "discipline = fq\nhorizon_s = 20\n";
  RunResult r = RunCli("fluid --scenario " + bad.string());
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("at least one flow"), std::string::npos);
}

TEST_F(CliTest, MissingFileFails) {
  RunResult r = RunCli("analytic --scenario /no/such/file.scn");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("error"), std::string::npos);
}

TEST_F(CliTest, PacketRunsAreByteIdentical) {
  std::string base = "packet --scenario " + scenario_.string() +
                     " --seed 1 --warmup 4 --out ";
  ASSERT_EQ(RunCli(base + (dir_ / "a").string()).exit_code, 0);
  ASSERT_EQ(RunCli(base + (dir_ / "b").string()).exit_code, 0);
  EXPECT_EQ(Slurp(dir_ / "a" / "packet_summary.json"),
            Slurp(dir_ / "b" / "packet_summary.json"));
  EXPECT_EQ(Slurp(dir_ / "a" / "packet_windows.csv"),
            Slurp(dir_ / "b" / "packet_windows.csv"));
  EXPECT_NE(Slurp(dir_ / "a" / "packet_windows.csv").find("t,flow,rate_pkts"),
            std::string::npos);
}

TEST_F(CliTest, FluidWritesTrajectoryCsv) {
  RunResult r = RunCli("fluid --scenario " + scenario_.string() +
                    " --warmup 5 --out " + (dir_ / "f").string());
  EXPECT_EQ(r.exit_code, 0) << r.output;
  std::string csv = Slurp(dir_ / "f" / "trajectory.csv");
  EXPECT_EQ(csv.rfind("t,A1,A2,Q1,Q2,D1,D2,L1,L2\n", 0), 0u);
}

TEST_F(CliTest, CompareFqPassesAndToleranceZeroFails) {
  RunResult ok = RunCli("compare --scenario " + scenario_.string() +
                     " --warmup 5");
  EXPECT_EQ(ok.exit_code, 0) << ok.output;
  EXPECT_NE(ok.output.find("compare: PASS"), std::string::npos);

  RunResult strict = RunCli("compare --scenario " + scenario_.string() +
                         " --warmup 5 --tol 0 --tol-fluid 0");
  EXPECT_NE(strict.exit_code, 0);
  EXPECT_NE(strict.output.find("compare: FAIL"), std::string::npos);
}

TEST_F(CliTest, SweepUdpLossKinkAtHalfCapacity) {
  fs::path udp = dir_ / "udp.scn";
  std::ofstream(udp) << "capacity_mbps = 10\nbuffer_kb = 150\n"
                        "discipline = fq\nhorizon_s = 20\n"
                        "[flow] kind=tcp rtt_ms=20\n"
                        "[flow] kind=udp rate_mbps=1\n";
  RunResult r = RunCli("sweep --scenario " + udp.string() +
                    " --param flow2.rate_mbps --from 1 --to 9 --steps 9");
  EXPECT_EQ(r.exit_code, 0) << r.output;
  std::istringstream in(r.output);
  std::string line;
  std::getline(in, line);  // header
  EXPECT_EQ(line.rfind("param,value", 0), 0u);
  int row = 0;
  while (std::getline(in, line)) {
    double value = 1.0 + row;
    // columns: param,value,A1,X1,Q1,L1,A2,X2,Q2,L2,util
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    ASSERT_EQ(cols.size(), 11u) << line;
    double udp_loss = std::stod(cols[9]);
    double expected = std::max(value - 5.0, 0.0);
    EXPECT_NEAR(udp_loss, expected, 1e-6) << line;
    ++row;
  }
  EXPECT_EQ(row, 9);
}

TEST_F(CliTest, SweepEmptyRangeEmitsHeaderOnly) {
  RunResult r = RunCli("sweep --scenario " + scenario_.string() +
                    " --param capacity_mbps --from 1 --to 2 --steps 0");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.output.substr(0, 11), "param,value");
  EXPECT_EQ(std::count(r.output.begin(), r.output.end(), '\n'), 1);
}

TEST_F(CliTest, SweepRejectsUnsweepableKey) {
  RunResult r = RunCli("sweep --scenario " + scenario_.string() +
                    " --param nonsense --from 1 --to 2 --steps 2");
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.output.find("unknown override key"), std::string::npos);
}

TEST_F(CliTest, ShippedScenariosLoad) {
  for (const auto& entry : fs::directory_iterator(PERFLOW_SCENARIO_DIR)) {
    if (entry.path().extension() != ".scn") continue;
    RunResult r = RunCli("analytic --scenario " + entry.path().string());
    EXPECT_EQ(r.exit_code, 0) << entry.path() << "\n" << r.output;
  }
}

}  // namespace
