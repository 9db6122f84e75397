#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "levycouple/cli.hpp"

namespace cli = levycouple::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "levycouple");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string sample(const std::string& name) { return std::string(LEVYCOUPLE_SAMPLES_DIR) + "/" + name; }

std::string write_temp(const std::string& name, const std::string& body) {
  const auto p = fs::temp_directory_path() / ("levycouple_test_" + name);
  std::ofstream(p) << body;
  return p.string();
}

}  // namespace

TEST(CliGrid, Forms) {
  EXPECT_EQ(cli::parse_grid("1,2,5"), (std::vector<double>{1, 2, 5}));
  EXPECT_EQ(cli::parse_grid("4:64:x2"), (std::vector<double>{4, 8, 16, 32, 64}));
  EXPECT_EQ(cli::parse_grid("1:3:+1"), (std::vector<double>{1, 2, 3}));
  EXPECT_THROW(cli::parse_grid("1,x"), levycouple::Error);
  EXPECT_THROW(cli::parse_grid("2,1"), levycouple::Error);
  EXPECT_THROW(cli::parse_grid("0:4:x1"), levycouple::Error);
}

TEST(CliNumbers, RoundTrip) {
  for (double v : {0.1, 1.0 / 3, 1e-300, 12345.678}) EXPECT_EQ(cli::parse_number(cli::format_number(v), "v"), v);
}

TEST(CliCheck, ExitCodesFollowVerdicts) {
  EXPECT_EQ(run({"check", "--input", sample("uniform.json")}).code, 0);
  EXPECT_EQ(run({"check", "--input", sample("atomic_gaussian.json")}).code, 0);
  EXPECT_EQ(run({"check", "--input", sample("delta1.json")}).code, 3);
  EXPECT_EQ(run({"check", "--input", sample("atomic_infinite.json")}).code, 4);
  auto r = run({"check", "--input", sample("uniform.json")});
  auto j = nlohmann::ordered_json::parse(r.out);
  EXPECT_EQ(j["report"]["verdict"], "Coupling");
  EXPECT_EQ(j["report"]["witness"], "ex2(1), l=1");
  EXPECT_EQ(j["tool"], "levycouple");
}

TEST(CliErrors, ParseAndInvariant) {
  EXPECT_EQ(run({"check"}).code, 1);
  EXPECT_EQ(run({"check", "--input", "/nonexistent.json"}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"check", "--input", write_temp("bad.json", "{\"dim\": 1, \"levy\": ")}).code, 1);
  const auto missing = write_temp("missing.json", R"({"levy": {"atoms": []}})");
  auto r = run({"check", "--input", missing});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("'dim'"), std::string::npos);
  const auto neg = write_temp("neg.json", R"({"dim": 1, "levy": {"atoms": [{"x": [1], "w": -1}]}})");
  EXPECT_EQ(run({"check", "--input", neg}).code, 2);
  EXPECT_EQ(run({"tv", "--input", sample("atomic_gaussian.json"), "--y", "1"}).code, 2);
}

TEST(CliTv, RowsAndBounds) {
  auto r = run({"tv", "--input", sample("uniform.json"), "--x", "0", "--y", "0.5", "--t-grid", "1,4,16"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = cli::read_csv(r.out);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.header[2], "tv_upper");
  for (const auto& row : t.rows) {
    EXPECT_LE(row[1], row[2]);
    EXPECT_GE(row[3], row[2] - 1e-12);  // series bound
    EXPECT_GE(row[4], row[2] - 1e-12);  // couplingo2 bound
    EXPECT_GE(row[5], row[2] - 1e-12);  // th2 with calibrated constant
  }
}

TEST(CliTv, BudgetExceededKeepsCompletedRows) {
  const auto big = write_temp("big.json", R"({"dim": 1, "levy": {"density": {"uniform": [0, 1], "spacing": 0.25, "mass": 1}}})");
  auto r = run({"tv", "--input", big, "--x", "0", "--y", "1", "--t-grid", "1,2,100",
                "--budget", "400"});
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.err.find("largest completed t: 2"), std::string::npos) << r.err;
  EXPECT_EQ(cli::read_csv(r.out).rows.size(), 2u);
}

TEST(CliCouple, DeterministicAcrossWorkers) {
  auto base = std::vector<std::string>{"couple", "--input", sample("lazy_walk.json"), "--displacement", "1",
                                       "--t-grid", "1,5,20", "--samples", "40000", "--chunk-size", "5000", "--seed", "11"};
  auto a = run(base);
  auto w = base;
  w.insert(w.end(), {"--workers", "4"});
  auto b = run(w);
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  // The config echo records the worker count; compare the data rows.
  auto rows = [](const std::string& s) { return s.substr(s.find("t,p_hat")); };
  EXPECT_EQ(rows(a.out), rows(b.out));
  EXPECT_EQ(a.out, run(base).out);
}

TEST(CliCouple, DegenerateOverlap) {
  EXPECT_EQ(run({"couple", "--input", sample("delta1.json"), "--displacement", "0.5"}).code, 6);
}

TEST(CliRate, FitsColumnAndFlagsShortInput) {
  auto tv = run({"tv", "--input", sample("lazy_walk.json"), "--x", "0", "--y", "1", "--t-grid", "4:1024:x2"});
  ASSERT_EQ(tv.code, 0) << tv.err;
  const auto path = write_temp("tv.csv", tv.out);
  auto r = run({"rate", "--input", path});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::ordered_json::parse(r.out);
  EXPECT_EQ(j["column"], "tv_upper");
  EXPECT_NEAR(j["slope"].get<double>(), -0.5, 0.05);
  const auto short_csv = write_temp("short.csv", "t,tv_upper\n1,1\n2,0.7\n4,0.5\n");
  EXPECT_EQ(run({"rate", "--input", short_csv}).code, 7);
  EXPECT_EQ(run({"rate", "--input", path, "--column", "nope"}).code, 1);
}

TEST(CliRate, OffLatticeDistanceHasNoDecay) {
  auto tv = run({"tv", "--input", sample("lazy_walk.json"), "--x", "0", "--y", "0.5", "--t-grid", "1:1024:x2"});
  ASSERT_EQ(tv.code, 0) << tv.err;
  auto r = run({"rate", "--input", write_temp("lattice.csv", tv.out)});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::ordered_json::parse(r.out);
  EXPECT_NEAR(j["slope"].get<double>(), 0.0, 1e-6);
  EXPECT_TRUE(j["no_decay"].get<bool>());
  EXPECT_EQ(j["flag"], "no decay");
}
