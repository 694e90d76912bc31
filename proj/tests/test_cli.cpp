#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cxlsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  std::string slurp(const fs::path& p) const {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  CliResult run(const std::string& args) const {
    const fs::path log = dir_ / "stdout.txt";
    const std::string cmd = std::string("\"") + CXLSIM_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
  }

  fs::path dir_;
};

const char* kWal = "[experiment]\nkind = wal\nseed = 3\n[persistence]\nstores = 500\n";

std::string drop_timestamp(const std::string& text) {
  std::istringstream in(text);
  std::string out, line;
  while (std::getline(in, line))
    if (line.find("timestamp") == std::string::npos) out += line + "\n";
  return out;
}

}  // namespace

TEST_F(Cli, ValidateAcceptsGoodConfig) {
  const auto r = run("validate " + write("ok.ini", kWal).string());
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST_F(Cli, ValidateRejectsBadConfigWithExitTwo) {
  const auto r = run("validate " + write("bad.ini", "[experiment]\nkind = wal\nbogus = 1\n").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find(":3"), std::string::npos) << r.out;
}

TEST_F(Cli, MissingFileIsConfigError) { EXPECT_EQ(run("validate " + (dir_ / "none.ini").string()).code, 2); }

TEST_F(Cli, BadUsageExitsOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("run " + write("ok.ini", kWal).string() + " --format xml").code, 1);
}

TEST_F(Cli, ListGenerators) {
  const auto r = run("list-generators");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("pointer_chase"), std::string::npos);
  EXPECT_NE(r.out.find("kv"), std::string::npos);
}

TEST_F(Cli, RunWritesReportsAndReRunsAreIdentical) {
  const fs::path cfg = write("wal.ini", kWal);
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "b").string()).code, 0);
  for (const char* f : {"wal.json", "wal.csv", "wal_summary.csv"}) {
    ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
    EXPECT_EQ(drop_timestamp(slurp(dir_ / "a" / f)), drop_timestamp(slurp(dir_ / "b" / f))) << f;
  }
  EXPECT_EQ(run("compare " + (dir_ / "a/wal.json").string() + " " + (dir_ / "b/wal.csv").string()).code, 0);
}

TEST_F(Cli, CompareFailureExitsThree) {
  const fs::path cfg = write("wal.ini", kWal);
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "a").string() + " --format json").code, 0);
  const fs::path other = write("wal2.ini", "[experiment]\nkind = wal\nseed = 3\n[persistence]\nstores = 500\nbarrier_cost = 2us\n");
  ASSERT_EQ(run("run " + other.string() + " --out " + (dir_ / "b").string() + " --format json").code, 0);
  const auto r = run("compare " + (dir_ / "a/wal.json").string() + " " + (dir_ / "b/wal.json").string() + " --tol 5%");
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, CompareKindMismatchIsUsageError) {
  ASSERT_EQ(run("run " + write("wal.ini", kWal).string() + " --out " + (dir_ / "a").string() + " --format json").code, 0);
  ASSERT_EQ(run("run " + write("crash.ini", "[experiment]\nkind = crash\n[persistence]\nplans = 5\n").string() + " --out " +
                (dir_ / "b").string() + " --format json")
                .code,
            0);
  EXPECT_EQ(run("compare " + (dir_ / "a/wal.json").string() + " " + (dir_ / "b/crash.json").string()).code, 1);
}

TEST_F(Cli, SeedOverrideChangesRandomizedReports) {
  const fs::path cfg = write("crash.ini", "[experiment]\nkind = crash\nseed = 1\n[persistence]\nplans = 20\n");
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "a").string() + " --format json").code, 0);
  ASSERT_EQ(run("run " + cfg.string() + " --seed 2 --out " + (dir_ / "b").string() + " --format json").code, 0);
  EXPECT_NE(drop_timestamp(slurp(dir_ / "a/crash.json")), drop_timestamp(slurp(dir_ / "b/crash.json")));
}
