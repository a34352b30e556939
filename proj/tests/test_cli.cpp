#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

struct Run {
  int status = 0;
  std::string output;
};

// Runs the CLI with stderr folded into the captured output.
Run cli(const std::string& args) {
  const std::string cmd = std::string(EEGATT_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), buf.size(), p) != nullptr) r.output += buf.data();
  const int raw = pclose(p);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "eegatt_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "synth.json") << R"({"n_subjects": 1, "trials_per_condition": 20, "noise_sd": 2.0})";
    const auto r = cli("synth --config " + (dir_ / "synth.json").string() + " --seed 4 --out " + (dir_ / "synth").string());
    ASSERT_EQ(r.status, 0) << r.output;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
  static std::string data() { return (dir_ / "synth" / "dataset.bin").string(); }
  static inline fs::path dir_;
};

TEST_F(Cli, InfoPrintsCounts) {
  const auto r = cli("info --model attloc");
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.output.find("total_params,72239"), std::string::npos);
  EXPECT_NE(r.output.find("trainable_params,72233"), std::string::npos);
}

TEST_F(Cli, SynthWritesArtifacts) {
  for (const char* f : {"dataset.bin", "truth.json", "summary.json", "run_config.json", "fingerprint.txt"}) {
    EXPECT_TRUE(fs::exists(dir_ / "synth" / f)) << f;
  }
}

TEST_F(Cli, TrainOneEpochThenDeterministicEval) {
  const auto out = dir_ / "train";
  auto r = cli("train --model attloc --data " + data() + " --epochs 1 --seed 2 --quiet --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.output;
  for (const char* f : {"model.params", "model.spec.json", "model.meta.json", "history.csv", "run_config.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  const std::string model = (out / "model").string();
  r = cli("eval --model " + model + " --data " + data() + " --out " + (dir_ / "e1").string());
  ASSERT_EQ(r.status, 0) << r.output;
  r = cli("eval --model " + model + " --data " + data() + " --out " + (dir_ / "e2").string());
  ASSERT_EQ(r.status, 0) << r.output;
  const auto m1 = slurp(dir_ / "e1" / "metrics.csv");
  EXPECT_EQ(m1, slurp(dir_ / "e2" / "metrics.csv"));
  EXPECT_NE(m1.find("attended,macro,"), std::string::npos);
  EXPECT_EQ(slurp(dir_ / "e1" / "fingerprint.txt"), slurp(dir_ / "e2" / "fingerprint.txt"));
}

TEST_F(Cli, DiffWithoutReferenceFileNamesThePath) {
  const auto out = dir_ / "mtm";
  ASSERT_EQ(cli("train --model mtm --data " + data() + " --epochs 1 --quiet --out " + out.string()).status, 0);
  const std::string missing = (dir_ / "no_such_model").string();
  const auto r = cli("analyze --kind diff --model " + (out / "model").string() + " --reference " + missing +
                     " --data " + data() + " --out " + (dir_ / "diff").string());
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.output.find(missing), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("code=io"), std::string::npos) << r.output;
}

TEST_F(Cli, UsageErrors) {
  auto r = cli("train --data " + data());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.output.find("--model"), std::string::npos);
  r = cli("info --model lstm");
  EXPECT_EQ(r.status, 3);
  EXPECT_NE(r.output.find("code=unknown_model"), std::string::npos);
  r = cli("frobnicate");
  EXPECT_EQ(r.status, 2);
}

}  // namespace
