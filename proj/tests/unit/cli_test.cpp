#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Sample rows only; the header records the checkpoint path.
std::string data_rows(const fs::path& path) {
  const auto text = slurp(path);
  const auto at = text.find("#data\n");
  return at == std::string::npos ? text : text.substr(at);
}

/// Runs the installed binary with `args`, capturing combined output.
struct Cli {
  fs::path dir;
  std::string output;

  int operator()(const std::string& args) {
    const auto log = dir / "cli_output.txt";
    const std::string cmd = std::string("cd '") + dir.string() + "' && '" + JOINTGAN_CLI_PATH + "' " + args +
                            " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    output = slurp(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

const char* kTinyTrain =
    " --set total_steps=20 --set batch_size=16 --set noise_dim=2 --set generator_hidden=8"
    " --set critic_hidden=8,8 --set log_every=5 --set checkpoint_every=10";

TEST(Cli, UsageErrorsExitTwo) {
  jointgan::testing::TempDir dir;
  Cli cli{dir.path()};
  EXPECT_EQ(cli(""), 2);
  EXPECT_EQ(cli("no-such-verb"), 2);
  EXPECT_EQ(cli("gen-data --rows 10"), 2);  // --out is required
  EXPECT_NE(cli.output.find("usage error"), std::string::npos) << cli.output;
  EXPECT_EQ(cli("sample --checkpoint x --source sideways --out y"), 2);
  EXPECT_EQ(cli("--help"), 0);
}

TEST(Cli, RuntimeErrorsExitOne) {
  jointgan::testing::TempDir dir;
  Cli cli{dir.path()};
  EXPECT_EQ(cli("train --data missing.tsv --out-dir run"), 1);
  EXPECT_NE(cli.output.find("error:"), std::string::npos) << cli.output;
  EXPECT_EQ(cli("gen-data --family correlated_gaussian --rho 1.5 --out bad.tsv"), 1);
}

TEST(Cli, TrainSampleEvalPipelineIsDeterministic) {
  jointgan::testing::TempDir dir;
  Cli cli{dir.path()};
  ASSERT_EQ(cli("gen-data --rows 400 --seed 3 --out train.tsv --test-out test.tsv"), 0) << cli.output;
  EXPECT_TRUE(fs::exists(dir.path() / "train.tsv.manifest"));
  for (const char* run : {"a", "b"}) {
    ASSERT_EQ(cli(std::string("train --data train.tsv --out-dir ") + run + kTinyTrain), 0) << cli.output;
    ASSERT_EQ(cli(std::string("sample --checkpoint ") + run + "/final.ckpt --source joint --n 50 --seed 2 --out " +
                  run + "_joint.tsv"),
              0)
        << cli.output;
  }
  EXPECT_EQ(slurp(dir.path() / "a" / "train_log.tsv"), slurp(dir.path() / "b" / "train_log.tsv"));
  EXPECT_EQ(slurp(dir.path() / "a" / "final.ckpt"), slurp(dir.path() / "b" / "final.ckpt"));
  EXPECT_EQ(data_rows(dir.path() / "a_joint.tsv"), data_rows(dir.path() / "b_joint.tsv"));
  EXPECT_TRUE(fs::exists(dir.path() / "a" / "step_00000010.ckpt"));
  EXPECT_TRUE(fs::exists(dir.path() / "a" / "manifest.txt"));

  ASSERT_EQ(cli("eval --checkpoint a/final.ckpt --data test.tsv --samples 50 --permutations 20 --summary m.txt"), 0)
      << cli.output;
  EXPECT_NE(slurp(dir.path() / "m.txt").find("mmd2="), std::string::npos);
  ASSERT_EQ(cli("eval --checkpoint a/final.ckpt --data test.tsv --samples 50 --permutations 20 --bandwidths 1"
                " --summary m1.txt"),
            0)
      << cli.output;
  EXPECT_NE(slurp(dir.path() / "m1.txt"), slurp(dir.path() / "m.txt"));
  EXPECT_EQ(cli("eval --checkpoint a/final.ckpt --data test.tsv --bandwidths 0"), 2);
  ASSERT_EQ(cli("confusion --checkpoint a/final.ckpt --data train.tsv --n 20"), 0) << cli.output;
  ASSERT_EQ(cli("sample --checkpoint a/final.ckpt --source marginal --domain y --n 10 --out my.tsv"), 0);
  ASSERT_EQ(cli("sample --checkpoint a/final.ckpt --source conditional --given my.tsv --out cond.tsv"), 0)
      << cli.output;
  EXPECT_NE(slurp(dir.path() / "cond.tsv").find("columns\tx:1\ty:1"), std::string::npos);
  ASSERT_EQ(cli("export-plots --log a/train_log.tsv --samples a_joint.tsv --out-dir plots"), 0) << cli.output;
  EXPECT_TRUE(fs::exists(dir.path() / "plots" / "train_log.dat"));
  EXPECT_TRUE(fs::exists(dir.path() / "plots" / "a_joint.dat"));
}

TEST(Cli, ResumeMatchesAnUninterruptedRun) {
  jointgan::testing::TempDir dir;
  Cli cli{dir.path()};
  ASSERT_EQ(cli("gen-data --rows 300 --out d.tsv"), 0);
  ASSERT_EQ(cli(std::string("train --data d.tsv --out-dir full") + kTinyTrain), 0) << cli.output;
  ASSERT_EQ(cli("train --data d.tsv --out-dir part --resume full/step_00000010.ckpt"), 0) << cli.output;
  EXPECT_EQ(slurp(dir.path() / "part" / "final.ckpt"), slurp(dir.path() / "full" / "final.ckpt"));
  EXPECT_EQ(cli("train --data d.tsv --out-dir p2 --resume full/step_00000010.ckpt --set seed=4"), 2);
  EXPECT_EQ(cli("train --data d.tsv --out-dir p3 --resume full/step_00000010.ckpt --config x.cfg"), 2);
}

TEST(Cli, ConditionalInputOfTheWrongDimensionFails) {
  jointgan::testing::TempDir dir;
  Cli cli{dir.path()};
  ASSERT_EQ(cli("gen-data --rows 200 --out d.tsv"), 0);
  ASSERT_EQ(cli("gen-data --family gaussian_mixture_pairs --dim 2 --rows 200 --out wide.tsv"), 0) << cli.output;
  ASSERT_EQ(cli(std::string("train --data d.tsv --out-dir run") + kTinyTrain), 0) << cli.output;
  ASSERT_EQ(cli(std::string("train --data wide.tsv --out-dir wide") + kTinyTrain), 0) << cli.output;
  ASSERT_EQ(cli("sample --checkpoint wide/final.ckpt --source marginal --domain x --n 5 --out wx.tsv"), 0);
  EXPECT_EQ(cli("sample --checkpoint run/final.ckpt --source conditional --given wx.tsv --out c.tsv"), 1);
  EXPECT_NE(cli.output.find("error:"), std::string::npos) << cli.output;
}

TEST(Cli, GradcheckPasses) {
  jointgan::testing::TempDir dir;
  Cli cli{dir.path()};
  EXPECT_EQ(cli("gradcheck --seed 2"), 0) << cli.output;
  EXPECT_NE(cli.output.find("max relative error"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir.path() / "gradcheck.manifest"));
}

}  // namespace
