#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "support.hpp"
#include "tpgan/config.hpp"
#include "tpgan/experiment.hpp"
#include "tpgan/image_io.hpp"

using namespace tpgan;
using testing_support::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TPGAN_CLI_PATH) + " --log-level off " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::filesystem::path tiny_checkpoint(const std::filesystem::path& dir) {
  TrainConfig cfg;
  cfg.seed = 4;
  TrainState state(testing_support::tiny_profile(1, 3, 6), cfg);
  nn::Checkpoint ck = make_checkpoint(state, cfg);
  ck.meta["class_ids"] = "0,2,6";
  const auto path = dir / "checkpoint.tpck";
  nn::write_checkpoint(path, ck);
  return path;
}

}  // namespace

TEST(Config, SerializeParseRoundTrip) {
  ExperimentConfig c;
  c.dataset_manifest = "data/x.manifest";
  c.split.minority_classes = {2, 6};
  c.split.balanced_ratio = 0.05;
  c.split.minority_count_override = 37;
  c.train.lambda = 3.25;
  c.train.penalty_link = OutputLink::Sigmoid;
  c.train.seed = 123456789012345ull;
  c.method = "gan-v2";
  c.train.variant = Variant::V2;
  c.fid_samples = 99;
  EXPECT_EQ(parse_config(serialize_config(c)), c);
  for (const auto& key : config_keys()) {
    ExperimentConfig copy;
    set_config_value(copy, key, get_config_value(c, key));
    EXPECT_EQ(get_config_value(copy, key), get_config_value(c, key)) << key;
  }
}

TEST(Config, RejectsBadInput) {
  ExperimentConfig c;
  EXPECT_THROW(set_config_value(c, "train.nope", "1"), Error);
  EXPECT_THROW(set_config_value(c, "train.batch_size", "ten"), Error);
  EXPECT_THROW(parse_config("train.lambda 3\n"), Error);
  EXPECT_THROW(set_config_value(c, "train.penalty_target", "score"), Error);
  c.split.minority_classes = {1, 2};
  c.validate();
  ExperimentConfig bad = c;
  bad.train.variant = Variant::V1;  // contradicts method gan-v3
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.repetitions = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = c;
  bad.split.balanced_ratio = 1.5;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Config, MethodSetsVariant) {
  ExperimentConfig c;
  set_config_value(c, "experiment.method", "smote");
  EXPECT_EQ(c.train.variant, Variant::Baseline);
  set_config_value(c, "experiment.method", "gan-v1");
  EXPECT_EQ(c.train.variant, Variant::V1);
  EXPECT_THROW(set_config_value(c, "experiment.method", "gan-v9"), Error);
}

TEST(Generate, ZeroCountWritesNothing) {
  TempDir dir("gen0");
  const auto ck = tiny_checkpoint(dir.path());
  const auto files = cmd_generate(ck, 2, 0, 1, dir.path() / "out");
  EXPECT_TRUE(files.empty());
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "out"));
}

TEST(Generate, WritesLabelledDeterministicImages) {
  TempDir dir("gen25");
  const auto ck = tiny_checkpoint(dir.path());
  const auto a = cmd_generate(ck, 6, 25, 8, dir.path() / "a");
  const auto b = cmd_generate(ck, 6, 25, 8, dir.path() / "b");
  ASSERT_EQ(a.size(), 25u);
  const std::string manifest = slurp(dir.path() / "a" / "generated.manifest");
  std::istringstream in(manifest);
  int lines = 0;
  for (std::string line; std::getline(in, line); ++lines) EXPECT_TRUE(line.ends_with("\t6")) << line;
  EXPECT_EQ(lines, 25);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Image8 ia = read_png(a[i]), ib = read_png(b[i]);
    EXPECT_EQ(ia.width, 16);
    EXPECT_EQ(ia.pixels, ib.pixels);
  }
  EXPECT_THROW(cmd_generate(ck, 1, 3, 8, dir.path() / "c"), Error);
  EXPECT_THROW(cmd_generate(ck, 0, -1, 8, dir.path() / "c"), Error);
}

TEST(Prepare, TwentyPercentOfEightHundred) {
  TempDir dir("prepare");
  cmd_synth(dir.path() / "data", 900, 32, 3);
  ExperimentConfig c;
  c.dataset_manifest = dir.path() / "data" / "dataset.manifest";
  c.split.majority_class = 0;
  c.split.minority_classes = {1, 2};
  c.split.balanced_ratio = 0.20;
  c.split.majority_count = 800;
  c.train.profile = "desk";
  c.output_dir = dir.path() / "run";
  const Split split = cmd_prepare(c);
  EXPECT_EQ(split.train.class_counts(), (std::vector<int>{800, 160, 160}));
  EXPECT_EQ(split.test.class_counts(), (std::vector<int>{100, 740, 740}));
  const std::string summary = slurp(dir.path() / "run" / "split" / "summary.txt");
  EXPECT_NE(summary.find("minority_count\t160\n"), std::string::npos) << summary;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "run" / "split" / "train.manifest"));
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("generate --class 0 --count 1"), 2);
  EXPECT_EQ(run_cli("generate --checkpoint " + (dir.path() / "missing.tpck").string() + " --class 0 --count 1"), 3);
  EXPECT_EQ(run_cli("prepare --split.balanced_ratio 2"), 2);
  const auto ck = tiny_checkpoint(dir.path());
  EXPECT_EQ(run_cli("generate --checkpoint " + ck.string() + " --class 2 --count 3 --out " + (dir.path() / "g").string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "g" / "gen_000002.png"));
}
