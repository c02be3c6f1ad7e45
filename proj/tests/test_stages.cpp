#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "bondrisk/stages.hpp"
#include "test_util.hpp"

using namespace bondrisk;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_run() {
  RunConfig c;
  c.n_bonds = 40;
  c.default_fraction = 0.25;
  c.min_life = 40;
  c.max_life = 90;
  c.stress_onset_days = 30;
  c.gmm_components = 6;
  c.gmm_max_iter = 20;
  c.windows = {2};
  c.smote_k = 3;
  c.variants = {"rnn", "boosting"};
  c.epochs = 1;
  c.hidden = 4;
  c.depth = 2;
  c.boosting_rounds = 5;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BONDRISK_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(RunConfigTest, DefaultsAreValidAndRoundTrip) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(RunConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_EQ(c.seeds(), std::vector<std::uint64_t>{7});
  EXPECT_EQ(c.label_options().gmm.components, 22);
  EXPECT_EQ(c.architecture(Variant::Ours, 5, 3).dropout.size(), 10u);
}

TEST(RunConfigTest, ValidationListsEveryViolation) {
  RunConfig c;
  c.epochs = 0;
  c.weight_gmm = 0.9;
  c.windows = {};
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("epochs"), std::string::npos);
    EXPECT_NE(m.find("weight"), std::string::npos);
    EXPECT_NE(m.find("windows"), std::string::npos);
  }
}

TEST(RunConfigTest, UnknownKeysAndBadTypesAreConfigErrors) {
  RunConfig c;
  EXPECT_THROW(c.merge(nlohmann::json{{"epoch", 3}}), ConfigError);
  EXPECT_THROW(c.merge(nlohmann::json{{"epochs", "many"}}), ConfigError);
  c.merge(nlohmann::json{{"epochs", 3}, {"windows", {2, 5}}});
  EXPECT_EQ(c.epochs, 3);
  EXPECT_EQ(c.windows, (std::vector<int>{2, 5}));
}

TEST(RunConfigTest, ShallowStacksScaleTheDropoutSchedule) {
  RunConfig c;
  c.depth = 3;
  const auto a = c.architecture(Variant::Ours, 2, 0);
  ASSERT_EQ(a.dropout.size(), 3u);
  EXPECT_EQ(a.dropout.front(), 0.5);
  EXPECT_EQ(a.dropout.back(), 0.125);
}

TEST(Stages, MissingInputsAreReported) {
  test::TempDir dir;
  EXPECT_THROW(stage_label(tiny_run(), dir.path() / "none.jsonl", dir.path() / "label"), MissingInputError);
  EXPECT_THROW(stage_train(tiny_run(), dir.path() / "none.brwd", Variant::Rnn, 1, dir.path() / "x.ckpt"),
               MissingInputError);
}

TEST(Stages, PipelineIsBitReproducible) {
  test::TempDir a, b;
  run_pipeline(tiny_run(), a.path());
  run_pipeline(tiny_run(), b.path());
  int compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a.path());
    ASSERT_TRUE(fs::exists(b.path() / rel)) << rel;
    EXPECT_EQ(slurp(entry.path()), slurp(b.path() / rel)) << rel;
    ++compared;
  }
  EXPECT_GT(compared, 10);
  for (const char* f : {"generate/market.jsonl", "label/labels.csv", "preprocess/windows_w2.brwd",
                        "train/rnn_w2_s7.ckpt", "evaluate/eval.csv", "report/table.csv"})
    EXPECT_TRUE(fs::exists(a.path() / f)) << f;
  // Manifests carry no absolute paths.
  const auto manifest = slurp(a.path() / "evaluate" / "manifest.json");
  EXPECT_EQ(manifest.find(a.path().string()), std::string::npos);
}

TEST(Cli, ExitCodes) {
  test::TempDir dir;
  const auto d = dir.path().string();
  EXPECT_EQ(run_cli("--version"), 0);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("generate --set epochs=-1 --out " + d + "/g"), 2);
  EXPECT_EQ(run_cli("generate --set nonsense=1 --out " + d + "/g"), 2);
  EXPECT_EQ(run_cli("label --market " + d + "/missing.jsonl --out " + d + "/l"), 3);
  EXPECT_EQ(run_cli("generate --n-bonds 30 --set default_fraction=0.3 --out " + d + "/g"), 0);
  EXPECT_TRUE(fs::exists(dir.path() / "g" / "market.jsonl"));
}
