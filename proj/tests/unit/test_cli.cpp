// Copyright 2026 The supergbd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "oracles.hpp"
#include "supergbd/imagery.hpp"
#include "supergbd/png_io.hpp"

namespace fs = std::filesystem;
namespace sg = supergbd;

namespace {

struct CliRun {
  int code = -1;
  std::string output;  // stdout and stderr
};

CliRun run(const std::string& args, const std::string& env = {}) {
  sg::testing::TempDir tmp("cli_out");
  const fs::path log = tmp.path() / "log.txt";
  const std::string cmd = env + " '" + std::string(SUPERGBD_CLI_PATH) + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

const char* kSynthSmall = "--train 6 --test 3 --rows 96 --cols 96 --min-objects 3 --max-objects 6";

// One small dataset, model and prediction set shared by the chain tests.
class Chain : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new sg::testing::TempDir("cli_chain");
    const fs::path root = dir_->path();
    ASSERT_EQ(run("synth --out " + q(root / "data") + " " + kSynthSmall + " --seed 3").code, 0);
    ASSERT_EQ(run("train --data " + q(root / "data") + " --out " + q(root / "model") +
                  " --patches 32 --epochs 2 --hidden 16,16 --batch 32 --seed 1")
                  .code,
              0);
    ASSERT_EQ(run("infer --data " + q(root / "data") + " --checkpoint " + q(root / "model" / "model.sgbd") +
                  " --out " + q(root / "pred"))
                  .code,
              0);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static fs::path root() { return dir_->path(); }
  static sg::testing::TempDir* dir_;
};
sg::testing::TempDir* Chain::dir_ = nullptr;

}  // namespace

TEST(Cli, HelpExitsZero) {
  const CliRun r = run("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("synth"), std::string::npos);
  EXPECT_EQ(run("train --help").code, 0);
}

TEST(Cli, NoCommandIsUsageError) { EXPECT_EQ(run("").code, 2); }

TEST(Cli, MissingOutIsUsageError) {
  const CliRun r = run("synth --train 2 --test 1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("--out"), std::string::npos);
  EXPECT_NE(r.output.find("Usage"), std::string::npos);
}

TEST(Cli, BadPatchCountIsUsageError) {
  sg::testing::TempDir tmp("cli");
  ASSERT_EQ(run("synth --out " + q(tmp.path()) + " --train 1 --test 1 --rows 64 --cols 64").code, 0);
  EXPECT_EQ(run("preprocess --data " + q(tmp.path()) + " --patches 100").code, 2);
}

TEST(Cli, MissingDatasetIsRuntimeError) {
  EXPECT_EQ(run("preprocess --data /nonexistent/supergbd").code, 1);
}

TEST(Cli, SynthCountsAndDeterminism) {
  sg::testing::TempDir a("cli"), b("cli");
  ASSERT_EQ(run("synth --out " + q(a.path()) + " " + kSynthSmall + " --seed 7").code, 0);
  ASSERT_EQ(run("synth --out " + q(b.path()) + " " + kSynthSmall + " --jobs 3", "SUPERGBD_SEED=7").code, 0);
  const auto ta = tree(a.path());
  EXPECT_EQ(ta, tree(b.path()));
  int rgb = 0;
  for (const auto& [name, bytes] : ta) rgb += name.ends_with("_rgb.png");
  EXPECT_EQ(rgb, 9);
  EXPECT_TRUE(ta.contains("manifest.json"));
  EXPECT_TRUE(ta.contains("benchmark.json"));
}

TEST(Cli, ConfigFileWithFlagOverride) {
  sg::testing::TempDir tmp("cli");
  const fs::path cfg = tmp.path() / "cfg.json";
  std::ofstream(cfg) << nlohmann::json{{"seed", 4},
                                       {"synth",
                                        {{"out", (tmp.path() / "d").string()},
                                         {"train", 5},
                                         {"test", 2},
                                         {"rows", 64},
                                         {"cols", 64}}}}
                            .dump();
  ASSERT_EQ(run("synth --config " + q(cfg) + " --train 3").code, 0);
  const auto index = sg::open_dataset(tmp.path() / "d");
  EXPECT_EQ(index.frame_ids("train").size(), 3u);
  EXPECT_EQ(index.frame_ids("test").size(), 2u);

  std::ofstream(tmp.path() / "bad.json") << R"({"no_such_option": 1})";
  EXPECT_EQ(run("synth --config " + q(tmp.path() / "bad.json") + " --out " + q(tmp.path() / "e")).code, 2);
}

TEST(Cli, UnknownFamilyIsUsageError) {
  sg::testing::TempDir tmp("cli");
  EXPECT_EQ(run("synth --out " + q(tmp.path()) + " --seen box,teapot").code, 2);
}

TEST(Cli, SplitCommandTagsDataset) {
  sg::testing::TempDir tmp("cli");
  ASSERT_EQ(run("synth --out " + q(tmp.path() / "d") + " --train 2 --test 2 --rows 64 --cols 64").code, 0);
  std::ofstream(tmp.path() / "groups.json") << R"({"round": ["sphere", "cylinder", "ring"], "flat": ["box", "wedge", "lbracket"]})";
  const CliRun r = run("split --groups " + q(tmp.path() / "groups.json") + " --seed 2 --out " + q(tmp.path() / "s.json") +
                    " --data " + q(tmp.path() / "d"));
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(tmp.path() / "s.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("seen").size(), 2u);
  EXPECT_EQ(j.at("unseen").size(), 4u);
  for (const auto& f : sg::open_dataset(tmp.path() / "d").frames) EXPECT_FALSE(f.tag.empty());
}

TEST(Cli, EvalReproducesHarmonicMeanFromFixture) {
  sg::testing::TempDir tmp("cli");
  std::ofstream(tmp.path() / "fixture.json")
      << R"({"seen": {"overlap": {"P": 80, "R": 78.5, "F": 79.23}}, "unseen": {"overlap": {"P": 70, "R": 65.2, "F": 67.53}}})";
  const CliRun r = run("eval --report-in " + q(tmp.path() / "fixture.json") + " --out " + q(tmp.path() / "r.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(tmp.path() / "r.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_NEAR(j.at("hm").at("overlap").at("F").get<double>(), 72.92, 0.01);
  EXPECT_NE(r.output.find("72.9"), std::string::npos);
}

TEST_F(Chain, TrainWritesCheckpointAndLogs) {
  for (const char* f : {"model.sgbd", "model.json", "train_log.txt", "train_log.json"}) {
    EXPECT_TRUE(fs::exists(root() / "model" / f)) << f;
  }
  std::ifstream in(root() / "model" / "model.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("features"), "rgb,xyz,normals");
}

TEST_F(Chain, PnRatioVariantsAccepted) {
  for (const char* ratio : {"50/50", "0.1", "natural"}) {
    EXPECT_EQ(run("train --data " + q(root() / "data") + " --out " + q(root() / "alt") +
                  " --patches 32 --epochs 1 --hidden 8 --pn-ratio " + ratio)
                  .code,
              0)
        << ratio;
  }
  EXPECT_EQ(run("train --data " + q(root() / "data") + " --out " + q(root() / "alt") + " --pn-ratio 100/0").code, 2);
}

TEST_F(Chain, ImplicitWithoutSidecarIsUsageError) {
  EXPECT_EQ(run("train --data " + q(root() / "data") + " --out " + q(root() / "alt") +
                " --patches 32 --epochs 1 --features rgb,implicit")
                .code,
            2);
  EXPECT_EQ(run("infer --data " + q(root() / "data") + " --checkpoint " + q(root() / "model" / "model.sgbd") +
                " --out " + q(root() / "alt_pred") + " --features rgb,xyz")
                .code,
            2);
}

TEST_F(Chain, PredictionsCoverTestFrames) {
  const auto index = sg::open_dataset(root() / "data");
  for (const auto& id : index.frame_ids("test")) {
    EXPECT_TRUE(fs::exists(root() / "pred" / (id + "_pred.png"))) << id;
    EXPECT_TRUE(fs::exists(root() / "pred" / (id + "_pred.json"))) << id;
  }
}

TEST_F(Chain, InferIndependentOfJobs) {
  ASSERT_EQ(run("infer --data " + q(root() / "data") + " --checkpoint " + q(root() / "model" / "model.sgbd") +
                " --out " + q(root() / "pred_j3") + " --jobs 3")
                .code,
            0);
  EXPECT_EQ(tree(root() / "pred"), tree(root() / "pred_j3"));
}

TEST_F(Chain, EvalGroundTruthAgainstItself) {
  const CliRun r = run("eval --data " + q(root() / "data") + " --gt-as-pred --out " + q(root() / "gt_report.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(root() / "gt_report.json");
  const auto j = nlohmann::json::parse(in);
  for (const char* split : {"seen", "unseen", "all", "hm"}) {
    for (const char* kind : {"overlap", "boundary"}) {
      for (const char* m : {"P", "R", "F"}) EXPECT_DOUBLE_EQ(j.at(split).at(kind).at(m).get<double>(), 100.0);
    }
  }
  EXPECT_TRUE(fs::exists(root() / "gt_report.txt"));
}

TEST_F(Chain, EvalAndVizOnPredictions) {
  ASSERT_EQ(run("eval --data " + q(root() / "data") + " --pred " + q(root() / "pred")).code, 0);
  EXPECT_TRUE(fs::exists(root() / "pred" / "eval_report.json"));
  ASSERT_EQ(run("viz --data " + q(root() / "data") + " --pred " + q(root() / "pred") + " --out " + q(root() / "viz")).code,
            0);
  const auto index = sg::open_dataset(root() / "data");
  const std::string id = index.frame_ids("test").front();
  const auto overlay = sg::read_png(root() / "viz" / (id + "_overlay.png"));
  EXPECT_EQ(overlay.rows, 96);
  EXPECT_EQ(overlay.cols, 96);
  EXPECT_EQ(overlay.channels, 3);
}
