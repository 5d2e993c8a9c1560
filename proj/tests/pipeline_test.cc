// Copyright 2026 The marlhf-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "marlhf/pipeline.h"

#include <filesystem>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "marlhf/report.h"
#include "test_util.h"

namespace marlhf {
namespace {

namespace fs = std::filesystem;

// Small grid run that finishes in well under a second.
ExperimentConfig TinyConfig(const fs::path& out) {
  ExperimentConfig c;
  c.game.horizon = 3;
  c.total_trajectories = 40;
  c.pairs_multiplier = 2;
  c.reward.hidden = 8;
  c.reward.epochs = 3;
  c.reward.batch_size = 32;
  c.eval_episodes = 50;
  c.seeds = {0, 1};
  c.coverage = true;
  c.out_dir = out.string();
  return c;
}

TEST(ConfigTest, RoundTripAndDefaults) {
  const ExperimentConfig c = ExperimentConfig::FromJson("{}");
  EXPECT_EQ(c.game.builder, "grid-spread");
  EXPECT_EQ(c.mixture, "Diversified");
  const ExperimentConfig again = ExperimentConfig::FromJson(c.ToJson());
  EXPECT_EQ(again.ToJson(), c.ToJson());
  EXPECT_EQ(again.Hash(), c.Hash());
  EXPECT_EQ(c.Hash().size(), 64u);
  EXPECT_EQ(c.Hash(), Sha256Hex(c.CanonicalJson()));
}

TEST(ConfigTest, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"gamma": 1})"), ConfigError);
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"game": {"size": 3}})"), ConfigError);
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"reward": {"alfa": 1}})"), ConfigError);
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"mixture": "All"})"), ConfigError);
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"delta": 1.5})"), ConfigError);
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"reward": {"alpha": -1}})"), ConfigError);
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"seeds": []})"), ConfigError);
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"game": {"builder": "file", "path": "/nope"}})"),
               ConfigError);
  EXPECT_THROW(ExperimentConfig::FromJson("{not json"), ConfigError);
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"sweep": {"axis": "gamma"}})"), ConfigError);
}

TEST(ConfigTest, HashIgnoresOutputDirectoryOnly) {
  ExperimentConfig a = TinyConfig("/tmp/x");
  ExperimentConfig b = TinyConfig("/tmp/y");
  EXPECT_EQ(a.Hash(), b.Hash());
  b.beta = 2.0;
  EXPECT_NE(a.Hash(), b.Hash());
  EXPECT_EQ(nlohmann::json::parse(a.CanonicalJson()).count("out_dir"), 0u);
}

TEST(BuildGameTest, BuildersMatchDirectConstruction) {
  GameSpec spec;
  spec.builder = "counterexample-m2";
  EXPECT_TRUE(SaveGameJson(BuildGame(spec)) == SaveGameJson(BuildCounterexample().m2));
  spec.builder = "random-linear";
  spec.game_seed = 3;
  RandomLinearGameParams params;
  params.seed = 3;
  params.horizon = spec.horizon;
  EXPECT_TRUE(SaveGameJson(BuildGame(spec)) == SaveGameJson(BuildRandomLinearGame(params)));
}

TEST(ReportTest, FormatDoubleRoundTrips) {
  for (double x : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 1e-300, 123456789.125}) {
    EXPECT_EQ(std::stod(FormatDouble(x)), x);
  }
  EXPECT_EQ(FormatDouble(0.5), "0.5");
}

TEST(ReportTest, CsvRoundTripWithQuoting) {
  CsvTable table({"name", "value", "count"});
  table.Row().Add("plain").Add(0.25).Add(3);
  table.Row().Add("with, comma").Add(-1.0).Add(std::size_t{7});
  table.Row().Add("say \"hi\"").Add(2.0).Add(0);
  const CsvData data = ParseCsv(table.ToString());
  EXPECT_EQ(data.columns, table.columns());
  ASSERT_EQ(data.rows.size(), 3u);
  EXPECT_EQ(data.rows[1][0], "with, comma");
  EXPECT_EQ(data.rows[2][0], "say \"hi\"");
  EXPECT_EQ(data.rows[0][1], "0.25");
  EXPECT_EQ(data.Column("count"), 2);
  EXPECT_EQ(data.Column("missing"), -1);
}

TEST(ReportTest, Sha256KnownVector) {
  EXPECT_EQ(Sha256Hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(ArtifactLogTest, ManifestDetectsTampering) {
  const fs::path dir = testing::ScratchDir("manifest");
  ArtifactLog log(dir);
  log.Write("a/one.txt", "1");
  log.Write("two.txt", "22");
  WriteFile(dir / "manifest.json", log.ManifestJson("hash"));
  EXPECT_TRUE(ManifestValid(dir, "hash"));
  EXPECT_FALSE(ManifestValid(dir, "other"));
  WriteFile(dir / "two.txt", "23");
  EXPECT_FALSE(ManifestValid(dir, "hash"));
  fs::remove_all(dir);
}

TEST(PipelineTest, RunsAreDeterministicAndCached) {
  const fs::path a = testing::ScratchDir("pipe_a"), b = testing::ScratchDir("pipe_b");
  const PipelineOutcome first = RunPipeline(TinyConfig(a));
  ASSERT_TRUE(first.ok());
  EXPECT_FALSE(first.cache_hit);
  ASSERT_EQ(first.runs.size(), 2u);
  for (const RunResult& r : first.runs) {
    EXPECT_TRUE(r.coverage.has_value());
    EXPECT_GE(r.nash_gap, 0.0);
  }
  const PipelineOutcome second = RunPipeline(TinyConfig(b));
  ASSERT_TRUE(second.ok());
  EXPECT_EQ(first.config_hash, second.config_hash);
  EXPECT_EQ(ReadFile(first.run_dir / "manifest.json"),
            ReadFile(second.run_dir / "manifest.json"));
  EXPECT_EQ(ReadFile(first.run_dir / "metrics.csv"), ReadFile(second.run_dir / "metrics.csv"));

  // Every file on disk except the manifest itself is listed in it.
  const auto manifest = nlohmann::json::parse(ReadFile(first.run_dir / "manifest.json"));
  const std::string text = manifest.dump();
  for (const auto& entry : fs::recursive_directory_iterator(first.run_dir)) {
    if (!entry.is_regular_file() || entry.path().filename() == "manifest.json") continue;
    const std::string rel = fs::relative(entry.path(), first.run_dir).generic_string();
    EXPECT_NE(text.find(rel), std::string::npos) << rel;
  }

  const PipelineOutcome again = RunPipeline(TinyConfig(a));
  EXPECT_TRUE(again.cache_hit);
  EXPECT_EQ(again.runs.size(), 2u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(PipelineTest, MetricsCsvHasOneRowPerSeedPlusSummary) {
  const fs::path dir = testing::ScratchDir("pipe_metrics");
  const PipelineOutcome out = RunPipeline(TinyConfig(dir));
  const CsvData data = ParseCsv(ReadFile(out.run_dir / "metrics.csv"));
  EXPECT_EQ(data.rows.size(), 3u);
  const int hash = data.Column("config_hash");
  ASSERT_GE(hash, 0);
  for (const auto& row : data.rows) EXPECT_EQ(row[hash], out.config_hash);
  fs::remove_all(dir);
}

TEST(PipelineTest, StageFailureIsRecorded) {
  const fs::path dir = testing::ScratchDir("pipe_fail");
  ExperimentConfig config = TinyConfig(dir);
  config.seeds = {0};
  config.reward.learning_rate = 1e200;
  ArtifactLog log(dir / "run");
  const RunResult r = RunSingle(config, 0, log);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.status, "failed:fit-reward");
  EXPECT_NE(r.error.find("epoch"), std::string::npos);
  // Files from the stages before the failure stay on disk.
  EXPECT_FALSE(log.entries().empty());
  fs::remove_all(dir);
}

TEST(SweepTest, OneRowPerPointAndSeed) {
  const fs::path dir = testing::ScratchDir("sweep");
  ExperimentConfig config = TinyConfig(dir);
  config.coverage = false;
  config.sweep_axis = "beta";
  config.sweep_values = {0.0, 1.0, 10.0};
  const SweepOutcome sweep = RunSweep(config, "beta");
  EXPECT_TRUE(sweep.failures.empty());
  ASSERT_EQ(sweep.labels.size(), 3u);
  const CsvData data = ParseCsv(ReadFile(sweep.dir / "sweep_beta.csv"));
  EXPECT_EQ(data.rows.size(), 6u);
  bool has_svg = false;
  for (const auto& entry : fs::directory_iterator(sweep.dir)) {
    has_svg |= entry.path().extension() == ".svg";
  }
  EXPECT_TRUE(has_svg);
  fs::remove_all(dir);
}

TEST(CounterexampleRunTest, DataAreIdenticalUnderBothGames) {
  const CounterexampleReport report = RunCounterexample(100, {0, 1, 2});
  ASSERT_EQ(report.seeds.size(), 3u);
  for (const CounterexampleSeed& s : report.seeds) {
    EXPECT_TRUE(s.identical_data);
    EXPECT_TRUE(s.same_output);
    EXPECT_DOUBLE_EQ(s.max_gap, std::max(s.gap_m1, s.gap_m2));
  }
  EXPECT_EQ(report.num_pairs, 100);
  EXPECT_GE(ParseCsv(report.Csv()).rows.size(), 3u);
  EXPECT_THROW(RunCounterexample(20, {0}), ConfigError);
}

}  // namespace
}  // namespace marlhf
