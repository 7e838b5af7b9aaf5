// Copyright 2026 The pab Authors.
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

#include "pab/scenario.h"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"

namespace pab {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

// A fresh directory per test, removed on destruction.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("pab_" + std::string(info->test_suite_name()) + "_" +
             info->name() + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string ReadText(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void WriteText(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// Runs the CLI with stdout captured to a file; returns the exit status.
int RunCli(const std::string& args, std::string* stdout_text = nullptr) {
  const fs::path capture =
      fs::temp_directory_path() /
      ("pab_cli_out_" + std::to_string(::getpid()) + ".txt");
  const std::string cmd = std::string("\"") + PAB_CLI_PATH + "\" " + args +
                          " > \"" + capture.string() + "\" 2>/dev/null";
  const int status = std::system(cmd.c_str());
  if (stdout_text) *stdout_text = ReadText(capture);
  fs::remove(capture);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Json SmallScenario() {
  return Json::parse(R"({
    "name": "small",
    "grid_size": 6,
    "rounds": 300,
    "supply": 2,
    "replications": 3,
    "seed": 9,
    "checkpoints": [100],
    "environment": {
      "type": "stochastic",
      "support": [[0.2, 0.4], [0.0, 1.0]],
      "probabilities": [0.5, 0.5],
      "tie": "bidder_loses"
    },
    "agents": [
      {"algorithm": "decoupled_ew", "feedback": "bandit",
       "valuation": [0.9, 0.7]}
    ]
  })");
}

TEST(ParseScenarioTest, BundledScenariosValidate) {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(BundledScenarioDir())) {
    if (entry.path().extension() != ".json") continue;
    ++count;
    EXPECT_NO_THROW(LoadScenario(entry.path())) << entry.path();
  }
  EXPECT_GE(count, 5);
}

TEST(ParseScenarioTest, ReadsFields) {
  const Scenario s = ParseScenario(SmallScenario().dump());
  EXPECT_EQ(s.config.name, "small");
  EXPECT_EQ(s.config.grid_size, 6);
  EXPECT_EQ(s.config.rounds, 300);
  EXPECT_EQ(s.config.replications, 3);
  EXPECT_EQ(s.config.seed, 9u);
  EXPECT_EQ(s.config.environment.tie, TieBreak::kBidderLoses);
  ASSERT_EQ(s.config.agents.size(), 1u);
  EXPECT_EQ(s.config.agents[0].feedback, Feedback::kBandit);
  EXPECT_EQ(s.config.checkpoints, (std::vector<int>{100}));
  EXPECT_FALSE(s.output_dir.has_value());
}

TEST(ParseScenarioTest, ReportsEveryBadField) {
  Json doc = SmallScenario();
  doc["grid_sise"] = 4;
  doc["rounds"] = "many";
  doc["agents"][0]["colour"] = "red";
  try {
    ParseScenario(doc.dump());
    FAIL() << "expected ScenarioError";
  } catch (const ScenarioError& e) {
    std::vector<std::string> fields;
    for (const FieldError& f : e.errors()) fields.push_back(f.field);
    auto has = [&](const std::string& name) {
      for (const std::string& f : fields) {
        if (f.find(name) != std::string::npos) return true;
      }
      return false;
    };
    EXPECT_TRUE(has("grid_sise"));
    EXPECT_TRUE(has("rounds"));
    EXPECT_TRUE(has("colour"));
  }
  EXPECT_THROW(ParseScenario("{not json"), ScenarioError);
  EXPECT_THROW(ParseScenario("[1, 2]"), ScenarioError);
}

TEST(ParseScenarioTest, HashTracksContentNotLayout) {
  const Json doc = SmallScenario();
  const std::string compact = ParseScenario(doc.dump()).hash;
  EXPECT_EQ(compact, ParseScenario(doc.dump(4)).hash);
  EXPECT_EQ(compact.size(), 16u);
  Json changed = doc;
  changed["seed"] = 10;
  EXPECT_NE(compact, ParseScenario(changed.dump()).hash);
  EXPECT_EQ(Fnv1aHex(""), "cbf29ce484222325");
  EXPECT_EQ(Fnv1aHex("a"), "af63dc4c8601ec8c");
}

TEST(CommandRunTest, WritesRunLogsMetricsAndManifest) {
  TempDir dir;
  const fs::path scenario = dir.path() / "small.json";
  WriteText(scenario, SmallScenario().dump());
  RunOptions options;
  options.scenario = scenario;
  options.out_dir = dir.path() / "out";
  std::ostringstream out, err;
  ASSERT_EQ(CommandRun(options, out, err), kExitOk) << err.str();
  for (const char* name : {"run_000.csv", "run_001.csv", "run_002.csv",
                           "metrics.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(*options.out_dir / name)) << name;
  }
  EXPECT_FALSE(fs::exists(*options.out_dir / "market_000.csv"));
  const Json manifest = Json::parse(ReadText(*options.out_dir / "manifest.json"));
  EXPECT_EQ(manifest["config_hash"], LoadScenario(scenario).hash);
  EXPECT_EQ(manifest["replications"], 3);
  EXPECT_EQ(manifest["files"].size(), 4u);
  const std::string metrics = ReadText(*options.out_dir / "metrics.csv");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 4);
}

TEST(CommandRunTest, SeedOverrideAndJsonFormat) {
  TempDir dir;
  const fs::path scenario = dir.path() / "small.json";
  WriteText(scenario, SmallScenario().dump());
  RunOptions options;
  options.scenario = scenario;
  options.out_dir = dir.path() / "a";
  options.format = OutputFormat::kJson;
  options.seed = 77;
  std::ostringstream out, err;
  ASSERT_EQ(CommandRun(options, out, err), kExitOk) << err.str();
  const Json metrics = Json::parse(ReadText(*options.out_dir / "metrics.json"));
  ASSERT_EQ(metrics["rows"].size(), 3u);
  EXPECT_EQ(metrics["rows"][0]["seed"], ReplicationSeed(77, 0));
  EXPECT_EQ(Json::parse(ReadText(*options.out_dir / "manifest.json"))["seed"],
            77);
}

TEST(CommandRunTest, InvalidScenarioWritesNothing) {
  TempDir dir;
  Json doc = SmallScenario();
  doc["unknown_key"] = true;
  const fs::path scenario = dir.path() / "bad.json";
  WriteText(scenario, doc.dump());
  RunOptions options;
  options.scenario = scenario;
  options.out_dir = dir.path() / "out";
  std::ostringstream out, err;
  EXPECT_EQ(CommandRun(options, out, err), kExitValidation);
  EXPECT_NE(err.str().find("unknown_key"), std::string::npos);
  EXPECT_FALSE(fs::exists(*options.out_dir));

  options.scenario = dir.path() / "missing.json";
  EXPECT_EQ(CommandRun(options, out, err), kExitValidation);

  options.scenario = dir.path() / "good.json";
  WriteText(options.scenario, SmallScenario().dump());
  options.jobs = 0;
  EXPECT_EQ(CommandRun(options, out, err), kExitValidation);
  EXPECT_FALSE(fs::exists(*options.out_dir));
}

TEST(CommandRunTest, OutputDirFromScenario) {
  TempDir dir;
  Json doc = SmallScenario();
  doc["replications"] = 1;
  doc["output_dir"] = (dir.path() / "from_file").string();
  WriteText(dir.path() / "s.json", doc.dump());
  RunOptions options;
  options.scenario = dir.path() / "s.json";
  std::ostringstream out, err;
  ASSERT_EQ(CommandRun(options, out, err), kExitOk) << err.str();
  EXPECT_TRUE(fs::exists(dir.path() / "from_file" / "run_000.csv"));

  doc.erase("output_dir");
  WriteText(options.scenario, doc.dump());
  EXPECT_EQ(CommandRun(options, out, err), kExitValidation);
}

TEST(CommandRunTest, MarketFilesForSeveralAgents) {
  TempDir dir;
  const Json doc = Json::parse(R"({
    "name": "tiny_market", "grid_size": 5, "rounds": 50, "supply": 3,
    "replications": 2, "seed": 1,
    "environment": {"type": "self_play"},
    "agents": [
      {"algorithm": "decoupled_ew", "feedback": "full", "valuation": "uniform",
       "units": 2},
      {"algorithm": "decoupled_ew", "feedback": "full", "valuation": [0.8]}
    ]
  })");
  WriteText(dir.path() / "m.json", doc.dump());
  RunOptions options;
  options.scenario = dir.path() / "m.json";
  options.out_dir = dir.path() / "out";
  std::ostringstream out, err;
  ASSERT_EQ(CommandRun(options, out, err), kExitOk) << err.str();
  EXPECT_TRUE(fs::exists(*options.out_dir / "market_001.csv"));
  const Json manifest =
      Json::parse(ReadText(*options.out_dir / "manifest.json"));
  EXPECT_EQ(manifest["files"].size(), 5u);
}

TEST(CommandHindsightTest, HistoryFile) {
  TempDir dir;
  const fs::path history = dir.path() / "h.csv";
  WriteText(history,
            "# competing bids\n0.1,0.1,0.1\n0.1,0.1,0.1\n0.3,0.3,1.0\n"
            "0.4,1.0,1.0\n");
  HindsightOptions options;
  options.history = history;
  options.valuation = {1, 1, 1};
  options.grid_size = 11;
  std::ostringstream out, err;
  ASSERT_EQ(CommandHindsight(options, out, err), kExitOk) << err.str();
  EXPECT_EQ(out.str(), "bid: 0.4 0.3 0.1\nutility: 6.3\n");

  options.json = true;
  out.str("");
  ASSERT_EQ(CommandHindsight(options, out, err), kExitOk);
  const Json j = Json::parse(out.str());
  EXPECT_EQ(j["bid"].size(), 3u);
  EXPECT_NEAR(j["bid"][0].get<double>(), 0.4, 1e-15);
  EXPECT_NEAR(j["utility"].get<double>(), 6.3, 1e-12);
}

TEST(CommandHindsightTest, NothingToWin) {
  TempDir dir;
  WriteText(dir.path() / "h.csv", "1,1\n");
  HindsightOptions options;
  options.history = dir.path() / "h.csv";
  options.valuation = {0.5, 0.5};
  options.grid_size = 3;
  std::ostringstream out, err;
  ASSERT_EQ(CommandHindsight(options, out, err), kExitOk);
  EXPECT_EQ(out.str(), "bid: 0 0\nutility: 0\n");
}

TEST(CommandHindsightTest, RejectsBadInput) {
  TempDir dir;
  WriteText(dir.path() / "h.csv", "0.1,0.2\n0.3\n");
  HindsightOptions options;
  options.history = dir.path() / "h.csv";
  options.valuation = {0.5};
  options.grid_size = 3;
  std::ostringstream out, err;
  EXPECT_EQ(CommandHindsight(options, out, err), kExitValidation);
  options.grid_size = 1;
  EXPECT_EQ(CommandHindsight(options, out, err), kExitValidation);
  options.grid_size = 3;
  options.valuation = {0.2, 0.5};
  EXPECT_EQ(CommandHindsight(options, out, err), kExitValidation);
  options.history.reset();
  EXPECT_EQ(CommandHindsight(options, out, err), kExitValidation);
  EXPECT_TRUE(out.str().empty());
}

TEST(CommandHindsightTest, RunLogMatchesRegretBenchmark) {
  TempDir dir;
  WriteText(dir.path() / "s.json", SmallScenario().dump());
  RunOptions run;
  run.scenario = dir.path() / "s.json";
  run.out_dir = dir.path() / "out";
  run.format = OutputFormat::kJson;
  std::ostringstream out, err;
  ASSERT_EQ(CommandRun(run, out, err), kExitOk) << err.str();
  const Json metrics = Json::parse(ReadText(*run.out_dir / "metrics.json"));

  HindsightOptions options;
  options.run_log = *run.out_dir / "run_001.csv";
  options.valuation = {0.9, 0.7};
  options.grid_size = 6;
  // The log's tie column must override this.
  options.tie = TieBreak::kBidderWins;
  options.json = true;
  out.str("");
  ASSERT_EQ(CommandHindsight(options, out, err), kExitOk) << err.str();
  const Json j = Json::parse(out.str());
  const Json& row = metrics["rows"][1];
  EXPECT_NEAR(j["utility"].get<double>(),
              row["benchmark_utility"].get<double>(), 1e-9);
  EXPECT_EQ(j["bid"], row["benchmark_bid"]);
}

TEST(GridAdviceTest, Formulas) {
  EXPECT_EQ(AdviseGrid(AdviceMode::kFullInfo, 4, 10000).grid_size, 50);
  EXPECT_NEAR(AdviseGrid(AdviceMode::kFullInfo, 4, 10000).discretization_bound,
              800.0, 1e-12);
  EXPECT_EQ(AdviseGrid(AdviceMode::kOmdBandit, 3, 1000).grid_size, 10);
  EXPECT_EQ(AdviseGrid(AdviceMode::kEwBandit, 1, 1000).grid_size, 10);
  EXPECT_EQ(AdviseGrid(AdviceMode::kOmdFullInfo, 5, 10000).grid_size, 100);
  EXPECT_EQ(AdviseGrid(AdviceMode::kFullInfo, 1, 1).grid_size, 2);
  EXPECT_EQ(AdviseGrid(AdviceMode::kEwBandit, 10, 1).grid_size, 2);
  EXPECT_THROW(AdviseGrid(AdviceMode::kFullInfo, 0, 10),
               std::invalid_argument);
}

TEST(CliTest, GridAdvice) {
  std::string text;
  ASSERT_EQ(RunCli("grid-advice --units 4 --rounds 10000", &text), 0);
  EXPECT_EQ(text, "grid_size: 50\ndiscretization_bound: 800\n");
  ASSERT_EQ(RunCli("grid-advice --mode omd-bandit --units 2 --rounds 1000 "
                   "--json",
                   &text),
            0);
  EXPECT_EQ(Json::parse(text)["grid_size"], 10);
  EXPECT_EQ(RunCli("grid-advice --units 0 --rounds 10"), kExitValidation);
  EXPECT_EQ(RunCli("grid-advice --mode sideways --units 1 --rounds 10"),
            kExitValidation);
}

TEST(CliTest, ExitCodes) {
  EXPECT_EQ(RunCli("--version"), 0);
  EXPECT_EQ(RunCli(""), kExitValidation);
  EXPECT_EQ(RunCli("frobnicate"), kExitValidation);
  EXPECT_EQ(RunCli("hindsight --valuation 1,x --grid-size 3 --history /x"),
            kExitValidation);
}

TEST(CliTest, RunAndHindsightEndToEnd) {
  TempDir dir;
  WriteText(dir.path() / "s.json", SmallScenario().dump());
  const std::string out_dir = (dir.path() / "out").string();
  ASSERT_EQ(RunCli("run \"" + (dir.path() / "s.json").string() +
                   "\" --out \"" + out_dir + "\" --jobs 2"),
            0);
  EXPECT_TRUE(fs::exists(dir.path() / "out" / "manifest.json"));

  Json bad = SmallScenario();
  bad["agents"][0]["speed"] = 1;
  WriteText(dir.path() / "bad.json", bad.dump());
  const std::string bad_out = (dir.path() / "bad_out").string();
  EXPECT_EQ(RunCli("run \"" + (dir.path() / "bad.json").string() +
                   "\" --out \"" + bad_out + "\""),
            kExitValidation);
  EXPECT_FALSE(fs::exists(bad_out));

  WriteText(dir.path() / "h.csv", "0.1,0.1,0.1\n0.1,0.1,0.1\n0.3,0.3,1.0\n"
                                  "0.4,1.0,1.0\n");
  std::string text;
  ASSERT_EQ(RunCli("hindsight --history \"" + (dir.path() / "h.csv").string() +
                       "\" --valuation 1,1,1 --grid-size 11",
                   &text),
            0);
  EXPECT_EQ(text, "bid: 0.4 0.3 0.1\nutility: 6.3\n");
}

}  // namespace
}  // namespace pab
