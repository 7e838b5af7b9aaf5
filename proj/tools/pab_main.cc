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

// Command-line front end: run, hindsight, grid-advice.

#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pab/scenario.h"

namespace {

std::vector<double> ParseList(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    std::size_t used = 0;
    out.push_back(std::stod(cell, &used));
    if (used != cell.size()) throw std::invalid_argument(cell);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning to bid in repeated pay-as-bid auctions."};
  app.require_subcommand(1);
  app.set_version_flag("--version", pab::kVersion);

  pab::RunOptions run;
  std::string format = "csv";
  std::string scenario_path, out_dir;
  std::uint64_t seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario file.");
  run_cmd->add_option("scenario", scenario_path, "Scenario JSON file")
      ->required();
  auto* out_opt = run_cmd->add_option("--out", out_dir, "Output directory");
  auto* seed_opt =
      run_cmd->add_option("--seed", seed, "Override the master seed");
  run_cmd->add_option("--jobs", run.jobs, "Concurrent replications")
      ->default_val(1);
  run_cmd->add_option("--format", format, "Metrics format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->default_val("csv");

  pab::HindsightOptions hindsight;
  std::string valuation_text, history_path, log_path, tie = "wins";
  auto* hs_cmd = app.add_subcommand(
      "hindsight", "Best fixed bid vector for a competing-bid history.");
  auto* history_opt = hs_cmd->add_option(
      "--history", history_path, "CSV rows of competing bids, one per round");
  auto* log_opt =
      hs_cmd->add_option("--log", log_path, "Run log written by 'run'");
  history_opt->excludes(log_opt);
  hs_cmd->add_option("--agent", hindsight.agent, "Agent index in the log")
      ->default_val(0);
  hs_cmd->add_option("--valuation", valuation_text,
                     "Comma-separated marginal values")
      ->required();
  hs_cmd->add_option("--grid-size", hindsight.grid_size, "Grid size D")
      ->required();
  hs_cmd->add_option("--tie", tie, "Tie rule without logged priorities")
      ->check(CLI::IsMember({"wins", "loses"}))
      ->default_val("wins");
  hs_cmd->add_flag("--json", hindsight.json, "Machine-readable output");

  std::string mode = "full";
  int units = 1;
  std::int64_t rounds = 1;
  bool advice_json = false;
  auto* ga_cmd = app.add_subcommand("grid-advice",
                                    "Grid size balancing regret and grid error.");
  ga_cmd->add_option("--mode", mode, "full, ew-bandit, omd-bandit, omd-full")
      ->check(CLI::IsMember({"full", "ew-bandit", "omd-bandit", "omd-full"}))
      ->default_val("full");
  ga_cmd->add_option("--units", units, "Units demanded M")->required();
  ga_cmd->add_option("--rounds", rounds, "Horizon T")->required();
  ga_cmd->add_flag("--json", advice_json, "Machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pab::kExitValidation;
  }

  if (run_cmd->parsed()) {
    run.scenario = scenario_path;
    if (*out_opt) run.out_dir = out_dir;
    if (*seed_opt) run.seed = seed;
    run.format =
        format == "json" ? pab::OutputFormat::kJson : pab::OutputFormat::kCsv;
    return pab::CommandRun(run, std::cout, std::cerr);
  }
  if (hs_cmd->parsed()) {
    try {
      hindsight.valuation = ParseList(valuation_text);
    } catch (const std::exception&) {
      std::cerr << "invalid input: --valuation must be comma-separated "
                   "numbers\n";
      return pab::kExitValidation;
    }
    if (*history_opt) hindsight.history = history_path;
    if (*log_opt) hindsight.run_log = log_path;
    hindsight.tie = tie == "wins" ? pab::TieBreak::kBidderWins
                                  : pab::TieBreak::kBidderLoses;
    return pab::CommandHindsight(hindsight, std::cout, std::cerr);
  }
  const std::map<std::string, pab::AdviceMode> modes = {
      {"full", pab::AdviceMode::kFullInfo},
      {"ew-bandit", pab::AdviceMode::kEwBandit},
      {"omd-bandit", pab::AdviceMode::kOmdBandit},
      {"omd-full", pab::AdviceMode::kOmdFullInfo}};
  return pab::CommandGridAdvice(modes.at(mode), units, rounds, advice_json,
                                std::cout, std::cerr);
}
