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

#ifndef PAB_SCENARIO_H_
#define PAB_SCENARIO_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pab/simulator.h"

// Scenario files and the command implementations behind the `pab` binary.
// Commands return process exit codes: 0 on success, 2 when the input does not
// validate (nothing is written), 1 on failures during execution.

namespace pab {

inline constexpr char kVersion[] = "1.0.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;

class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<FieldError> errors);
  ScenarioError(const std::string& field, const std::string& message)
      : ScenarioError(std::vector<FieldError>{{field, message}}) {}
  const std::vector<FieldError>& errors() const { return errors_; }

 private:
  std::vector<FieldError> errors_;
};

struct Scenario {
  ExperimentConfig config;
  std::optional<std::string> output_dir;
  // FNV-1a of the canonical (key-sorted, whitespace-free) document.
  std::string hash;
};

// Parses a JSON scenario. Unknown keys, wrong types and configs rejected by
// ValidateExperiment all raise ScenarioError listing every offending field.
Scenario ParseScenario(const std::string& text);
Scenario LoadScenario(const std::filesystem::path& path);

// 64-bit FNV-1a as 16 lowercase hex digits.
std::string Fnv1aHex(const std::string& bytes);

// Directory holding the scenarios shipped with the library.
std::filesystem::path BundledScenarioDir();

enum class OutputFormat { kCsv, kJson };

struct RunOptions {
  std::filesystem::path scenario;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  OutputFormat format = OutputFormat::kCsv;
};

// Writes run_<r>.csv per replication (plus market_<r>.csv when several agents
// trade), metrics.{csv,json} and manifest.json.
int CommandRun(const RunOptions& options, std::ostream& out,
               std::ostream& err);

struct HindsightOptions {
  // Exactly one of the two sources: a file of competing-bid rows, or a run
  // log together with the agent whose competing bids are replayed.
  std::optional<std::filesystem::path> history;
  std::optional<std::filesystem::path> run_log;
  int agent = 0;
  std::vector<double> valuation;
  int grid_size = 0;
  TieBreak tie = TieBreak::kBidderWins;
  bool json = false;
};

int CommandHindsight(const HindsightOptions& options, std::ostream& out,
                     std::ostream& err);

enum class AdviceMode { kFullInfo, kEwBandit, kOmdBandit, kOmdFullInfo };

struct GridAdvice {
  int grid_size = 2;
  // M * T / D: worst-case utility lost by restricting bids to the grid.
  double discretization_bound = 0.0;
};

// Rate-balancing grid size, rounded up, at least 2:
//   kFullInfo sqrt(T / M), kEwBandit (T / M)^(1/3), kOmdBandit T^(1/3),
//   kOmdFullInfo sqrt(T).
GridAdvice AdviseGrid(AdviceMode mode, int units, std::int64_t rounds);

int CommandGridAdvice(AdviceMode mode, int units, std::int64_t rounds,
                      bool json, std::ostream& out, std::ostream& err);

}  // namespace pab

#endif  // PAB_SCENARIO_H_
