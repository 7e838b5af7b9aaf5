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

#ifndef PAB_SIMULATOR_H_
#define PAB_SIMULATOR_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pab/adversary.h"
#include "pab/auction.h"
#include "pab/bidder.h"
#include "pab/decoupled_ew.h"

namespace pab {

enum class Algorithm { kDecoupledEw, kContextualEw, kOmd, kFixed,
                       kUniformRandom };

enum class ValuationSource {
  kFixed,     // `valuation`.
  kUniform,   // `units` i.i.d. Unif(0, 1) draws, sorted, per replication.
  kContexts,  // `contexts` with `context_probabilities`.
};

struct AgentConfig {
  Algorithm algorithm = Algorithm::kDecoupledEw;
  Feedback feedback = Feedback::kFullInfo;
  Estimator estimator = Estimator::kIpw;
  std::optional<double> eta;
  // Same offset for every slot; per-slot defaults apply when absent.
  std::optional<double> gamma;
  ValuationSource valuation_source = ValuationSource::kFixed;
  std::vector<double> valuation;
  int units = 0;
  std::vector<std::vector<double>> contexts;
  std::vector<double> context_probabilities;
  // Bid values for Algorithm::kFixed.
  std::vector<double> bid;
};

enum class Environment { kStochastic, kLowerBound, kSelfPlay };

struct EnvironmentConfig {
  Environment kind = Environment::kStochastic;
  // kStochastic: competing-bid values, each of length supply.
  std::vector<std::vector<double>> support;
  std::vector<double> probabilities;
  TieBreak tie = TieBreak::kBidderWins;
  // kLowerBound: defaults to 1 / sqrt(T) when absent.
  std::optional<double> delta;
  LowerBoundVariant variant = LowerBoundVariant::kF;
};

struct ExperimentConfig {
  std::string name;
  int grid_size = 0;
  int rounds = 0;
  int supply = 0;
  int replications = 50;
  std::uint64_t seed = 0;
  std::optional<double> time_budget_seconds;
  EnvironmentConfig environment;
  std::vector<AgentConfig> agents;
  // Rounds at which regret is additionally reported.
  std::vector<int> checkpoints;
};

struct FieldError {
  std::string field;
  std::string message;
};

// Empty when the config is runnable.
std::vector<FieldError> ValidateExperiment(const ExperimentConfig& config);

// Seeds for replication r: DeriveSeed(master, r); within it the environment
// uses stream 0 and agent n uses stream n + 1. An agent draws its learner
// randomness from DeriveSeed(agent_seed, 0) and any random valuation from
// DeriveSeed(agent_seed, 1).
std::uint64_t ReplicationSeed(std::uint64_t master, int replication);
std::uint64_t EnvironmentSeed(std::uint64_t replication_seed);
std::uint64_t AgentSeed(std::uint64_t replication_seed, int agent);

struct RunLog {
  int rounds = 0;
  int supply = 0;
  std::uint64_t seed = 0;
  TieBreak tie = TieBreak::kBidderWins;
  // Per agent, the valuation profiles it may hold and their probabilities.
  std::vector<ContextSet> valuations;
  // records[t * agents + n].
  std::vector<RoundRecord> records;

  int agents() const { return static_cast<int>(valuations.size()); }
  const RoundRecord& at(int round, int agent) const {
    return records[static_cast<std::size_t>(round) * agents() + agent];
  }
  const ValuationProfile& valuation_at(int round, int agent) const {
    return valuations[agent].profiles[at(round, agent).context];
  }
};

// Runs one replication. Throws std::invalid_argument if the config does not
// validate.
RunLog RunExperiment(const ExperimentConfig& config, int replication);

// Re-settles every logged round; returns false on any mismatch.
bool ReplayMatches(const BidGrid& grid, const RunLog& log);

struct RegretReport {
  double realized_utility = 0.0;
  double benchmark_utility = 0.0;
  BidVector benchmark_bid;
  double discretized_regret = 0.0;
  // Discretized regret plus the grid error bound M * T / D.
  double continuous_regret_bound = 0.0;
  std::vector<double> running_mean_utility;
  std::vector<int> checkpoint_rounds;
  std::vector<double> checkpoint_regret;
};

// Regret of `agent` against the best fixed grid bid on the logged competing
// bids. Agents with several valuation profiles are compared with the best
// bid for the expected profile, which maximizes expected utility over the
// context draw.
RegretReport ComputeRegret(const BidGrid& grid, const RunLog& log, int agent,
                           std::span<const int> checkpoints = {});

// Discretized regret over rounds [0, rounds).
double DiscretizedRegret(const BidGrid& grid, const RunLog& log, int agent,
                         int rounds);

struct MarketRoundMetrics {
  double welfare = 0.0;
  double revenue = 0.0;
  // Sum of the `supply` largest marginal values held this round.
  double max_welfare = 0.0;
  // log2(largest winning / smallest winning bid).
  std::optional<double> log2_winning_spread;
  // log2(smallest winning / largest losing bid).
  std::optional<double> log2_winning_losing;
};

struct MarketMetrics {
  std::vector<MarketRoundMetrics> rounds;
  double mean_normalized_welfare = 0.0;
  double mean_normalized_revenue = 0.0;
};

MarketMetrics ComputeMarketMetrics(const BidGrid& grid, const RunLog& log);

// Columns: t, agent, context, bid_1..bid_K, allocation, reward, utility,
// payment, comp_1..comp_S, comp_tie. K is the largest demand; shorter bids
// leave trailing bid cells empty. comp_tie holds one character per competing
// entry, W if the bidder wins a tie against it and L otherwise.
void WriteRunLogCsv(const BidGrid& grid, const RunLog& log, std::ostream& out);

// Shortest decimal that round-trips.
std::string FormatDouble(double x);

}  // namespace pab

#endif  // PAB_SIMULATOR_H_
