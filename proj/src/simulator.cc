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

#include "pab/simulator.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "pab/offline.h"
#include "pab/omd.h"
#include "pab/random.h"

namespace pab {
namespace {

bool OnGrid(const BidGrid& grid, double value) {
  try {
    grid.LevelOf(value);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

std::string AgentField(int n, const std::string& key) {
  return "agents[" + std::to_string(n) + "]." + key;
}

// Valuation profile(s) an agent starts a replication with.
ContextSet ResolveValuations(const AgentConfig& agent, std::uint64_t seed) {
  switch (agent.valuation_source) {
    case ValuationSource::kFixed:
      return {{ValuationProfile(agent.valuation)}, {1.0}};
    case ValuationSource::kUniform: {
      Rng rng(DeriveSeed(seed, 1));
      std::vector<double> v(agent.units);
      for (double& x : v) x = rng.Uniform();
      std::sort(v.begin(), v.end(), std::greater<>());
      return {{ValuationProfile(std::move(v))}, {1.0}};
    }
    case ValuationSource::kContexts: {
      ContextSet set;
      for (const auto& c : agent.contexts) set.profiles.emplace_back(c);
      set.probabilities = agent.context_probabilities;
      return set;
    }
  }
  throw std::logic_error("unknown valuation source");
}

std::unique_ptr<Bidder> MakeBidder(const BidGrid& grid,
                                   const AgentConfig& agent,
                                   const ContextSet& valuations, int rounds,
                                   std::uint64_t seed) {
  const int horizon = std::max(rounds, 1);
  const std::uint64_t learner_seed = DeriveSeed(seed, 0);
  const ValuationProfile& v = valuations.profiles[0];
  auto apply_overrides = [&](LearnerConfig config) {
    if (agent.eta) config.eta = *agent.eta;
    if (agent.gamma) config.gamma.assign(v.units(), *agent.gamma);
    return config;
  };
  switch (agent.algorithm) {
    case Algorithm::kDecoupledEw:
      return std::make_unique<DecoupledEwBidder>(
          grid, v,
          apply_overrides(DefaultEwConfig(grid, v, agent.feedback,
                                          agent.estimator, horizon)),
          learner_seed);
    case Algorithm::kContextualEw:
      return std::make_unique<ContextualEwBidder>(
          grid, valuations,
          apply_overrides(DefaultContextualConfig(
              grid, valuations, agent.feedback, agent.estimator, horizon)),
          learner_seed);
    case Algorithm::kOmd:
      return std::make_unique<OmdBidder>(
          grid, v,
          apply_overrides(DefaultOmdConfig(grid, v, agent.feedback,
                                           agent.estimator, horizon)),
          learner_seed);
    case Algorithm::kFixed: {
      BidVector bid;
      for (double x : agent.bid) bid.levels.push_back(grid.LevelOf(x));
      return std::make_unique<FixedBidder>(grid, v, std::move(bid));
    }
    case Algorithm::kUniformRandom:
      return std::make_unique<UniformRandomBidder>(grid, v, learner_seed);
  }
  throw std::logic_error("unknown algorithm");
}

int AgentUnits(const AgentConfig& agent) {
  switch (agent.valuation_source) {
    case ValuationSource::kFixed:
      return static_cast<int>(agent.valuation.size());
    case ValuationSource::kUniform:
      return agent.units;
    case ValuationSource::kContexts:
      return agent.contexts.empty()
                 ? 0
                 : static_cast<int>(agent.contexts[0].size());
  }
  return 0;
}

void ValidateAgent(const ExperimentConfig& config, const BidGrid* grid, int n,
                   std::vector<FieldError>& errors) {
  const AgentConfig& agent = config.agents[n];
  auto fail = [&](const std::string& key, const std::string& message) {
    errors.push_back({AgentField(n, key), message});
  };
  const bool contextual = agent.algorithm == Algorithm::kContextualEw;
  if (contextual != (agent.valuation_source == ValuationSource::kContexts)) {
    fail("valuation", contextual
                          ? "contextual_ew needs a context distribution"
                          : "only contextual_ew accepts contexts");
  }
  switch (agent.valuation_source) {
    case ValuationSource::kFixed:
      try {
        ValuationProfile v(agent.valuation);
      } catch (const std::invalid_argument& e) {
        fail("valuation", e.what());
      }
      break;
    case ValuationSource::kUniform:
      if (agent.units < 1) fail("units", "must be >= 1");
      break;
    case ValuationSource::kContexts: {
      ContextSet set;
      try {
        for (const auto& c : agent.contexts) set.profiles.emplace_back(c);
        set.probabilities = agent.context_probabilities;
        if (grid != nullptr) ValidateContexts(*grid, set);
      } catch (const std::invalid_argument& e) {
        fail("contexts", e.what());
      }
      break;
    }
  }
  const int units = AgentUnits(agent);
  if (config.supply >= 1 && units > config.supply) {
    fail("valuation", "demand exceeds supply");
  }
  if (agent.eta) {
    if (!(*agent.eta > 0.0) || !std::isfinite(*agent.eta)) {
      fail("eta", "must be a positive finite number");
    } else if (agent.feedback == Feedback::kBandit &&
               agent.algorithm != Algorithm::kOmd && units > 0 &&
               !(*agent.eta * units < 1.0)) {
      fail("eta", "bandit exponential weights need eta < 1 / M");
    }
  }
  if (agent.gamma) {
    if (!(*agent.gamma >= 0.0) || !std::isfinite(*agent.gamma)) {
      fail("gamma", "must be a nonnegative finite number");
    }
    if (agent.estimator != Estimator::kIx) {
      fail("gamma", "only the ix estimator uses gamma");
    }
  }
  if (agent.algorithm == Algorithm::kFixed) {
    if (agent.valuation_source != ValuationSource::kFixed) {
      fail("valuation", "fixed bidders need a fixed valuation");
    } else if (grid != nullptr) {
      try {
        BidVector bid;
        for (double x : agent.bid) bid.levels.push_back(grid->LevelOf(x));
        ValidateBid(*grid, ValuationProfile(agent.valuation), bid);
      } catch (const std::invalid_argument& e) {
        fail("bid", e.what());
      }
    }
  } else if (!agent.bid.empty()) {
    fail("bid", "only fixed bidders take a bid");
  }
}

}  // namespace

std::vector<FieldError> ValidateExperiment(const ExperimentConfig& config) {
  std::vector<FieldError> errors;
  std::unique_ptr<BidGrid> grid;
  if (config.grid_size < 2) {
    errors.push_back({"grid_size", "must be >= 2"});
  } else {
    grid = std::make_unique<BidGrid>(MakeEvenGrid(config.grid_size));
  }
  if (config.rounds < 0) errors.push_back({"rounds", "must be >= 0"});
  if (config.supply < 1) errors.push_back({"supply", "must be >= 1"});
  if (config.replications < 1) {
    errors.push_back({"replications", "must be >= 1"});
  }
  if (config.time_budget_seconds && !(*config.time_budget_seconds > 0.0)) {
    errors.push_back({"time_budget_seconds", "must be positive"});
  }
  for (int c : config.checkpoints) {
    if (c < 1 || c > config.rounds) {
      errors.push_back({"checkpoints", "must lie in [1, rounds]"});
      break;
    }
  }
  const EnvironmentConfig& env = config.environment;
  if (config.agents.empty()) {
    errors.push_back({"agents", "at least one agent is required"});
  } else if (env.kind != Environment::kSelfPlay && config.agents.size() != 1) {
    errors.push_back({"agents", "exactly one agent faces an adversary"});
  }
  for (int n = 0; n < static_cast<int>(config.agents.size()); ++n) {
    ValidateAgent(config, grid.get(), n, errors);
  }
  switch (env.kind) {
    case Environment::kStochastic: {
      if (env.support.empty()) {
        errors.push_back({"environment.support", "must not be empty"});
      }
      if (env.probabilities.size() != env.support.size()) {
        errors.push_back(
            {"environment.probabilities", "one per support point"});
      } else {
        double total = 0.0;
        bool negative = false;
        for (double p : env.probabilities) {
          negative = negative || !(p >= 0.0);
          total += p;
        }
        if (negative || std::abs(total - 1.0) > 1e-9) {
          errors.push_back({"environment.probabilities",
                            "must be nonnegative and sum to 1"});
        }
      }
      for (std::size_t i = 0; i < env.support.size(); ++i) {
        const std::string field =
            "environment.support[" + std::to_string(i) + "]";
        const auto& row = env.support[i];
        if (static_cast<int>(row.size()) != config.supply) {
          errors.push_back({field, "length must equal supply"});
          continue;
        }
        if (grid == nullptr) continue;
        bool ok = true;
        for (std::size_t j = 0; j < row.size(); ++j) {
          ok = ok && OnGrid(*grid, row[j]) && (j == 0 || row[j] >= row[j - 1]);
        }
        if (!ok) {
          errors.push_back({field, "values must be on the grid and sorted"});
        }
      }
      break;
    }
    case Environment::kLowerBound: {
      if (config.supply < 1 || config.supply % 3 != 0) {
        errors.push_back({"supply", "lower_bound needs supply divisible by 3"});
      }
      if (grid != nullptr && !OnGrid(*grid, kLowerBoundPrice)) {
        errors.push_back({"grid_size", "lower_bound needs 2/3 on the grid"});
      }
      if (env.delta && !(*env.delta >= 0.0 && *env.delta < 1.0 / 6.0)) {
        errors.push_back({"environment.delta", "must lie in [0, 1/6)"});
      }
      if (!env.delta && config.rounds > 0 &&
          !(1.0 / std::sqrt(config.rounds) < 1.0 / 6.0)) {
        errors.push_back(
            {"environment.delta", "default 1/sqrt(T) needs T > 36"});
      }
      break;
    }
    case Environment::kSelfPlay:
      break;
  }
  return errors;
}

std::uint64_t ReplicationSeed(std::uint64_t master, int replication) {
  return DeriveSeed(master, static_cast<std::uint64_t>(replication));
}

std::uint64_t EnvironmentSeed(std::uint64_t replication_seed) {
  return DeriveSeed(replication_seed, 0);
}

std::uint64_t AgentSeed(std::uint64_t replication_seed, int agent) {
  return DeriveSeed(replication_seed, static_cast<std::uint64_t>(agent) + 1);
}

RunLog RunExperiment(const ExperimentConfig& config, int replication) {
  const std::vector<FieldError> errors = ValidateExperiment(config);
  if (!errors.empty()) {
    throw std::invalid_argument(errors[0].field + ": " + errors[0].message);
  }
  const BidGrid grid = MakeEvenGrid(config.grid_size);
  const std::uint64_t seed = ReplicationSeed(config.seed, replication);
  const int n_agents = static_cast<int>(config.agents.size());

  RunLog log;
  log.rounds = config.rounds;
  log.supply = config.supply;
  log.seed = seed;
  std::vector<std::unique_ptr<Bidder>> bidders;
  for (int n = 0; n < n_agents; ++n) {
    const std::uint64_t agent_seed = AgentSeed(seed, n);
    log.valuations.push_back(ResolveValuations(config.agents[n], agent_seed));
    bidders.push_back(MakeBidder(grid, config.agents[n], log.valuations[n],
                                 config.rounds, agent_seed));
  }
  log.records.reserve(static_cast<std::size_t>(config.rounds) * n_agents);

  const EnvironmentConfig& env = config.environment;
  if (env.kind == Environment::kSelfPlay) {
    std::vector<Bidder*> raw;
    for (auto& b : bidders) raw.push_back(b.get());
    SelfPlayMarket market(grid, config.supply, std::move(raw));
    for (int t = 0; t < config.rounds; ++t) {
      MarketRound round = market.Step();
      for (int n = 0; n < n_agents; ++n) {
        log.records.push_back({std::move(round.bids[n]),
                               std::move(round.competing[n]),
                               round.contexts[n], round.outcomes[n]});
      }
    }
    return log;
  }

  std::unique_ptr<StochasticAdversary> adversary;
  const std::uint64_t env_seed = EnvironmentSeed(seed);
  if (env.kind == Environment::kStochastic) {
    std::vector<CompetingBids> support;
    for (const auto& row : env.support) {
      std::vector<int> levels;
      for (double x : row) levels.push_back(grid.LevelOf(x));
      support.emplace_back(std::move(levels));
    }
    adversary = std::make_unique<StochasticAdversary>(
        std::move(support), env.probabilities, env_seed, env.tie);
  } else {
    const double delta =
        env.delta ? *env.delta : 1.0 / std::sqrt(std::max(config.rounds, 1));
    adversary = std::make_unique<StochasticAdversary>(MakeLowerBoundAdversary(
        grid, config.supply, delta, env.variant, env_seed));
  }
  log.tie = adversary->tie();
  Trajectory trajectory =
      RunLearner(grid, *adversary, *bidders[0], config.rounds);
  log.records = std::move(trajectory.rounds);
  return log;
}

bool ReplayMatches(const BidGrid& grid, const RunLog& log) {
  for (int t = 0; t < log.rounds; ++t) {
    for (int n = 0; n < log.agents(); ++n) {
      const RoundRecord& r = log.at(t, n);
      if (Settle(grid, log.valuation_at(t, n), r.bid, r.competing, log.tie) !=
          r.outcome) {
        return false;
      }
    }
  }
  return true;
}

namespace {

ValuationProfile BenchmarkProfile(const RunLog& log, int agent) {
  const ContextSet& set = log.valuations[agent];
  return set.size() == 1 ? set.profiles[0] : set.Mean();
}

HindsightSolution BestFixedBid(const BidGrid& grid, const RunLog& log,
                               int agent, int rounds) {
  const ValuationProfile v = BenchmarkProfile(log, agent);
  NodeWeightTable weights = NodeWeightTable::ForValuation(grid, v);
  for (int t = 0; t < rounds; ++t) {
    AddRoundWeights(grid, v, log.at(t, agent).competing, log.tie, weights);
  }
  return HindsightOptimal(weights);
}

double RealizedUtility(const RunLog& log, int agent, int rounds) {
  double total = 0.0;
  for (int t = 0; t < rounds; ++t) total += log.at(t, agent).outcome.utility;
  return total;
}

}  // namespace

double DiscretizedRegret(const BidGrid& grid, const RunLog& log, int agent,
                         int rounds) {
  return BestFixedBid(grid, log, agent, rounds).total_utility -
         RealizedUtility(log, agent, rounds);
}

RegretReport ComputeRegret(const BidGrid& grid, const RunLog& log, int agent,
                           std::span<const int> checkpoints) {
  RegretReport report;
  const HindsightSolution best = BestFixedBid(grid, log, agent, log.rounds);
  report.benchmark_bid = best.bid;
  report.benchmark_utility = best.total_utility;
  report.realized_utility = RealizedUtility(log, agent, log.rounds);
  report.discretized_regret =
      report.benchmark_utility - report.realized_utility;
  const int units = log.valuations[agent].profiles[0].units();
  report.continuous_regret_bound =
      report.discretized_regret +
      static_cast<double>(units) * log.rounds / grid.size();
  report.running_mean_utility.reserve(log.rounds);
  double cumulative = 0.0;
  for (int t = 0; t < log.rounds; ++t) {
    cumulative += log.at(t, agent).outcome.utility;
    report.running_mean_utility.push_back(cumulative / (t + 1));
  }
  for (int c : checkpoints) {
    report.checkpoint_rounds.push_back(c);
    report.checkpoint_regret.push_back(DiscretizedRegret(grid, log, agent, c));
  }
  return report;
}

MarketMetrics ComputeMarketMetrics(const BidGrid& grid, const RunLog& log) {
  MarketMetrics metrics;
  metrics.rounds.reserve(log.rounds);
  std::vector<double> values;
  double welfare_sum = 0.0, revenue_sum = 0.0;
  int normalized_rounds = 0;
  for (int t = 0; t < log.rounds; ++t) {
    MarketRoundMetrics r;
    values.clear();
    double max_win = -1.0, min_win = 2.0, max_lose = -1.0;
    bool any_win = false, any_lose = false;
    for (int n = 0; n < log.agents(); ++n) {
      const RoundRecord& rec = log.at(t, n);
      r.welfare += rec.outcome.reward;
      r.revenue += rec.outcome.payment;
      const ValuationProfile& v = log.valuation_at(t, n);
      values.insert(values.end(), v.values().begin(), v.values().end());
      for (int m = 0; m < rec.bid.units(); ++m) {
        const double price = grid.value(rec.bid[m]);
        if (m < rec.outcome.allocation) {
          any_win = true;
          max_win = std::max(max_win, price);
          min_win = std::min(min_win, price);
        } else {
          any_lose = true;
          max_lose = std::max(max_lose, price);
        }
      }
    }
    std::sort(values.begin(), values.end(), std::greater<>());
    for (int i = 0; i < std::min<int>(log.supply, values.size()); ++i) {
      r.max_welfare += values[i];
    }
    if (any_win && min_win > 0.0) {
      r.log2_winning_spread = std::log2(max_win / min_win);
      if (any_lose && max_lose > 0.0) {
        r.log2_winning_losing = std::log2(min_win / max_lose);
      }
    }
    if (r.max_welfare > 0.0) {
      welfare_sum += r.welfare / r.max_welfare;
      revenue_sum += r.revenue / r.max_welfare;
      ++normalized_rounds;
    }
    metrics.rounds.push_back(r);
  }
  if (normalized_rounds > 0) {
    metrics.mean_normalized_welfare = welfare_sum / normalized_rounds;
    metrics.mean_normalized_revenue = revenue_sum / normalized_rounds;
  }
  return metrics;
}

std::string FormatDouble(double x) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, result.ptr);
}

void WriteRunLogCsv(const BidGrid& grid, const RunLog& log,
                    std::ostream& out) {
  int width = 0;
  for (const ContextSet& set : log.valuations) {
    width = std::max(width, set.profiles[0].units());
  }
  out << "t,agent,context";
  for (int m = 1; m <= width; ++m) out << ",bid_" << m;
  out << ",allocation,reward,utility,payment";
  for (int m = 1; m <= log.supply; ++m) out << ",comp_" << m;
  out << ",comp_tie\n";
  std::string line;
  for (int t = 0; t < log.rounds; ++t) {
    for (int n = 0; n < log.agents(); ++n) {
      const RoundRecord& r = log.at(t, n);
      line.clear();
      line += std::to_string(t);
      line += ',';
      line += std::to_string(n);
      line += ',';
      line += std::to_string(r.context);
      for (int m = 0; m < width; ++m) {
        line += ',';
        if (m < r.bid.units()) line += FormatDouble(grid.value(r.bid[m]));
      }
      line += ',';
      line += std::to_string(r.outcome.allocation);
      for (double x : {r.outcome.reward, r.outcome.utility,
                       r.outcome.payment}) {
        line += ',';
        line += FormatDouble(x);
      }
      for (int m = 0; m < r.competing.supply(); ++m) {
        line += ',';
        line += FormatDouble(grid.value(r.competing.level(m)));
      }
      line += ',';
      for (int m = 0; m < r.competing.supply(); ++m) {
        line += r.competing.TieAt(m, log.tie) == TieBreak::kBidderWins ? 'W'
                                                                       : 'L';
      }
      line += '\n';
      out << line;
    }
  }
}

}  // namespace pab
