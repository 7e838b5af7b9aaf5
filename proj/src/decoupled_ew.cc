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

#include "pab/decoupled_ew.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pab {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAddExp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

int AllowedCells(const NodeWeightTable& table, int slot) {
  int count = 0;
  for (int b = 0; b < table.grid_size(); ++b) count += table.allowed(slot, b);
  return count;
}

void ValidateConfig(const LearnerConfig& config, int units) {
  if (!(config.eta >= 0.0) || !std::isfinite(config.eta)) {
    throw std::invalid_argument("eta must be finite and nonnegative");
  }
  if (config.feedback == Feedback::kBandit && !(config.eta * units < 1.0)) {
    throw std::invalid_argument("bandit feedback requires eta < 1 / M");
  }
  if (config.estimator == Estimator::kIx) {
    if (static_cast<int>(config.gamma.size()) != units) {
      throw std::invalid_argument("IX needs one gamma per slot");
    }
    for (double g : config.gamma) {
      if (!(g >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
    }
  }
}

std::span<const double> ActiveGamma(const LearnerConfig& config) {
  if (config.estimator == Estimator::kIx) return config.gamma;
  return {};
}

}  // namespace

double EtaSchedule(EtaRule rule, int units, int grid_size, int rounds) {
  if (units < 1 || grid_size < 2 || rounds < 1) {
    throw std::invalid_argument("eta schedule needs M, T >= 1 and D >= 2");
  }
  const double log_d = std::log(static_cast<double>(grid_size));
  const double m = units, d = grid_size, t = rounds;
  switch (rule) {
    case EtaRule::kEwFullInfo:
      return std::sqrt(log_d / (m * t));
    case EtaRule::kEwBandit:
      return std::min(std::sqrt(log_d / (m * d * t)), 0.999 / m);
    case EtaRule::kOmdFullInfo:
      return std::sqrt(log_d / t);
    case EtaRule::kOmdBandit:
      return std::sqrt(log_d / (d * t));
  }
  throw std::invalid_argument("unknown eta rule");
}

double IxGamma(int cells, int rounds, double delta) {
  if (cells < 1 || rounds < 1 || !(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("IX gamma needs K, T >= 1, delta in (0, 1)");
  }
  const double k = cells;
  return std::sqrt((std::log(k) + std::log((k + 1.0) / delta)) /
                   (4.0 * k * rounds));
}

std::vector<double> IxGammas(const NodeWeightTable& mask, int rounds,
                             double delta) {
  std::vector<double> out(mask.units());
  for (int m = 0; m < mask.units(); ++m) {
    out[m] = IxGamma(AllowedCells(mask, m), rounds, delta);
  }
  return out;
}

LearnerConfig DefaultEwConfig(const BidGrid& grid,
                              const ValuationProfile& valuation,
                              Feedback feedback, Estimator estimator,
                              int rounds) {
  LearnerConfig config;
  config.feedback = feedback;
  config.estimator = estimator;
  config.eta = EtaSchedule(feedback == Feedback::kFullInfo
                               ? EtaRule::kEwFullInfo
                               : EtaRule::kEwBandit,
                           valuation.units(), grid.size(), rounds);
  if (estimator == Estimator::kIx) {
    config.gamma =
        IxGammas(NodeWeightTable::ForValuation(grid, valuation), rounds);
  }
  return config;
}

LearnerConfig DefaultContextualConfig(const BidGrid& grid,
                                      const ContextSet& contexts,
                                      Feedback feedback, Estimator estimator,
                                      int rounds) {
  ValidateContexts(grid, contexts);
  LearnerConfig config = DefaultEwConfig(grid, contexts.profiles[0], feedback,
                                         Estimator::kIpw, rounds);
  config.estimator = estimator;
  if (estimator == Estimator::kIx) {
    const int units = contexts.profiles[0].units();
    config.gamma.assign(units, 0.0);
    for (int m = 0; m < units; ++m) {
      int cells = 0;
      for (const ValuationProfile& v : contexts.profiles) {
        cells = std::max(cells, grid.HighestAtMost(v[m]) + 1);
      }
      config.gamma[m] = IxGamma(cells, rounds);
    }
  }
  return config;
}

PartialSumTable ComputePartialSums(const NodeWeightTable& weights,
                                   double eta) {
  const int units = weights.units();
  const int size = weights.grid_size();
  PartialSumTable sums{LayerTable(units, size, kNegInf),
                       LayerTable(units, size, kNegInf)};
  for (int m = units - 1; m >= 0; --m) {
    double prefix = kNegInf;
    for (int b = 0; b < size; ++b) {
      const double base = m == units - 1 ? 0.0 : sums.log_prefix(m + 1, b);
      if (weights.allowed(m, b) && base != kNegInf) {
        sums.log_s(m, b) = eta * weights.weight(m, b) + base;
        prefix = LogAddExp(prefix, sums.log_s(m, b));
      }
      sums.log_prefix(m, b) = prefix;
    }
    if (prefix == kNegInf) {
      throw std::invalid_argument("a layer has no admissible bid");
    }
  }
  return sums;
}

BidVector SampleBid(const PartialSumTable& sums, Rng& rng) {
  BidVector bid{std::vector<int>(sums.units(), 0)};
  int cap = sums.grid_size() - 1;
  for (int m = 0; m < sums.units(); ++m) {
    const auto prefix = sums.log_prefix.row(m);
    const double total = prefix[cap];
    if (total == kNegInf) throw std::logic_error("empty sampling support");
    const double target = total + std::log1p(-rng.Uniform());
    const auto it =
        std::lower_bound(prefix.begin(), prefix.begin() + cap + 1, target);
    cap = static_cast<int>(it - prefix.begin());
    bid.levels[m] = cap;
  }
  return bid;
}

double PathLogProbability(const PartialSumTable& sums, const BidVector& bid) {
  double out = 0.0;
  int cap = sums.grid_size() - 1;
  for (int m = 0; m < sums.units(); ++m) {
    if (bid[m] > cap) return kNegInf;
    out += sums.log_s(m, bid[m]) - sums.log_prefix(m, cap);
    cap = bid[m];
  }
  return out;
}

LayerTable ComputeSlotMarginals(const PartialSumTable& sums) {
  const int units = sums.units();
  const int size = sums.grid_size();
  LayerTable q(units, size);
  const double total = sums.log_prefix(0, size - 1);
  for (int b = 0; b < size; ++b) {
    q(0, b) = std::exp(sums.log_s(0, b) - total);
  }
  // q_m(b) = S_m(b) * sum_{b' >= b} q_{m-1}(b') / P_m(b'), evaluated as
  // S_m(b) / P_m(b) * A(b) with A(b) = q_{m-1}(b) + P_m(b) / P_m(b+1) A(b+1)
  // so that every exponent is a ratio of nested prefixes.
  for (int m = 1; m < units; ++m) {
    double acc = 0.0;
    for (int b = size - 1; b >= 0; --b) {
      const double log_p = sums.log_prefix(m, b);
      if (b < size - 1) {
        const double log_next = sums.log_prefix(m, b + 1);
        acc = log_p == kNegInf ? 0.0 : acc * std::exp(log_p - log_next);
      }
      acc += q(m - 1, b);
      q(m, b) = log_p == kNegInf ? 0.0
                                 : std::exp(sums.log_s(m, b) - log_p) * acc;
    }
    double row_sum = 0.0;
    for (int b = 0; b < size; ++b) row_sum += q(m, b);
    for (int b = 0; b < size; ++b) q(m, b) /= row_sum;
  }
  return q;
}

void BanditUpdate(const BidGrid& grid, const ValuationProfile& valuation,
                  const LayerTable& marginals, const BidVector& played,
                  int allocation, std::span<const double> gamma,
                  NodeWeightTable& weights) {
  for (int m = 0; m < weights.units(); ++m) {
    const int b_played = played[m];
    const double prob = marginals(m, b_played);
    if (!(prob > 0.0)) {
      throw std::logic_error("played bid has zero sampling probability");
    }
    const double reward =
        m < allocation ? valuation[m] - grid.value(b_played) : 0.0;
    const double g = gamma.empty() ? 0.0 : gamma[m];
    for (int b = 0; b < weights.grid_size(); ++b) {
      if (!weights.allowed(m, b)) continue;
      weights.Add(m, b, b == b_played ? ShiftedIpw(reward, prob, g) : 1.0);
    }
  }
}

int ContextSet::IndexOf(const ValuationProfile& v) const {
  for (int i = 0; i < size(); ++i) {
    if (profiles[i] == v) return i;
  }
  throw std::invalid_argument("valuation is not in the context set");
}

ValuationProfile ContextSet::Mean() const {
  std::vector<double> mean(profiles.at(0).units(), 0.0);
  for (int i = 0; i < size(); ++i) {
    for (int m = 0; m < profiles[i].units(); ++m) {
      mean[m] += probabilities[i] * profiles[i][m];
    }
  }
  // Guard against rounding pushing a coordinate outside [0, 1] or breaking
  // monotonicity by an ulp.
  for (std::size_t m = 0; m < mean.size(); ++m) {
    mean[m] = std::clamp(mean[m], 0.0, 1.0);
    if (m > 0) mean[m] = std::min(mean[m], mean[m - 1]);
  }
  return ValuationProfile(std::move(mean));
}

void ValidateContexts(const BidGrid&, const ContextSet& contexts) {
  if (contexts.profiles.empty()) {
    throw std::invalid_argument("context set is empty");
  }
  if (contexts.probabilities.size() != contexts.profiles.size()) {
    throw std::invalid_argument("one probability per context is required");
  }
  double total = 0.0;
  for (double p : contexts.probabilities) {
    if (!(p >= 0.0)) throw std::invalid_argument("negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("context probabilities must sum to 1");
  }
  const int units = contexts.profiles[0].units();
  for (const ValuationProfile& v : contexts.profiles) {
    if (v.units() != units) {
      throw std::invalid_argument("contexts must share the number of units");
    }
  }
}

void ContextualBanditUpdate(const BidGrid& grid, const ContextSet& contexts,
                            std::span<const LayerTable> marginals,
                            const ValuationProfile& realized,
                            const BidVector& played, int allocation,
                            std::span<const double> gamma,
                            std::vector<NodeWeightTable>& weights) {
  contexts.IndexOf(realized);
  const int units = played.units();
  for (int m = 0; m < units; ++m) {
    const int b_played = played[m];
    double mixed = 0.0;
    for (int c = 0; c < contexts.size(); ++c) {
      mixed += contexts.probabilities[c] * marginals[c](m, b_played);
    }
    if (!(mixed > 0.0)) {
      throw std::logic_error("played bid has zero sampling probability");
    }
    const double g = gamma.empty() ? 0.0 : gamma[m];
    for (int c = 0; c < contexts.size(); ++c) {
      NodeWeightTable& table = weights[c];
      const double reward =
          m < allocation ? contexts.profiles[c][m] - grid.value(b_played)
                         : 0.0;
      for (int b = 0; b < table.grid_size(); ++b) {
        if (!table.allowed(m, b)) continue;
        table.Add(m, b, b == b_played ? ShiftedIpw(reward, mixed, g) : 1.0);
      }
    }
  }
}

DecoupledEwBidder::DecoupledEwBidder(const BidGrid& grid,
                                     ValuationProfile valuation,
                                     LearnerConfig config, std::uint64_t seed)
    : grid_(grid),
      valuation_(std::move(valuation)),
      config_(std::move(config)),
      rng_(seed),
      weights_(NodeWeightTable::ForValuation(grid_, valuation_)) {
  ValidateConfig(config_, valuation_.units());
}

BidVector DecoupledEwBidder::Act() {
  const PartialSumTable sums = ComputePartialSums(weights_, config_.eta);
  if (config_.feedback == Feedback::kBandit) {
    marginals_ = ComputeSlotMarginals(sums);
  }
  last_bid_ = SampleBid(sums, rng_);
  return last_bid_;
}

void DecoupledEwBidder::Observe(const RoundFeedback& feedback) {
  if (config_.feedback == Feedback::kFullInfo) {
    FullInfoUpdate(grid_, valuation_, feedback.competing, feedback.tie,
                   weights_);
  } else {
    BanditUpdate(grid_, valuation_, marginals_, last_bid_, feedback.allocation,
                 ActiveGamma(config_), weights_);
  }
}

ContextualEwBidder::ContextualEwBidder(const BidGrid& grid,
                                       ContextSet contexts,
                                       LearnerConfig config,
                                       std::uint64_t seed)
    : grid_(grid),
      contexts_(std::move(contexts)),
      config_(std::move(config)),
      rng_(seed) {
  ValidateContexts(grid_, contexts_);
  ValidateConfig(config_, contexts_.profiles[0].units());
  for (const ValuationProfile& v : contexts_.profiles) {
    weights_.push_back(NodeWeightTable::ForValuation(grid_, v));
  }
  marginals_.resize(contexts_.size());
}

BidVector ContextualEwBidder::Act() {
  current_ = SampleIndex(contexts_.probabilities, rng_.Uniform());
  if (config_.feedback == Feedback::kBandit) {
    for (int c = 0; c < contexts_.size(); ++c) {
      PartialSumTable sums = ComputePartialSums(weights_[c], config_.eta);
      marginals_[c] = ComputeSlotMarginals(sums);
      if (c == current_) last_bid_ = SampleBid(sums, rng_);
    }
  } else {
    last_bid_ =
        SampleBid(ComputePartialSums(weights_[current_], config_.eta), rng_);
  }
  return last_bid_;
}

void ContextualEwBidder::Observe(const RoundFeedback& feedback) {
  if (config_.feedback == Feedback::kFullInfo) {
    for (int c = 0; c < contexts_.size(); ++c) {
      FullInfoUpdate(grid_, contexts_.profiles[c], feedback.competing,
                     feedback.tie, weights_[c]);
    }
  } else {
    ContextualBanditUpdate(grid_, contexts_, marginals_,
                           contexts_.profiles[current_], last_bid_,
                           feedback.allocation, ActiveGamma(config_),
                           weights_);
  }
}

UniformRandomBidder::UniformRandomBidder(const BidGrid& grid,
                                         ValuationProfile valuation,
                                         std::uint64_t seed)
    : valuation_(std::move(valuation)),
      rng_(seed),
      sums_(ComputePartialSums(NodeWeightTable::ForValuation(grid, valuation_),
                               0.0)) {}

Trajectory RunEw(const BidGrid& grid, Adversary& adversary,
                 const ValuationProfile& valuation, const LearnerConfig& config,
                 std::uint64_t seed, int rounds) {
  DecoupledEwBidder bidder(grid, valuation, config, seed);
  return RunLearner(grid, adversary, bidder, rounds);
}

}  // namespace pab
