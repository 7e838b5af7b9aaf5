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

#ifndef PAB_DECOUPLED_EW_H_
#define PAB_DECOUPLED_EW_H_

#include <cstdint>
#include <span>
#include <vector>

#include "pab/auction.h"
#include "pab/bidder.h"
#include "pab/layer_table.h"
#include "pab/offline.h"
#include "pab/random.h"

// Exponential weights over monotone bid vectors, decoupled per slot.
//
// The law P(b) proportional to exp(eta * sum_m W_m(b_m)) over all monotone IR
// vectors is sampled exactly in O(M * D) per round through the partial sums
//   S_m(b) = exp(eta * W_m(b)) * sum_{b' <= b} S_{m+1}(b'),  S_{M+1} := 1,
// which count the exponentiated weight of every tail starting at (m, b). All
// arithmetic is carried out in the log domain.

namespace pab {

enum class Feedback { kFullInfo, kBandit };
enum class Estimator { kIpw, kIx };

// Learning-rate schedules keyed by algorithm and feedback.
enum class EtaRule { kEwFullInfo, kEwBandit, kOmdFullInfo, kOmdBandit };

// kEwFullInfo: sqrt(log D / (M T)).
// kEwBandit:   min(sqrt(log D / (M D T)), 0.999 / M).
// kOmdFullInfo: sqrt(log D / T).
// kOmdBandit:  sqrt(log D / (D T)).
double EtaSchedule(EtaRule rule, int units, int grid_size, int rounds);

// Implicit-exploration offset for a layer with `cells` admissible bids:
// sqrt((log K + log((K + 1) / delta)) / (4 K T)).
double IxGamma(int cells, int rounds, double delta = 0.05);

// Per-layer IxGamma with K_m the number of allowed cells of layer m.
std::vector<double> IxGammas(const NodeWeightTable& mask, int rounds,
                             double delta = 0.05);

struct LearnerConfig {
  double eta = 0.0;
  Feedback feedback = Feedback::kFullInfo;
  Estimator estimator = Estimator::kIpw;
  // Per-layer offsets, used only by the IX estimator.
  std::vector<double> gamma;
};

// Config with eta from EtaSchedule and, for IX, per-layer IxGammas.
LearnerConfig DefaultEwConfig(const BidGrid& grid,
                              const ValuationProfile& valuation,
                              Feedback feedback, Estimator estimator,
                              int rounds);

// log_s(m, b) = log S_m(b); log_prefix(m, b) = log sum_{b' <= b} S_m(b').
// Disallowed cells hold -inf in log_s.
struct PartialSumTable {
  LayerTable log_s;
  LayerTable log_prefix;

  int units() const { return log_s.units(); }
  int grid_size() const { return log_s.grid_size(); }
};

PartialSumTable ComputePartialSums(const NodeWeightTable& weights, double eta);

// Draws slots in order; slot m takes b <= b_{m-1} with probability
// S_m(b) / sum_{b' <= b_{m-1}} S_m(b'). Consumes one uniform per slot.
BidVector SampleBid(const PartialSumTable& sums, Rng& rng);

// Log-probability that SampleBid returns `bid`.
double PathLogProbability(const PartialSumTable& sums, const BidVector& bid);

// q(m, b) = probability that SampleBid puts level b in slot m. Rows sum to 1.
LayerTable ComputeSlotMarginals(const PartialSumTable& sums);

// Full-information step: adds the realized slot rewards to every allowed
// cell.
inline void FullInfoUpdate(const BidGrid& grid,
                           const ValuationProfile& valuation,
                           const CompetingBids& competing, TieBreak tie,
                           NodeWeightTable& weights) {
  AddRoundWeights(grid, valuation, competing, tie, weights);
}

// 1 - (1 - w) / (q + gamma). Never exceeds 1 for w <= 1.
inline double ShiftedIpw(double reward, double prob, double gamma) {
  return 1.0 - (1.0 - reward) / (prob + gamma);
}

// Bandit step. Every allowed cell gains 1 except the played cell of each
// layer, which gains ShiftedIpw(w_m, q_m(b_m), gamma_m) with
// w_m = (v_m - b_m) * 1{m < allocation}. `gamma` is empty for plain IPW.
// Throws std::logic_error if a played cell has zero probability.
void BanditUpdate(const BidGrid& grid, const ValuationProfile& valuation,
                  const LayerTable& marginals, const BidVector& played,
                  int allocation, std::span<const double> gamma,
                  NodeWeightTable& weights);

// A finite set of valuation profiles with known probabilities.
struct ContextSet {
  std::vector<ValuationProfile> profiles;
  std::vector<double> probabilities;

  int size() const { return static_cast<int>(profiles.size()); }
  // Index of `v`; throws std::invalid_argument if it is not in the set.
  int IndexOf(const ValuationProfile& v) const;
  ValuationProfile Mean() const;
};

void ValidateContexts(const BidGrid& grid, const ContextSet& contexts);

// Contextual analogue of DefaultEwConfig. K_m for the IX offset is the largest
// number of allowed cells of layer m across contexts.
LearnerConfig DefaultContextualConfig(const BidGrid& grid,
                                      const ContextSet& contexts,
                                      Feedback feedback, Estimator estimator,
                                      int rounds);

// Cross-learning step. Each context's table is updated with the shifted
// estimator normalized by Q_m(b) = sum_v P(v) q_m(b; v), where the reward for
// context v is (v_m - b_m) * 1{m < allocation}.
void ContextualBanditUpdate(const BidGrid& grid, const ContextSet& contexts,
                            std::span<const LayerTable> marginals,
                            const ValuationProfile& realized,
                            const BidVector& played, int allocation,
                            std::span<const double> gamma,
                            std::vector<NodeWeightTable>& weights);

class DecoupledEwBidder : public Bidder {
 public:
  DecoupledEwBidder(const BidGrid& grid, ValuationProfile valuation,
                    LearnerConfig config, std::uint64_t seed);

  int demand() const override { return valuation_.units(); }
  const ValuationProfile& valuation() const override { return valuation_; }
  BidVector Act() override;
  void Observe(const RoundFeedback& feedback) override;

  const NodeWeightTable& weights() const { return weights_; }
  const LearnerConfig& config() const { return config_; }

 private:
  BidGrid grid_;
  ValuationProfile valuation_;
  LearnerConfig config_;
  Rng rng_;
  NodeWeightTable weights_;
  LayerTable marginals_;
  BidVector last_bid_;
};

// Exponential weights with cross-learning over stochastic valuations: the
// bidder draws its context from `contexts` each round, then bids from that
// context's sampler.
class ContextualEwBidder : public Bidder {
 public:
  ContextualEwBidder(const BidGrid& grid, ContextSet contexts,
                     LearnerConfig config, std::uint64_t seed);

  int demand() const override { return contexts_.profiles[0].units(); }
  const ValuationProfile& valuation() const override {
    return contexts_.profiles[current_];
  }
  int context() const override { return current_; }
  BidVector Act() override;
  void Observe(const RoundFeedback& feedback) override;

  const ContextSet& contexts() const { return contexts_; }
  const std::vector<NodeWeightTable>& weights() const { return weights_; }

 private:
  BidGrid grid_;
  ContextSet contexts_;
  LearnerConfig config_;
  Rng rng_;
  std::vector<NodeWeightTable> weights_;
  std::vector<LayerTable> marginals_;
  int current_ = 0;
  BidVector last_bid_;
};

// Uniform over monotone IR vectors; exponential weights frozen at zero.
class UniformRandomBidder : public Bidder {
 public:
  UniformRandomBidder(const BidGrid& grid, ValuationProfile valuation,
                      std::uint64_t seed);

  int demand() const override { return valuation_.units(); }
  const ValuationProfile& valuation() const override { return valuation_; }
  BidVector Act() override { return SampleBid(sums_, rng_); }
  void Observe(const RoundFeedback&) override {}

 private:
  ValuationProfile valuation_;
  Rng rng_;
  PartialSumTable sums_;
};

Trajectory RunEw(const BidGrid& grid, Adversary& adversary,
                 const ValuationProfile& valuation, const LearnerConfig& config,
                 std::uint64_t seed, int rounds);

}  // namespace pab

#endif  // PAB_DECOUPLED_EW_H_
