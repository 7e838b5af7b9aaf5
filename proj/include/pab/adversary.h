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

#ifndef PAB_ADVERSARY_H_
#define PAB_ADVERSARY_H_

#include <cstdint>
#include <span>
#include <vector>

#include "pab/auction.h"
#include "pab/bidder.h"
#include "pab/offline.h"

namespace pab {

// I.i.d. competing bids from a finite distribution. The draw for round t
// depends only on (seed, t), so it is independent of how many rounds were
// drawn before.
class StochasticAdversary : public Adversary {
 public:
  StochasticAdversary(std::vector<CompetingBids> support,
                      std::vector<double> probabilities, std::uint64_t seed,
                      TieBreak tie);

  int supply() const override { return support_[0].supply(); }
  TieBreak tie() const override { return tie_; }
  CompetingBids Draw(int round, std::span<const BidVector> history) override;

  const std::vector<CompetingBids>& support() const { return support_; }
  const std::vector<double>& probabilities() const { return probabilities_; }

 private:
  std::vector<CompetingBids> support_;
  std::vector<double> probabilities_;
  std::uint64_t seed_;
  TieBreak tie_;
};

// Per-round expected node weights E[w_m(b)] under the adversary's law.
NodeWeightTable ExpectedWeights(const BidGrid& grid,
                                const ValuationProfile& valuation,
                                const StochasticAdversary& adversary);

// The three-point benchmark: v = (1, 1, 1) against (0.1, 0.1, 0.1),
// (0.3, 0.3, 1.0) and (0.4, 1.0, 1.0) with probabilities 1/2, 1/4, 1/4; the
// bidder wins ties. Requires those values on `grid`.
StochasticAdversary MakeBenchmarkAdversary(const BidGrid& grid,
                                           std::uint64_t seed);
ValuationProfile BenchmarkValuation();

// Two-point family used for lower bounds with M = 3k units and price
// c = 2/3. Competing bids are
//   low  = (0 repeated M - k times, c repeated k times),
//   high = (c repeated M times),
// and the low vector has probability 1/2 + delta under kF, 1/2 - delta under
// kG. The bidder values every unit at 1 and wins ties.
enum class LowerBoundVariant { kF, kG };

inline constexpr double kLowerBoundPrice = 2.0 / 3.0;

// Throws std::invalid_argument unless M is a positive multiple of 3,
// 0 <= delta < 1/6 and c lies on the grid.
StochasticAdversary MakeLowerBoundAdversary(const BidGrid& grid, int units,
                                            double delta,
                                            LowerBoundVariant variant,
                                            std::uint64_t seed);

// Expected per-round utility of the bid with the first `at_price` slots at c
// and the rest at 0:
//   p ((1 - c) j + max(0, M - k - j)) + (1 - p) (1 - c) j,  j = at_price,
// with p the probability of the low vector.
double LowerBoundExpectedUtility(int units, double delta,
                                 LowerBoundVariant variant, int at_price);

ValuationProfile LowerBoundValuation(int units);

// One synchronous round of an N-agent market. Each agent sees the other
// agents' bids as competing bids; agents with higher index win ties.
struct MarketRound {
  std::vector<BidVector> bids;
  std::vector<CompetingBids> competing;
  std::vector<int> contexts;
  std::vector<AuctionOutcome> outcomes;
};

class SelfPlayMarket {
 public:
  // Bidders are borrowed and must outlive the market.
  SelfPlayMarket(const BidGrid& grid, int supply,
                 std::vector<Bidder*> bidders);

  int supply() const { return supply_; }
  int agents() const { return static_cast<int>(bidders_.size()); }

  MarketRound Step();

 private:
  BidGrid grid_;
  int supply_;
  std::vector<Bidder*> bidders_;
};

}  // namespace pab

#endif  // PAB_ADVERSARY_H_
