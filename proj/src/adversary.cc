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

#include "pab/adversary.h"

#include <cmath>
#include <stdexcept>

#include "pab/random.h"

namespace pab {

StochasticAdversary::StochasticAdversary(std::vector<CompetingBids> support,
                                         std::vector<double> probabilities,
                                         std::uint64_t seed, TieBreak tie)
    : support_(std::move(support)),
      probabilities_(std::move(probabilities)),
      seed_(seed),
      tie_(tie) {
  if (support_.empty() || support_.size() != probabilities_.size()) {
    throw std::invalid_argument("need one probability per support point");
  }
  double total = 0.0;
  for (double p : probabilities_) {
    if (!(p >= 0.0)) throw std::invalid_argument("negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("probabilities must sum to 1");
  }
  for (const CompetingBids& c : support_) {
    if (c.supply() != support_[0].supply()) {
      throw std::invalid_argument("support points must share the supply");
    }
  }
}

CompetingBids StochasticAdversary::Draw(int round,
                                        std::span<const BidVector>) {
  const double u =
      ToUnitInterval(MixSeed(DeriveSeed(seed_, static_cast<std::uint64_t>(round))));
  return support_[SampleIndex(probabilities_, u)];
}

NodeWeightTable ExpectedWeights(const BidGrid& grid,
                                const ValuationProfile& valuation,
                                const StochasticAdversary& adversary) {
  NodeWeightTable out = NodeWeightTable::ForValuation(grid, valuation);
  const auto& support = adversary.support();
  for (std::size_t i = 0; i < support.size(); ++i) {
    NodeWeightTable one = NodeWeightTable::ForValuation(grid, valuation);
    AddRoundWeights(grid, valuation, support[i], adversary.tie(), one);
    for (int m = 0; m < out.units(); ++m) {
      for (int b = 0; b < out.grid_size(); ++b) {
        if (out.allowed(m, b)) {
          out.Add(m, b, adversary.probabilities()[i] * one.weight(m, b));
        }
      }
    }
  }
  return out;
}

StochasticAdversary MakeBenchmarkAdversary(const BidGrid& grid,
                                           std::uint64_t seed) {
  auto levels = [&](std::vector<double> values) {
    std::vector<int> out;
    for (double v : values) out.push_back(grid.LevelOf(v));
    return CompetingBids(std::move(out));
  };
  return StochasticAdversary({levels({0.1, 0.1, 0.1}), levels({0.3, 0.3, 1.0}),
                              levels({0.4, 1.0, 1.0})},
                             {0.5, 0.25, 0.25}, seed, TieBreak::kBidderWins);
}

ValuationProfile BenchmarkValuation() {
  return ValuationProfile({1.0, 1.0, 1.0});
}

namespace {

void ValidateLowerBound(int units, double delta) {
  if (units <= 0 || units % 3 != 0) {
    throw std::invalid_argument("lower-bound instance needs M divisible by 3");
  }
  if (!(delta >= 0.0 && delta < 1.0 / 6.0)) {
    throw std::invalid_argument("lower-bound delta must lie in [0, 1/6)");
  }
}

double LowProbability(double delta, LowerBoundVariant variant) {
  return variant == LowerBoundVariant::kF ? 0.5 + delta : 0.5 - delta;
}

}  // namespace

StochasticAdversary MakeLowerBoundAdversary(const BidGrid& grid, int units,
                                            double delta,
                                            LowerBoundVariant variant,
                                            std::uint64_t seed) {
  ValidateLowerBound(units, delta);
  const int price = grid.LevelOf(kLowerBoundPrice);
  const int k = units / 3;
  std::vector<int> low(units, 0);
  for (int m = units - k; m < units; ++m) low[m] = price;
  std::vector<int> high(units, price);
  const double p = LowProbability(delta, variant);
  return StochasticAdversary({CompetingBids(low), CompetingBids(high)},
                             {p, 1.0 - p}, seed, TieBreak::kBidderWins);
}

double LowerBoundExpectedUtility(int units, double delta,
                                 LowerBoundVariant variant, int at_price) {
  ValidateLowerBound(units, delta);
  if (at_price < 0 || at_price > units) {
    throw std::invalid_argument("at_price must lie in [0, M]");
  }
  const int k = units / 3;
  const double c = kLowerBoundPrice;
  const double p = LowProbability(delta, variant);
  const double j = at_price;
  return p * ((1.0 - c) * j + std::max(0, units - k - at_price)) +
         (1.0 - p) * (1.0 - c) * j;
}

ValuationProfile LowerBoundValuation(int units) {
  return ValuationProfile(std::vector<double>(units, 1.0));
}

SelfPlayMarket::SelfPlayMarket(const BidGrid& grid, int supply,
                               std::vector<Bidder*> bidders)
    : grid_(grid), supply_(supply), bidders_(std::move(bidders)) {
  for (const Bidder* b : bidders_) {
    if (b->demand() > supply_) {
      throw std::invalid_argument("agent demand exceeds supply");
    }
  }
}

MarketRound SelfPlayMarket::Step() {
  const int n_agents = agents();
  MarketRound round;
  round.bids.reserve(n_agents);
  for (Bidder* b : bidders_) {
    round.bids.push_back(b->Act());
    round.contexts.push_back(b->context());
  }
  std::vector<RivalBid> rivals;
  for (int n = 0; n < n_agents; ++n) {
    rivals.clear();
    for (int r = 0; r < n_agents; ++r) {
      if (r != n) rivals.push_back({&round.bids[r], r > n});
    }
    round.competing.push_back(
        MakeCompetingBids(std::span<const RivalBid>(rivals), supply_,
                          bidders_[n]->demand()));
    round.outcomes.push_back(Settle(grid_, bidders_[n]->valuation(),
                                    round.bids[n], round.competing[n],
                                    TieBreak::kBidderWins));
  }
  for (int n = 0; n < n_agents; ++n) {
    bidders_[n]->Observe({round.competing[n], TieBreak::kBidderWins,
                          round.outcomes[n].allocation});
  }
  return round;
}

}  // namespace pab
