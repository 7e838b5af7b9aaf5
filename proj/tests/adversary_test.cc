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

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "pab/decoupled_ew.h"
#include "pab/offline.h"
#include "test_util.h"

namespace pab {
namespace {

using ::pab::testing::Engine;
using ::pab::testing::Unif;
using ::pab::testing::UnifInt;

int SupportIndex(const StochasticAdversary& a, const CompetingBids& c) {
  for (int i = 0; i < static_cast<int>(a.support().size()); ++i) {
    if (a.support()[i] == c) return i;
  }
  return -1;
}

TEST(StochasticAdversaryTest, FrequenciesMatchProbabilities) {
  const BidGrid grid = MakeEvenGrid(11);
  StochasticAdversary a = MakeBenchmarkAdversary(grid, 42);
  const int draws = 200000;
  std::vector<int> counts(3, 0);
  for (int t = 0; t < draws; ++t) ++counts[SupportIndex(a, a.Draw(t, {}))];
  const std::vector<double> p = {0.5, 0.25, 0.25};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(static_cast<double>(counts[i]) / draws, p[i],
                3 * std::sqrt(p[i] * (1 - p[i]) / draws));
  }
}

TEST(StochasticAdversaryTest, DrawDependsOnlyOnRound) {
  const BidGrid grid = MakeEvenGrid(11);
  StochasticAdversary forward = MakeBenchmarkAdversary(grid, 3);
  StochasticAdversary backward = MakeBenchmarkAdversary(grid, 3);
  std::vector<CompetingBids> f;
  std::vector<CompetingBids> b(50);
  for (int t = 0; t < 50; ++t) f.push_back(forward.Draw(t, {}));
  for (int t = 49; t >= 0; --t) b[t] = backward.Draw(t, {});
  EXPECT_EQ(f, b);
  StochasticAdversary other = MakeBenchmarkAdversary(grid, 4);
  int same = 0;
  for (int t = 0; t < 50; ++t) same += other.Draw(t, {}) == f[t];
  EXPECT_LT(same, 50);
}

TEST(StochasticAdversaryTest, DegenerateIsConstant) {
  StochasticAdversary a({CompetingBids({1, 2})}, {1.0}, 5,
                        TieBreak::kBidderLoses);
  for (int t = 0; t < 100; ++t) EXPECT_EQ(a.Draw(t, {}), CompetingBids({1, 2}));
}

TEST(StochasticAdversaryTest, RejectsBadDistributions) {
  const std::vector<CompetingBids> two = {CompetingBids({1}),
                                          CompetingBids({2})};
  EXPECT_THROW(StochasticAdversary(two, {0.5}, 1, TieBreak::kBidderWins),
               std::invalid_argument);
  EXPECT_THROW(StochasticAdversary(two, {0.7, 0.7}, 1, TieBreak::kBidderWins),
               std::invalid_argument);
  EXPECT_THROW(StochasticAdversary(two, {1.5, -0.5}, 1, TieBreak::kBidderWins),
               std::invalid_argument);
  EXPECT_THROW(StochasticAdversary({CompetingBids({1}), CompetingBids({1, 1})},
                                   {0.5, 0.5}, 1, TieBreak::kBidderWins),
               std::invalid_argument);
}

TEST(ExpectedWeightsTest, BenchmarkOptimumByBruteForce) {
  const BidGrid grid = MakeEvenGrid(11);
  const ValuationProfile v = BenchmarkValuation();
  const StochasticAdversary a = MakeBenchmarkAdversary(grid, 0);
  const NodeWeightTable w = ExpectedWeights(grid, v, a);

  // Score every monotone grid vector by its exact expected utility.
  double best = -1.0;
  BidVector arg;
  for (const BidVector& bid : ::pab::testing::EnumerateMonotone(
           3, 11, [](int, int) { return true; })) {
    double expected = 0.0;
    for (std::size_t i = 0; i < a.support().size(); ++i) {
      expected += a.probabilities()[i] *
                  Settle(grid, v, bid, a.support()[i], a.tie()).utility;
    }
    if (expected > best + 1e-12) {
      best = expected;
      arg = bid;
    }
  }
  EXPECT_EQ(arg.levels, (std::vector<int>{4, 3, 1}));
  EXPECT_NEAR(best, 1.575, 1e-12);

  const HindsightSolution dp = HindsightOptimal(w);
  EXPECT_EQ(dp.bid, arg);
  EXPECT_NEAR(dp.total_utility, 1.575, 1e-12);
}

TEST(ExpectedWeightsTest, MatchesWeightedAccumulation) {
  Engine rng(1);
  const BidGrid grid = MakeEvenGrid(6);
  const ValuationProfile v({0.9, 0.5});
  std::vector<CompetingBids> support;
  for (int i = 0; i < 4; ++i) {
    support.push_back(::pab::testing::RandomCompeting(rng, 6, 3));
  }
  const std::vector<double> p = {0.1, 0.2, 0.3, 0.4};
  const StochasticAdversary a(support, p, 0, TieBreak::kBidderLoses);
  const NodeWeightTable w = ExpectedWeights(grid, v, a);
  for (int m = 0; m < 2; ++m) {
    for (int b = 0; b < 6; ++b) {
      if (!w.allowed(m, b)) continue;
      double expected = 0.0;
      for (int i = 0; i < 4; ++i) {
        expected += p[i] * SlotReward(v[m], grid, b, support[i].level(m),
                                      TieBreak::kBidderLoses);
      }
      EXPECT_NEAR(w.weight(m, b), expected, 1e-15);
    }
  }
}

TEST(LowerBoundTest, SupportVectors) {
  const BidGrid grid = MakeEvenGrid(4);
  const StochasticAdversary a =
      MakeLowerBoundAdversary(grid, 3, 0.1, LowerBoundVariant::kF, 1);
  ASSERT_EQ(a.support().size(), 2u);
  EXPECT_EQ(a.support()[0].levels(), (std::vector<int>{0, 0, 2}));
  EXPECT_EQ(a.support()[1].levels(), (std::vector<int>{2, 2, 2}));
  EXPECT_NEAR(a.probabilities()[0], 0.6, 1e-15);
  EXPECT_EQ(a.tie(), TieBreak::kBidderWins);
  const StochasticAdversary g =
      MakeLowerBoundAdversary(grid, 3, 0.1, LowerBoundVariant::kG, 1);
  EXPECT_NEAR(g.probabilities()[0], 0.4, 1e-15);

  const StochasticAdversary six =
      MakeLowerBoundAdversary(MakeEvenGrid(7), 6, 0.0, LowerBoundVariant::kF, 1);
  EXPECT_EQ(six.support()[0].levels(), (std::vector<int>{0, 0, 0, 0, 4, 4}));
}

TEST(LowerBoundTest, ClosedFormExamples) {
  EXPECT_NEAR(LowerBoundExpectedUtility(3, 0.1, LowerBoundVariant::kF, 0), 1.2,
              1e-12);
  EXPECT_NEAR(LowerBoundExpectedUtility(3, 0.1, LowerBoundVariant::kF, 3), 1.0,
              1e-12);
  for (int units : {3, 6, 9}) {
    for (int j : {0, units}) {
      const double f =
          LowerBoundExpectedUtility(units, 0.0, LowerBoundVariant::kF, j);
      const double g =
          LowerBoundExpectedUtility(units, 0.0, LowerBoundVariant::kG, j);
      EXPECT_NEAR(f, g, 1e-15);
      EXPECT_NEAR(f, units / 3.0, 1e-12);
    }
  }
}

TEST(LowerBoundTest, ClosedFormMatchesExactExpectation) {
  const BidGrid grid = MakeEvenGrid(7);
  for (int units : {3, 6}) {
    for (double delta : {0.0, 0.03, 0.15}) {
      for (LowerBoundVariant variant :
           {LowerBoundVariant::kF, LowerBoundVariant::kG}) {
        const StochasticAdversary a =
            MakeLowerBoundAdversary(grid, units, delta, variant, 0);
        const NodeWeightTable w =
            ExpectedWeights(grid, LowerBoundValuation(units), a);
        const int c = grid.LevelOf(kLowerBoundPrice);
        for (int j = 0; j <= units; ++j) {
          double exact = 0.0;
          for (int m = 0; m < units; ++m) exact += w.weight(m, m < j ? c : 0);
          EXPECT_NEAR(LowerBoundExpectedUtility(units, delta, variant, j),
                      exact, 1e-12);
        }
      }
    }
  }
}

TEST(LowerBoundTest, RejectsInvalidParameters) {
  const BidGrid grid = MakeEvenGrid(4);
  EXPECT_THROW(MakeLowerBoundAdversary(grid, 4, 0.1, LowerBoundVariant::kF, 1),
               std::invalid_argument);
  EXPECT_THROW(MakeLowerBoundAdversary(grid, 3, 1.0 / 6, LowerBoundVariant::kF, 1),
               std::invalid_argument);
  EXPECT_THROW(MakeLowerBoundAdversary(grid, 3, -0.01, LowerBoundVariant::kF, 1),
               std::invalid_argument);
  EXPECT_THROW(
      MakeLowerBoundAdversary(MakeEvenGrid(5), 3, 0.1, LowerBoundVariant::kF, 1),
      std::invalid_argument);
}

TEST(SelfPlayMarketTest, LoneBidderWinsEveryNonzeroBid) {
  const BidGrid grid = MakeEvenGrid(5);
  FixedBidder solo(grid, ValuationProfile({1.0, 1.0, 0.5}),
                   BidVector{{3, 1, 1}});
  SelfPlayMarket market(grid, 3, {&solo});
  const MarketRound round = market.Step();
  EXPECT_EQ(round.outcomes[0].allocation, 3);
  EXPECT_EQ(round.competing[0].levels(), (std::vector<int>{0, 0, 0}));
}

// Ranks all bids by (level, agent index) and hands out supply from the top.
std::vector<int> GlobalAllocation(const std::vector<BidVector>& bids,
                                  int supply) {
  std::vector<std::tuple<int, int>> entries;
  for (int n = 0; n < static_cast<int>(bids.size()); ++n) {
    for (int b : bids[n].levels) entries.emplace_back(b, n);
  }
  std::sort(entries.begin(), entries.end(), std::greater<>());
  std::vector<int> won(bids.size(), 0);
  for (int i = 0; i < std::min<int>(supply, entries.size()); ++i) {
    ++won[std::get<1>(entries[i])];
  }
  return won;
}

TEST(SelfPlayMarketTest, ConservationAndGlobalRanking) {
  Engine rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const BidGrid grid = MakeEvenGrid(UnifInt(rng, 2, 9));
    const int agents = UnifInt(rng, 1, 4);
    std::vector<std::unique_ptr<Bidder>> owned;
    int max_units = 0;
    for (int n = 0; n < agents; ++n) {
      const int units = UnifInt(rng, 1, 3);
      max_units = std::max(max_units, units);
      owned.push_back(std::make_unique<UniformRandomBidder>(
          grid, ::pab::testing::RandomValuation(rng, grid, units),
          rng()));
    }
    std::vector<Bidder*> raw;
    for (auto& b : owned) raw.push_back(b.get());
    const int supply = max_units + UnifInt(rng, 0, 3);
    SelfPlayMarket market(grid, supply, raw);
    for (int t = 0; t < 50; ++t) {
      const MarketRound round = market.Step();
      int total = 0;
      int positive = 0;
      for (int n = 0; n < agents; ++n) {
        total += round.outcomes[n].allocation;
        for (int b : round.bids[n].levels) positive += b > 0;
      }
      ASSERT_LE(total, supply);
      if (positive >= supply) ASSERT_EQ(total, supply);
      const std::vector<int> expected = GlobalAllocation(round.bids, supply);
      for (int n = 0; n < agents; ++n) {
        ASSERT_EQ(round.outcomes[n].allocation, expected[n]);
      }
    }
  }
}

TEST(SelfPlayMarketTest, SymmetricSingleUnitAllocatesOneUnit) {
  const BidGrid grid = MakeEvenGrid(11);
  const ValuationProfile v({0.8});
  const LearnerConfig cfg =
      DefaultEwConfig(grid, v, Feedback::kFullInfo, Estimator::kIpw, 500);
  DecoupledEwBidder a(grid, v, cfg, 1);
  DecoupledEwBidder b(grid, v, cfg, 2);
  SelfPlayMarket market(grid, 1, {&a, &b});
  for (int t = 0; t < 500; ++t) {
    const MarketRound round = market.Step();
    const int positive = (round.bids[0][0] > 0) + (round.bids[1][0] > 0);
    const int total = round.outcomes[0].allocation + round.outcomes[1].allocation;
    ASSERT_EQ(total, 1);
    if (positive == 0) ASSERT_EQ(round.outcomes[1].allocation, 1);
  }
}

TEST(SelfPlayMarketTest, RejectsDemandAboveSupply) {
  const BidGrid grid = MakeEvenGrid(3);
  FixedBidder big(grid, ValuationProfile({1.0, 1.0}), BidVector{{1, 1}});
  EXPECT_THROW(SelfPlayMarket(grid, 1, {&big}), std::invalid_argument);
}

}  // namespace
}  // namespace pab
