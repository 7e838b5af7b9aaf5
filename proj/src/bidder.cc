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

#include "pab/bidder.h"

#include <stdexcept>

namespace pab {

CompetingBids CallbackAdversary::Draw(int round,
                                      std::span<const BidVector> history) {
  CompetingBids out = fn_(round, history);
  if (out.supply() != supply_) {
    throw std::logic_error("callback adversary returned wrong supply");
  }
  return out;
}

FixedBidder::FixedBidder(const BidGrid& grid, ValuationProfile valuation,
                         BidVector bid)
    : valuation_(std::move(valuation)), bid_(std::move(bid)) {
  ValidateBid(grid, valuation_, bid_);
}

double Trajectory::TotalUtility() const {
  double total = 0.0;
  for (const RoundRecord& r : rounds) total += r.outcome.utility;
  return total;
}

Trajectory RunLearner(const BidGrid& grid, Adversary& adversary,
                      Bidder& bidder, int rounds) {
  Trajectory out;
  out.rounds.reserve(rounds);
  std::vector<BidVector> history;
  history.reserve(rounds);
  for (int t = 0; t < rounds; ++t) {
    RoundRecord rec;
    rec.competing = adversary.Draw(t, history);
    rec.bid = bidder.Act();
    rec.context = bidder.context();
    rec.outcome = Settle(grid, bidder.valuation(), rec.bid, rec.competing,
                         adversary.tie());
    bidder.Observe({rec.competing, adversary.tie(), rec.outcome.allocation});
    history.push_back(rec.bid);
    out.rounds.push_back(std::move(rec));
  }
  return out;
}

int SampleIndex(std::span<const double> weights, double u) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::logic_error("cannot sample from zero mass");
  const double target = u * total;
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    acc += weights[i];
    if (target < acc) return last_positive;
  }
  return last_positive;
}

}  // namespace pab
