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

#ifndef PAB_BIDDER_H_
#define PAB_BIDDER_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "pab/auction.h"
#include "pab/random.h"

// Interfaces shared by learners, environments and the simulator.

namespace pab {

// What a bidder learns after a round. Full-information learners read
// `competing`; bandit learners must only use `allocation` together with
// the bid they submitted.
struct RoundFeedback {
  const CompetingBids& competing;
  TieBreak tie;
  int allocation;
};

class Bidder {
 public:
  virtual ~Bidder() = default;

  virtual int demand() const = 0;

  // Valuation in force for the current round. Contextual bidders draw a new
  // context inside Act(), so this is only meaningful after Act().
  virtual const ValuationProfile& valuation() const = 0;

  // Index of the current context; 0 for bidders with a fixed valuation.
  virtual int context() const { return 0; }

  virtual BidVector Act() = 0;
  virtual void Observe(const RoundFeedback& feedback) = 0;
};

// Source of competing bids for a single learner.
class Adversary {
 public:
  virtual ~Adversary() = default;

  virtual int supply() const = 0;
  virtual TieBreak tie() const = 0;

  // Competing bids for `round` (0-based). `history` holds the learner's bids
  // from rounds 0..round-1, which adaptive adversaries may inspect.
  virtual CompetingBids Draw(int round, std::span<const BidVector> history) = 0;
};

// Adaptive adversary backed by an arbitrary function of the round and the
// learner's past bids.
class CallbackAdversary : public Adversary {
 public:
  using Fn = std::function<CompetingBids(int, std::span<const BidVector>)>;

  CallbackAdversary(int supply, TieBreak tie, Fn fn)
      : supply_(supply), tie_(tie), fn_(std::move(fn)) {}

  int supply() const override { return supply_; }
  TieBreak tie() const override { return tie_; }
  CompetingBids Draw(int round, std::span<const BidVector> history) override;

 private:
  int supply_;
  TieBreak tie_;
  Fn fn_;
};

// Always submits the same bid.
class FixedBidder : public Bidder {
 public:
  FixedBidder(const BidGrid& grid, ValuationProfile valuation, BidVector bid);

  int demand() const override { return valuation_.units(); }
  const ValuationProfile& valuation() const override { return valuation_; }
  BidVector Act() override { return bid_; }
  void Observe(const RoundFeedback&) override {}

 private:
  ValuationProfile valuation_;
  BidVector bid_;
};

struct RoundRecord {
  BidVector bid;
  CompetingBids competing;
  int context = 0;
  AuctionOutcome outcome;
};

struct Trajectory {
  std::vector<RoundRecord> rounds;

  double TotalUtility() const;
};

// Plays `bidder` against `adversary` for `rounds` rounds.
Trajectory RunLearner(const BidGrid& grid, Adversary& adversary,
                      Bidder& bidder, int rounds);

// Index drawn from unnormalized nonnegative `weights` by inversion with
// uniform `u` in [0, 1). Zero-weight entries are never returned.
int SampleIndex(std::span<const double> weights, double u);

}  // namespace pab

#endif  // PAB_BIDDER_H_
