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

#ifndef PAB_AUCTION_H_
#define PAB_AUCTION_H_

#include <cstdint>
#include <span>
#include <vector>

// Pay-as-bid multi-unit auction primitives.
//
// Bids live on a finite grid and are handled as integer levels (indices into
// the grid), so every comparison between two bids is an exact integer
// comparison. Valuations are arbitrary reals in [0, 1].

namespace pab {

inline constexpr double kValueTolerance = 1e-12;

class BidGrid {
 public:
  // Values must be strictly increasing, start at 0 and end at 1.
  explicit BidGrid(std::vector<double> values);

  int size() const { return static_cast<int>(values_.size()); }
  double value(int level) const { return values_[level]; }
  const std::vector<double>& values() const { return values_; }

  // Level whose value equals `value` up to 1e-9; throws if there is none.
  int LevelOf(double value) const;

  // Highest level whose value does not exceed `cap`. Level 0 (value 0) is
  // returned for any cap >= 0.
  int HighestAtMost(double cap) const;

 private:
  std::vector<double> values_;
};

// {i / (size - 1) : i = 0..size-1}. Throws std::invalid_argument if size < 2.
BidGrid MakeEvenGrid(int size);

// Non-increasing marginal values v_1 >= ... >= v_M, each in [0, 1].
class ValuationProfile {
 public:
  explicit ValuationProfile(std::vector<double> values);

  int units() const { return static_cast<int>(values_.size()); }
  double operator[](int slot) const { return values_[slot]; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const ValuationProfile&,
                         const ValuationProfile&) = default;

 private:
  std::vector<double> values_;
};

// A bid vector as grid levels, non-increasing across slots.
struct BidVector {
  std::vector<int> levels;

  int units() const { return static_cast<int>(levels.size()); }
  int operator[](int slot) const { return levels[slot]; }

  friend bool operator==(const BidVector&, const BidVector&) = default;
  friend auto operator<=>(const BidVector&, const BidVector&) = default;
};

// Throws std::invalid_argument unless `bid` is monotone, on the grid and
// individually rational against `valuation`.
void ValidateBid(const BidGrid& grid, const ValuationProfile& valuation,
                 const BidVector& bid);

bool IsIndividuallyRational(const BidGrid& grid,
                            const ValuationProfile& valuation, int slot,
                            int level);

enum class TieBreak { kBidderWins, kBidderLoses };

// The `supply` strongest rival bids, sorted non-decreasing. Slot m of the
// bidder's vector is won iff its m-th bid beats entry m.
//
// `rival_wins_tie` is optional. When present it carries, per entry, whether
// the rival owning that bid has tie priority over the bidder; it then
// overrides the TieBreak passed to the allocation functions. Within equal
// levels, entries with rival_wins_tie set sort after those without.
class CompetingBids {
 public:
  CompetingBids() = default;
  explicit CompetingBids(std::vector<int> levels);
  CompetingBids(std::vector<int> levels, std::vector<std::uint8_t> rival_wins_tie);

  int supply() const { return static_cast<int>(levels_.size()); }
  int level(int slot) const { return levels_[slot]; }
  const std::vector<int>& levels() const { return levels_; }
  bool has_priorities() const { return !rival_wins_tie_.empty(); }
  const std::vector<std::uint8_t>& rival_wins_tie() const {
    return rival_wins_tie_;
  }

  // Tie rule governing `slot`: the stored priority when present, else
  // `fallback`.
  TieBreak TieAt(int slot, TieBreak fallback) const;

  // Whether a bid at `level` for `slot` beats the entry at `slot`.
  bool Beats(int level, int slot, TieBreak fallback) const;

  friend bool operator==(const CompetingBids&, const CompetingBids&) = default;

 private:
  std::vector<int> levels_;
  std::vector<std::uint8_t> rival_wins_tie_;
};

// A rival bid vector together with whether its owner wins ties against the
// bidder for whom competing bids are being assembled.
struct RivalBid {
  const BidVector* bid;
  bool wins_tie;
};

// Largest `supply` rival bids sorted non-decreasing, padded with level 0 when
// the rivals submit fewer bids. Throws if demand > supply.
CompetingBids MakeCompetingBids(std::span<const BidVector> rivals, int supply,
                                int demand);

// As above, keeping per-entry tie priorities.
CompetingBids MakeCompetingBids(std::span<const RivalBid> rivals, int supply,
                                int demand);

struct AuctionOutcome {
  int allocation = 0;
  double reward = 0.0;
  double payment = 0.0;
  double utility = 0.0;

  friend bool operator==(const AuctionOutcome&,
                         const AuctionOutcome&) = default;
};

// Number of units won; winning slots always form the prefix 1..x.
int Allocate(const BidVector& bid, const CompetingBids& competing,
             TieBreak tie);

// `>=` under kBidderWins, `>` under kBidderLoses.
inline bool BidWins(int level, int rival_level, TieBreak tie) {
  return tie == TieBreak::kBidderWins ? level >= rival_level
                                      : level > rival_level;
}

// Per-slot margin w = (v - b) * 1{bid wins against rival_level}.
double SlotReward(double value, const BidGrid& grid, int level,
                  int rival_level, TieBreak tie);

AuctionOutcome Settle(const BidGrid& grid, const ValuationProfile& valuation,
                      const BidVector& bid, const CompetingBids& competing,
                      TieBreak tie);

}  // namespace pab

#endif  // PAB_AUCTION_H_
