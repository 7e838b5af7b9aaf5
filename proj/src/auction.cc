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

#include "pab/auction.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>

namespace pab {

BidGrid::BidGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw std::invalid_argument("bid grid needs at least two values");
  }
  if (values_.front() != 0.0 || values_.back() != 1.0) {
    throw std::invalid_argument("bid grid must start at 0 and end at 1");
  }
  for (std::size_t i = 1; i < values_.size(); ++i) {
    if (!(values_[i] > values_[i - 1])) {
      throw std::invalid_argument("bid grid must be strictly increasing");
    }
  }
}

int BidGrid::LevelOf(double value) const {
  auto it = std::lower_bound(values_.begin(), values_.end(), value - 1e-9);
  if (it == values_.end() || std::abs(*it - value) > 1e-9) {
    throw std::invalid_argument("value " + std::to_string(value) +
                                " is not on the bid grid");
  }
  return static_cast<int>(it - values_.begin());
}

int BidGrid::HighestAtMost(double cap) const {
  auto it = std::upper_bound(values_.begin(), values_.end(),
                             cap + kValueTolerance);
  return std::max(0, static_cast<int>(it - values_.begin()) - 1);
}

BidGrid MakeEvenGrid(int size) {
  if (size < 2) throw std::invalid_argument("grid size must be at least 2");
  std::vector<double> values(size);
  for (int i = 0; i < size; ++i) {
    values[i] = static_cast<double>(i) / static_cast<double>(size - 1);
  }
  return BidGrid(std::move(values));
}

ValuationProfile::ValuationProfile(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.empty()) {
    throw std::invalid_argument("valuation profile needs at least one unit");
  }
  for (std::size_t m = 0; m < values_.size(); ++m) {
    if (!(values_[m] >= 0.0 && values_[m] <= 1.0)) {
      throw std::invalid_argument("valuations must lie in [0, 1]");
    }
    if (m > 0 && values_[m] > values_[m - 1]) {
      throw std::invalid_argument("valuations must be non-increasing");
    }
  }
}

bool IsIndividuallyRational(const BidGrid& grid,
                            const ValuationProfile& valuation, int slot,
                            int level) {
  return grid.value(level) <= valuation[slot] + kValueTolerance;
}

void ValidateBid(const BidGrid& grid, const ValuationProfile& valuation,
                 const BidVector& bid) {
  if (bid.units() != valuation.units()) {
    throw std::invalid_argument("bid and valuation lengths differ");
  }
  for (int m = 0; m < bid.units(); ++m) {
    if (bid[m] < 0 || bid[m] >= grid.size()) {
      throw std::invalid_argument("bid level off the grid");
    }
    if (m > 0 && bid[m] > bid[m - 1]) {
      throw std::invalid_argument("bids must be non-increasing");
    }
    if (!IsIndividuallyRational(grid, valuation, m, bid[m])) {
      throw std::invalid_argument("bid exceeds marginal valuation");
    }
  }
}

CompetingBids::CompetingBids(std::vector<int> levels)
    : levels_(std::move(levels)) {
  if (!std::is_sorted(levels_.begin(), levels_.end())) {
    throw std::invalid_argument("competing bids must be non-decreasing");
  }
}

CompetingBids::CompetingBids(std::vector<int> levels,
                             std::vector<std::uint8_t> rival_wins_tie)
    : levels_(std::move(levels)), rival_wins_tie_(std::move(rival_wins_tie)) {
  if (rival_wins_tie_.size() != levels_.size()) {
    throw std::invalid_argument("tie priorities must match competing bids");
  }
  for (std::size_t i = 1; i < levels_.size(); ++i) {
    if (std::tie(levels_[i], rival_wins_tie_[i]) <
        std::tie(levels_[i - 1], rival_wins_tie_[i - 1])) {
      throw std::invalid_argument("competing bids must be non-decreasing");
    }
  }
}

TieBreak CompetingBids::TieAt(int slot, TieBreak fallback) const {
  if (rival_wins_tie_.empty()) return fallback;
  return rival_wins_tie_[slot] ? TieBreak::kBidderLoses
                               : TieBreak::kBidderWins;
}

bool CompetingBids::Beats(int level, int slot, TieBreak fallback) const {
  return BidWins(level, levels_[slot], TieAt(slot, fallback));
}

namespace {

struct RankedBid {
  int level;
  std::uint8_t wins_tie;
  friend auto operator<=>(const RankedBid&, const RankedBid&) = default;
};

CompetingBids TopBids(std::vector<RankedBid> all, int supply, int demand,
                      bool keep_priorities) {
  if (supply < 0 || demand > supply) {
    throw std::invalid_argument("demand must not exceed supply");
  }
  std::sort(all.begin(), all.end(), std::greater<>());
  all.resize(supply, RankedBid{0, 0});
  std::reverse(all.begin(), all.end());
  std::vector<int> levels(supply);
  std::vector<std::uint8_t> ties(supply);
  for (int i = 0; i < supply; ++i) {
    levels[i] = all[i].level;
    ties[i] = all[i].wins_tie;
  }
  if (!keep_priorities) return CompetingBids(std::move(levels));
  return CompetingBids(std::move(levels), std::move(ties));
}

}  // namespace

CompetingBids MakeCompetingBids(std::span<const BidVector> rivals, int supply,
                                int demand) {
  std::vector<RankedBid> all;
  for (const BidVector& bid : rivals) {
    for (int level : bid.levels) all.push_back({level, 0});
  }
  return TopBids(std::move(all), supply, demand, false);
}

CompetingBids MakeCompetingBids(std::span<const RivalBid> rivals, int supply,
                                int demand) {
  std::vector<RankedBid> all;
  for (const RivalBid& rival : rivals) {
    for (int level : rival.bid->levels) {
      all.push_back({level, static_cast<std::uint8_t>(rival.wins_tie)});
    }
  }
  return TopBids(std::move(all), supply, demand, true);
}

int Allocate(const BidVector& bid, const CompetingBids& competing,
             TieBreak tie) {
  if (bid.units() > competing.supply()) {
    throw std::invalid_argument("bid has more units than the supply");
  }
  int won = 0;
  for (int m = 0; m < bid.units(); ++m) {
    if (m > 0 && bid[m] > bid[m - 1]) {
      throw std::invalid_argument("bids must be non-increasing");
    }
    if (competing.Beats(bid[m], m, tie)) ++won;
  }
  return won;
}

double SlotReward(double value, const BidGrid& grid, int level,
                  int rival_level, TieBreak tie) {
  return BidWins(level, rival_level, tie) ? value - grid.value(level) : 0.0;
}

AuctionOutcome Settle(const BidGrid& grid, const ValuationProfile& valuation,
                      const BidVector& bid, const CompetingBids& competing,
                      TieBreak tie) {
  if (bid.units() != valuation.units()) {
    throw std::invalid_argument("bid and valuation lengths differ");
  }
  AuctionOutcome out;
  out.allocation = Allocate(bid, competing, tie);
  for (int m = 0; m < out.allocation; ++m) {
    const double price = grid.value(bid[m]);
    out.reward += valuation[m];
    out.payment += price;
    out.utility += valuation[m] - price;
  }
  return out;
}

}  // namespace pab
