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

#include "pab/offline.h"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

namespace pab {

NodeWeightTable::NodeWeightTable(int units, int grid_size)
    : weights_(units, grid_size),
      allowed_(static_cast<std::size_t>(units) * grid_size, 1) {}

NodeWeightTable NodeWeightTable::ForValuation(
    const BidGrid& grid, const ValuationProfile& valuation) {
  NodeWeightTable table(valuation.units(), grid.size());
  for (int m = 0; m < valuation.units(); ++m) {
    for (int b = 0; b < grid.size(); ++b) {
      if (!IsIndividuallyRational(grid, valuation, m, b)) table.Forbid(m, b);
    }
  }
  return table;
}

int NodeWeightTable::Ceiling(int slot) const {
  for (int b = grid_size() - 1; b >= 0; --b) {
    if (allowed(slot, b)) return b;
  }
  return -1;
}

void AddRoundWeights(const BidGrid& grid, const ValuationProfile& valuation,
                     const CompetingBids& competing, TieBreak tie,
                     NodeWeightTable& table) {
  if (competing.supply() < valuation.units()) {
    throw std::invalid_argument("demand exceeds supply");
  }
  for (int m = 0; m < table.units(); ++m) {
    for (int b = 0; b < table.grid_size(); ++b) {
      if (!table.allowed(m, b)) continue;
      if (competing.Beats(b, m, tie)) {
        table.Add(m, b, valuation[m] - grid.value(b));
      }
    }
  }
}

NodeWeightTable AccumulateWeights(const BidGrid& grid,
                                  const ValuationProfile& valuation,
                                  std::span<const CompetingBids> history,
                                  TieBreak tie) {
  NodeWeightTable table = NodeWeightTable::ForValuation(grid, valuation);
  for (const CompetingBids& competing : history) {
    AddRoundWeights(grid, valuation, competing, tie, table);
  }
  return table;
}

NodeWeightTable AccumulateWeights(const BidGrid& grid,
                                  std::span<const ValuationProfile> valuations,
                                  std::span<const CompetingBids> history,
                                  TieBreak tie) {
  if (valuations.size() != history.size()) {
    throw std::invalid_argument("one valuation per round is required");
  }
  if (valuations.empty()) {
    throw std::invalid_argument("time-varying weights need at least a round");
  }
  const int units = valuations.front().units();
  NodeWeightTable table(units, grid.size());
  for (const ValuationProfile& v : valuations) {
    if (v.units() != units) {
      throw std::invalid_argument("valuation lengths differ across rounds");
    }
    for (int m = 0; m < units; ++m) {
      for (int b = 0; b < grid.size(); ++b) {
        if (!IsIndividuallyRational(grid, v, m, b)) table.Forbid(m, b);
      }
    }
  }
  for (std::size_t t = 0; t < history.size(); ++t) {
    AddRoundWeights(grid, valuations[t], history[t], tie, table);
  }
  return table;
}

DpValueTable ComputeDpValues(const NodeWeightTable& weights) {
  const int units = weights.units();
  const int size = weights.grid_size();
  DpValueTable dp{LayerTable(units, size),
                  std::vector<std::uint8_t>(
                      static_cast<std::size_t>(units) * size, 0)};
  auto feasible = [&](int m, int b) -> std::uint8_t& {
    return dp.feasible[static_cast<std::size_t>(m) * size + b];
  };
  for (int m = units - 1; m >= 0; --m) {
    bool have = false;
    double best = 0.0;
    for (int b = 0; b < size; ++b) {
      const bool tail_ok = m == units - 1 || feasible(m + 1, b);
      if (weights.allowed(m, b) && tail_ok) {
        const double tail = m == units - 1 ? 0.0 : dp.value(m + 1, b);
        const double candidate = weights.weight(m, b) + tail;
        if (!have || candidate > best) best = candidate;
        have = true;
      }
      feasible(m, b) = have;
      dp.value(m, b) = have ? best : 0.0;
    }
  }
  return dp;
}

HindsightSolution HindsightOptimal(const NodeWeightTable& weights) {
  const int units = weights.units();
  const int size = weights.grid_size();
  const DpValueTable dp = ComputeDpValues(weights);
  HindsightSolution out;
  out.bid.levels.assign(units, 0);
  int cap = size - 1;
  for (int m = 0; m < units; ++m) {
    if (!dp.is_feasible(m, cap)) {
      throw std::invalid_argument("no feasible bid vector for these weights");
    }
    const double target = dp.value(m, cap) - kTieSlack;
    int pick = -1;
    for (int b = 0; b <= cap; ++b) {
      const bool tail_ok = m == units - 1 || dp.is_feasible(m + 1, b);
      if (!weights.allowed(m, b) || !tail_ok) continue;
      const double tail = m == units - 1 ? 0.0 : dp.value(m + 1, b);
      if (weights.weight(m, b) + tail >= target) {
        pick = b;
        break;
      }
    }
    out.bid.levels[m] = pick;
    out.total_utility += weights.weight(m, pick);
    cap = pick;
  }
  return out;
}

std::int64_t CountMonotoneVectors(int units, int grid_size) {
  // C(n, k) with n = D + M - 1, k = M, computed incrementally.
  const std::int64_t limit = std::numeric_limits<std::int64_t>::max();
  std::int64_t result = 1;
  const int n = grid_size + units - 1;
  const int k = std::min(units, n - units);
  for (int i = 1; i <= k; ++i) {
    const std::int64_t num = n - k + i;
    if (result > limit / num) return limit;
    result = result * num / i;
  }
  return result;
}

HindsightSolution BruteForceOptimal(const BidGrid& grid,
                                    const ValuationProfile& valuation,
                                    std::span<const CompetingBids> history,
                                    TieBreak tie, std::int64_t cap) {
  const int units = valuation.units();
  if (CountMonotoneVectors(units, grid.size()) > cap) {
    throw std::length_error("too many bid vectors for exhaustive search");
  }
  std::vector<int> caps(units);
  for (int m = 0; m < units; ++m) caps[m] = grid.HighestAtMost(valuation[m]);

  std::vector<BidVector> bids;
  std::vector<double> utility;
  std::vector<double> per_slot(units);
  ForEachMonotoneVector(caps, [&](const BidVector& bid) {
    // Sum by slot, then across slots, so the result is bitwise comparable
    // with the DP, which adds the same margins in that order.
    std::fill(per_slot.begin(), per_slot.end(), 0.0);
    for (const CompetingBids& competing : history) {
      const int won = Settle(grid, valuation, bid, competing, tie).allocation;
      for (int m = 0; m < won; ++m) {
        per_slot[m] += valuation[m] - grid.value(bid[m]);
      }
    }
    double total = 0.0;
    for (double x : per_slot) total += x;
    bids.push_back(bid);
    utility.push_back(total);
  });
  const double best = *std::max_element(utility.begin(), utility.end());
  for (std::size_t i = 0; i < bids.size(); ++i) {
    if (utility[i] >= best - kTieSlack) return {bids[i], utility[i]};
  }
  throw std::logic_error("unreachable");
}

}  // namespace pab
