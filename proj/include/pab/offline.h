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

#ifndef PAB_OFFLINE_H_
#define PAB_OFFLINE_H_

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "pab/auction.h"
#include "pab/layer_table.h"

// Hindsight-optimal fixed bid vector over a realized history.
//
// The problem is a longest path in a layered DAG: layer m holds one node per
// grid level, node (m, b) has weight W_m(b), and (m, b) connects to
// (m + 1, b') iff b' <= b. Cells that would bid above the marginal value are
// excluded from the graph.

namespace pab {

// Cumulative per-(slot, level) utilities together with a mask of allowed
// cells. Disallowed cells are excluded by flag rather than by an infinite
// weight.
class NodeWeightTable {
 public:
  NodeWeightTable(int units, int grid_size);

  // All cells with grid value <= v_m allowed, weights zero.
  static NodeWeightTable ForValuation(const BidGrid& grid,
                                      const ValuationProfile& valuation);

  int units() const { return weights_.units(); }
  int grid_size() const { return weights_.grid_size(); }

  bool allowed(int slot, int level) const {
    return allowed_[Index(slot, level)] != 0;
  }
  double weight(int slot, int level) const { return weights_(slot, level); }

  void Add(int slot, int level, double delta) {
    weights_(slot, level) += delta;
  }
  void Forbid(int slot, int level) {
    allowed_[Index(slot, level)] = 0;
    weights_(slot, level) = 0.0;
  }

  // Highest allowed level in `slot`, or -1 if the layer is empty.
  int Ceiling(int slot) const;

  const LayerTable& weights() const { return weights_; }

  friend bool operator==(const NodeWeightTable&,
                         const NodeWeightTable&) = default;

 private:
  std::size_t Index(int slot, int level) const {
    return static_cast<std::size_t>(slot) * weights_.grid_size() + level;
  }

  LayerTable weights_;
  std::vector<std::uint8_t> allowed_;
};

// W_m(b) = sum over rounds of (v_m - b) * 1{b wins slot m}.
NodeWeightTable AccumulateWeights(const BidGrid& grid,
                                  const ValuationProfile& valuation,
                                  std::span<const CompetingBids> history,
                                  TieBreak tie);

// Time-varying valuations: round t uses valuations[t]. A cell is allowed only
// if it is individually rational in every round.
NodeWeightTable AccumulateWeights(const BidGrid& grid,
                                  std::span<const ValuationProfile> valuations,
                                  std::span<const CompetingBids> history,
                                  TieBreak tie);

// Adds one round's slot rewards to every allowed cell.
void AddRoundWeights(const BidGrid& grid, const ValuationProfile& valuation,
                     const CompetingBids& competing, TieBreak tie,
                     NodeWeightTable& table);

// U_m(b) = max over monotone tails (b_m, ..., b_M) with b_m <= b of the summed
// weights. Entries with no feasible tail are reported through `feasible`.
struct DpValueTable {
  LayerTable value;
  std::vector<std::uint8_t> feasible;

  bool is_feasible(int slot, int level) const {
    return feasible[static_cast<std::size_t>(slot) * value.grid_size() +
                    level] != 0;
  }
};

DpValueTable ComputeDpValues(const NodeWeightTable& weights);

struct HindsightSolution {
  BidVector bid;
  double total_utility = 0.0;
};

// Among optimal vectors (within kTieSlack) the lexicographically smallest is
// returned, so the answer is canonical.
HindsightSolution HindsightOptimal(const NodeWeightTable& weights);

inline constexpr double kTieSlack = 1e-9;

// Exhaustive search over monotone IR grid vectors, scoring each by replaying
// Settle over the history. Throws std::length_error if more than `cap`
// monotone vectors exist. Used as an independent oracle.
HindsightSolution BruteForceOptimal(const BidGrid& grid,
                                    const ValuationProfile& valuation,
                                    std::span<const CompetingBids> history,
                                    TieBreak tie,
                                    std::int64_t cap = 2'000'000);

// C(D + M - 1, M): number of non-increasing length-M vectors over D levels,
// saturating at INT64_MAX.
std::int64_t CountMonotoneVectors(int units, int grid_size);

// Calls `fn` on every non-increasing level vector with slot m capped at
// caps[m], in lexicographic order.
template <typename Fn>
void ForEachMonotoneVector(std::span<const int> caps, Fn&& fn) {
  const int units = static_cast<int>(caps.size());
  if (units == 0) return;
  BidVector bid{std::vector<int>(units, 0)};
  while (true) {
    fn(static_cast<const BidVector&>(bid));
    int m = units - 1;
    while (m >= 0) {
      const int limit = m == 0 ? caps[0] : std::min(caps[m], bid[m - 1]);
      if (bid.levels[m] < limit) break;
      --m;
    }
    if (m < 0) return;
    ++bid.levels[m];
    for (int k = m + 1; k < units; ++k) bid.levels[k] = 0;
  }
}

}  // namespace pab

#endif  // PAB_OFFLINE_H_
