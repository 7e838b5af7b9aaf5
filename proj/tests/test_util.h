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

#ifndef PAB_TESTS_TEST_UTIL_H_
#define PAB_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "pab/auction.h"
#include "pab/layer_table.h"
#include "pab/offline.h"
#include "pab/omd.h"

// Instance generators and reference implementations shared by the tests.
// The references are written from the definitions, without reusing the
// library's fast paths.

namespace pab::testing {

using Engine = std::mt19937_64;

inline double Unif(Engine& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline int UnifInt(Engine& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Non-increasing valuation. Half of the time the values are snapped to the
// grid so that zero-margin cells and exact IR boundaries occur.
inline ValuationProfile RandomValuation(Engine& rng, const BidGrid& grid,
                                        int units) {
  std::vector<double> v(units);
  const bool snap = Unif(rng) < 0.5;
  for (double& x : v) {
    x = snap ? grid.value(UnifInt(rng, 0, grid.size() - 1)) : Unif(rng);
  }
  std::sort(v.begin(), v.end(), std::greater<>());
  return ValuationProfile(std::move(v));
}

inline CompetingBids RandomCompeting(Engine& rng, int grid_size, int supply) {
  std::vector<int> levels(supply);
  for (int& b : levels) b = UnifInt(rng, 0, grid_size - 1);
  std::sort(levels.begin(), levels.end());
  return CompetingBids(std::move(levels));
}

// Every non-increasing vector of length `units` over levels allowed by `ok`,
// built by plain recursion.
inline std::vector<BidVector> EnumerateMonotone(
    int units, int grid_size, const std::function<bool(int, int)>& ok) {
  std::vector<BidVector> out;
  std::vector<int> cur(units);
  std::function<void(int, int)> rec = [&](int slot, int cap) {
    if (slot == units) {
      out.push_back(BidVector{cur});
      return;
    }
    for (int b = 0; b <= cap; ++b) {
      if (!ok(slot, b)) continue;
      cur[slot] = b;
      rec(slot + 1, b);
    }
  };
  rec(0, grid_size - 1);
  return out;
}

// Direct utility of `bid` over a history: the bidder wins slot m iff its m-th
// bid beats the m-th competing bid, and pays its bid.
inline double ReferenceUtility(const BidGrid& grid,
                               const ValuationProfile& valuation,
                               const BidVector& bid,
                               const std::vector<CompetingBids>& history,
                               TieBreak tie) {
  double total = 0.0;
  for (const CompetingBids& c : history) {
    for (int m = 0; m < bid.units(); ++m) {
      const bool win = tie == TieBreak::kBidderWins ? bid[m] >= c.level(m)
                                                    : bid[m] > c.level(m);
      if (win) total += valuation[m] - grid.value(bid[m]);
    }
  }
  return total;
}

// A random element of Q: slot m's CDF is the pointwise maximum of slot
// m-1's CDF and a fresh random CDF, which keeps each row a distribution and
// enforces dominance by construction. With `sparse` set, fresh CDFs are
// drawn from few atoms.
inline LayerTable RandomQMember(Engine& rng, int units, int grid_size,
                                bool sparse) {
  LayerTable q(units, grid_size);
  std::vector<double> prev_cdf(grid_size, 0.0);
  for (int m = 0; m < units; ++m) {
    std::vector<double> p(grid_size, 0.0);
    if (sparse) {
      const int atoms = UnifInt(rng, 1, 2);
      for (int a = 0; a < atoms; ++a) {
        p[UnifInt(rng, 0, grid_size - 1)] += Unif(rng) + 0.1;
      }
    } else {
      for (double& x : p) x = -std::log(1.0 - Unif(rng));
    }
    double total = 0.0;
    for (double x : p) total += x;
    double acc = 0.0;
    double last = 0.0;
    for (int b = 0; b < grid_size; ++b) {
      acc += p[b] / total;
      double cdf = b == grid_size - 1 ? 1.0 : std::min(acc, 1.0);
      if (m > 0) cdf = std::max(cdf, prev_cdf[b]);
      q(m, b) = cdf - last;
      last = cdf;
      prev_cdf[b] = cdf;
    }
  }
  return q;
}

// A random monotone policy with random (possibly sparse) rows over the
// admissible successors.
inline Policy RandomPolicy(Engine& rng, int units, int grid_size) {
  Policy policy;
  auto random_row = [&](int width) {
    std::vector<double> row(width, 0.0);
    const bool sparse = Unif(rng) < 0.3;
    double total = 0.0;
    for (double& x : row) {
      x = sparse && Unif(rng) < 0.6 ? 0.0 : Unif(rng);
      total += x;
    }
    if (total == 0.0) {
      row[UnifInt(rng, 0, width - 1)] = 1.0;
      total = 1.0;
    }
    for (double& x : row) x /= total;
    return row;
  };
  policy.initial = random_row(grid_size);
  for (int m = 0; m + 1 < units; ++m) {
    LayerTable pi(grid_size, grid_size);
    for (int b = 0; b < grid_size; ++b) {
      std::vector<double> row = random_row(b + 1);
      for (int c = 0; c <= b; ++c) pi(b, c) = row[c];
    }
    policy.transitions.push_back(std::move(pi));
  }
  return policy;
}

inline double MaxAbsDiff(const LayerTable& a, const LayerTable& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

}  // namespace pab::testing

#endif  // PAB_TESTS_TEST_UTIL_H_
