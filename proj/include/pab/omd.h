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

#ifndef PAB_OMD_H_
#define PAB_OMD_H_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pab/auction.h"
#include "pab/bidder.h"
#include "pab/decoupled_ew.h"
#include "pab/layer_table.h"
#include "pab/random.h"

// Online mirror descent over slot occupancy measures.
//
// An occupancy measure q assigns each slot m a distribution q_m over grid
// levels. The measures induced by monotone bidding policies are exactly the
// set Q of row-stochastic tables whose CDFs satisfy
//   CDF_{m+1}(b) >= CDF_m(b)  for every level b,
// i.e. slot m+1 is stochastically dominated by slot m. Each round takes a
// multiplicative step and projects back onto Q in unnormalized KL.

namespace pab {

inline constexpr double kMembershipTolerance = 1e-8;

struct QViolation {
  enum class Kind { kRowSum, kDominance, kNegative };
  Kind kind;
  int slot;
  int level;
  double magnitude;
};

// Every violation larger than `tol`; empty means q is in Q. Dominance
// violations are reported at (slot m, level b) for CDF_m(b) > CDF_{m+1}(b).
std::vector<QViolation> CheckQMembership(const LayerTable& q,
                                         double tol = kMembershipTolerance);

// q_prev * exp(eta * w_hat), elementwise.
LayerTable UnconstrainedStep(const LayerTable& q_prev, const LayerTable& w_hat,
                             double eta);

// sum q log(q / ref) - q + ref, with 0 log 0 = 0. Infinite if q > 0 where
// ref = 0.
double UnnormalizedKl(const LayerTable& q, const LayerTable& ref);

struct ProjectionOptions {
  double tol = 1e-8;
  int max_sweeps = 100000;
};

struct ProjectionResult {
  LayerTable q;
  // Duality gap of the final dual iterate; the primal point is optimal for
  // the constraint values it attains.
  double gap = 0.0;
  double max_violation = 0.0;
  int sweeps = 0;
  // Dual Newton iterations taken after coordinate ascent stalled.
  int newton_steps = 0;
};

class ProjectionError : public std::runtime_error {
 public:
  ProjectionError(const std::string& what, ProjectionResult best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const ProjectionResult& best() const { return best_; }

 private:
  ProjectionResult best_;
};

// argmin over Q of UnnormalizedKl(q, q_tilde) by Hildreth's method: cyclic
// exact KL projections onto each row-sum equality and each dominance
// half-space, with the dual multipliers of the half-spaces clamped at zero.
// When the sweeps stall on an ill-conditioned input, a projected Newton
// method on the same dual takes over periodically. Zero cells of q_tilde stay zero. Throws ProjectionError if the gap and the
// constraint violation do not both fall below tol within max_sweeps, and
// std::invalid_argument if Q restricted to the support of q_tilde is empty.
ProjectionResult ProjectToQ(const LayerTable& q_tilde,
                            const ProjectionOptions& options = {});

// A monotone bidding policy: an initial distribution over slot-0 levels and,
// for each transition m -> m+1, a D x D row-stochastic matrix whose row b
// is supported on levels <= b.
struct Policy {
  std::vector<double> initial;
  std::vector<LayerTable> transitions;

  int units() const { return static_cast<int>(transitions.size()) + 1; }
  int grid_size() const { return static_cast<int>(initial.size()); }
};

// Uniform over admissible successors; caps[m] is the highest level allowed in
// slot m (non-increasing in m).
Policy UniformPolicy(std::span<const int> caps, int grid_size);

// Greedy monotone transport from q_m to q_{m+1}: sources are visited from
// the highest level down and each fills the highest unfilled sinks at or
// below it. Rows with no source mass move to min(b, caps[m+1]). Throws
// std::invalid_argument if dominance fails by more than tol.
Policy RecoverPolicy(const LayerTable& q, std::span<const int> caps,
                     double tol = kMembershipTolerance);

// q_0 = initial; q_{m+1}(b) = sum_{b' >= b} q_m(b') pi_m(b', b).
LayerTable InducedMarginals(const Policy& policy);

BidVector PolicySample(const Policy& policy, Rng& rng);

// Highest IR level per slot.
std::vector<int> IrCaps(const BidGrid& grid, const ValuationProfile& valuation);

LearnerConfig DefaultOmdConfig(const BidGrid& grid,
                               const ValuationProfile& valuation,
                               Feedback feedback, Estimator estimator,
                               int rounds);

// Floor applied to q before dividing by it in the bandit estimator.
inline constexpr double kOmdProbabilityFloor = 1e-12;

class OmdBidder : public Bidder {
 public:
  OmdBidder(const BidGrid& grid, ValuationProfile valuation,
            LearnerConfig config, std::uint64_t seed,
            ProjectionOptions projection = {});

  int demand() const override { return valuation_.units(); }
  const ValuationProfile& valuation() const override { return valuation_; }
  BidVector Act() override;
  void Observe(const RoundFeedback& feedback) override;

  const LayerTable& occupancy() const { return q_; }
  const Policy& policy() const { return policy_; }
  int last_sweeps() const { return last_sweeps_; }

  // Reward estimate the next Observe() would use; exposed for testing.
  LayerTable EstimateRewards(const RoundFeedback& feedback,
                             const BidVector& played) const;

 private:
  BidGrid grid_;
  ValuationProfile valuation_;
  LearnerConfig config_;
  ProjectionOptions projection_;
  Rng rng_;
  std::vector<int> caps_;
  Policy policy_;
  LayerTable q_;
  BidVector last_bid_;
  int last_sweeps_ = 0;
};

}  // namespace pab

#endif  // PAB_OMD_H_
