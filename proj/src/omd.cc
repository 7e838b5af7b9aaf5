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

#include "pab/omd.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace pab {
namespace {

struct Residuals {
  double gap = 0.0;
  double violation = 0.0;
};

// Constraint violation and duality gap for the current primal iterate, which
// always has the form q_tilde * exp(dual potential).
Residuals Measure(const LayerTable& q, std::span<const double> mu,
                  const LayerTable& lambda) {
  const int units = q.units();
  const int size = q.grid_size();
  Residuals r;
  std::vector<double> prev_cdf(size), cdf(size);
  for (int m = 0; m < units; ++m) {
    double acc = 0.0;
    for (int b = 0; b < size; ++b) cdf[b] = acc += q(m, b);
    const double excess = acc - 1.0;
    r.gap += mu[m] * excess;
    r.violation = std::max(r.violation, std::abs(excess));
    if (m > 0) {
      for (int b = 0; b + 1 < size; ++b) {
        const double slack = cdf[b] - prev_cdf[b];
        r.gap += lambda(m - 1, b) * slack;
        r.violation = std::max(r.violation, -slack);
      }
    }
    std::swap(prev_cdf, cdf);
  }
  return r;
}

// Hildreth sweeps before the first switch to dual Newton, and the interval
// between later attempts. Coordinate ascent is cheap and usually done within
// a few sweeps, but it crawls when nearly tight constraints act on cells of
// tiny mass.
constexpr int kNewtonStart = 64;
constexpr int kNewtonInterval = 4096;
constexpr int kNewtonMaxIterations = 200;

// Dual variables are laid out as mu_0..mu_{M-1} followed by lambda(m, b) for
// m < M-1, b < D-1. Cell (m, b) of the primal is
//   q_tilde(m, b) * exp(mu_m + sum_{b' >= b} lambda(m-1, b')
//                              - sum_{b' >= b} lambda(m, b')).
class DualProblem {
 public:
  explicit DualProblem(const LayerTable& q_tilde)
      : q_tilde_(q_tilde),
        units_(q_tilde.units()),
        size_(q_tilde.grid_size()),
        dims_(units_ + std::max(units_ - 1, 0) * (size_ - 1)) {}

  int dims() const { return dims_; }
  int LambdaIndex(int m, int b) const { return units_ + m * (size_ - 1) + b; }

  // Fills q and returns the dual objective sum(mu) - sum(q), or -inf on
  // overflow.
  double Evaluate(std::span<const double> y, LayerTable& q) const {
    std::vector<double> prev(size_, 0.0), cur(size_, 0.0);
    double objective = 0.0;
    for (int m = 0; m < units_; ++m) {
      std::fill(cur.begin(), cur.end(), 0.0);
      if (m + 1 < units_) {
        for (int b = size_ - 2; b >= 0; --b) {
          cur[b] = cur[b + 1] + y[LambdaIndex(m, b)];
        }
      }
      objective += y[m];
      for (int b = 0; b < size_; ++b) {
        const double base = q_tilde_(m, b);
        q(m, b) = base > 0.0 ? base * std::exp(y[m] + prev[b] - cur[b]) : 0.0;
        objective -= q(m, b);
      }
      std::swap(prev, cur);
    }
    return std::isfinite(objective) ? objective
                                    : -std::numeric_limits<double>::infinity();
  }

  void Gradient(const LayerTable& q, std::vector<double>& grad) const {
    grad.assign(dims_, 0.0);
    std::vector<double> prev_cdf(size_), cdf(size_);
    for (int m = 0; m < units_; ++m) {
      double acc = 0.0;
      for (int b = 0; b < size_; ++b) cdf[b] = acc += q(m, b);
      grad[m] = 1.0 - acc;
      if (m > 0) {
        for (int b = 0; b + 1 < size_; ++b) {
          grad[LambdaIndex(m - 1, b)] = prev_cdf[b] - cdf[b];
        }
      }
      std::swap(prev_cdf, cdf);
    }
  }

  // Negated dual Hessian: sum over cells of q * a a^T with a the cell's
  // exponent coefficients.
  void Curvature(const LayerTable& q, std::vector<double>& h) const {
    h.assign(static_cast<std::size_t>(dims_) * dims_, 0.0);
    std::vector<int> idx;
    std::vector<double> coef;
    for (int m = 0; m < units_; ++m) {
      for (int b = 0; b < size_; ++b) {
        const double w = q(m, b);
        if (w == 0.0) continue;
        idx.assign(1, m);
        coef.assign(1, 1.0);
        for (int c = b; c + 1 < size_; ++c) {
          if (m > 0) {
            idx.push_back(LambdaIndex(m - 1, c));
            coef.push_back(1.0);
          }
          if (m + 1 < units_) {
            idx.push_back(LambdaIndex(m, c));
            coef.push_back(-1.0);
          }
        }
        for (std::size_t i = 0; i < idx.size(); ++i) {
          for (std::size_t j = 0; j < idx.size(); ++j) {
            h[static_cast<std::size_t>(idx[i]) * dims_ + idx[j]] +=
                w * coef[i] * coef[j];
          }
        }
      }
    }
  }

 private:
  const LayerTable& q_tilde_;
  int units_;
  int size_;
  int dims_;
};

// Solves a x = rhs for symmetric positive definite a (n x n, overwritten).
bool CholeskySolve(std::vector<double>& a, int n, std::vector<double>& rhs) {
  for (int j = 0; j < n; ++j) {
    double d = a[static_cast<std::size_t>(j) * n + j];
    for (int k = 0; k < j; ++k) {
      d -= a[static_cast<std::size_t>(j) * n + k] *
           a[static_cast<std::size_t>(j) * n + k];
    }
    if (!(d > 0.0)) return false;
    d = std::sqrt(d);
    a[static_cast<std::size_t>(j) * n + j] = d;
    for (int i = j + 1; i < n; ++i) {
      double s = a[static_cast<std::size_t>(i) * n + j];
      for (int k = 0; k < j; ++k) {
        s -= a[static_cast<std::size_t>(i) * n + k] *
             a[static_cast<std::size_t>(j) * n + k];
      }
      a[static_cast<std::size_t>(i) * n + j] = s / d;
    }
  }
  for (int i = 0; i < n; ++i) {
    double s = rhs[i];
    for (int k = 0; k < i; ++k) s -= a[static_cast<std::size_t>(i) * n + k] * rhs[k];
    rhs[i] = s / a[static_cast<std::size_t>(i) * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = rhs[i];
    for (int k = i + 1; k < n; ++k) s -= a[static_cast<std::size_t>(k) * n + i] * rhs[k];
    rhs[i] = s / a[static_cast<std::size_t>(i) * n + i];
  }
  return true;
}

// Projected Newton ascent on the dual (lambda >= 0), with an
// epsilon-active set and an Armijo search along the projection arc. Starts
// from and writes back (mu, lambda, q). Returns true once the residuals meet
// `tol`; on false the last accepted iterate is kept, which is still a valid
// dual point.
bool DualNewton(const LayerTable& q_tilde, std::vector<double>& mu,
                LayerTable& lambda, LayerTable& q, double tol,
                int& iterations) {
  const DualProblem problem(q_tilde);
  const int units = q_tilde.units();
  const int n = problem.dims();
  std::vector<double> y(n);
  const int size = q_tilde.grid_size();
  std::copy(mu.begin(), mu.end(), y.begin());
  for (int m = 0; m + 1 < units; ++m) {
    for (int b = 0; b + 1 < size; ++b) y[problem.LambdaIndex(m, b)] = lambda(m, b);
  }
  auto write_back = [&](const std::vector<double>& point) {
    std::copy(point.begin(), point.begin() + units, mu.begin());
    for (int m = 0; m + 1 < units; ++m) {
      for (int b = 0; b + 1 < size; ++b) {
        lambda(m, b) = point[problem.LambdaIndex(m, b)];
      }
    }
  };

  double value = problem.Evaluate(y, q);
  if (!std::isfinite(value)) return false;
  std::vector<double> grad, h, dir(n), trial(n);
  std::vector<int> free_vars;
  std::vector<std::uint8_t> is_free(n);
  LayerTable trial_q(q.units(), q.grid_size());
  for (int it = 0; it < kNewtonMaxIterations; ++it) {
    write_back(y);
    const Residuals r = Measure(q, mu, lambda);
    if (std::abs(r.gap) <= tol && r.violation <= tol) return true;

    problem.Gradient(q, grad);
    problem.Curvature(q, h);
    double stationarity = 0.0;
    for (int i = 0; i < n; ++i) {
      const double moved = i < units ? grad[i] : std::max(y[i] + grad[i], 0.0) - y[i];
      stationarity = std::max(stationarity, std::abs(moved));
    }
    const double eps = std::min(1e-3, stationarity);
    free_vars.clear();
    for (int i = 0; i < n; ++i) {
      is_free[i] = i < units || y[i] > eps || grad[i] > 0.0;
      if (is_free[i]) free_vars.push_back(i);
    }
    const int f = static_cast<int>(free_vars.size());
    double max_diag = 1.0;
    for (int i : free_vars) {
      max_diag = std::max(max_diag, h[static_cast<std::size_t>(i) * n + i]);
    }
    std::vector<double> sub, rhs;
    bool solved = false;
    for (double tau = 1e-13 * max_diag; !solved && tau < max_diag; tau *= 100) {
      sub.assign(static_cast<std::size_t>(f) * f, 0.0);
      rhs.resize(f);
      for (int a = 0; a < f; ++a) {
        rhs[a] = grad[free_vars[a]];
        for (int b = 0; b < f; ++b) {
          sub[static_cast<std::size_t>(a) * f + b] =
              h[static_cast<std::size_t>(free_vars[a]) * n + free_vars[b]];
        }
        sub[static_cast<std::size_t>(a) * f + a] += tau;
      }
      solved = CholeskySolve(sub, f, rhs);
    }
    if (!solved) return false;
    for (int i = 0; i < n; ++i) {
      if (!is_free[i]) {
        dir[i] = grad[i] / std::max(h[static_cast<std::size_t>(i) * n + i], 1e-12);
      }
    }
    for (int a = 0; a < f; ++a) dir[free_vars[a]] = rhs[a];

    bool accepted = false;
    for (double step = 1.0; step > 1e-12; step *= 0.5) {
      double predicted = 0.0;
      for (int i = 0; i < n; ++i) {
        trial[i] = y[i] + step * dir[i];
        if (i >= units) trial[i] = std::max(trial[i], 0.0);
        predicted += grad[i] * (trial[i] - y[i]);
      }
      const double trial_value = problem.Evaluate(trial, trial_q);
      if (trial_value >= value + 1e-4 * predicted && trial_value >= value) {
        y.swap(trial);
        std::swap(q, trial_q);
        value = trial_value;
        accepted = true;
        break;
      }
    }
    ++iterations;
    if (!accepted) break;
  }
  write_back(y);
  const Residuals r = Measure(q, mu, lambda);
  return std::abs(r.gap) <= tol && r.violation <= tol;
}

}  // namespace

std::vector<QViolation> CheckQMembership(const LayerTable& q, double tol) {
  std::vector<QViolation> out;
  const int units = q.units();
  const int size = q.grid_size();
  std::vector<double> prev_cdf(size), cdf(size);
  for (int m = 0; m < units; ++m) {
    double acc = 0.0;
    for (int b = 0; b < size; ++b) {
      if (q(m, b) < -tol) {
        out.push_back({QViolation::Kind::kNegative, m, b, -q(m, b)});
      }
      cdf[b] = acc += q(m, b);
    }
    if (std::abs(acc - 1.0) > tol) {
      out.push_back({QViolation::Kind::kRowSum, m, -1, std::abs(acc - 1.0)});
    }
    if (m > 0) {
      for (int b = 0; b < size; ++b) {
        const double deficit = prev_cdf[b] - cdf[b];
        if (deficit > tol) {
          out.push_back({QViolation::Kind::kDominance, m - 1, b, deficit});
        }
      }
    }
    std::swap(prev_cdf, cdf);
  }
  return out;
}

LayerTable UnconstrainedStep(const LayerTable& q_prev, const LayerTable& w_hat,
                             double eta) {
  LayerTable out = q_prev;
  for (int m = 0; m < out.units(); ++m) {
    for (int b = 0; b < out.grid_size(); ++b) {
      if (w_hat(m, b) != 0.0) out(m, b) *= std::exp(eta * w_hat(m, b));
    }
  }
  return out;
}

double UnnormalizedKl(const LayerTable& q, const LayerTable& ref) {
  double total = 0.0;
  for (std::size_t i = 0; i < q.data().size(); ++i) {
    const double a = q.data()[i];
    const double b = ref.data()[i];
    if (a > 0.0) {
      if (!(b > 0.0)) return std::numeric_limits<double>::infinity();
      total += a * std::log(a / b) - a + b;
    } else {
      total += b;
    }
  }
  return total;
}

ProjectionResult ProjectToQ(const LayerTable& q_tilde,
                            const ProjectionOptions& options) {
  const int units = q_tilde.units();
  const int size = q_tilde.grid_size();
  for (double x : q_tilde.data()) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument("projection input must be finite and >= 0");
    }
  }
  for (int m = 0; m < units; ++m) {
    if (!(q_tilde(m, 0) > 0.0)) {
      // Every member of Q with this support would need CDF_m(0) = 0 for all
      // later slots; level 0 is always admissible so it must carry mass.
      throw std::invalid_argument("projection input needs mass at level 0");
    }
  }

  LayerTable q = q_tilde;
  std::vector<double> mu(units, 0.0);
  LayerTable lambda(std::max(units - 1, 0), size);
  std::vector<double> delta(size);

  ProjectionResult best;
  int newton_steps = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    for (int m = 0; m < units; ++m) {
      double sum = 0.0;
      for (double x : q.row(m)) sum += x;
      for (double& x : q.row(m)) x /= sum;
      mu[m] -= std::log(sum);
    }
    // Constraint (m, b) scales levels <= b of slot m+1 by e^d and of slot m
    // by e^-d. Visiting b upward, the prefix sums needed at b are obtained
    // from those at b-1, and the scalings are applied afterwards in one
    // downward pass.
    for (int m = 0; m + 1 < units; ++m) {
      double upper = 0.0;  // CDF of slot m.
      double lower = 0.0;  // CDF of slot m+1.
      for (int b = 0; b + 1 < size; ++b) {
        upper += q(m, b);
        lower += q(m + 1, b);
        double d = -lambda(m, b);
        if (upper > 0.0) d = std::max(0.5 * std::log(upper / lower), d);
        delta[b] = d;
        lambda(m, b) += d;
        const double factor = std::exp(d);
        lower *= factor;
        upper /= factor;
      }
      double scale = 1.0;
      for (int b = size - 2; b >= 0; --b) {
        scale *= std::exp(delta[b]);
        q(m + 1, b) *= scale;
        q(m, b) /= scale;
      }
    }

    if (sweep == kNewtonStart ||
        (sweep > kNewtonStart && sweep % kNewtonInterval == 0)) {
      DualNewton(q_tilde, mu, lambda, q, options.tol, newton_steps);
    }

    const Residuals r = Measure(q, mu, lambda);
    const double score = std::max(std::abs(r.gap), r.violation);
    if (score < best_score) {
      best_score = score;
      best.q = q;
      best.gap = r.gap;
      best.max_violation = r.violation;
      best.sweeps = sweep;
      best.newton_steps = newton_steps;
    }
    if (std::abs(r.gap) <= options.tol && r.violation <= options.tol) {
      return {q, r.gap, r.violation, sweep, newton_steps};
    }
  }
  throw ProjectionError("KL projection did not converge", std::move(best));
}

Policy UniformPolicy(std::span<const int> caps, int grid_size) {
  const int units = static_cast<int>(caps.size());
  Policy policy;
  policy.initial.assign(grid_size, 0.0);
  for (int b = 0; b <= caps[0]; ++b) policy.initial[b] = 1.0 / (caps[0] + 1);
  for (int m = 0; m + 1 < units; ++m) {
    LayerTable pi(grid_size, grid_size);
    for (int from = 0; from < grid_size; ++from) {
      const int top = std::min(from, caps[m + 1]);
      for (int to = 0; to <= top; ++to) pi(from, to) = 1.0 / (top + 1);
    }
    policy.transitions.push_back(std::move(pi));
  }
  return policy;
}

Policy RecoverPolicy(const LayerTable& q, std::span<const int> caps,
                     double tol) {
  const int units = q.units();
  const int size = q.grid_size();
  if (static_cast<int>(caps.size()) != units) {
    throw std::invalid_argument("one cap per slot is required");
  }
  // Work on row-normalized copies so that row-sum error does not masquerade
  // as a dominance violation.
  LayerTable p = q;
  for (int m = 0; m < units; ++m) {
    double sum = 0.0;
    for (double& x : p.row(m)) sum += (x = std::max(x, 0.0));
    if (!(sum > 0.0)) throw std::invalid_argument("occupancy row is empty");
    for (double& x : p.row(m)) x /= sum;
  }
  Policy policy;
  policy.initial.assign(p.row(0).begin(), p.row(0).end());
  std::vector<double> sink(size);
  for (int m = 0; m + 1 < units; ++m) {
    LayerTable pi(size, size);
    for (int b = 0; b < size; ++b) sink[b] = p(m + 1, b);
    int j = size - 1;
    double stranded = 0.0;  // Sink mass skipped above the current source.
    for (int from = size - 1; from >= 0; --from) {
      double mass = p(m, from);
      while (j > from) stranded += sink[j--];
      if (stranded > tol) {
        throw std::invalid_argument("occupancy measure violates dominance");
      }
      if (mass <= 0.0) {
        pi(from, std::min(from, caps[m + 1])) = 1.0;
        continue;
      }
      const double source = mass;
      while (mass > 0.0 && j >= 0) {
        const double take = std::min(mass, sink[j]);
        pi(from, j) += take;
        mass -= take;
        sink[j] -= take;
        if (sink[j] <= 0.0) --j;
      }
      // Rounding can leave a sliver of source mass once every sink is full.
      if (mass > 0.0) pi(from, std::max(j, 0)) += mass;
      for (int to = 0; to <= from; ++to) pi(from, to) /= source;
    }
    policy.transitions.push_back(std::move(pi));
  }
  return policy;
}

LayerTable InducedMarginals(const Policy& policy) {
  const int units = policy.units();
  const int size = policy.grid_size();
  LayerTable q(units, size);
  for (int b = 0; b < size; ++b) q(0, b) = policy.initial[b];
  for (int m = 0; m + 1 < units; ++m) {
    const LayerTable& pi = policy.transitions[m];
    for (int from = 0; from < size; ++from) {
      const double mass = q(m, from);
      if (mass == 0.0) continue;
      for (int to = 0; to <= from; ++to) q(m + 1, to) += mass * pi(from, to);
    }
  }
  return q;
}

BidVector PolicySample(const Policy& policy, Rng& rng) {
  BidVector bid{std::vector<int>(policy.units())};
  bid.levels[0] = SampleIndex(policy.initial, rng.Uniform());
  for (int m = 0; m + 1 < policy.units(); ++m) {
    bid.levels[m + 1] = SampleIndex(policy.transitions[m].row(bid[m]),
                                    rng.Uniform());
  }
  return bid;
}

std::vector<int> IrCaps(const BidGrid& grid,
                        const ValuationProfile& valuation) {
  std::vector<int> caps(valuation.units());
  for (int m = 0; m < valuation.units(); ++m) {
    caps[m] = grid.HighestAtMost(valuation[m]);
  }
  return caps;
}

LearnerConfig DefaultOmdConfig(const BidGrid& grid,
                               const ValuationProfile& valuation,
                               Feedback feedback, Estimator estimator,
                               int rounds) {
  LearnerConfig config;
  config.feedback = feedback;
  config.estimator = estimator;
  config.eta = EtaSchedule(feedback == Feedback::kFullInfo
                               ? EtaRule::kOmdFullInfo
                               : EtaRule::kOmdBandit,
                           valuation.units(), grid.size(), rounds);
  if (estimator == Estimator::kIx) {
    config.gamma =
        IxGammas(NodeWeightTable::ForValuation(grid, valuation), rounds);
  }
  return config;
}

// Row normalization and dominance residuals of a converged projection each
// stay within its tolerance, so their combined effect on the transport does
// too up to this factor.
constexpr double kRecoverySlack = 4.0;

OmdBidder::OmdBidder(const BidGrid& grid, ValuationProfile valuation,
                     LearnerConfig config, std::uint64_t seed,
                     ProjectionOptions projection)
    : grid_(grid),
      valuation_(std::move(valuation)),
      config_(std::move(config)),
      projection_(projection),
      rng_(seed),
      caps_(IrCaps(grid_, valuation_)),
      policy_(UniformPolicy(caps_, grid_.size())),
      q_(InducedMarginals(policy_)) {
  if (!(config_.eta >= 0.0) || !std::isfinite(config_.eta)) {
    throw std::invalid_argument("eta must be finite and nonnegative");
  }
  if (config_.estimator == Estimator::kIx &&
      static_cast<int>(config_.gamma.size()) != valuation_.units()) {
    throw std::invalid_argument("IX needs one gamma per slot");
  }
}

BidVector OmdBidder::Act() {
  last_bid_ = PolicySample(policy_, rng_);
  return last_bid_;
}

LayerTable OmdBidder::EstimateRewards(const RoundFeedback& feedback,
                                      const BidVector& played) const {
  const int units = valuation_.units();
  LayerTable w_hat(units, grid_.size());
  if (config_.feedback == Feedback::kFullInfo) {
    for (int m = 0; m < units; ++m) {
      for (int b = 0; b <= caps_[m]; ++b) {
        if (feedback.competing.Beats(b, m, feedback.tie)) {
          w_hat(m, b) = valuation_[m] - grid_.value(b);
        }
      }
    }
    return w_hat;
  }
  for (int m = 0; m < units; ++m) {
    const int b = played[m];
    if (m >= feedback.allocation) continue;
    const double gamma =
        config_.estimator == Estimator::kIx ? config_.gamma[m] : 0.0;
    const double prob = std::max(q_(m, b), kOmdProbabilityFloor);
    w_hat(m, b) = (valuation_[m] - grid_.value(b)) / (prob + gamma);
  }
  return w_hat;
}

void OmdBidder::Observe(const RoundFeedback& feedback) {
  const LayerTable w_hat = EstimateRewards(feedback, last_bid_);
  bool any = false;
  for (double x : w_hat.data()) any = any || x != 0.0;
  last_sweeps_ = 0;
  if (!any) return;
  ProjectionResult result =
      ProjectToQ(UnconstrainedStep(q_, w_hat, config_.eta), projection_);
  last_sweeps_ = result.sweeps;
  q_ = std::move(result.q);
  policy_ = RecoverPolicy(q_, caps_, kRecoverySlack * projection_.tol);
}

}  // namespace pab
