#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file simplex.hpp
 * @brief Numerics on the finite candidate simplex.
 *
 * Temperature softmax, KL divergence, policy-weighted reward centering and the
 * reward-guided Boltzmann target
 *
 *     q = softmax((s + eta * (r - <p, r>)) / tau),   p = softmax(s / tau).
 *
 * The same target is the maximizer over the simplex of
 *
 *     <u, r> - (tau / eta) * KL(u || p),
 *
 * which kl_prox_oracle() solves numerically by exponentiated-gradient ascent
 * without touching the closed form. All arithmetic is double precision.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddorm/errors.hpp"

namespace ddorm {

inline constexpr double kSimplexSumTolerance = 1e-12;

/// Policy scores for K candidates together with the softmax temperature.
class ScoreVector {
 public:
  ScoreVector(std::vector<double> scores, double temperature)
      : scores_(std::move(scores)), temperature_(temperature) {
    detail::require(scores_.size() >= 2, "ScoreVector: need at least two candidates");
    detail::require(std::isfinite(temperature_) && temperature_ > 0.0,
                    "ScoreVector: temperature must be finite and > 0");
    for (double s : scores_) detail::require(std::isfinite(s), "ScoreVector: non-finite score");
  }

  std::span<const double> scores() const noexcept { return scores_; }
  double operator[](std::size_t i) const { return scores_[i]; }
  double temperature() const noexcept { return temperature_; }
  std::size_t size() const noexcept { return scores_.size(); }

 private:
  std::vector<double> scores_;
  double temperature_;
};

/// A probability vector on the K-simplex.
class DecisionDistribution {
 public:
  explicit DecisionDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    detail::require(probs_.size() >= 2, "DecisionDistribution: need at least two entries");
    double total = 0.0;
    for (double v : probs_) {
      detail::require(std::isfinite(v) && v >= 0.0, "DecisionDistribution: entries must be finite and >= 0");
      total += v;
    }
    detail::require(std::abs(total - 1.0) <= kSimplexSumTolerance,
                    "DecisionDistribution: entries must sum to 1");
  }

  std::span<const double> probs() const noexcept { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::size_t size() const noexcept { return probs_.size(); }

  friend bool operator==(const DecisionDistribution&, const DecisionDistribution&) = default;

 private:
  std::vector<double> probs_;
};

/// Reward-model scores, one per candidate.
class RewardVector {
 public:
  explicit RewardVector(std::vector<double> rewards) : rewards_(std::move(rewards)) {
    detail::require(!rewards_.empty(), "RewardVector: empty");
    for (double r : rewards_) detail::require(std::isfinite(r), "RewardVector: non-finite reward");
  }

  std::span<const double> rewards() const noexcept { return rewards_; }
  double operator[](std::size_t i) const { return rewards_[i]; }
  std::size_t size() const noexcept { return rewards_.size(); }

 private:
  std::vector<double> rewards_;
};

/// Rewards shifted by their expectation under the producing distribution.
struct CenteredReward {
  double baseline = 0.0;
  std::vector<double> centered;
};

/// Decision step size and temperature for one improvement step. eta = 0 is the identity update.
struct DdormStepParams {
  double eta = 1.0;
  double tau = 1.0;

  void validate() const {
    detail::require(std::isfinite(eta) && eta >= 0.0, "DdormStepParams: eta must be finite and >= 0");
    detail::require(std::isfinite(tau) && tau > 0.0, "DdormStepParams: tau must be finite and > 0");
  }
};

namespace detail {

inline void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw InvalidInput(std::string(what) + ": length mismatch");
}

// exp(x_i/tau - max) normalized.
inline std::vector<double> stable_softmax(std::span<const double> scores, double tau) {
  std::vector<double> out(scores.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = scores[i] / tau;
    top = std::max(top, out[i]);
  }
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

inline double log_sum_exp(std::span<const double> values) {
  const double top = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += std::exp(v - top);
  return top + std::log(total);
}

}  // namespace detail

/// p_i = exp(s_i / tau) / sum_j exp(s_j / tau), evaluated with max subtraction.
inline DecisionDistribution softmax_distribution(const ScoreVector& s) {
  return DecisionDistribution(detail::stable_softmax(s.scores(), s.temperature()));
}

/**
 * KL(u || p) = sum_i u_i ln(u_i / p_i) with 0 ln 0 = 0.
 *
 * Returns +infinity when u puts mass where p has none. Softmax-produced p is
 * strictly positive, so an infinite result points at a caller bug.
 */
inline double kl_divergence(const DecisionDistribution& u, const DecisionDistribution& p) {
  detail::require_same_size(u.size(), p.size(), "kl_divergence");
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] == 0.0) continue;
    if (p[i] == 0.0) return std::numeric_limits<double>::infinity();
    total += u[i] * std::log(u[i] / p[i]);
  }
  // Rounding can leave a -1e-17 residue at u == p.
  return std::max(total, 0.0);
}

/// Shannon entropy -sum u_i ln u_i.
inline double entropy(const DecisionDistribution& u) {
  double total = 0.0;
  for (double v : u.probs())
    if (v > 0.0) total -= v * std::log(v);
  return total;
}

inline double expected_reward(const DecisionDistribution& u, const RewardVector& r) {
  detail::require_same_size(u.size(), r.size(), "expected_reward");
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) total += u[i] * r[i];
  return total;
}

/// baseline = <p, r>, centered_i = r_i - baseline.
inline CenteredReward center_rewards(const DecisionDistribution& p, const RewardVector& r) {
  detail::require_same_size(p.size(), r.size(), "center_rewards");
  CenteredReward out;
  out.baseline = expected_reward(p, r);
  out.centered.resize(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out.centered[i] = r[i] - out.baseline;
  return out;
}

/**
 * Reward-guided target distribution.
 *
 * p is recomputed from s on every call; the rewards are centered under that p
 * and added to the scores with step eta before a second softmax. The score
 * temperature must equal params.tau.
 */
inline DecisionDistribution ddorm_target(const ScoreVector& s, const RewardVector& r,
                                         const DdormStepParams& params) {
  params.validate();
  detail::require_same_size(s.size(), r.size(), "ddorm_target");
  detail::require(s.temperature() == params.tau, "ddorm_target: score temperature differs from params.tau");
  const DecisionDistribution p = softmax_distribution(s);
  const CenteredReward centered = center_rewards(p, r);
  std::vector<double> stepped(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) stepped[i] = s[i] + params.eta * centered.centered[i];
  return DecisionDistribution(detail::stable_softmax(stepped, params.tau));
}

/// <u, r> - (tau / eta) KL(u || p). Requires eta > 0.
inline double proximal_objective(const DecisionDistribution& u, const DecisionDistribution& p,
                                 const RewardVector& r, const DdormStepParams& params) {
  params.validate();
  detail::require(params.eta > 0.0, "proximal_objective: eta must be > 0");
  return expected_reward(u, r) - (params.tau / params.eta) * kl_divergence(u, p);
}

struct ProxOracleOptions {
  double max_step = 0.1;
  std::size_t max_iterations = 100000;
  /// Dense-grid certificate for K <= 3; the grid spacing is 1 / grid_resolution.
  bool grid_check = true;
  std::size_t grid_resolution = 1000;
};

namespace detail {

// Best objective over the lattice {u : u_i = n_i / resolution, sum n_i = resolution}, K <= 3.
inline double simplex_grid_best(const DecisionDistribution& p, const RewardVector& r,
                                const DdormStepParams& params, std::size_t resolution) {
  const std::size_t k = p.size();
  const double step = 1.0 / static_cast<double>(resolution);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> u(k);
  auto evaluate = [&] {
    double value = 0.0;
    double kl = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      value += u[i] * r[i];
      if (u[i] > 0.0) {
        if (p[i] == 0.0) return;
        kl += u[i] * std::log(u[i] / p[i]);
      }
    }
    best = std::max(best, value - (params.tau / params.eta) * kl);
  };
  if (k == 2) {
    for (std::size_t a = 0; a <= resolution; ++a) {
      u[0] = static_cast<double>(a) * step;
      u[1] = static_cast<double>(resolution - a) * step;
      evaluate();
    }
  } else {
    for (std::size_t a = 0; a <= resolution; ++a) {
      for (std::size_t b = 0; a + b <= resolution; ++b) {
        u[0] = static_cast<double>(a) * step;
        u[1] = static_cast<double>(b) * step;
        u[2] = static_cast<double>(resolution - a - b) * step;
        evaluate();
      }
    }
  }
  return best;
}

}  // namespace detail

/**
 * Numerical maximizer of <u, r> - (tau / eta) KL(u || p) over the simplex.
 *
 * Multiplicative-weights ascent in log space starting from u = p. The step is
 * min(max_step, eta / (2 tau)) so the log-space iteration contracts for every
 * eta/tau ratio. Terminates once the spread of the objective gradient over the
 * support of p is at most tol. For K <= 3 the result is additionally certified
 * against a dense simplex grid: no grid point may beat it by more than tol.
 *
 * Throws ConvergenceFailure (carrying the last iterate) if the budget runs out
 * or the grid certificate fails.
 */
inline DecisionDistribution kl_prox_oracle(const DecisionDistribution& p, const RewardVector& r,
                                           const DdormStepParams& params, double tol,
                                           const ProxOracleOptions& options = {}) {
  params.validate();
  detail::require(params.eta > 0.0, "kl_prox_oracle: eta must be > 0");
  detail::require(std::isfinite(tol) && tol > 0.0, "kl_prox_oracle: tol must be > 0");
  detail::require_same_size(p.size(), r.size(), "kl_prox_oracle");

  const std::size_t k = p.size();
  const double penalty = params.tau / params.eta;
  const double step = std::min(options.max_step, 0.5 / penalty);

  // Coordinates outside the support of p stay at zero mass.
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < k; ++i)
    if (p[i] > 0.0) support.push_back(i);

  std::vector<double> log_p(support.size());
  std::vector<double> log_u(support.size());
  for (std::size_t j = 0; j < support.size(); ++j) log_p[j] = log_u[j] = std::log(p[support[j]]);

  auto materialize = [&] {
    std::vector<double> u(k, 0.0);
    const double norm = detail::log_sum_exp(log_u);
    for (std::size_t j = 0; j < support.size(); ++j) u[support[j]] = std::exp(log_u[j] - norm);
    return u;
  };

  std::vector<double> grad(support.size());
  bool converged = false;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t j = 0; j < support.size(); ++j) {
      grad[j] = r[support[j]] - penalty * (log_u[j] - log_p[j]);
      lo = std::min(lo, grad[j]);
      hi = std::max(hi, grad[j]);
    }
    if (hi - lo <= tol) {
      converged = true;
      break;
    }
    for (std::size_t j = 0; j < support.size(); ++j) log_u[j] += step * grad[j];
    const double norm = detail::log_sum_exp(log_u);
    for (double& v : log_u) v -= norm;
  }

  std::vector<double> u = materialize();
  if (!converged)
    throw ConvergenceFailure("kl_prox_oracle: iteration budget exhausted", std::move(u));

  DecisionDistribution result(u);
  if (options.grid_check && k <= 3) {
    const double grid_best = detail::simplex_grid_best(p, r, params, options.grid_resolution);
    if (proximal_objective(result, p, r, params) < grid_best - tol)
      throw ConvergenceFailure("kl_prox_oracle: grid point beats the ascent iterate", std::move(u));
  }
  return result;
}

}  // namespace ddorm
