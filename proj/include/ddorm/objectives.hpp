#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file objectives.hpp
 * @brief Distillation cross-entropy, the DPO pairwise loss and the
 *        KL-regularized reward objective evaluated over a candidate set.
 */

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "ddorm/errors.hpp"
#include "ddorm/simplex.hpp"

namespace ddorm {

inline constexpr double kDefaultDpoBeta = 0.1;

/// Numerically stable log(1 + exp(x)).
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

/// Logistic function, stable for large |x|.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/**
 * Cross-entropy -sum_i q_i ln p_i of the policy distribution against a fixed target.
 * Returns +infinity when q has mass where p_theta is zero.
 */
inline double ddorm_loss(const DecisionDistribution& q, const DecisionDistribution& p_theta) {
  detail::require_same_size(q.size(), p_theta.size(), "ddorm_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] == 0.0) continue;
    if (p_theta[i] == 0.0) return std::numeric_limits<double>::infinity();
    total -= q[i] * std::log(p_theta[i]);
  }
  return total;
}

/// d/ds_i of ddorm_loss(q, softmax(s / tau)) with q held constant: (p_i - q_i) / tau.
inline std::vector<double> ddorm_loss_grad(const DecisionDistribution& q, const ScoreVector& s) {
  detail::require_same_size(q.size(), s.size(), "ddorm_loss_grad");
  const DecisionDistribution p = softmax_distribution(s);
  std::vector<double> grad(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) grad[i] = (p[i] - q[i]) / s.temperature();
  return grad;
}

/// Sequence-level log-probabilities of a preference pair under the policy and the reference.
struct DpoInputs {
  double policy_logp_chosen = 0.0;
  double policy_logp_rejected = 0.0;
  double ref_logp_chosen = 0.0;
  double ref_logp_rejected = 0.0;
  double beta = kDefaultDpoBeta;

  void validate() const {
    detail::require(std::isfinite(policy_logp_chosen) && std::isfinite(policy_logp_rejected) &&
                        std::isfinite(ref_logp_chosen) && std::isfinite(ref_logp_rejected),
                    "DpoInputs: log-probabilities must be finite");
    detail::require(std::isfinite(beta) && beta > 0.0, "DpoInputs: beta must be > 0");
  }

  /// beta * [(chosen - rejected) under the policy - (chosen - rejected) under the reference]
  double logit() const {
    return beta * ((policy_logp_chosen - policy_logp_rejected) - (ref_logp_chosen - ref_logp_rejected));
  }
};

/// -ln sigmoid(z), evaluated as softplus(-z).
inline double dpo_loss(const DpoInputs& inp) {
  inp.validate();
  return softplus(-inp.logit());
}

/// Gradient of dpo_loss with respect to (policy_logp_chosen, policy_logp_rejected).
inline std::pair<double, double> dpo_loss_grad(const DpoInputs& inp) {
  inp.validate();
  const double g = inp.beta * sigmoid(-inp.logit());
  return {-g, g};
}

struct RlhfDiagnostic {
  double expected_reward = 0.0;
  double kl_to_ref = 0.0;
  double lambda = 0.0;
  double objective = 0.0;
};

/// E_{p_theta}[r] - lambda * KL(p_theta || p_ref). Evaluation only.
inline RlhfDiagnostic rlhf_diagnostic(const DecisionDistribution& p_theta, const DecisionDistribution& p_ref,
                                      const RewardVector& r, double lambda) {
  detail::require(std::isfinite(lambda) && lambda >= 0.0, "rlhf_diagnostic: lambda must be >= 0");
  RlhfDiagnostic d;
  d.expected_reward = expected_reward(p_theta, r);
  d.kl_to_ref = kl_divergence(p_theta, p_ref);
  d.lambda = lambda;
  // 0 * inf stays 0 for lambda == 0.
  d.objective = lambda == 0.0 ? d.expected_reward : d.expected_reward - lambda * d.kl_to_ref;
  return d;
}

}  // namespace ddorm
