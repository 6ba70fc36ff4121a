#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file policy.hpp
 * @brief Toy scorers s_theta(x, y) standing in for a language model.
 *
 * TabularPolicy stores one free logit per (prompt, candidate); LinearPolicy
 * scores candidates by <weights, features>. Both expose a flat parameter
 * vector so trainers can accumulate gradients generically.
 */

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "ddorm/errors.hpp"
#include "ddorm/simplex.hpp"
#include "ddorm/world.hpp"

namespace ddorm {

class TabularPolicy {
 public:
  /// Zero logits, i.e. uniform decision distributions.
  TabularPolicy(std::size_t num_prompts, std::size_t num_candidates, double temperature)
      : TabularPolicy(num_prompts, num_candidates, std::vector<double>(num_prompts * num_candidates, 0.0),
                      temperature) {}

  TabularPolicy(std::size_t num_prompts, std::size_t num_candidates, std::vector<double> logits, double temperature)
      : num_prompts_(num_prompts), num_candidates_(num_candidates), logits_(std::move(logits)),
        temperature_(temperature) {
    detail::require(num_prompts_ >= 1 && num_candidates_ >= 1, "TabularPolicy: empty table");
    detail::require(logits_.size() == num_prompts_ * num_candidates_, "TabularPolicy: logit table has the wrong size");
    detail::require(std::isfinite(temperature_) && temperature_ > 0.0, "TabularPolicy: temperature must be > 0");
    for (double v : logits_) detail::require(std::isfinite(v), "TabularPolicy: non-finite logit");
  }

  std::size_t num_prompts() const noexcept { return num_prompts_; }
  std::size_t num_candidates() const noexcept { return num_candidates_; }
  double temperature() const noexcept { return temperature_; }

  double logit(std::size_t prompt, std::size_t candidate) const { return logits_[index(prompt, candidate)]; }

  std::span<const double> parameters() const noexcept { return logits_; }
  std::span<double> mutable_parameters() noexcept { return logits_; }

  std::size_t index(std::size_t prompt, std::size_t candidate) const {
    detail::require(prompt < num_prompts_, "TabularPolicy: prompt id out of range");
    detail::require(candidate < num_candidates_, "TabularPolicy: candidate id out of range");
    return prompt * num_candidates_ + candidate;
  }

  void check_world(const World& world) const {
    detail::require(world.num_prompts() == num_prompts_ && world.num_candidates() == num_candidates_,
                    "TabularPolicy: table shape does not match the world");
  }

 private:
  std::size_t num_prompts_;
  std::size_t num_candidates_;
  std::vector<double> logits_;
  double temperature_;
};

class LinearPolicy {
 public:
  LinearPolicy(std::vector<double> weights, double temperature)
      : weights_(std::move(weights)), temperature_(temperature) {
    detail::require(!weights_.empty(), "LinearPolicy: empty weight vector");
    detail::require(std::isfinite(temperature_) && temperature_ > 0.0, "LinearPolicy: temperature must be > 0");
    for (double w : weights_) detail::require(std::isfinite(w), "LinearPolicy: non-finite weight");
  }

  /// Weights ~ N(0, init_scale^2) drawn from `seed`.
  static LinearPolicy random(std::size_t dim, double temperature, std::uint64_t seed, double init_scale = 0.1) {
    detail::require(dim >= 1, "LinearPolicy: dim must be >= 1");
    detail::require(std::isfinite(init_scale) && init_scale >= 0.0, "LinearPolicy: init_scale must be >= 0");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> w(dim);
    for (double& v : w) v = init_scale * normal(rng);
    return LinearPolicy(std::move(w), temperature);
  }

  std::size_t dim() const noexcept { return weights_.size(); }
  double temperature() const noexcept { return temperature_; }
  std::span<const double> parameters() const noexcept { return weights_; }
  std::span<double> mutable_parameters() noexcept { return weights_; }

  void check_world(const World& world) const {
    detail::require(world.feature_dim() == weights_.size(), "LinearPolicy: weight dimension does not match features");
  }

 private:
  std::vector<double> weights_;
  double temperature_;
};

inline double score(const TabularPolicy& policy, std::size_t prompt, std::size_t candidate) {
  return policy.logit(prompt, candidate);
}

inline double score(const LinearPolicy& policy, std::span<const double> features) {
  detail::require(features.size() == policy.dim(), "LinearPolicy: feature dimension mismatch");
  return detail::dot(policy.parameters(), features);
}

inline double score(const TabularPolicy& policy, const World& world, std::size_t prompt, std::size_t candidate) {
  policy.check_world(world);
  return score(policy, prompt, candidate);
}

inline double score(const LinearPolicy& policy, const World& world, std::size_t prompt, std::size_t candidate) {
  return score(policy, world.features(prompt, candidate));
}

/// grad += coeff * d score(prompt, candidate) / d theta
inline void add_score_gradient(const TabularPolicy& policy, const World& world, std::size_t prompt,
                               std::size_t candidate, double coeff, std::span<double> grad) {
  policy.check_world(world);
  grad[policy.index(prompt, candidate)] += coeff;
}

inline void add_score_gradient(const LinearPolicy& policy, const World& world, std::size_t prompt,
                               std::size_t candidate, double coeff, std::span<double> grad) {
  policy.check_world(world);
  const auto f = world.features(prompt, candidate);
  for (std::size_t d = 0; d < f.size(); ++d) grad[d] += coeff * f[d];
}

/// Frozen copy of a policy, used as the DPO reference and the KL anchor.
template <class Policy>
class ReferenceSnapshot {
 public:
  ReferenceSnapshot(Policy policy, std::size_t step) : policy_(std::move(policy)), step_(step) {}

  const Policy& policy() const noexcept { return policy_; }
  std::size_t step() const noexcept { return step_; }
  double temperature() const noexcept { return policy_.temperature(); }
  std::span<const double> parameters() const noexcept { return policy_.parameters(); }

 private:
  Policy policy_;
  std::size_t step_;
};

template <class Policy>
double score(const ReferenceSnapshot<Policy>& ref, const World& world, std::size_t prompt, std::size_t candidate) {
  return score(ref.policy(), world, prompt, candidate);
}

template <class P>
concept ScoringPolicy = requires(const P& p, const World& w, std::size_t i, double c, std::span<double> g) {
  { score(p, w, i, i) } -> std::convertible_to<double>;
  { p.temperature() } -> std::convertible_to<double>;
  { p.parameters() } -> std::convertible_to<std::span<const double>>;
  add_score_gradient(p, w, i, i, c, g);
};

template <class Policy>
ReferenceSnapshot<Policy> snapshot_reference(const Policy& policy, std::size_t step = 0) {
  return ReferenceSnapshot<Policy>(policy, step);
}

/// Snapshotting a snapshot returns an identical copy.
template <class Policy>
ReferenceSnapshot<Policy> snapshot_reference(const ReferenceSnapshot<Policy>& snapshot) {
  return snapshot;
}

template <class Policy>
ScoreVector candidate_scores(const Policy& policy, const World& world, std::size_t prompt) {
  std::vector<double> s(world.num_candidates());
  for (std::size_t y = 0; y < s.size(); ++y) s[y] = score(policy, world, prompt, y);
  return ScoreVector(std::move(s), policy.temperature());
}

/// Softmax of the policy's K candidate scores at its own temperature.
template <class Policy>
DecisionDistribution candidate_distribution(const Policy& policy, const World& world, std::size_t prompt) {
  return softmax_distribution(candidate_scores(policy, world, prompt));
}

inline DecisionDistribution candidate_distribution(const TabularPolicy& policy, std::size_t prompt) {
  std::vector<double> s(policy.num_candidates());
  for (std::size_t y = 0; y < s.size(); ++y) s[y] = policy.logit(prompt, y);
  return softmax_distribution(ScoreVector(std::move(s), policy.temperature()));
}

/// Plain gradient descent: theta <- theta - learning_rate * grads.
template <class Policy>
Policy apply_gradient(Policy policy, std::span<const double> grads, double learning_rate) {
  auto params = policy.mutable_parameters();
  detail::require(grads.size() == params.size(), "apply_gradient: gradient shape does not match parameters");
  detail::require(std::isfinite(learning_rate) && learning_rate >= 0.0, "apply_gradient: learning_rate must be >= 0");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= learning_rate * grads[i];
  return policy;
}

}  // namespace ddorm
