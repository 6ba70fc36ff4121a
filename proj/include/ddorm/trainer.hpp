#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file trainer.hpp
 * @brief Seeded training loops for reward-guided distillation and the DPO baseline.
 *
 * One distillation step on a prompt:
 *   1. s_i = s_theta(x, y_i)
 *   2. p = softmax(s / tau)
 *   3. r_i = reward model score
 *   4. r~_i = r_i - <p, r>
 *   5. q = softmax((s + eta r~) / tau)
 *   6. gradient of CE(q, p_theta) with q held fixed
 *
 * Batches average per-example gradients; prompts and preference examples are
 * drawn with replacement from a stream seeded by TrainConfig::seed.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "ddorm/errors.hpp"
#include "ddorm/objectives.hpp"
#include "ddorm/policy.hpp"
#include "ddorm/simplex.hpp"
#include "ddorm/world.hpp"

namespace ddorm {

enum class Method { ddorm, dpo };

inline std::string_view to_string(Method m) { return m == Method::ddorm ? "ddorm" : "dpo"; }

inline std::optional<Method> parse_method(std::string_view name) {
  if (name == "ddorm") return Method::ddorm;
  if (name == "dpo") return Method::dpo;
  return std::nullopt;
}

struct TrainConfig {
  Method method = Method::ddorm;
  double eta = 2.0;
  double tau = 1.0;
  double beta = kDefaultDpoBeta;
  double learning_rate = 0.1;
  std::size_t steps = 3000;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;
  /// A record is written every log_every steps and at the final step.
  std::size_t log_every = 1;

  void validate() const {
    detail::require(steps >= 1, "TrainConfig: steps must be >= 1");
    detail::require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    detail::require(log_every >= 1, "TrainConfig: log_every must be >= 1");
    detail::require(std::isfinite(learning_rate) && learning_rate >= 0.0, "TrainConfig: learning_rate must be >= 0");
    detail::require(std::isfinite(tau) && tau > 0.0, "TrainConfig: tau must be > 0");
    if (method == Method::ddorm) detail::require(std::isfinite(eta) && eta >= 0.0, "TrainConfig: eta must be >= 0");
    if (method == Method::dpo) detail::require(std::isfinite(beta) && beta > 0.0, "TrainConfig: beta must be > 0");
  }
};

struct TrainRecord {
  std::size_t step = 0;
  double mean_loss = 0.0;
  /// Distillation only: mean KL(q || p_theta) over the batch.
  std::optional<double> mean_kl;
  /// Distillation only: mean and worst-case <q - p, r> over the batch.
  std::optional<double> mean_improvement;
  std::optional<double> min_improvement;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  /// Smallest <q - p, r> seen over every example of every step (distillation only).
  std::optional<double> min_target_improvement;
};

/// Thrown when a batch produces a non-finite loss. Carries the offending step's record.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, TrainRecord record)
      : std::runtime_error(what), record_(std::move(record)) {}
  const TrainRecord& record() const noexcept { return record_; }

 private:
  TrainRecord record_;
};

struct DdormStepResult {
  double loss = 0.0;
  std::vector<double> grads;
  DecisionDistribution p;
  DecisionDistribution q;
  RewardVector rewards;
  double kl = 0.0;
  /// expected_reward(q, r) - expected_reward(p, r)
  double improvement = 0.0;
};

/// One distillation step on `prompt`; returns the loss and the parameter gradient with q fixed.
template <ScoringPolicy Policy>
DdormStepResult ddorm_step(const Policy& policy, const World& world, const RewardModelSim& rm, std::size_t prompt,
                           const DdormStepParams& params) {
  params.validate();
  detail::require(policy.temperature() == params.tau, "ddorm_step: policy temperature differs from params.tau");
  const ScoreVector s = candidate_scores(policy, world, prompt);
  DecisionDistribution p = softmax_distribution(s);
  RewardVector r = rm_rewards(rm, world, prompt);
  DecisionDistribution q = ddorm_target(s, r, params);

  const std::vector<double> score_grad = ddorm_loss_grad(q, s);
  std::vector<double> grads(policy.parameters().size(), 0.0);
  for (std::size_t y = 0; y < score_grad.size(); ++y)
    if (score_grad[y] != 0.0) add_score_gradient(policy, world, prompt, y, score_grad[y], grads);

  const double loss = ddorm_loss(q, p);
  const double kl = kl_divergence(q, p);
  const double improvement = expected_reward(q, r) - expected_reward(p, r);
  return {loss, std::move(grads), std::move(p), std::move(q), std::move(r), kl, improvement};
}

struct DpoStepResult {
  double loss = 0.0;
  std::vector<double> grads;
  /// d loss / d score for the chosen and rejected candidates.
  double grad_chosen = 0.0;
  double grad_rejected = 0.0;
};

/// DPO loss on one pair, using policy scores as log pi_theta and reference scores as log pi_ref.
template <ScoringPolicy Policy>
DpoStepResult dpo_step(const Policy& policy, const ReferenceSnapshot<Policy>& reference, const World& world,
                       const PreferenceExample& ex, double beta) {
  detail::require(ex.chosen_id != ex.rejected_id, "dpo_step: chosen and rejected candidates coincide");
  DpoInputs inp;
  inp.policy_logp_chosen = score(policy, world, ex.prompt_id, ex.chosen_id);
  inp.policy_logp_rejected = score(policy, world, ex.prompt_id, ex.rejected_id);
  inp.ref_logp_chosen = score(reference, world, ex.prompt_id, ex.chosen_id);
  inp.ref_logp_rejected = score(reference, world, ex.prompt_id, ex.rejected_id);
  inp.beta = beta;

  DpoStepResult out;
  out.loss = dpo_loss(inp);
  std::tie(out.grad_chosen, out.grad_rejected) = dpo_loss_grad(inp);
  out.grads.assign(policy.parameters().size(), 0.0);
  add_score_gradient(policy, world, ex.prompt_id, ex.chosen_id, out.grad_chosen, out.grads);
  add_score_gradient(policy, world, ex.prompt_id, ex.rejected_id, out.grad_rejected, out.grads);
  return out;
}

/// Prompts for distillation, scored by a simulated reward model.
struct RewardModelSource {
  RewardModelSim rm;
  std::vector<std::size_t> prompts;
};

/// Fixed preference pairs for DPO.
struct PreferenceSource {
  std::vector<PreferenceExample> examples;
};

using TrainingSource = std::variant<RewardModelSource, PreferenceSource>;

template <class Policy>
struct TrainResult {
  Policy policy;
  TrainLog log;
};

namespace detail {

inline bool should_log(const TrainConfig& config, std::size_t step) {
  return step % config.log_every == 0 || step + 1 == config.steps;
}

inline void check_finite(double loss, const TrainRecord& record) {
  if (!std::isfinite(loss))
    throw TrainingDiverged("training produced a non-finite loss at step " + std::to_string(record.step), record);
}

}  // namespace detail

template <ScoringPolicy Policy>
TrainResult<Policy> train_ddorm(const TrainConfig& config, const World& world, const RewardModelSource& source,
                                Policy policy) {
  config.validate();
  detail::require(config.method == Method::ddorm, "train_ddorm: config.method must be ddorm");
  detail::require(!source.prompts.empty(), "train_ddorm: no training prompts");
  detail::require(policy.temperature() == config.tau, "train_ddorm: policy temperature differs from config.tau");

  const DdormStepParams params{config.eta, config.tau};
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, source.prompts.size() - 1);
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);

  TrainLog log;
  double worst = std::numeric_limits<double>::infinity();
  std::vector<double> batch_grad(policy.parameters().size());
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
    TrainRecord rec;
    rec.step = step;
    double loss = 0.0, kl = 0.0, improvement = 0.0;
    double step_worst = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const std::size_t prompt = source.prompts[pick(rng)];
      const DdormStepResult r = ddorm_step(policy, world, source.rm, prompt, params);
      loss += r.loss;
      kl += r.kl;
      improvement += r.improvement;
      step_worst = std::min(step_worst, r.improvement);
      for (std::size_t i = 0; i < batch_grad.size(); ++i) batch_grad[i] += r.grads[i];
    }
    rec.mean_loss = loss * inv_batch;
    rec.mean_kl = kl * inv_batch;
    rec.mean_improvement = improvement * inv_batch;
    rec.min_improvement = step_worst;
    detail::check_finite(rec.mean_loss, rec);
    worst = std::min(worst, step_worst);

    for (double& g : batch_grad) g *= inv_batch;
    policy = apply_gradient(std::move(policy), batch_grad, config.learning_rate);
    if (detail::should_log(config, step)) log.records.push_back(rec);
  }
  log.min_target_improvement = worst;
  return {std::move(policy), std::move(log)};
}

/// DPO against a reference frozen from the initial policy.
template <ScoringPolicy Policy>
TrainResult<Policy> train_dpo(const TrainConfig& config, const World& world, const PreferenceSource& source,
                              Policy policy) {
  config.validate();
  detail::require(config.method == Method::dpo, "train_dpo: config.method must be dpo");
  detail::require(!source.examples.empty(), "train_dpo: no preference examples");

  const ReferenceSnapshot<Policy> reference = snapshot_reference(policy, 0);
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, source.examples.size() - 1);
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);

  TrainLog log;
  std::vector<double> batch_grad(policy.parameters().size());
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
    TrainRecord rec;
    rec.step = step;
    double loss = 0.0;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const DpoStepResult r = dpo_step(policy, reference, world, source.examples[pick(rng)], config.beta);
      loss += r.loss;
      for (std::size_t i = 0; i < batch_grad.size(); ++i) batch_grad[i] += r.grads[i];
    }
    rec.mean_loss = loss * inv_batch;
    detail::check_finite(rec.mean_loss, rec);

    for (double& g : batch_grad) g *= inv_batch;
    policy = apply_gradient(std::move(policy), batch_grad, config.learning_rate);
    if (detail::should_log(config, step)) log.records.push_back(rec);
  }
  return {std::move(policy), std::move(log)};
}

/// Dispatch on config.method; the source alternative must match the method.
template <ScoringPolicy Policy>
TrainResult<Policy> train(const TrainConfig& config, const World& world, const TrainingSource& source,
                          Policy policy) {
  if (config.method == Method::ddorm) {
    const auto* rm = std::get_if<RewardModelSource>(&source);
    detail::require(rm != nullptr, "train: ddorm needs a reward-model source");
    return train_ddorm(config, world, *rm, std::move(policy));
  }
  const auto* prefs = std::get_if<PreferenceSource>(&source);
  detail::require(prefs != nullptr, "train: dpo needs a preference source");
  return train_dpo(config, world, *prefs, std::move(policy));
}

}  // namespace ddorm
