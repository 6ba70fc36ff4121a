#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file verify.hpp
 * @brief Randomized property suite behind `ddorm_bench verify`.
 *
 * Every module invariant is checked against an independent oracle or an
 * algebraic identity on seeded random instances. Each property reports how
 * many cases it ran and the worst deviation it saw.
 */

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ddorm/metrics.hpp"
#include "ddorm/objectives.hpp"
#include "ddorm/oracles.hpp"
#include "ddorm/policy.hpp"
#include "ddorm/simplex.hpp"
#include "ddorm/trainer.hpp"
#include "ddorm/world.hpp"

namespace ddorm {

/// Deliberate defects used as negative controls for the suite itself.
enum class Fault { none, centering_off };

inline std::optional<Fault> parse_fault(std::string_view name) {
  if (name == "none") return Fault::none;
  if (name == "centering-off") return Fault::centering_off;
  return std::nullopt;
}

struct VerifyOptions {
  std::uint64_t seed = 20240611;
  Fault fault = Fault::none;
};

struct PropertyResult {
  std::string module;
  std::string name;
  std::size_t cases = 0;
  bool passed = true;
  double worst = 0.0;  // largest observed deviation (property-specific units)
  std::string detail;
};

struct VerifyReport {
  std::vector<PropertyResult> properties;

  bool all_passed() const {
    return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.passed; });
  }
  std::vector<std::string> failing() const {
    std::vector<std::string> out;
    for (const auto& p : properties)
      if (!p.passed) out.push_back(p.name);
    return out;
  }
};

namespace verify_detail {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline double log_uniform(Rng& rng, double lo, double hi) {
  return std::exp(uniform(rng, std::log(lo), std::log(hi)));
}

inline std::vector<double> uniform_vector(Rng& rng, std::size_t k, double lo, double hi) {
  std::vector<double> v(k);
  for (double& x : v) x = uniform(rng, lo, hi);
  return v;
}

inline DecisionDistribution random_distribution(Rng& rng, std::size_t k) {
  return softmax_distribution(ScoreVector(uniform_vector(rng, k, -3.0, 3.0), 1.0));
}

inline std::size_t pick_k(std::size_t i) {
  static constexpr std::size_t ks[] = {2, 3, 5, 10};
  return ks[i % 4];
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Centering and target as seen by the suite; the fault swaps in an uncentered variant.
inline std::vector<double> centered_under_test(const DecisionDistribution& p, const RewardVector& r, Fault fault) {
  if (fault == Fault::centering_off) return {r.rewards().begin(), r.rewards().end()};
  return center_rewards(p, r).centered;
}

inline DecisionDistribution target_under_test(const ScoreVector& s, const RewardVector& r, const DdormStepParams& params,
                                              Fault fault) {
  if (fault == Fault::none) return ddorm_target(s, r, params);
  std::vector<double> stepped(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) stepped[i] = s[i] + params.eta * r[i];
  return softmax_distribution(ScoreVector(std::move(stepped), params.tau));
}

class Recorder {
 public:
  Recorder(std::string module, std::string name, double tolerance)
      : result_{std::move(module), std::move(name), 0, true, 0.0, {}}, tolerance_(tolerance) {}

  /// Record one case whose deviation must not exceed the tolerance.
  void deviation(double d) {
    ++result_.cases;
    if (!(d <= tolerance_)) {
      if (result_.passed) result_.detail = "deviation " + format(d) + " > " + format(tolerance_);
      result_.passed = false;
    }
    if (std::isnan(d) || d > result_.worst) result_.worst = d;
  }

  /// Record one boolean case.
  void check(bool ok, const std::string& why) {
    ++result_.cases;
    if (!ok && result_.passed) {
      result_.passed = false;
      result_.detail = why;
    }
  }

  void fail(const std::string& why) {
    result_.passed = false;
    if (result_.detail.empty()) result_.detail = why;
  }

  PropertyResult finish() && { return std::move(result_); }

  static std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
  }

 private:
  PropertyResult result_;
  double tolerance_;
};

// ---------------------------------------------------------------- simplex_core

inline PropertyResult prox_oracle_equivalence(Rng& rng, Fault fault) {
  Recorder rec("simplex_core", "prox-oracle-equivalence", 1e-5);
  double worst_objective = 0.0;
  for (std::size_t i = 0; i < 500; ++i) {
    const std::size_t k = pick_k(i);
    const double tau = uniform(rng, 0.1, 5.0);
    const DdormStepParams params{log_uniform(rng, 0.01, 10.0), tau};
    const ScoreVector s(uniform_vector(rng, k, -3.0, 3.0), tau);
    const RewardVector r(uniform_vector(rng, k, -5.0, 5.0));
    const DecisionDistribution p = softmax_distribution(s);
    try {
      const DecisionDistribution u = kl_prox_oracle(p, r, params, 1e-10);
      const DecisionDistribution q = target_under_test(s, r, params, fault);
      rec.deviation(max_abs_diff(u.probs(), q.probs()));
      const double gap = std::abs(proximal_objective(u, p, r, params) - proximal_objective(q, p, r, params));
      worst_objective = std::max(worst_objective, gap);
    } catch (const std::exception& e) {
      rec.fail(std::string("oracle failed: ") + e.what());
    }
  }
  if (!(worst_objective <= 1e-8)) rec.fail("objective gap " + Recorder::format(worst_objective) + " > 1e-08");
  return std::move(rec).finish();
}

inline PropertyResult shift_invariance(Rng& rng, Fault fault) {
  Recorder rec("simplex_core", "shift-invariance", 1e-12);
  for (std::size_t i = 0; i < 1000; ++i) {
    const std::size_t k = pick_k(i);
    const double tau = uniform(rng, 0.1, 5.0);
    const DdormStepParams params{uniform(rng, 0.01, 10.0), tau};
    const ScoreVector s(uniform_vector(rng, k, -3.0, 3.0), tau);
    std::vector<double> base = uniform_vector(rng, k, -5.0, 5.0);
    const double c = uniform(rng, -100.0, 100.0);
    std::vector<double> shifted = base;
    for (double& v : shifted) v += c;
    const RewardVector r(base), rc(shifted);
    const DecisionDistribution p = softmax_distribution(s);

    // The centered rewards themselves must not see the shift.
    const auto a = centered_under_test(p, r, fault);
    const auto b = centered_under_test(p, rc, fault);
    if (max_abs_diff(a, b) > 1e-10) {
      rec.fail("centered rewards moved by " + Recorder::format(max_abs_diff(a, b)) + " under a reward shift");
    }
    const auto qa = target_under_test(s, r, params, fault);
    const auto qb = target_under_test(s, rc, params, fault);
    rec.deviation(max_abs_diff(qa.probs(), qb.probs()));
  }
  return std::move(rec).finish();
}

inline PropertyResult zero_step_identity(Rng& rng) {
  Recorder rec("simplex_core", "zero-step-identity", 0.0);
  for (std::size_t i = 0; i < 1000; ++i) {
    const std::size_t k = pick_k(i);
    const double tau = uniform(rng, 0.1, 5.0);
    const ScoreVector s(uniform_vector(rng, k, -3.0, 3.0), tau);
    const RewardVector r(uniform_vector(rng, k, -5.0, 5.0));
    const auto q = ddorm_target(s, r, {0.0, tau});
    const auto p = softmax_distribution(s);
    rec.check(q == p, "eta = 0 target differs from softmax(s)");
  }
  return std::move(rec).finish();
}

inline PropertyResult improvement(Rng& rng) {
  Recorder rec("simplex_core", "improvement", 1e-12);
  for (std::size_t i = 0; i < 10000; ++i) {
    const std::size_t k = pick_k(i);
    const double tau = uniform(rng, 0.1, 5.0);
    const DdormStepParams params{uniform(rng, 0.0, 10.0), tau};
    const ScoreVector s(uniform_vector(rng, k, -3.0, 3.0), tau);
    const RewardVector r(uniform_vector(rng, k, -5.0, 5.0));
    const double gain = expected_reward(ddorm_target(s, r, params), r) - expected_reward(softmax_distribution(s), r);
    rec.deviation(std::max(0.0, -gain));
  }
  return std::move(rec).finish();
}

inline PropertyResult monotone_concentration(Rng& rng) {
  Recorder rec("simplex_core", "monotone-concentration", 1e-12);
  std::vector<double> etas;
  for (int e = -8; e <= 8; ++e) etas.push_back(std::pow(10.0, e / 4.0));  // 0.01 ... 100
  for (std::size_t i = 0; i < 200; ++i) {
    const std::size_t k = pick_k(i);
    const double tau = uniform(rng, 0.1, 5.0);
    const ScoreVector s(uniform_vector(rng, k, -3.0, 3.0), tau);
    std::vector<double> rv = uniform_vector(rng, k, -5.0, 5.0);
    // Unique argmax with a visible gap.
    const auto top = static_cast<std::size_t>(std::max_element(rv.begin(), rv.end()) - rv.begin());
    for (std::size_t j = 0; j < k; ++j)
      if (j != top) rv[j] = std::min(rv[j], rv[top] - 0.05);
    const RewardVector r(rv);
    double prev = -std::numeric_limits<double>::infinity();
    double worst_drop = 0.0;
    for (double eta : etas) {
      const double value = expected_reward(ddorm_target(s, r, {eta, tau}), r);
      worst_drop = std::max(worst_drop, prev - value);
      prev = value;
    }
    rec.deviation(worst_drop);
    const auto q = ddorm_target(s, r, {1e4, tau});
    if (!(q[top] >= 1.0 - 1e-6)) rec.fail("eta = 1e4 leaves " + Recorder::format(1.0 - q[top]) + " off the argmax");
  }
  return std::move(rec).finish();
}

inline PropertyResult gibbs_identity(Rng& rng) {
  Recorder rec("simplex_core", "gibbs-identity", 1e-12);
  for (std::size_t i = 0; i < 1000; ++i) {
    const std::size_t k = pick_k(i);
    const double tau = uniform(rng, 0.1, 5.0);
    const double eta = uniform(rng, 0.01, 10.0);
    const ScoreVector s(uniform_vector(rng, k, -3.0, 3.0), tau);
    const RewardVector r(uniform_vector(rng, k, -5.0, 5.0));
    const auto p = softmax_distribution(s);
    // q_i proportional to p_i exp(eta r_i / tau), normalized in log space.
    std::vector<double> logits(k);
    for (std::size_t j = 0; j < k; ++j) logits[j] = std::log(p[j]) + eta * r[j] / tau;
    const double norm = detail::log_sum_exp(logits);
    std::vector<double> gibbs(k);
    for (std::size_t j = 0; j < k; ++j) gibbs[j] = std::exp(logits[j] - norm);
    rec.deviation(max_abs_diff(gibbs, ddorm_target(s, r, {eta, tau}).probs()));
  }
  return std::move(rec).finish();
}

inline PropertyResult kl_nonnegativity(Rng& rng) {
  Recorder rec("simplex_core", "kl-nonnegativity", 1e-14);
  for (std::size_t i = 0; i < 1000; ++i) {
    const std::size_t k = pick_k(i);
    const auto u = random_distribution(rng, k);
    const auto p = random_distribution(rng, k);
    const double kl = kl_divergence(u, p);
    rec.check(kl >= 0.0, "negative KL");
    rec.deviation(std::abs(kl_divergence(p, p)));
  }
  return std::move(rec).finish();
}

// ---------------------------------------------------------------- objectives

inline double gradient_error(std::span<const double> analytic, std::span<const double> numeric) {
  // Normalized so that <= 1 means within rel 1e-6 with a 1e-9 absolute floor.
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double bound = std::max(1e-9, 1e-6 * std::max(std::abs(analytic[i]), std::abs(numeric[i])));
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / bound);
  }
  return worst;
}

inline PropertyResult ddorm_grad_check(Rng& rng) {
  Recorder rec("objectives", "ddorm-loss-grad-fd", 1.0);
  for (std::size_t i = 0; i < 1000; ++i) {
    const std::size_t k = pick_k(i);
    const double tau = uniform(rng, 0.5, 2.0);
    const auto q = random_distribution(rng, k);
    const ScoreVector s(uniform_vector(rng, k, -3.0, 3.0), tau);
    const auto analytic = ddorm_loss_grad(q, s);
    const auto numeric = oracle::central_difference(
        [&](std::span<const double> x) {
          return ddorm_loss(q, softmax_distribution(ScoreVector({x.begin(), x.end()}, tau)));
        },
        s.scores(), 1e-5);
    rec.deviation(gradient_error(analytic, numeric));
  }
  return std::move(rec).finish();
}

inline PropertyResult dpo_grad_check(Rng& rng) {
  Recorder rec("objectives", "dpo-loss-grad-fd", 1.0);
  for (std::size_t i = 0; i < 1000; ++i) {
    DpoInputs inp{uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5),
                  uniform(rng, 0.05, 2.0)};
    const auto [gc, gr] = dpo_loss_grad(inp);
    const std::vector<double> x{inp.policy_logp_chosen, inp.policy_logp_rejected};
    const auto numeric = oracle::central_difference(
        [&](std::span<const double> v) {
          DpoInputs moved = inp;
          moved.policy_logp_chosen = v[0];
          moved.policy_logp_rejected = v[1];
          return dpo_loss(moved);
        },
        x, 1e-5);
    const std::vector<double> analytic{gc, gr};
    rec.deviation(gradient_error(analytic, numeric));
  }
  return std::move(rec).finish();
}

inline PropertyResult cross_entropy_decomposition(Rng& rng) {
  Recorder rec("objectives", "cross-entropy-decomposition", 1e-10);
  for (std::size_t i = 0; i < 1000; ++i) {
    const std::size_t k = pick_k(i);
    const auto q = random_distribution(rng, k);
    const auto p = random_distribution(rng, k);
    rec.deviation(std::abs(ddorm_loss(q, p) - entropy(q) - kl_divergence(q, p)));
  }
  return std::move(rec).finish();
}

inline PropertyResult dpo_shift(Rng& rng) {
  Recorder rec("objectives", "dpo-shift-invariance", 1e-12);
  for (std::size_t i = 0; i < 1000; ++i) {
    DpoInputs inp{uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5),
                  uniform(rng, 0.05, 2.0)};
    DpoInputs shifted = inp;
    const double c = uniform(rng, -100.0, 100.0);
    shifted.policy_logp_chosen += c;
    shifted.policy_logp_rejected += c;
    rec.deviation(std::abs(dpo_loss(inp) - dpo_loss(shifted)));
  }
  return std::move(rec).finish();
}

inline PropertyResult ce_minimized_at_target(Rng& rng) {
  Recorder rec("objectives", "ddorm-loss-minimized-at-target", 1e-12);
  for (std::size_t i = 0; i < 1000; ++i) {
    const std::size_t k = pick_k(i);
    std::vector<double> s = uniform_vector(rng, k, -3.0, 3.0);
    const auto q = softmax_distribution(ScoreVector(s, 1.0));
    for (double& v : s) v += uniform(rng, -0.5, 0.5);
    const auto perturbed = softmax_distribution(ScoreVector(s, 1.0));
    rec.deviation(std::max(0.0, ddorm_loss(q, q) - ddorm_loss(q, perturbed)));
  }
  return std::move(rec).finish();
}

inline PropertyResult dpo_reference_value(Rng& rng) {
  Recorder rec("objectives", "dpo-loss-at-reference", 1e-12);
  for (std::size_t i = 0; i < 1000; ++i) {
    const double a = uniform(rng, -5, 5), b = uniform(rng, -5, 5);
    rec.deviation(std::abs(dpo_loss({a, b, a, b, uniform(rng, 0.05, 2.0)}) - std::log(2.0)));
  }
  return std::move(rec).finish();
}

// ---------------------------------------------------------------- policy_models

inline PropertyResult tabular_distillation(Rng& rng) {
  Recorder rec("policy_models", "tabular-distillation-convergence", 1e-6);
  for (std::size_t i = 0; i < 50; ++i) {
    const double q0 = uniform(rng, 0.05, 0.95);
    const DecisionDistribution q({q0, 1.0 - q0});
    TabularPolicy policy(1, 2, 1.0);
    double kl = kl_divergence(q, candidate_distribution(policy, 0));
    for (std::size_t step = 0; step < 10000 && kl >= 1e-6; ++step) {
      const auto s = ScoreVector({policy.logit(0, 0), policy.logit(0, 1)}, 1.0);
      policy = apply_gradient(std::move(policy), ddorm_loss_grad(q, s), 0.5);
      kl = kl_divergence(q, candidate_distribution(policy, 0));
    }
    rec.deviation(kl);
  }
  return std::move(rec).finish();
}

inline PropertyResult candidate_shift(Rng& rng) {
  Recorder rec("policy_models", "candidate-distribution-shift-invariance", 1e-12);
  for (std::size_t i = 0; i < 1000; ++i) {
    const std::size_t k = pick_k(i);
    const double tau = uniform(rng, 0.1, 5.0);
    std::vector<double> logits = uniform_vector(rng, k, -3.0, 3.0);
    const TabularPolicy a(1, k, logits, tau);
    const double c = uniform(rng, -100.0, 100.0);
    for (double& v : logits) v += c;
    const TabularPolicy b(1, k, logits, tau);
    rec.deviation(max_abs_diff(candidate_distribution(a, 0).probs(), candidate_distribution(b, 0).probs()));
  }
  return std::move(rec).finish();
}

// ---------------------------------------------------------------- synthetic_world

inline World small_world(std::uint64_t seed, std::size_t prompts = 20, std::size_t k = 4, std::size_t d = 3) {
  WorldSpec spec;
  spec.num_prompts = prompts;
  spec.candidates_per_prompt = k;
  spec.feature_dim = d;
  spec.true_reward_weights.assign(d, 0.0);
  spec.true_reward_weights[0] = 1.0;
  if (d > 1) spec.true_reward_weights[1] = -0.5;
  spec.seed = seed;
  return generate_world(spec);
}

inline PropertyResult world_determinism(Rng& rng) {
  Recorder rec("synthetic_world", "generator-determinism", 0.0);
  for (std::size_t i = 0; i < 20; ++i) {
    const std::uint64_t seed = rng();
    const World a = small_world(seed), b = small_world(seed);
    rec.check(a == b, "world regeneration differs");
    RewardModelSim sim{uniform(rng, 0.0, 2.0), 1.0, 0.0, Distortion::identity, rng()};
    bool same = true;
    for (std::size_t x = 0; x < a.num_prompts(); ++x)
      for (std::size_t y = 0; y < a.num_candidates(); ++y) same = same && rm_score(sim, a, x, y) == rm_score(sim, b, x, y);
    rec.check(same, "rm_score not repeatable");
    const std::uint64_t split = rng();
    rec.check(sample_preferences(a, 200, split) == sample_preferences(b, 200, split), "preference split not repeatable");
  }
  return std::move(rec).finish();
}

inline std::vector<std::size_t> argsort(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return idx;
}

inline PropertyResult rank_preservation(Rng& rng) {
  Recorder rec("synthetic_world", "monotone-distortion-rank-preservation", 0.0);
  const World w = small_world(rng(), 200, 5, 3);
  for (Distortion d : {Distortion::identity, Distortion::cube, Distortion::signed_sqrt}) {
    const RewardModelSim sim{0.0, uniform(rng, 0.1, 5.0), uniform(rng, -3.0, 3.0), d, rng()};
    for (std::size_t x = 0; x < w.num_prompts(); ++x) {
      std::vector<double> truth(w.num_candidates());
      for (std::size_t y = 0; y < truth.size(); ++y) truth[y] = w.true_reward(x, y);
      rec.check(argsort(truth) == argsort(rm_rewards(sim, w, x).rewards()),
                std::string("ranking changed under ") + std::string(to_string(d)));
    }
  }
  return std::move(rec).finish();
}

inline PropertyResult biased_rm_robustness(Rng& rng) {
  Recorder rec("synthetic_world", "biased-rm-shift-robustness", 1e-12);
  const World w = small_world(rng(), 200, 4, 3);
  const RewardModelSim unbiased{0.0, 1.5, 0.0, Distortion::identity, 7};
  for (std::size_t x = 0; x < w.num_prompts(); ++x) {
    RewardModelSim biased = unbiased;
    biased.bias = uniform(rng, -10.0, 10.0);
    const double tau = uniform(rng, 0.5, 2.0);
    const ScoreVector s(uniform_vector(rng, w.num_candidates(), -2.0, 2.0), tau);
    const DdormStepParams params{uniform(rng, 0.1, 5.0), tau};
    rec.deviation(max_abs_diff(ddorm_target(s, rm_rewards(biased, w, x), params).probs(),
                               ddorm_target(s, rm_rewards(unbiased, w, x), params).probs()));
  }
  return std::move(rec).finish();
}

inline PropertyResult bradley_terry(Rng& rng) {
  Recorder rec("synthetic_world", "bradley-terry-calibration", 0.0);
  struct Case {
    double gap, expected, tolerance;
  };
  for (const Case c : {Case{0.0, 0.5, 0.02}, Case{2.0, sigmoid(2.0), 0.01}, Case{50.0, 1.0, 0.0}}) {
    WorldSpec spec;
    spec.num_prompts = 1;
    spec.candidates_per_prompt = 2;
    spec.feature_dim = 1;
    spec.true_reward_weights = {1.0};
    const World w = World::from_features(spec, {c.gap, 0.0});
    const auto prefs = sample_preferences(w, 10000, rng());
    const double rate = static_cast<double>(std::count_if(prefs.begin(), prefs.end(),
                                                          [](const auto& e) { return e.chosen_id == 0; })) /
                        static_cast<double>(prefs.size());
    rec.check(std::abs(rate - c.expected) <= c.tolerance,
              "gap " + Recorder::format(c.gap) + ": chosen rate " + Recorder::format(rate));
  }
  return std::move(rec).finish();
}

// ---------------------------------------------------------------- trainer

inline PropertyResult zero_step_gradient(Rng& rng) {
  Recorder rec("trainer", "zero-step-gradient", 1e-12);
  const World w = small_world(rng(), 30, 4, 3);
  const RewardModelSim sim{0.5, 1.0, 0.0, Distortion::identity, rng()};
  const TabularPolicy tab(w.num_prompts(), w.num_candidates(),
                          uniform_vector(rng, w.num_prompts() * w.num_candidates(), -2.0, 2.0), 1.0);
  const LinearPolicy lin = LinearPolicy::random(w.feature_dim(), 1.0, rng(), 1.0);
  for (std::size_t x = 0; x < w.num_prompts(); ++x) {
    for (const auto& g : {ddorm_step(tab, w, sim, x, {0.0, 1.0}).grads, ddorm_step(lin, w, sim, x, {0.0, 1.0}).grads}) {
      double worst = 0.0;
      for (double v : g) worst = std::max(worst, std::abs(v));
      rec.deviation(worst);
    }
  }
  return std::move(rec).finish();
}

inline TrainConfig short_config(Method m, std::uint64_t seed) {
  TrainConfig c;
  c.method = m;
  c.steps = 200;
  c.batch_size = 8;
  c.seed = seed;
  return c;
}

inline PropertyResult training_determinism(Rng& rng) {
  Recorder rec("trainer", "training-determinism", 0.0);
  const World w = small_world(rng());
  const RewardModelSim sim{0.3, 1.0, 0.0, Distortion::identity, rng()};
  std::vector<std::size_t> prompts(w.num_prompts());
  std::iota(prompts.begin(), prompts.end(), std::size_t{0});
  const auto prefs = sample_preferences(w, 300, rng());
  const auto init = LinearPolicy::random(w.feature_dim(), 1.0, rng());
  const std::uint64_t seed = rng();
  for (Method m : {Method::ddorm, Method::dpo}) {
    const TrainingSource src = m == Method::ddorm ? TrainingSource(RewardModelSource{sim, prompts})
                                                  : TrainingSource(PreferenceSource{prefs});
    const auto a = train(short_config(m, seed), w, src, init);
    const auto b = train(short_config(m, seed), w, src, init);
    bool same = std::equal(a.policy.parameters().begin(), a.policy.parameters().end(), b.policy.parameters().begin());
    same = same && a.log.records.size() == b.log.records.size();
    for (std::size_t i = 0; same && i < a.log.records.size(); ++i)
      same = a.log.records[i].mean_loss == b.log.records[i].mean_loss &&
             a.log.records[i].mean_kl == b.log.records[i].mean_kl;
    rec.check(same, std::string(to_string(m)) + " training is not deterministic");
  }
  return std::move(rec).finish();
}

inline PropertyResult training_target_improvement(Rng& rng) {
  Recorder rec("trainer", "training-target-improvement", 1e-12);
  const World w = small_world(rng(), 40, 5, 3);
  const RewardModelSim sim{0.5, 2.0, 1.0, Distortion::identity, rng()};
  std::vector<std::size_t> prompts(w.num_prompts());
  std::iota(prompts.begin(), prompts.end(), std::size_t{0});
  auto cfg = short_config(Method::ddorm, rng());
  cfg.eta = 3.0;
  const auto result = train_ddorm(cfg, w, RewardModelSource{sim, prompts}, LinearPolicy::random(3, 1.0, rng()));
  for (const auto& r : result.log.records) rec.deviation(std::max(0.0, -r.min_improvement.value_or(0.0)));
  return std::move(rec).finish();
}

inline PropertyResult dpo_single_example(Rng& rng) {
  Recorder rec("trainer", "dpo-single-example-monotone", 0.0);
  const World w = small_world(rng(), 5, 3, 3);
  const PreferenceExample ex{2, 0, 1};
  for (const double lr : {0.01, 0.005}) {
    auto cfg = short_config(Method::dpo, rng());
    cfg.learning_rate = lr;
    cfg.batch_size = 1;
    const auto result = train_dpo(cfg, w, PreferenceSource{{ex}}, LinearPolicy::random(3, 1.0, rng()));
    for (std::size_t i = 1; i < result.log.records.size(); ++i)
      rec.deviation(std::max(0.0, result.log.records[i].mean_loss - result.log.records[i - 1].mean_loss));
  }
  return std::move(rec).finish();
}

inline PropertyResult constant_reward_noop(Rng& rng) {
  Recorder rec("trainer", "constant-reward-no-op", 1e-12);
  WorldSpec spec;
  spec.num_prompts = 10;
  spec.candidates_per_prompt = 4;
  spec.feature_dim = 2;
  spec.true_reward_weights = {0.0, 0.0};
  spec.seed = rng();
  const World w = generate_world(spec);
  const RewardModelSim sim{0.0, 1.0, uniform(rng, -5.0, 5.0), Distortion::identity, 1};
  std::vector<std::size_t> prompts(w.num_prompts());
  std::iota(prompts.begin(), prompts.end(), std::size_t{0});
  const TabularPolicy init(w.num_prompts(), w.num_candidates(), uniform_vector(rng, 40, -2.0, 2.0), 1.0);
  const auto result = train_ddorm(short_config(Method::ddorm, rng()), w, RewardModelSource{sim, prompts}, init);
  rec.deviation(max_abs_diff(result.policy.parameters(), init.parameters()));
  return std::move(rec).finish();
}

// ---------------------------------------------------------------- metrics

inline std::vector<ScoredPair> random_pairs(Rng& rng, std::size_t n, bool coarse) {
  std::vector<ScoredPair> pairs(n);
  for (auto& p : pairs) {
    p.chosen_score = uniform(rng, -3.0, 3.0);
    p.rejected_score = uniform(rng, -3.0, 3.0);
    if (coarse) {  // force ties
      p.chosen_score = std::round(p.chosen_score * 2.0) / 2.0;
      p.rejected_score = std::round(p.rejected_score * 2.0) / 2.0;
    }
  }
  return pairs;
}

inline PropertyResult auc_brute_force(Rng& rng) {
  Recorder rec("metrics", "auc-brute-force", 0.0);
  for (std::size_t i = 0; i < 500; ++i) {
    const auto pairs = random_pairs(rng, 1 + static_cast<std::size_t>(rng() % 50), i % 2 == 0);
    rec.deviation(std::abs(roc_auc(pairs) - oracle::brute_force_auc(pairs)));
  }
  return std::move(rec).finish();
}

inline PropertyResult monotone_transform(Rng& rng) {
  Recorder rec("metrics", "monotone-transform-invariance", 0.0);
  for (std::size_t i = 0; i < 500; ++i) {
    const auto pairs = random_pairs(rng, 1 + static_cast<std::size_t>(rng() % 50), i % 2 == 0);
    auto transformed = pairs;
    for (auto& p : transformed) {
      p.chosen_score = std::exp(p.chosen_score) + 3.0 * p.chosen_score;
      p.rejected_score = std::exp(p.rejected_score) + 3.0 * p.rejected_score;
    }
    rec.check(pair_accuracy(pairs) == pair_accuracy(transformed), "pair accuracy changed under a monotone map");
    rec.check(roc_auc(pairs) == roc_auc(transformed), "AUC changed under a monotone map");
    // Power-of-two scaling is exact in binary floating point.
    auto scaled = pairs;
    for (auto& p : scaled) {
      p.chosen_score *= 4.0;
      p.rejected_score *= 4.0;
    }
    rec.check(mean_margin(scaled) == 4.0 * mean_margin(pairs), "mean margin does not scale with the scores");
  }
  return std::move(rec).finish();
}

inline PropertyResult evaluate_purity(Rng& rng) {
  Recorder rec("metrics", "evaluate-purity", 0.0);
  const World w = small_world(rng(), 30, 3, 3);
  const auto pairs = sample_preferences(w, 100, rng());
  const auto policy = LinearPolicy::random(3, 1.0, rng(), 1.0);
  const auto a = evaluate(policy, pairs, w), b = evaluate(policy, pairs, w);
  rec.check(a.pair_accuracy == b.pair_accuracy && a.auc == b.auc && a.per_pair_margins == b.per_pair_margins,
            "evaluate is not repeatable");
  const auto zero = evaluate(TabularPolicy(w.num_prompts(), w.num_candidates(), 1.0), pairs, w);
  rec.check(zero.pair_accuracy == 0.0 && zero.auc == 0.5 && zero.mean_margin == 0.0,
            "zero policy does not report (0, 0.5, 0)");
  return std::move(rec).finish();
}

}  // namespace verify_detail

/// Run every property; `progress` (optional) receives one line per property as it finishes.
inline VerifyReport run_verify(const VerifyOptions& options, std::ostream* progress = nullptr) {
  using namespace verify_detail;
  using Check = std::function<PropertyResult(Rng&)>;
  const Fault fault = options.fault;
  const std::vector<Check> checks{
      [&](Rng& r) { return prox_oracle_equivalence(r, fault); },
      [&](Rng& r) { return shift_invariance(r, fault); },
      zero_step_identity,
      improvement,
      monotone_concentration,
      gibbs_identity,
      kl_nonnegativity,
      ddorm_grad_check,
      dpo_grad_check,
      cross_entropy_decomposition,
      dpo_shift,
      ce_minimized_at_target,
      dpo_reference_value,
      tabular_distillation,
      candidate_shift,
      world_determinism,
      rank_preservation,
      biased_rm_robustness,
      bradley_terry,
      zero_step_gradient,
      training_determinism,
      training_target_improvement,
      dpo_single_example,
      constant_reward_noop,
      auc_brute_force,
      monotone_transform,
      evaluate_purity,
  };
  VerifyReport report;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Rng rng(detail::mix_seed(options.seed, i));
    PropertyResult result = checks[i](rng);
    if (progress) {
      char line[200];
      std::snprintf(line, sizeof line, "  %-4s  %-16s %-40s cases=%-6zu worst=%.3g", result.passed ? "PASS" : "FAIL",
                    result.module.c_str(), result.name.c_str(), result.cases, result.worst);
      *progress << line;
      if (!result.passed) *progress << "  (" << result.detail << ")";
      *progress << '\n';
    }
    report.properties.push_back(std::move(result));
  }
  return report;
}

}  // namespace ddorm
