#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file world.hpp
 * @brief Synthetic ground truth: prompts with K featurized candidates, a
 *        linear true reward, Bradley-Terry preference sampling and a
 *        perturbed reward-model simulator.
 *
 * Every random draw comes from a std::mt19937_64 seeded from the relevant
 * seed, so worlds, splits and reward-model noise are pure functions of
 * (seed, ids).
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ddorm/errors.hpp"
#include "ddorm/objectives.hpp"
#include "ddorm/simplex.hpp"

namespace ddorm {

struct WorldSpec {
  std::size_t num_prompts = 1;
  std::size_t candidates_per_prompt = 2;
  std::size_t feature_dim = 1;
  std::vector<double> true_reward_weights{1.0};
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(num_prompts >= 1, "WorldSpec: num_prompts must be >= 1");
    detail::require(candidates_per_prompt >= 2, "WorldSpec: candidates_per_prompt must be >= 2");
    detail::require(feature_dim >= 1, "WorldSpec: feature_dim must be >= 1");
    detail::require(true_reward_weights.size() == feature_dim,
                    "WorldSpec: true_reward_weights length must equal feature_dim");
    for (double w : true_reward_weights)
      detail::require(std::isfinite(w), "WorldSpec: non-finite reward weight");
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += a[i] * b[i];
  return total;
}

}  // namespace detail

/// Derive an independent stream seed from a base seed and a purpose tag.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) { return detail::mix_seed(seed, tag); }

class World {
 public:
  /// Build a world from explicit features laid out as [prompt][candidate][dim].
  static World from_features(WorldSpec spec, std::vector<double> features) {
    spec.validate();
    detail::require(features.size() == spec.num_prompts * spec.candidates_per_prompt * spec.feature_dim,
                    "World: feature array has the wrong size");
    for (double f : features) detail::require(std::isfinite(f), "World: non-finite feature");
    World w;
    w.spec_ = std::move(spec);
    w.features_ = std::move(features);
    w.true_rewards_.resize(w.spec_.num_prompts * w.spec_.candidates_per_prompt);
    for (std::size_t x = 0; x < w.spec_.num_prompts; ++x)
      for (std::size_t y = 0; y < w.spec_.candidates_per_prompt; ++y)
        w.true_rewards_[x * w.spec_.candidates_per_prompt + y] =
            detail::dot(w.spec_.true_reward_weights, w.features(x, y));
    return w;
  }

  const WorldSpec& spec() const noexcept { return spec_; }
  std::size_t num_prompts() const noexcept { return spec_.num_prompts; }
  std::size_t num_candidates() const noexcept { return spec_.candidates_per_prompt; }
  std::size_t feature_dim() const noexcept { return spec_.feature_dim; }

  std::span<const double> features(std::size_t prompt, std::size_t candidate) const {
    check_ids(prompt, candidate);
    return std::span<const double>(features_).subspan(
        (prompt * spec_.candidates_per_prompt + candidate) * spec_.feature_dim, spec_.feature_dim);
  }

  double true_reward(std::size_t prompt, std::size_t candidate) const {
    check_ids(prompt, candidate);
    return true_rewards_[prompt * spec_.candidates_per_prompt + candidate];
  }

  std::span<const double> all_features() const noexcept { return features_; }

  friend bool operator==(const World& a, const World& b) {
    return a.spec_.num_prompts == b.spec_.num_prompts &&
           a.spec_.candidates_per_prompt == b.spec_.candidates_per_prompt &&
           a.spec_.feature_dim == b.spec_.feature_dim &&
           a.spec_.true_reward_weights == b.spec_.true_reward_weights && a.spec_.seed == b.spec_.seed &&
           a.features_ == b.features_ && a.true_rewards_ == b.true_rewards_;
  }

 private:
  World() = default;

  void check_ids(std::size_t prompt, std::size_t candidate) const {
    detail::require(prompt < spec_.num_prompts, "World: prompt id out of range");
    detail::require(candidate < spec_.candidates_per_prompt, "World: candidate id out of range");
  }

  WorldSpec spec_;
  std::vector<double> features_;
  std::vector<double> true_rewards_;
};

/// Standard-normal candidate features drawn from spec.seed; true reward is <weights, features>.
inline World generate_world(const WorldSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> features(spec.num_prompts * spec.candidates_per_prompt * spec.feature_dim);
  for (double& f : features) f = normal(rng);
  return World::from_features(spec, std::move(features));
}

struct PreferenceExample {
  std::size_t prompt_id = 0;
  std::size_t chosen_id = 0;
  std::size_t rejected_id = 1;

  friend bool operator==(const PreferenceExample&, const PreferenceExample&) = default;
};

/// Disjoint train/test prompt partition. The test set gets round(test_fraction * P) prompts.
struct PromptPartition {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline PromptPartition partition_prompts(std::size_t num_prompts, double test_fraction, std::uint64_t seed) {
  detail::require(test_fraction >= 0.0 && test_fraction < 1.0, "partition_prompts: test_fraction must be in [0, 1)");
  std::vector<std::size_t> ids(num_prompts);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  if (test_fraction == 0.0) return {ids, ids};
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(num_prompts)));
  n_test = std::clamp<std::size_t>(n_test, 1, num_prompts - 1);
  PromptPartition out;
  out.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  out.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

/**
 * Bradley-Terry preference pairs.
 *
 * Each example draws a prompt uniformly from `prompts` (all prompts when
 * empty), then an unordered candidate pair {a, b} uniformly, and labels a as
 * chosen with probability sigmoid(r*(a) - r*(b)).
 */
inline std::vector<PreferenceExample> sample_preferences(const World& world, std::size_t n, std::uint64_t split_seed,
                                                         std::span<const std::size_t> prompts = {}) {
  detail::require(n >= 1, "sample_preferences: n must be >= 1");
  detail::require(world.num_candidates() >= 2, "sample_preferences: need K >= 2");
  for (std::size_t x : prompts) detail::require(x < world.num_prompts(), "sample_preferences: prompt id out of range");

  const std::size_t k = world.num_candidates();
  const std::size_t pool = prompts.empty() ? world.num_prompts() : prompts.size();
  std::mt19937_64 rng(split_seed);
  std::uniform_int_distribution<std::size_t> pick_prompt(0, pool - 1);
  std::uniform_int_distribution<std::size_t> pick_first(0, k - 1);
  std::uniform_int_distribution<std::size_t> pick_second(0, k - 2);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<PreferenceExample> out;
  out.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t slot = pick_prompt(rng);
    const std::size_t x = prompts.empty() ? slot : prompts[slot];
    const std::size_t a = pick_first(rng);
    std::size_t b = pick_second(rng);
    if (b >= a) ++b;
    const double p_a = sigmoid(world.true_reward(x, a) - world.true_reward(x, b));
    if (coin(rng) < p_a)
      out.push_back({x, a, b});
    else
      out.push_back({x, b, a});
  }
  return out;
}

/// Monotone miscalibration applied by the reward-model simulator.
enum class Distortion { identity, cube, signed_sqrt };

inline std::string_view to_string(Distortion d) {
  switch (d) {
    case Distortion::identity: return "identity";
    case Distortion::cube: return "cube";
    case Distortion::signed_sqrt: return "signed-sqrt";
  }
  return "identity";
}

inline std::optional<Distortion> parse_distortion(std::string_view name) {
  if (name == "identity") return Distortion::identity;
  if (name == "cube") return Distortion::cube;
  if (name == "signed-sqrt") return Distortion::signed_sqrt;
  return std::nullopt;
}

inline double apply_distortion(Distortion d, double v) {
  switch (d) {
    case Distortion::identity: return v;
    case Distortion::cube: return v * v * v;
    case Distortion::signed_sqrt: return std::copysign(std::sqrt(std::abs(v)), v);
  }
  return v;
}

/// Reward model simulated as distortion(scale * r* + bias) + frozen Gaussian noise.
struct RewardModelSim {
  double noise_std = 0.0;
  double scale = 1.0;
  double bias = 0.0;
  Distortion distortion = Distortion::identity;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(std::isfinite(noise_std) && noise_std >= 0.0, "RewardModelSim: noise_std must be >= 0");
    detail::require(std::isfinite(scale) && scale > 0.0, "RewardModelSim: scale must be > 0");
    detail::require(std::isfinite(bias), "RewardModelSim: bias must be finite");
  }
};

/// Noise for a (prompt, candidate) pair is drawn from its own seeded stream, so repeated queries agree.
inline double rm_score(const RewardModelSim& sim, const World& world, std::size_t prompt, std::size_t candidate) {
  sim.validate();
  const double value = apply_distortion(sim.distortion, sim.scale * world.true_reward(prompt, candidate) + sim.bias);
  if (sim.noise_std == 0.0) return value;
  std::mt19937_64 rng(detail::mix_seed(sim.seed, prompt, candidate));
  std::normal_distribution<double> normal(0.0, sim.noise_std);
  return value + normal(rng);
}

inline RewardVector rm_rewards(const RewardModelSim& sim, const World& world, std::size_t prompt) {
  std::vector<double> r(world.num_candidates());
  for (std::size_t y = 0; y < r.size(); ++y) r[y] = rm_score(sim, world, prompt, y);
  return RewardVector(std::move(r));
}

}  // namespace ddorm
