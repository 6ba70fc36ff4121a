// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ddorm/metrics.hpp"
#include "ddorm/oracles.hpp"
#include "ddorm/policy.hpp"

namespace ddorm {
namespace {

TEST(PairAccuracy, TiesCountAsWrong) {
  const std::vector<ScoredPair> pairs{{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}, {2.0, -1.0}};
  EXPECT_DOUBLE_EQ(pair_accuracy(pairs), 0.5);
}

TEST(Auc, HandValues) {
  const std::vector<ScoredPair> perfect{{3.0, 0.0}, {2.0, 1.0}};
  EXPECT_DOUBLE_EQ(roc_auc(perfect), 1.0);
  const std::vector<ScoredPair> ties{{1.0, 1.0}, {1.0, 1.0}};
  EXPECT_DOUBLE_EQ(roc_auc(ties), 0.5);
  // Chosen {2, 0}, rejected {1, 3}: wins 2>1 only, so 1/4.
  const std::vector<ScoredPair> mixed{{2.0, 1.0}, {0.0, 3.0}};
  EXPECT_DOUBLE_EQ(roc_auc(mixed), 0.25);
}

TEST(Auc, EqualsBruteForceExactly) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const bool coarse = trial % 2 == 0;
    std::uniform_int_distribution<int> coarse_d(-3, 3);
    std::normal_distribution<double> fine(0.0, 1.0);
    std::vector<ScoredPair> pairs(1 + trial % 40);
    for (auto& p : pairs) {
      p.chosen_score = coarse ? coarse_d(rng) : fine(rng);
      p.rejected_score = coarse ? coarse_d(rng) : fine(rng);
    }
    EXPECT_EQ(roc_auc(pairs), oracle::brute_force_auc(pairs));
  }
}

TEST(Metrics, EmptyInputRejected) {
  const std::vector<ScoredPair> none;
  EXPECT_THROW(pair_accuracy(none), InvalidInput);
  EXPECT_THROW(roc_auc(none), InvalidInput);
  EXPECT_THROW(mean_margin(none), InvalidInput);
}

TEST(Evaluate, ZeroPolicyGivesChanceLevels) {
  WorldSpec s;
  s.num_prompts = 10;
  s.candidates_per_prompt = 3;
  s.feature_dim = 2;
  s.true_reward_weights = {1.0, 1.0};
  const World w = generate_world(s);
  const auto pairs = sample_preferences(w, 50, 4);
  const auto report = evaluate(LinearPolicy({0.0, 0.0}, 1.0), pairs, w);
  EXPECT_EQ(report.pair_accuracy, 0.0);
  EXPECT_EQ(report.auc, 0.5);
  EXPECT_EQ(report.mean_margin, 0.0);
  EXPECT_EQ(report.n, 50u);
}

TEST(Evaluate, MatchesDirectRecomputation) {
  WorldSpec s;
  s.num_prompts = 30;
  s.candidates_per_prompt = 4;
  s.feature_dim = 3;
  s.true_reward_weights = {0.5, -1.0, 2.0};
  s.seed = 17;
  const World w = generate_world(s);
  const auto pairs = sample_preferences(w, 400, 6);
  const LinearPolicy policy({0.3, -0.2, 1.0}, 1.0);
  const auto report = evaluate(policy, pairs, w);

  std::size_t correct = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double m = score(policy, w, pairs[i].prompt_id, pairs[i].chosen_id) -
                     score(policy, w, pairs[i].prompt_id, pairs[i].rejected_id);
    if (m > 0.0) ++correct;
    total += m;
    EXPECT_EQ(report.per_pair_margins[i], m);
  }
  EXPECT_NEAR(report.pair_accuracy, static_cast<double>(correct) / 400.0, 1e-12);
  EXPECT_NEAR(report.mean_margin, total / 400.0, 1e-12);
}

TEST(Evaluate, InvariantUnderPositiveScaling) {
  WorldSpec s;
  s.num_prompts = 20;
  s.candidates_per_prompt = 3;
  s.feature_dim = 2;
  s.true_reward_weights = {1.0, 0.0};
  const World w = generate_world(s);
  const auto pairs = sample_preferences(w, 200, 1);
  const auto a = evaluate(LinearPolicy({0.4, -0.9}, 1.0), pairs, w);
  // Power-of-two scaling keeps every margin exact.
  const auto b = evaluate(LinearPolicy({1.6, -3.6}, 1.0), pairs, w);
  EXPECT_EQ(a.pair_accuracy, b.pair_accuracy);
  EXPECT_EQ(a.auc, b.auc);
  EXPECT_EQ(4.0 * a.mean_margin, b.mean_margin);
}

}  // namespace
}  // namespace ddorm
