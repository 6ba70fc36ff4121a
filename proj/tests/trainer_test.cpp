// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "ddorm/trainer.hpp"

namespace ddorm {
namespace {

World make_world(std::size_t prompts, std::size_t k, std::uint64_t seed) {
  WorldSpec s;
  s.num_prompts = prompts;
  s.candidates_per_prompt = k;
  s.feature_dim = 3;
  s.true_reward_weights = {1.0, -0.5, 0.75};
  s.seed = seed;
  return generate_world(s);
}

std::vector<std::size_t> all_prompts(const World& w) {
  std::vector<std::size_t> ids(w.num_prompts());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return ids;
}

TrainConfig short_config(Method m) {
  TrainConfig c;
  c.method = m;
  c.steps = 40;
  c.batch_size = 4;
  c.seed = 9;
  return c;
}

TEST(Method, NamesRoundTrip) {
  EXPECT_EQ(parse_method("ddorm"), Method::ddorm);
  EXPECT_EQ(parse_method("dpo"), Method::dpo);
  EXPECT_FALSE(parse_method("ppo").has_value());
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.steps = 0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = TrainConfig{};
  c.eta = -1.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = TrainConfig{};
  c.method = Method::dpo;
  c.beta = 0.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  EXPECT_NO_THROW(c.validate());
}

TEST(DdormStep, ZeroStepGivesZeroGradient) {
  const World w = make_world(5, 4, 1);
  const auto policy = LinearPolicy::random(3, 1.0, 2, 1.0);
  const auto r = ddorm_step(policy, w, RewardModelSim{}, 3, {0.0, 1.0});
  EXPECT_EQ(r.q, r.p);
  for (double g : r.grads) EXPECT_NEAR(g, 0.0, 1e-12);
  EXPECT_EQ(r.kl, 0.0);
}

TEST(DdormStep, TemperatureMismatchRejected) {
  const World w = make_world(2, 2, 1);
  EXPECT_THROW(ddorm_step(TabularPolicy(2, 2, 0.5), w, RewardModelSim{}, 0, {1.0, 1.0}), InvalidInput);
}

TEST(DdormStep, TwoCandidateHandValue) {
  WorldSpec s;
  s.num_prompts = 1;
  s.candidates_per_prompt = 2;
  s.feature_dim = 1;
  s.true_reward_weights = {1.0};
  const World w = World::from_features(s, {1.0, 0.0});
  const auto r = ddorm_step(TabularPolicy(1, 2, 1.0), w, RewardModelSim{}, 0, {1.0, 1.0});
  EXPECT_NEAR(r.q[0], 0.731058578630004879, 1e-15);
  // d loss / d logit = p - q
  EXPECT_NEAR(r.grads[0], 0.5 - 0.731058578630004879, 1e-15);
  EXPECT_NEAR(r.grads[1], -(0.5 - 0.731058578630004879), 1e-15);
  EXPECT_GT(r.improvement, 0.0);
}

TEST(DpoStep, LossAtReferenceIsLn2) {
  const World w = make_world(6, 3, 4);
  const auto policy = LinearPolicy::random(3, 1.0, 5, 1.0);
  const auto ref = snapshot_reference(policy);
  for (const auto& ex : sample_preferences(w, 30, 1)) {
    const auto r = dpo_step(policy, ref, w, ex, 0.1);
    EXPECT_NEAR(r.loss, std::log(2.0), 1e-12);
    EXPECT_DOUBLE_EQ(r.grad_chosen, -0.05);
  }
}

TEST(DpoStep, RejectsDegeneratePair) {
  const World w = make_world(2, 2, 1);
  const TabularPolicy p(2, 2, 1.0);
  EXPECT_THROW(dpo_step(p, snapshot_reference(p), w, PreferenceExample{0, 1, 1}, 0.1), InvalidInput);
}

TEST(Training, ZeroLearningRateIsNoOp) {
  const World w = make_world(8, 3, 2);
  const auto init = LinearPolicy::random(3, 1.0, 3, 1.0);
  auto c = short_config(Method::ddorm);
  c.learning_rate = 0.0;
  const auto out = train_ddorm(c, w, {RewardModelSim{}, all_prompts(w)}, init);
  EXPECT_TRUE(std::equal(out.policy.parameters().begin(), out.policy.parameters().end(), init.parameters().begin()));
}

TEST(Training, DeterministicForFixedSeed) {
  const World w = make_world(10, 4, 3);
  const auto init = LinearPolicy::random(3, 1.0, 3);
  const RewardModelSource src{RewardModelSim{0.3, 1.0, 0.0, Distortion::identity, 77}, all_prompts(w)};
  const auto a = train_ddorm(short_config(Method::ddorm), w, src, init);
  const auto b = train_ddorm(short_config(Method::ddorm), w, src, init);
  EXPECT_TRUE(std::equal(a.policy.parameters().begin(), a.policy.parameters().end(), b.policy.parameters().begin()));
  ASSERT_EQ(a.log.records.size(), b.log.records.size());
  for (std::size_t i = 0; i < a.log.records.size(); ++i) EXPECT_EQ(a.log.records[i].mean_loss, b.log.records[i].mean_loss);

  const PreferenceSource prefs{sample_preferences(w, 100, 5)};
  const auto d1 = train_dpo(short_config(Method::dpo), w, prefs, init);
  const auto d2 = train_dpo(short_config(Method::dpo), w, prefs, init);
  EXPECT_TRUE(std::equal(d1.policy.parameters().begin(), d1.policy.parameters().end(), d2.policy.parameters().begin()));
}

TEST(Training, LogCadenceIncludesFinalStep) {
  const World w = make_world(4, 2, 1);
  auto c = short_config(Method::ddorm);
  c.steps = 10;
  c.log_every = 4;
  const auto out = train_ddorm(c, w, {RewardModelSim{}, all_prompts(w)}, TabularPolicy(4, 2, 1.0));
  std::vector<std::size_t> steps;
  for (const auto& r : out.log.records) steps.push_back(r.step);
  EXPECT_EQ(steps, (std::vector<std::size_t>{0, 4, 8, 9}));
  ASSERT_TRUE(out.log.min_target_improvement.has_value());
  EXPECT_GE(*out.log.min_target_improvement, -1e-12);
  for (const auto& r : out.log.records) EXPECT_TRUE(r.mean_kl.has_value());
}

TEST(Training, DpoRecordsHaveNoDistillationFields) {
  const World w = make_world(4, 2, 1);
  const auto out = train_dpo(short_config(Method::dpo), w, {sample_preferences(w, 20, 1)}, TabularPolicy(4, 2, 1.0));
  for (const auto& r : out.log.records) {
    EXPECT_FALSE(r.mean_kl.has_value());
    EXPECT_FALSE(r.min_improvement.has_value());
  }
  EXPECT_FALSE(out.log.min_target_improvement.has_value());
}

TEST(Training, TabularDistillationRaisesTrueRewardMass) {
  const World w = make_world(6, 4, 8);
  auto c = short_config(Method::ddorm);
  c.steps = 400;
  c.learning_rate = 0.5;
  const auto out = train_ddorm(c, w, {RewardModelSim{}, all_prompts(w)}, TabularPolicy(6, 4, 1.0));
  for (std::size_t x = 0; x < 6; ++x) {
    std::vector<double> r(4);
    for (std::size_t y = 0; y < 4; ++y) r[y] = w.true_reward(x, y);
    const RewardVector rv(r);
    const DecisionDistribution uniform({0.25, 0.25, 0.25, 0.25});
    EXPECT_GT(expected_reward(candidate_distribution(out.policy, x), rv), expected_reward(uniform, rv));
  }
}

TEST(Training, ConstantRewardLeavesPolicyUnchanged) {
  // All candidates share one feature vector, so every reward is equal and q = p.
  WorldSpec s;
  s.num_prompts = 2;
  s.candidates_per_prompt = 3;
  s.feature_dim = 1;
  s.true_reward_weights = {1.0};
  const World w = World::from_features(s, {0.7, 0.7, 0.7, -1.0, -1.0, -1.0});
  const TabularPolicy init(2, 3, {0.1, 0.5, -0.3, 1.0, 0.0, 2.0}, 1.0);
  const auto out = train_ddorm(short_config(Method::ddorm), w, {RewardModelSim{}, {0, 1}}, init);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(out.policy.parameters()[i], init.parameters()[i], 1e-12);
}

TEST(Training, SingleDpoExampleIncreasesMargin) {
  const World w = make_world(3, 3, 6);
  const PreferenceExample ex{1, 2, 0};
  auto c = short_config(Method::dpo);
  c.batch_size = 1;
  c.learning_rate = 1.0;
  const auto out = train_dpo(c, w, {{ex}}, TabularPolicy(3, 3, 1.0));
  EXPECT_GT(out.policy.logit(1, 2) - out.policy.logit(1, 0), 0.0);
}

TEST(Training, DispatcherChecksSourceKind) {
  const World w = make_world(4, 2, 1);
  const TrainingSource prefs = PreferenceSource{sample_preferences(w, 10, 1)};
  EXPECT_THROW(train(short_config(Method::ddorm), w, prefs, TabularPolicy(4, 2, 1.0)), InvalidInput);
  const TrainingSource rm = RewardModelSource{RewardModelSim{}, {0, 1}};
  EXPECT_THROW(train(short_config(Method::dpo), w, rm, TabularPolicy(4, 2, 1.0)), InvalidInput);
}

TEST(Training, DivergenceIsReported) {
  // p underflows to zero on the candidate the target moves all its mass to.
  WorldSpec s;
  s.num_prompts = 1;
  s.candidates_per_prompt = 2;
  s.feature_dim = 1;
  s.true_reward_weights = {1.0};
  const World w = World::from_features(s, {0.0, 2000.0});
  try {
    train_ddorm(short_config(Method::ddorm), w, {RewardModelSim{}, {0}}, TabularPolicy(1, 2, {0.0, -1000.0}, 1.0));
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.record().step, 0u);
    EXPECT_TRUE(std::isinf(e.record().mean_loss));
  }
}

// Positive reward scaling keeps the per-prompt argmax of the target at a uniform policy.
TEST(ScaleSweep, TargetArgmaxStableAtUniformPolicy) {
  const World w = make_world(25, 5, 12);
  const TabularPolicy policy(25, 5, 1.0);
  for (std::size_t x = 0; x < 25; ++x) {
    std::vector<std::size_t> winners;
    for (double a : {0.5, 1.0, 2.0}) {
      RewardModelSim rm;
      rm.scale = a;
      const auto q = ddorm_step(policy, w, rm, x, {2.0, 1.0}).q;
      winners.push_back(static_cast<std::size_t>(std::max_element(q.probs().begin(), q.probs().end()) - q.probs().begin()));
    }
    EXPECT_EQ(winners[0], winners[1]);
    EXPECT_EQ(winners[1], winners[2]);
  }
}

}  // namespace
}  // namespace ddorm
