// SPDX-License-Identifier: Apache-2.0

// Acceptance gate: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ddorm/ddorm.hpp"
#include "ddorm/oracles.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ddorm;
using Clock = std::chrono::steady_clock;
using Rng = std::mt19937_64;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

std::vector<double> uniform_vector(Rng& rng, std::size_t k, double lo, double hi) {
  std::vector<double> v(k);
  for (double& x : v) x = uniform(rng, lo, hi);
  return v;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ddorm_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig default_config() { return load_config(fs::path(DDORM_SOURCE_DIR) / "configs" / "default.json"); }

Outcome ac1_oracle_equivalence() {
  Rng rng(101);
  const std::size_t ks[] = {2, 3, 5, 10};
  const auto t0 = Clock::now();
  double worst_entry = 0.0, worst_obj = 0.0;
  const int n = 500;
  for (int i = 0; i < n; ++i) {
    const std::size_t k = ks[i % 4];
    const double eta = std::exp(uniform(rng, std::log(0.01), std::log(10.0)));
    const double tau = uniform(rng, 0.1, 5.0);
    const ScoreVector s(uniform_vector(rng, k, -3.0, 3.0), tau);
    const RewardVector r(uniform_vector(rng, k, -5.0, 5.0));
    const DdormStepParams params{eta, tau};
    const auto p = softmax_distribution(s);
    const auto q = ddorm_target(s, r, params);
    const auto u = kl_prox_oracle(p, r, params, 1e-10);
    worst_entry = std::max(worst_entry, max_abs_diff(q.probs(), u.probs()));
    worst_obj = std::max(worst_obj, std::abs(proximal_objective(q, p, r, params) - proximal_objective(u, p, r, params)));
  }
  const double secs = seconds_since(t0);
  return {worst_entry <= 1e-5 && worst_obj <= 1e-8 && secs <= 60.0,
          fmt("500 instances, max entry diff %.3g, max objective diff %.3g, %.2f s", worst_entry, worst_obj, secs)};
}

Outcome ac2_shift_invariance() {
  Rng rng(202);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + static_cast<std::size_t>(i % 9);
    const double tau = uniform(rng, 0.1, 5.0);
    const double eta = std::exp(uniform(rng, std::log(0.01), std::log(10.0)));
    const ScoreVector s(uniform_vector(rng, k, -3.0, 3.0), tau);
    std::vector<double> r = uniform_vector(rng, k, -5.0, 5.0);
    const double c = uniform(rng, -100.0, 100.0);
    std::vector<double> shifted = r;
    for (double& v : shifted) v += c;
    const auto q = ddorm_target(s, RewardVector(r), {eta, tau});
    const auto qc = ddorm_target(s, RewardVector(shifted), {eta, tau});
    worst = std::max(worst, max_abs_diff(q.probs(), qc.probs()));
  }

  auto c = default_config();
  c.methods = {Method::ddorm};
  const fs::path out = scratch("bias_sweep");
  const auto points = run_sweep(c, SweepAxis::bias, {"-10", "0", "10"}, out, 3);
  double sweep_worst = 0.0;
  for (const auto& pt : points)
    for (std::size_t i = 0; i < pt.artifact.runs.size(); ++i) {
      const auto& a = pt.artifact.runs[i].metrics;
      const auto& b = points[1].artifact.runs[i].metrics;
      sweep_worst = std::max({sweep_worst, std::abs(a.pair_accuracy - b.pair_accuracy), std::abs(a.auc - b.auc),
                              std::abs(a.mean_margin - b.mean_margin)});
    }
  fs::remove_all(out);
  return {worst <= 1e-12 && sweep_worst <= 1e-10,
          fmt("1000 shifts, max diff %.3g; bias sweep {-10,0,10} max metric diff %.3g", worst, sweep_worst)};
}

Outcome ac3_zero_step() {
  Rng rng(303);
  bool exact = true;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + static_cast<std::size_t>(i % 9);
    const ScoreVector s(uniform_vector(rng, k, -5.0, 5.0), uniform(rng, 0.1, 5.0));
    const auto q = ddorm_target(s, RewardVector(uniform_vector(rng, k, -5.0, 5.0)), {0.0, s.temperature()});
    exact = exact && q == softmax_distribution(s);
  }

  WorldSpec spec;
  spec.num_prompts = 10;
  spec.candidates_per_prompt = 4;
  spec.feature_dim = 5;
  spec.true_reward_weights = {1.0, -1.0, 0.5, 2.0, -0.3};
  spec.seed = 7;
  const World w = generate_world(spec);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto policy = LinearPolicy::random(5, 1.0, seed, 1.0);
    const RewardModelSim rm{0.5, 2.0, 1.0, Distortion::identity, seed};
    for (std::size_t x = 0; x < w.num_prompts(); ++x)
      for (double g : ddorm_step(policy, w, rm, x, {0.0, 1.0}).grads) worst = std::max(worst, std::abs(g));
    const TabularPolicy tab(10, 4, uniform_vector(rng, 40, -2.0, 2.0), 1.0);
    for (std::size_t x = 0; x < w.num_prompts(); ++x)
      for (double g : ddorm_step(tab, w, rm, x, {0.0, 1.0}).grads) worst = std::max(worst, std::abs(g));
  }
  return {exact && worst <= 1e-12,
          std::string(exact ? "eta=0 target equals p bit-for-bit on 1000 instances" : "eta=0 target differs from p") +
              fmt("; max |grad| at eta=0 %.3g", worst)};
}

Outcome ac4_improvement(const RunArtifact& default_run) {
  Rng rng(404);
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10000; ++i) {
    const std::size_t k = 2 + static_cast<std::size_t>(i % 9);
    const double tau = uniform(rng, 0.1, 5.0);
    const double eta = std::exp(uniform(rng, std::log(1e-3), std::log(100.0)));
    const ScoreVector s(uniform_vector(rng, k, -5.0, 5.0), tau);
    const RewardVector r(uniform_vector(rng, k, -5.0, 5.0));
    const auto p = softmax_distribution(s);
    const auto q = ddorm_target(s, r, {eta, tau});
    worst = std::min(worst, expected_reward(q, r) - expected_reward(p, r));
  }
  double run_worst = std::numeric_limits<double>::infinity();
  std::size_t runs = 0;
  for (const auto& r : default_run.runs) {
    if (r.method != Method::ddorm || !r.log.min_target_improvement) continue;
    run_worst = std::min(run_worst, *r.log.min_target_improvement);
    ++runs;
  }
  return {worst >= -1e-12 && runs == 3 && run_worst >= -1e-12,
          fmt("min gain over 10000 instances %.3g; min over every step of %.0f default ddorm runs %.3g", worst,
              static_cast<double>(runs), run_worst)};
}

Outcome ac5_gradients() {
  Rng rng(505);
  std::size_t ddorm_bad = 0, dpo_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + static_cast<std::size_t>(i % 9);
    const double tau = uniform(rng, 0.1, 5.0);
    const std::vector<double> s = uniform_vector(rng, k, -3.0, 3.0);
    const auto q = softmax_distribution(ScoreVector(uniform_vector(rng, k, -3.0, 3.0), 1.0));
    const auto analytic = ddorm_loss_grad(q, ScoreVector(s, tau));
    const auto numeric = oracle::central_difference(
        [&](std::span<const double> x) { return ddorm_loss(q, softmax_distribution(ScoreVector({x.begin(), x.end()}, tau))); },
        s, 1e-5);
    for (std::size_t j = 0; j < k; ++j)
      if (!oracle::close_relative(analytic[j], numeric[j], 1e-6, 1e-9)) ++ddorm_bad;
  }
  for (int i = 0; i < 1000; ++i) {
    const DpoInputs inp{uniform(rng, -10.0, 0.0), uniform(rng, -10.0, 0.0), uniform(rng, -10.0, 0.0),
                        uniform(rng, -10.0, 0.0), uniform(rng, 0.01, 1.0)};
    const auto [gc, gr] = dpo_loss_grad(inp);
    const std::vector<double> x{inp.policy_logp_chosen, inp.policy_logp_rejected};
    const auto numeric = oracle::central_difference(
        [&](std::span<const double> v) {
          DpoInputs m = inp;
          m.policy_logp_chosen = v[0];
          m.policy_logp_rejected = v[1];
          return dpo_loss(m);
        },
        x, 1e-5);
    if (!oracle::close_relative(gc, numeric[0], 1e-6, 1e-9) || !oracle::close_relative(gr, numeric[1], 1e-6, 1e-9))
      ++dpo_bad;
  }
  double ln2_worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double c = uniform(rng, -20.0, 0.0), r = uniform(rng, -20.0, 0.0);
    ln2_worst = std::max(ln2_worst, std::abs(dpo_loss({c, r, c, r, uniform(rng, 0.01, 5.0)}) - std::log(2.0)));
  }
  return {ddorm_bad == 0 && dpo_bad == 0 && ln2_worst <= 1e-12,
          fmt("fd mismatches: ddorm %.0f / 1000 inputs, dpo %.0f / 1000 inputs; |dpo_loss(ref) - ln 2| max %.3g",
              static_cast<double>(ddorm_bad), static_cast<double>(dpo_bad), ln2_worst)};
}

Outcome ac6_metric_oracles() {
  Rng rng(606);
  std::size_t auc_bad = 0, direct_bad = 0;
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 1 + static_cast<std::size_t>(i % 50);
    const bool coarse = i % 2 == 0;  // integer scores force many ties
    std::vector<ScoredPair> pairs(n);
    for (auto& p : pairs) {
      if (coarse) {
        p = {std::floor(uniform(rng, -3.0, 3.0)), std::floor(uniform(rng, -3.0, 3.0))};
      } else {
        p = {uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0)};
      }
    }
    if (roc_auc(pairs) != oracle::brute_force_auc(pairs)) ++auc_bad;

    std::size_t correct = 0;
    double total = 0.0;
    for (const auto& p : pairs) {
      if (p.chosen_score - p.rejected_score > 0.0) ++correct;
      total += p.chosen_score - p.rejected_score;
    }
    if (pair_accuracy(pairs) != static_cast<double>(correct) / static_cast<double>(n) ||
        mean_margin(pairs) != total / static_cast<double>(n))
      ++direct_bad;
  }

  WorldSpec spec;
  spec.num_prompts = 50;
  spec.candidates_per_prompt = 4;
  spec.feature_dim = 3;
  spec.true_reward_weights = {1.0, 0.5, -1.0};
  spec.seed = 66;
  const World w = generate_world(spec);
  const auto test = sample_preferences(w, 500, 3);
  const auto z = evaluate(LinearPolicy({0.0, 0.0, 0.0}, 1.0), test, w);
  const auto zt = evaluate(TabularPolicy(50, 4, 1.0), test, w);
  const bool zero_ok = z.pair_accuracy == 0.0 && z.auc == 0.5 && z.mean_margin == 0.0 && zt.pair_accuracy == 0.0 &&
                       zt.auc == 0.5 && zt.mean_margin == 0.0;
  return {auc_bad == 0 && direct_bad == 0 && zero_ok,
          fmt("auc != brute force on %.0f / 500 sets; direct recomputation mismatches %.0f; zero policy %s",
              static_cast<double>(auc_bad), static_cast<double>(direct_bad)) +
              (zero_ok ? "(0, 0.5, 0)" : "WRONG")};
}

Outcome ac7_end_to_end(const RunArtifact& a, double secs) {
  double ddorm_mean = 0.0, dpo_mean = 0.0, oracle_mean = 0.0, worst_gap = 0.0;
  for (const auto& r : a.runs) {
    if (r.method == Method::ddorm) {
      worst_gap = std::max(worst_gap, std::abs(r.metrics.pair_accuracy - r.oracle.pair_accuracy));
      oracle_mean += r.oracle.pair_accuracy / 3.0;
    }
  }
  for (const auto& m : a.means) (m.method == Method::ddorm ? ddorm_mean : dpo_mean) = m.pair_accuracy;
  const bool pass = a.runs.size() == 6 && worst_gap <= 0.02 && std::abs(ddorm_mean - oracle_mean) <= 0.02 &&
                    ddorm_mean >= dpo_mean && secs <= 300.0;
  return {pass, fmt("ddorm %.4f, dpo %.4f, oracle %.4f", ddorm_mean, dpo_mean, oracle_mean) +
                    fmt("; worst per-seed |ddorm - oracle| %.4f; %.2f s", worst_gap, secs)};
}

Outcome ac8_determinism(const fs::path& first) {
  const fs::path second = scratch("determinism");
  run_experiment(default_config(), second);
  std::vector<fs::path> files{"summary.csv"};
  for (const auto& e : fs::directory_iterator(first / "metrics")) files.push_back(fs::path("metrics") / e.path().filename());
  std::size_t differing = 0;
  for (const auto& rel : files)
    if (!fs::exists(second / rel) || read_text_file(first / rel) != read_text_file(second / rel)) ++differing;
  fs::remove_all(second);
  return {files.size() == 7 && differing == 0,
          fmt("%.0f files compared (summary.csv + metrics), %.0f differ", static_cast<double>(files.size()),
              static_cast<double>(differing))};
}

Outcome ac9_bradley_terry() {
  WorldSpec spec;
  spec.num_prompts = 1;
  spec.candidates_per_prompt = 2;
  spec.feature_dim = 1;
  spec.true_reward_weights = {1.0};
  const World w = World::from_features(spec, {2.0, 0.0});
  const auto ex = sample_preferences(w, 10000, 909);
  const auto wins = std::count_if(ex.begin(), ex.end(), [](const PreferenceExample& e) { return e.chosen_id == 0; });
  const double rate = static_cast<double>(wins) / 10000.0;
  const double target = 1.0 / (1.0 + std::exp(-2.0));
  return {std::abs(rate - target) <= 0.01, fmt("chosen rate %.4f vs sigmoid(2) %.4f", rate, target)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* id, const char* name, const std::function<Outcome()>& check) {
    Outcome out;
    try {
      out = check();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    if (!out.pass) ++failures;
    std::printf("[%s] %s %s: %s\n", out.pass ? "PASS" : "FAIL", id, name, out.detail.c_str());
    std::fflush(stdout);
  };

  // The default run feeds criteria 4, 7 and 8.
  const fs::path default_dir = scratch("default_run");
  RunArtifact default_run;
  double default_secs = 0.0;
  std::string default_error;
  try {
    const auto t0 = Clock::now();
    default_run = run_experiment(default_config(), default_dir);
    default_secs = seconds_since(t0);
  } catch (const std::exception& e) {
    default_error = e.what();
  }
  auto needs_default = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!default_error.empty()) return {false, "default run failed: " + default_error};
      return fn();
    };
  };

  report("AC1", "oracle-equivalence", ac1_oracle_equivalence);
  report("AC2", "shift-invariance", ac2_shift_invariance);
  report("AC3", "zero-step-identity", ac3_zero_step);
  report("AC4", "improvement", needs_default([&] { return ac4_improvement(default_run); }));
  report("AC5", "gradient-checks", ac5_gradients);
  report("AC6", "metric-oracles", ac6_metric_oracles);
  report("AC7", "end-to-end", needs_default([&] { return ac7_end_to_end(default_run, default_secs); }));
  report("AC8", "determinism", needs_default([&] { return ac8_determinism(default_dir); }));
  report("AC9", "bradley-terry-calibration", ac9_bradley_terry);

  fs::remove_all(default_dir);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
