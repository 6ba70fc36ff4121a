#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file experiment.hpp
 * @brief Seeded multi-run experiments (seed x method), robustness sweeps and
 *        on-disk run artifacts.
 *
 * Run directory layout:
 *
 *     config.json                       canonical copy of the configuration
 *     worlds/seed_<s>.json              world, prompt partition and both splits
 *     metrics/<method>_seed_<s>.json    held-out metrics
 *     logs/<method>_seed_<s>.jsonl      per-step training records
 *     params/<method>_seed_<s>.json     trained policy parameters
 *     summary.csv                       method,seed,pair_accuracy,auc,mean_margin
 *     artifact.json                     run manifest
 *     error.json                        only when a run failed
 *
 * Each (seed, method) job derives every random stream from its seed, so the
 * outputs do not depend on job scheduling.
 */

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "ddorm/config.hpp"
#include "ddorm/metrics.hpp"
#include "ddorm/policy.hpp"
#include "ddorm/serialize.hpp"
#include "ddorm/trainer.hpp"
#include "ddorm/world.hpp"

namespace ddorm {

inline constexpr const char* kToolVersion = "ddorm-bench 0.1.0";

// Stream tags for derive_seed().
enum SeedTag : std::uint64_t {
  kTagWeights = 1,
  kTagPartition = 2,
  kTagTrainSplit = 3,
  kTagTestSplit = 4,
  kTagRewardModel = 5,
  kTagPolicyInit = 6,
  kTagTrainer = 7,
};

/// Everything a seed's jobs share: the world, its prompt partition, both preference splits and the RM.
struct SeedSetup {
  std::uint64_t seed = 0;
  World world;
  PromptPartition partition;
  std::vector<PreferenceExample> train_pairs;
  std::vector<PreferenceExample> test_pairs;
  RewardModelSim rm;
};

inline SeedSetup prepare_seed(const ExperimentConfig& c, std::uint64_t seed) {
  WorldSpec spec;
  spec.num_prompts = c.world.num_prompts;
  spec.candidates_per_prompt = c.world.candidates_per_prompt;
  spec.feature_dim = c.world.feature_dim;
  spec.seed = seed;
  if (!c.world.true_reward_weights.empty()) {
    spec.true_reward_weights = c.world.true_reward_weights;
  } else {
    std::mt19937_64 rng(derive_seed(seed, kTagWeights));
    std::normal_distribution<double> normal(0.0, 1.0);
    spec.true_reward_weights.resize(spec.feature_dim);
    for (double& w : spec.true_reward_weights) w = normal(rng);
  }
  World world = generate_world(spec);
  PromptPartition partition =
      partition_prompts(world.num_prompts(), c.split.test_prompt_fraction, derive_seed(seed, kTagPartition));
  auto train_pairs = sample_preferences(world, c.split.train_examples, derive_seed(seed, kTagTrainSplit), partition.train);
  auto test_pairs = sample_preferences(world, c.split.test_examples, derive_seed(seed, kTagTestSplit), partition.test);
  RewardModelSim rm;
  rm.noise_std = c.reward_model.noise_std;
  rm.scale = c.reward_model.scale;
  rm.bias = c.reward_model.bias;
  rm.distortion = c.reward_model.distortion;
  rm.seed = derive_seed(seed, kTagRewardModel);
  return {seed, std::move(world), std::move(partition), std::move(train_pairs), std::move(test_pairs), rm};
}

inline TrainConfig make_train_config(const ExperimentConfig& c, Method method, std::uint64_t seed) {
  const MethodHyperparams& h = c.hyperparams(method);
  TrainConfig t;
  t.method = method;
  t.eta = h.eta;
  t.tau = h.tau;
  t.beta = h.beta;
  t.learning_rate = h.learning_rate;
  t.steps = h.steps;
  t.batch_size = h.batch_size;
  t.seed = derive_seed(seed, kTagTrainer);
  t.log_every = c.log_every;
  return t;
}

struct SeedRun {
  Method method = Method::ddorm;
  std::uint64_t seed = 0;
  MetricsReport metrics;
  /// Same held-out pairs scored by the true reward.
  MetricsReport oracle;
  TrainLog log;
  json params;
};

namespace detail {

template <class Policy>
SeedRun train_and_evaluate(const ExperimentConfig& c, const SeedSetup& setup, Method method, Policy init) {
  const TrainConfig tc = make_train_config(c, method, setup.seed);
  TrainingSource source;
  if (method == Method::ddorm)
    source = RewardModelSource{setup.rm, setup.partition.train};
  else
    source = PreferenceSource{setup.train_pairs};
  TrainResult<Policy> trained = train(tc, setup.world, source, std::move(init));

  SeedRun run;
  run.method = method;
  run.seed = setup.seed;
  run.metrics = evaluate(trained.policy, setup.test_pairs, setup.world);
  run.oracle = evaluate(LinearPolicy(setup.world.spec().true_reward_weights, 1.0), setup.test_pairs, setup.world);
  run.log = std::move(trained.log);
  run.params = policy_to_json(trained.policy);
  return run;
}

}  // namespace detail

/// Train one method on one seed's setup and evaluate it on the held-out pairs.
inline SeedRun run_method(const ExperimentConfig& c, const SeedSetup& setup, Method method) {
  const double tau = c.hyperparams(method).tau;
  if (c.policy.kind == PolicyKind::tabular)
    return detail::train_and_evaluate(c, setup, method,
                                      TabularPolicy(setup.world.num_prompts(), setup.world.num_candidates(), tau));
  return detail::train_and_evaluate(
      c, setup, method,
      LinearPolicy::random(setup.world.feature_dim(), tau, derive_seed(setup.seed, kTagPolicyInit), c.policy.init_scale));
}

struct MeanRow {
  Method method = Method::ddorm;
  double pair_accuracy = 0.0;
  double auc = 0.0;
  double mean_margin = 0.0;
};

struct RunArtifact {
  ExperimentConfig config;
  std::vector<SeedRun> runs;  // method-major, seeds in config order
  std::vector<MeanRow> means;
  std::string tool_version = kToolVersion;
};

/// Raised after a run in which at least one job failed; partial artifacts and error.json are on disk.
class RunFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string job_stem(Method m, std::uint64_t seed) {
  return std::string(to_string(m)) + "_seed_" + std::to_string(seed);
}

inline std::vector<MeanRow> compute_means(const ExperimentConfig& c, const std::vector<SeedRun>& runs) {
  std::vector<MeanRow> means;
  for (Method m : c.methods) {
    MeanRow row;
    row.method = m;
    std::size_t count = 0;
    for (const auto& r : runs) {
      if (r.method != m) continue;
      row.pair_accuracy += r.metrics.pair_accuracy;
      row.auc += r.metrics.auc;
      row.mean_margin += r.metrics.mean_margin;
      ++count;
    }
    if (count == 0) continue;
    const double n = static_cast<double>(count);
    row.pair_accuracy /= n;
    row.auc /= n;
    row.mean_margin /= n;
    means.push_back(row);
  }
  return means;
}

inline constexpr const char* kSummaryHeader = "method,seed,pair_accuracy,auc,mean_margin";

inline std::string summary_csv(const RunArtifact& a) {
  std::ostringstream out;
  out << kSummaryHeader << '\n';
  for (Method m : a.config.methods) {
    for (const auto& r : a.runs) {
      if (r.method != m) continue;
      out << to_string(m) << ',' << r.seed << ',' << format_double(r.metrics.pair_accuracy) << ','
          << format_double(r.metrics.auc) << ',' << format_double(r.metrics.mean_margin) << '\n';
    }
    for (const auto& row : a.means) {
      if (row.method != m) continue;
      out << to_string(m) << ",mean," << format_double(row.pair_accuracy) << ',' << format_double(row.auc) << ','
          << format_double(row.mean_margin) << '\n';
    }
  }
  return out.str();
}

inline json artifact_to_json(const RunArtifact& a) {
  json j;
  j["tool_version"] = a.tool_version;
  j["config"] = config_to_json(a.config);
  j["runs"] = json::array();
  for (const auto& r : a.runs) {
    const std::string stem = job_stem(r.method, r.seed);
    json e;
    e["method"] = to_string(r.method);
    e["seed"] = r.seed;
    e["n"] = r.metrics.n;
    e["pair_accuracy"] = r.metrics.pair_accuracy;
    e["auc"] = r.metrics.auc;
    e["mean_margin"] = r.metrics.mean_margin;
    e["oracle_pair_accuracy"] = r.oracle.pair_accuracy;
    e["min_target_improvement"] = detail::optional_number(r.log.min_target_improvement);
    e["metrics_file"] = "metrics/" + stem + ".json";
    e["log_file"] = "logs/" + stem + ".jsonl";
    e["params_file"] = "params/" + stem + ".json";
    j["runs"].push_back(std::move(e));
  }
  j["means"] = json::array();
  for (const auto& m : a.means)
    j["means"].push_back(
        {{"method", to_string(m.method)}, {"pair_accuracy", m.pair_accuracy}, {"auc", m.auc}, {"mean_margin", m.mean_margin}});
  return j;
}

inline json seed_setup_to_json(const SeedSetup& s) {
  json j;
  j["seed"] = s.seed;
  j["world"] = world_to_json(s.world);
  j["train_prompts"] = s.partition.train;
  j["test_prompts"] = s.partition.test;
  j["train_pairs"] = preferences_to_json(s.train_pairs);
  j["test_pairs"] = preferences_to_json(s.test_pairs);
  return j;
}

/**
 * Run every (seed, method) job of the config, writing all artifacts under
 * out_dir. Jobs run on up to `parallel` threads. If any job throws, the
 * successful jobs' files are still written, error.json lists the failures and
 * RunFailed is raised.
 */
inline RunArtifact run_experiment(const ExperimentConfig& c, const std::filesystem::path& out_dir,
                                  std::size_t parallel = 1) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  write_text_file(out_dir / "config.json", config_to_json(c).dump(2) + "\n");

  struct Job {
    Method method;
    std::size_t seed_index;
  };
  std::vector<Job> jobs;
  for (Method m : c.methods)
    for (std::size_t i = 0; i < c.seeds.size(); ++i) jobs.push_back({m, i});

  std::vector<std::optional<SeedSetup>> setups(c.seeds.size());
  std::vector<std::optional<SeedRun>> results(jobs.size());
  std::vector<std::string> errors(jobs.size());

  // Seed setups first, so each world file is written exactly once.
  std::vector<std::string> setup_errors(c.seeds.size());
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    try {
      setups[i] = prepare_seed(c, c.seeds[i]);
      write_text_file(out_dir / "worlds" / ("seed_" + std::to_string(c.seeds[i]) + ".json"),
                      seed_setup_to_json(*setups[i]).dump() + "\n");
    } catch (const std::exception& e) {
      setup_errors[i] = e.what();
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job& job = jobs[j];
      const std::uint64_t seed = c.seeds[job.seed_index];
      try {
        if (!setups[job.seed_index]) throw std::runtime_error("seed setup failed: " + setup_errors[job.seed_index]);
        SeedRun run = run_method(c, *setups[job.seed_index], job.method);
        const std::string stem = job_stem(job.method, seed);
        write_text_file(out_dir / "metrics" / (stem + ".json"),
                        metrics_to_json(to_string(job.method), seed, run.metrics).dump(2) + "\n");
        write_text_file(out_dir / "logs" / (stem + ".jsonl"), train_log_to_jsonl(run.log));
        write_text_file(out_dir / "params" / (stem + ".json"), run.params.dump() + "\n");
        results[j] = std::move(run);
      } catch (const std::exception& e) {
        errors[j] = e.what();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(parallel, 1, jobs.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  RunArtifact artifact;
  artifact.config = c;
  json failures = json::array();
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (results[j]) {
      artifact.runs.push_back(std::move(*results[j]));
    } else {
      failures.push_back({{"method", to_string(jobs[j].method)},
                          {"seed", c.seeds[jobs[j].seed_index]},
                          {"error", errors[j]}});
    }
  }
  artifact.means = compute_means(c, artifact.runs);

  if (!failures.empty()) {
    write_text_file(out_dir / "error.json", json{{"failed", failures}}.dump(2) + "\n");
    throw RunFailed(std::to_string(failures.size()) + " of " + std::to_string(jobs.size()) +
                    " runs failed; see " + (out_dir / "error.json").string());
  }
  std::error_code ignored;
  fs::remove(out_dir / "error.json", ignored);
  write_text_file(out_dir / "summary.csv", summary_csv(artifact));
  write_text_file(out_dir / "artifact.json", artifact_to_json(artifact).dump(2) + "\n");
  return artifact;
}

enum class SweepAxis { noise_std, scale, bias, distortion, eta };

inline std::optional<SweepAxis> parse_sweep_axis(std::string_view name) {
  if (name == "noise_std") return SweepAxis::noise_std;
  if (name == "scale") return SweepAxis::scale;
  if (name == "bias") return SweepAxis::bias;
  if (name == "distortion") return SweepAxis::distortion;
  if (name == "eta") return SweepAxis::eta;
  return std::nullopt;
}

inline std::string_view to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::noise_std: return "noise_std";
    case SweepAxis::scale: return "scale";
    case SweepAxis::bias: return "bias";
    case SweepAxis::distortion: return "distortion";
    case SweepAxis::eta: return "eta";
  }
  return "";
}

/// Copy of `base` with one axis set to the grid value given as text.
inline ExperimentConfig apply_sweep_value(const ExperimentConfig& base, SweepAxis axis, const std::string& value) {
  ExperimentConfig c = base;
  if (axis == SweepAxis::distortion) {
    const auto d = parse_distortion(value);
    if (!d) throw ConfigError("sweep grid value '" + value + "': expected identity, cube or signed-sqrt");
    c.reward_model.distortion = *d;
    return c;
  }
  double v = 0.0;
  try {
    v = parse_double(value);
  } catch (const std::exception&) {
    throw ConfigError("sweep grid value '" + value + "': expected a number");
  }
  switch (axis) {
    case SweepAxis::noise_std:
      if (!(v >= 0.0)) throw ConfigError("sweep grid value '" + value + "': noise_std must be >= 0");
      c.reward_model.noise_std = v;
      break;
    case SweepAxis::scale:
      if (!(v > 0.0)) throw ConfigError("sweep grid value '" + value + "': scale must be > 0");
      c.reward_model.scale = v;
      break;
    case SweepAxis::bias: c.reward_model.bias = v; break;
    case SweepAxis::eta:
      if (!(v >= 0.0)) throw ConfigError("sweep grid value '" + value + "': eta must be >= 0");
      c.ddorm.eta = v;
      break;
    case SweepAxis::distortion: break;
  }
  return c;
}

struct SweepPoint {
  std::string value;
  RunArtifact artifact;
};

inline constexpr const char* kSweepHeader = "axis,value,method,seed,pair_accuracy,auc,mean_margin";

inline std::string sweep_csv(SweepAxis axis, const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << kSweepHeader << '\n';
  for (const auto& pt : points) {
    std::istringstream rows(summary_csv(pt.artifact));
    std::string line;
    std::getline(rows, line);  // header
    while (std::getline(rows, line)) out << to_string(axis) << ',' << pt.value << ',' << line << '\n';
  }
  return out.str();
}

/// cmd_run per grid point into out_dir/point_<i>/, then out_dir/sweep.csv with a grid-value column.
inline std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, SweepAxis axis,
                                         const std::vector<std::string>& grid, const std::filesystem::path& out_dir,
                                         std::size_t parallel = 1) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  std::vector<ExperimentConfig> configs;
  for (const auto& v : grid) configs.push_back(apply_sweep_value(base, axis, v));
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < grid.size(); ++i)
    points.push_back({grid[i], run_experiment(configs[i], out_dir / ("point_" + std::to_string(i)), parallel)});
  write_text_file(out_dir / "sweep.csv", sweep_csv(axis, points));
  return points;
}

}  // namespace ddorm
