#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file config.hpp
 * @brief Experiment configuration: strict JSON parsing and canonical dumping.
 *
 * Every key is optional and falls back to the desk-scale default; unknown keys
 * and wrongly typed values raise ConfigError naming the offending field. The
 * canonical dump written next to each run contains every field, so reloading
 * it reproduces the run.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddorm/serialize.hpp"
#include "ddorm/trainer.hpp"
#include "ddorm/world.hpp"

namespace ddorm {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PolicyKind { linear, tabular };

inline std::string_view to_string(PolicyKind k) { return k == PolicyKind::linear ? "linear" : "tabular"; }

struct WorldConfig {
  std::size_t num_prompts = 200;
  std::size_t candidates_per_prompt = 2;
  std::size_t feature_dim = 8;
  /// Empty means: draw N(0, 1) weights from each run seed.
  std::vector<double> true_reward_weights;
};

struct SplitConfig {
  std::size_t train_examples = 1500;
  std::size_t test_examples = 500;
  /// Fraction of prompts held out for evaluation; 0 evaluates on the training prompts.
  double test_prompt_fraction = 0.5;
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::linear;
  double init_scale = 0.1;
};

struct RewardModelConfig {
  double noise_std = 0.0;
  double scale = 1.0;
  double bias = 0.0;
  Distortion distortion = Distortion::identity;
};

struct MethodHyperparams {
  double eta = 2.0;
  double tau = 1.0;
  double beta = kDefaultDpoBeta;
  double learning_rate = 0.1;
  std::size_t steps = 3000;
  std::size_t batch_size = 16;
};

struct ExperimentConfig {
  WorldConfig world;
  SplitConfig split;
  PolicyConfig policy;
  RewardModelConfig reward_model;
  MethodHyperparams ddorm;
  MethodHyperparams dpo;
  std::vector<Method> methods{Method::dpo, Method::ddorm};
  std::vector<std::uint64_t> seeds{42, 13, 3407};
  std::size_t log_every = 1;

  const MethodHyperparams& hyperparams(Method m) const { return m == Method::ddorm ? ddorm : dpo; }
};

namespace detail {

inline void reject_unknown(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || item.key() == a;
    if (!known) throw ConfigError(std::string(where) + "." + item.key() + ": unknown key");
  }
}

template <class T>
void read_field(const json& obj, std::string_view where, const char* key, T& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  const std::string path = std::string(where) + "." + key;
  if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw ConfigError(path + ": must be finite");
  } else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
    if (!v.is_number_unsigned()) throw ConfigError(path + ": expected a non-negative integer");
    out = v.get<T>();
  } else if constexpr (std::is_same_v<T, std::vector<double>>) {
    if (!v.is_array()) throw ConfigError(path + ": expected an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(path + ": expected an array of numbers");
      out.push_back(e.get<double>());
    }
  } else {
    static_assert(sizeof(T) == 0, "unsupported config field type");
  }
}

inline std::string read_string(const json& obj, std::string_view where, const char* key, std::string fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(std::string(where) + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline void check(bool ok, const std::string& path, const char* message) {
  if (!ok) throw ConfigError(path + ": " + message);
}

inline MethodHyperparams parse_hyperparams(const json& obj, std::string_view where, Method method) {
  MethodHyperparams h;
  if (method == Method::ddorm)
    reject_unknown(obj, where, {"eta", "tau", "learning_rate", "steps", "batch_size"});
  else
    reject_unknown(obj, where, {"beta", "tau", "learning_rate", "steps", "batch_size"});
  read_field(obj, where, "eta", h.eta);
  read_field(obj, where, "beta", h.beta);
  read_field(obj, where, "tau", h.tau);
  read_field(obj, where, "learning_rate", h.learning_rate);
  read_field(obj, where, "steps", h.steps);
  read_field(obj, where, "batch_size", h.batch_size);
  const std::string w(where);
  check(h.eta >= 0.0, w + ".eta", "must be >= 0");
  check(h.beta > 0.0, w + ".beta", "must be > 0");
  check(h.tau > 0.0, w + ".tau", "must be > 0");
  check(h.learning_rate >= 0.0, w + ".learning_rate", "must be >= 0");
  check(h.steps >= 1, w + ".steps", "must be >= 1");
  check(h.batch_size >= 1, w + ".batch_size", "must be >= 1");
  return h;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& root) {
  using detail::check;
  ExperimentConfig c;
  detail::reject_unknown(root, "config",
                         {"world", "split", "policy", "reward_model", "ddorm", "dpo", "methods", "seeds", "log_every"});

  if (root.contains("world")) {
    const json& w = root.at("world");
    detail::reject_unknown(w, "config.world", {"num_prompts", "candidates_per_prompt", "feature_dim", "true_reward_weights"});
    detail::read_field(w, "config.world", "num_prompts", c.world.num_prompts);
    detail::read_field(w, "config.world", "candidates_per_prompt", c.world.candidates_per_prompt);
    detail::read_field(w, "config.world", "feature_dim", c.world.feature_dim);
    detail::read_field(w, "config.world", "true_reward_weights", c.world.true_reward_weights);
  }
  check(c.world.num_prompts >= 1, "config.world.num_prompts", "must be >= 1");
  check(c.world.candidates_per_prompt >= 2, "config.world.candidates_per_prompt", "must be >= 2");
  check(c.world.feature_dim >= 1, "config.world.feature_dim", "must be >= 1");
  check(c.world.true_reward_weights.empty() || c.world.true_reward_weights.size() == c.world.feature_dim,
        "config.world.true_reward_weights", "length must equal feature_dim");

  if (root.contains("split")) {
    const json& s = root.at("split");
    detail::reject_unknown(s, "config.split", {"train_examples", "test_examples", "test_prompt_fraction"});
    detail::read_field(s, "config.split", "train_examples", c.split.train_examples);
    detail::read_field(s, "config.split", "test_examples", c.split.test_examples);
    detail::read_field(s, "config.split", "test_prompt_fraction", c.split.test_prompt_fraction);
  }
  check(c.split.train_examples >= 1, "config.split.train_examples", "must be >= 1");
  check(c.split.test_examples >= 1, "config.split.test_examples", "must be >= 1");
  check(c.split.test_prompt_fraction >= 0.0 && c.split.test_prompt_fraction < 1.0, "config.split.test_prompt_fraction",
        "must be in [0, 1)");
  check(c.split.test_prompt_fraction == 0.0 || c.world.num_prompts >= 2, "config.world.num_prompts",
        "held-out prompts need at least 2 prompts");

  if (root.contains("policy")) {
    const json& p = root.at("policy");
    detail::reject_unknown(p, "config.policy", {"kind", "init_scale"});
    const std::string kind = detail::read_string(p, "config.policy", "kind", "linear");
    if (kind == "linear")
      c.policy.kind = PolicyKind::linear;
    else if (kind == "tabular")
      c.policy.kind = PolicyKind::tabular;
    else
      throw ConfigError("config.policy.kind: expected \"linear\" or \"tabular\"");
    detail::read_field(p, "config.policy", "init_scale", c.policy.init_scale);
  }
  check(c.policy.init_scale >= 0.0, "config.policy.init_scale", "must be >= 0");
  check(c.policy.kind == PolicyKind::linear || c.split.test_prompt_fraction == 0.0, "config.split.test_prompt_fraction",
        "tabular policies cannot score held-out prompts; use 0");

  if (root.contains("reward_model")) {
    const json& r = root.at("reward_model");
    detail::reject_unknown(r, "config.reward_model", {"noise_std", "scale", "bias", "distortion"});
    detail::read_field(r, "config.reward_model", "noise_std", c.reward_model.noise_std);
    detail::read_field(r, "config.reward_model", "scale", c.reward_model.scale);
    detail::read_field(r, "config.reward_model", "bias", c.reward_model.bias);
    const auto d = parse_distortion(detail::read_string(r, "config.reward_model", "distortion", "identity"));
    if (!d) throw ConfigError("config.reward_model.distortion: expected identity, cube or signed-sqrt");
    c.reward_model.distortion = *d;
  }
  check(c.reward_model.noise_std >= 0.0, "config.reward_model.noise_std", "must be >= 0");
  check(c.reward_model.scale > 0.0, "config.reward_model.scale", "must be > 0");

  if (root.contains("ddorm")) c.ddorm = detail::parse_hyperparams(root.at("ddorm"), "config.ddorm", Method::ddorm);
  if (root.contains("dpo")) c.dpo = detail::parse_hyperparams(root.at("dpo"), "config.dpo", Method::dpo);

  if (root.contains("methods")) {
    const json& m = root.at("methods");
    check(m.is_array() && !m.empty(), "config.methods", "expected a non-empty array");
    c.methods.clear();
    for (const auto& e : m) {
      const auto parsed = e.is_string() ? parse_method(e.get<std::string>()) : std::nullopt;
      check(parsed.has_value(), "config.methods", "entries must be \"ddorm\" or \"dpo\"");
      for (Method prev : c.methods) check(prev != *parsed, "config.methods", "duplicate method");
      c.methods.push_back(*parsed);
    }
  }
  if (root.contains("seeds")) {
    const json& s = root.at("seeds");
    check(s.is_array(), "config.seeds", "expected an array of non-negative integers");
    c.seeds.clear();
    for (const auto& e : s) {
      check(e.is_number_unsigned(), "config.seeds", "expected an array of non-negative integers");
      c.seeds.push_back(e.get<std::uint64_t>());
    }
  }
  check(!c.seeds.empty(), "config.seeds", "must not be empty");
  detail::read_field(root, "config", "log_every", c.log_every);
  check(c.log_every >= 1, "config.log_every", "must be >= 1");
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  json root;
  try {
    root = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(root);
}

/// Canonical form with every field spelled out.
inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["world"] = {{"num_prompts", c.world.num_prompts},
                {"candidates_per_prompt", c.world.candidates_per_prompt},
                {"feature_dim", c.world.feature_dim}};
  if (!c.world.true_reward_weights.empty()) j["world"]["true_reward_weights"] = c.world.true_reward_weights;
  j["split"] = {{"train_examples", c.split.train_examples},
                {"test_examples", c.split.test_examples},
                {"test_prompt_fraction", c.split.test_prompt_fraction}};
  j["policy"] = {{"kind", to_string(c.policy.kind)}, {"init_scale", c.policy.init_scale}};
  j["reward_model"] = {{"noise_std", c.reward_model.noise_std},
                       {"scale", c.reward_model.scale},
                       {"bias", c.reward_model.bias},
                       {"distortion", to_string(c.reward_model.distortion)}};
  j["ddorm"] = {{"eta", c.ddorm.eta},
                {"tau", c.ddorm.tau},
                {"learning_rate", c.ddorm.learning_rate},
                {"steps", c.ddorm.steps},
                {"batch_size", c.ddorm.batch_size}};
  j["dpo"] = {{"beta", c.dpo.beta},
              {"tau", c.dpo.tau},
              {"learning_rate", c.dpo.learning_rate},
              {"steps", c.dpo.steps},
              {"batch_size", c.dpo.batch_size}};
  j["methods"] = json::array();
  for (Method m : c.methods) j["methods"].push_back(to_string(m));
  j["seeds"] = c.seeds;
  j["log_every"] = c.log_every;
  return j;
}

}  // namespace ddorm
