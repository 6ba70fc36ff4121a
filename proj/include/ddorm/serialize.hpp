#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file serialize.hpp
 * @brief JSON/CSV encodings of worlds, splits, policies, train logs and metrics.
 */

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "ddorm/metrics.hpp"
#include "ddorm/policy.hpp"
#include "ddorm/trainer.hpp"
#include "ddorm/world.hpp"

namespace ddorm {

using json = nlohmann::ordered_json;

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::runtime_error("not a number: '" + std::string(text) + "'");
  return v;
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Metrics: { method, seed, n, pair_accuracy, auc, mean_margin, per_pair_margins }
inline json metrics_to_json(std::string_view method, std::uint64_t seed, const MetricsReport& m) {
  json j;
  j["method"] = method;
  j["seed"] = seed;
  j["n"] = m.n;
  j["pair_accuracy"] = m.pair_accuracy;
  j["auc"] = m.auc;
  j["mean_margin"] = m.mean_margin;
  j["per_pair_margins"] = m.per_pair_margins;
  return j;
}

inline MetricsReport metrics_from_json(const json& j) {
  MetricsReport m;
  m.n = j.at("n").get<std::size_t>();
  m.pair_accuracy = j.at("pair_accuracy").get<double>();
  m.auc = j.at("auc").get<double>();
  m.mean_margin = j.at("mean_margin").get<double>();
  m.per_pair_margins = j.at("per_pair_margins").get<std::vector<double>>();
  return m;
}

namespace detail {
inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
}  // namespace detail

/// One JSON-lines record. Distillation-only fields are null for DPO.
inline json record_to_json(const TrainRecord& r) {
  json j;
  j["step"] = r.step;
  j["mean_loss"] = r.mean_loss;
  j["mean_kl"] = detail::optional_number(r.mean_kl);
  j["mean_improvement"] = detail::optional_number(r.mean_improvement);
  j["min_improvement"] = detail::optional_number(r.min_improvement);
  return j;
}

inline std::string train_log_to_jsonl(const TrainLog& log) {
  std::string out;
  for (const auto& r : log.records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline json world_spec_to_json(const WorldSpec& s) {
  json j;
  j["num_prompts"] = s.num_prompts;
  j["candidates_per_prompt"] = s.candidates_per_prompt;
  j["feature_dim"] = s.feature_dim;
  j["true_reward_weights"] = s.true_reward_weights;
  j["seed"] = s.seed;
  return j;
}

inline json world_to_json(const World& w) {
  json j;
  j["spec"] = world_spec_to_json(w.spec());
  j["features"] = std::vector<double>(w.all_features().begin(), w.all_features().end());
  return j;
}

inline World world_from_json(const json& j) {
  const json& s = j.at("spec");
  WorldSpec spec;
  spec.num_prompts = s.at("num_prompts").get<std::size_t>();
  spec.candidates_per_prompt = s.at("candidates_per_prompt").get<std::size_t>();
  spec.feature_dim = s.at("feature_dim").get<std::size_t>();
  spec.true_reward_weights = s.at("true_reward_weights").get<std::vector<double>>();
  spec.seed = s.at("seed").get<std::uint64_t>();
  return World::from_features(std::move(spec), j.at("features").get<std::vector<double>>());
}

inline json preferences_to_json(std::span<const PreferenceExample> examples) {
  json arr = json::array();
  for (const auto& e : examples) arr.push_back({{"prompt_id", e.prompt_id}, {"chosen_id", e.chosen_id}, {"rejected_id", e.rejected_id}});
  return arr;
}

inline std::vector<PreferenceExample> preferences_from_json(const json& arr) {
  std::vector<PreferenceExample> out;
  for (const auto& e : arr)
    out.push_back({e.at("prompt_id").get<std::size_t>(), e.at("chosen_id").get<std::size_t>(),
                   e.at("rejected_id").get<std::size_t>()});
  return out;
}

inline json policy_to_json(const TabularPolicy& p) {
  json j;
  j["kind"] = "tabular";
  j["temperature"] = p.temperature();
  j["num_prompts"] = p.num_prompts();
  j["num_candidates"] = p.num_candidates();
  j["parameters"] = std::vector<double>(p.parameters().begin(), p.parameters().end());
  return j;
}

inline json policy_to_json(const LinearPolicy& p) {
  json j;
  j["kind"] = "linear";
  j["temperature"] = p.temperature();
  j["parameters"] = std::vector<double>(p.parameters().begin(), p.parameters().end());
  return j;
}

inline TabularPolicy tabular_policy_from_json(const json& j) {
  if (j.at("kind") != "tabular") throw std::runtime_error("policy JSON is not tabular");
  return TabularPolicy(j.at("num_prompts").get<std::size_t>(), j.at("num_candidates").get<std::size_t>(),
                       j.at("parameters").get<std::vector<double>>(), j.at("temperature").get<double>());
}

inline LinearPolicy linear_policy_from_json(const json& j) {
  if (j.at("kind") != "linear") throw std::runtime_error("policy JSON is not linear");
  return LinearPolicy(j.at("parameters").get<std::vector<double>>(), j.at("temperature").get<double>());
}

}  // namespace ddorm
