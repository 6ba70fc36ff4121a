#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file metrics.hpp
 * @brief Held-out pairwise metrics: pair accuracy, ROC-AUC over pooled
 *        chosen/rejected scores, and mean margin.
 */

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "ddorm/errors.hpp"
#include "ddorm/policy.hpp"
#include "ddorm/world.hpp"

namespace ddorm {

struct ScoredPair {
  double chosen_score = 0.0;
  double rejected_score = 0.0;

  double margin() const noexcept { return chosen_score - rejected_score; }
};

struct MetricsReport {
  double pair_accuracy = 0.0;
  double auc = 0.0;
  double mean_margin = 0.0;
  std::size_t n = 0;
  std::vector<double> per_pair_margins;
};

/// Fraction of pairs with margin strictly above zero; ties count as wrong.
inline double pair_accuracy(std::span<const ScoredPair> pairs) {
  detail::require(!pairs.empty(), "pair_accuracy: no pairs");
  std::size_t correct = 0;
  for (const auto& p : pairs)
    if (p.margin() > 0.0) ++correct;
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

/**
 * Mann-Whitney AUC with chosen scores labelled 1 and rejected scores labelled 0.
 *
 * Average ranks over the 2n pooled scores give U = R_chosen - n(n+1)/2, which
 * counts chosen-over-rejected wins plus half the ties. U is a multiple of 0.5
 * and exact in double precision, so the result equals the brute-force count.
 */
inline double roc_auc(std::span<const ScoredPair> pairs) {
  detail::require(!pairs.empty(), "roc_auc: no pairs");
  const std::size_t n = pairs.size();
  struct Entry {
    double score;
    bool chosen;
  };
  std::vector<Entry> pooled;
  pooled.reserve(2 * n);
  for (const auto& p : pairs) pooled.push_back({p.chosen_score, true});
  for (const auto& p : pairs) pooled.push_back({p.rejected_score, false});
  std::sort(pooled.begin(), pooled.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

  // Ranks are 1-based; a tie block [i, j) shares the average rank (i + 1 + j) / 2.
  double chosen_rank_sum = 0.0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    std::size_t chosen_in_block = 0;
    while (j < pooled.size() && pooled[j].score == pooled[i].score) {
      if (pooled[j].chosen) ++chosen_in_block;
      ++j;
    }
    chosen_rank_sum += static_cast<double>(chosen_in_block) * static_cast<double>(i + 1 + j) / 2.0;
    i = j;
  }
  const double nd = static_cast<double>(n);
  const double u = chosen_rank_sum - nd * (nd + 1.0) / 2.0;
  return u / (nd * nd);
}

inline double mean_margin(std::span<const ScoredPair> pairs) {
  detail::require(!pairs.empty(), "mean_margin: no pairs");
  double total = 0.0;
  for (const auto& p : pairs) total += p.margin();
  return total / static_cast<double>(pairs.size());
}

inline MetricsReport make_report(std::span<const ScoredPair> pairs) {
  MetricsReport report;
  report.pair_accuracy = pair_accuracy(pairs);
  report.auc = roc_auc(pairs);
  report.mean_margin = mean_margin(pairs);
  report.n = pairs.size();
  report.per_pair_margins.reserve(pairs.size());
  for (const auto& p : pairs) report.per_pair_margins.push_back(p.margin());
  return report;
}

/// Score both sides of every held-out pair with the policy and summarize.
template <class Policy>
MetricsReport evaluate(const Policy& policy, std::span<const PreferenceExample> test_pairs, const World& world) {
  detail::require(!test_pairs.empty(), "evaluate: no test pairs");
  std::vector<ScoredPair> scored;
  scored.reserve(test_pairs.size());
  for (const auto& ex : test_pairs)
    scored.push_back({score(policy, world, ex.prompt_id, ex.chosen_id), score(policy, world, ex.prompt_id, ex.rejected_id)});
  return make_report(scored);
}

}  // namespace ddorm
