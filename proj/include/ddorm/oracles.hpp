#pragma once

// SPDX-License-Identifier: Apache-2.0

/**
 * @file oracles.hpp
 * @brief Independent reference procedures used to certify closed forms:
 *        central finite differences and the O(n^2) cross-pair AUC count.
 *
 * Nothing here calls into the implementations it checks.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ddorm/metrics.hpp"

namespace ddorm::oracle {

/// Central-difference gradient of f at x with step h.
template <class F>
std::vector<double> central_difference(F&& f, std::span<const double> x, double h = 1e-5) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(std::span<const double>(probe));
    probe[i] = saved - h;
    const double down = f(std::span<const double>(probe));
    probe[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// |a - b| <= max(abs_floor, rel * max(|a|, |b|))
inline bool close_relative(double a, double b, double rel, double abs_floor) {
  return std::abs(a - b) <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

/// (wins + ties / 2) / n^2 over all chosen x rejected score pairs.
inline double brute_force_auc(std::span<const ScoredPair> pairs) {
  double count = 0.0;
  for (const auto& c : pairs)
    for (const auto& r : pairs) {
      if (c.chosen_score > r.rejected_score)
        count += 1.0;
      else if (c.chosen_score == r.rejected_score)
        count += 0.5;
    }
  const double n = static_cast<double>(pairs.size());
  return count / (n * n);
}

}  // namespace ddorm::oracle
