// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "laha/error.hpp"

namespace laha {

/// Candidate labels ordered by descending score, ties to the lower label index.
/// An empty candidate list means all labels 0..scores.size()-1.
inline std::vector<std::size_t> rank_labels(std::span<const double> scores, std::span<const std::size_t> candidates = {}) {
  std::vector<std::size_t> order;
  if (candidates.empty()) {
    order.resize(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
  } else {
    order.assign(candidates.begin(), candidates.end());
    for (auto l : order) {
      if (l >= scores.size()) throw ValidationError("rank_labels: candidate " + std::to_string(l) + " out of range");
    }
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return order;
}

namespace detail {

inline void check_truth(std::span<const std::size_t> truth, std::size_t k) {
  if (truth.empty()) throw ValidationError("metric: empty truth set");
  for (auto l : truth) {
    if (l >= k) throw ValidationError("metric: truth label " + std::to_string(l) + " >= k=" + std::to_string(k));
  }
}

inline bool contains(std::span<const std::size_t> truth, std::size_t l) {
  return std::find(truth.begin(), truth.end(), l) != truth.end();
}

}  // namespace detail

// Precision over an explicit ranking; always divides by tau, even when the
// ranking is shorter (a restricted candidate list).
inline double precision_at_k_ranked(std::span<const std::size_t> ranking, std::span<const std::size_t> truth,
                                    std::size_t tau) {
  if (tau == 0) throw ValidationError("metric: tau must be >= 1");
  if (truth.empty()) throw ValidationError("metric: empty truth set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(tau, ranking.size()); ++i) hits += detail::contains(truth, ranking[i]);
  return static_cast<double>(hits) / static_cast<double>(tau);
}

enum class LogBase { kTwo, kNatural };

inline double ndcg_at_k_ranked(std::span<const std::size_t> ranking, std::span<const std::size_t> truth,
                               std::size_t tau, LogBase base = LogBase::kTwo) {
  if (tau == 0) throw ValidationError("metric: tau must be >= 1");
  if (truth.empty()) throw ValidationError("metric: empty truth set");
  auto discount = [base](std::size_t rank) {
    const double x = static_cast<double>(rank + 1);
    return 1.0 / (base == LogBase::kTwo ? std::log2(x) : std::log(x));
  };
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(tau, ranking.size()); ++i) {
    if (detail::contains(truth, ranking[i])) dcg += discount(i + 1);
  }
  double ideal = 0.0;
  for (std::size_t i = 1; i <= std::min(tau, truth.size()); ++i) ideal += discount(i);
  return dcg / ideal;
}

inline double precision_at_k(std::span<const double> scores, std::span<const std::size_t> truth, std::size_t tau) {
  if (tau == 0 || tau > scores.size()) {
    throw ValidationError("metric: tau=" + std::to_string(tau) + " outside [1, k=" + std::to_string(scores.size()) + "]");
  }
  detail::check_truth(truth, scores.size());
  return precision_at_k_ranked(rank_labels(scores), truth, tau);
}

inline double ndcg_at_k(std::span<const double> scores, std::span<const std::size_t> truth, std::size_t tau,
                        LogBase base = LogBase::kTwo) {
  if (tau == 0 || tau > scores.size()) {
    throw ValidationError("metric: tau=" + std::to_string(tau) + " outside [1, k=" + std::to_string(scores.size()) + "]");
  }
  detail::check_truth(truth, scores.size());
  return ndcg_at_k_ranked(rank_labels(scores), truth, tau, base);
}

}  // namespace laha
