// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <unordered_set>
#include <vector>

#include "laha/error.hpp"
#include "laha/random.hpp"

namespace laha {

/// All positives (ascending) followed by up to `negatives` distinct labels
/// drawn uniformly from the complement, in draw order. When the complement is
/// no larger than `negatives` it is appended whole, ascending.
inline std::vector<std::size_t> sample_labels(std::span<const std::size_t> positives, std::size_t negatives,
                                              std::size_t k, Rng& rng) {
  if (positives.empty()) throw ValidationError("sample_labels: document has no positive labels");
  std::vector<std::size_t> out(positives.begin(), positives.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.back() >= k) throw ValidationError("sample_labels: positive label " + std::to_string(out.back()) + " >= k");

  const std::size_t complement = k - out.size();
  const std::vector<std::size_t> sorted_pos = out;
  auto positive = [&](std::size_t l) { return std::binary_search(sorted_pos.begin(), sorted_pos.end(), l); };

  if (negatives >= complement) {
    for (std::size_t l = 0; l < k; ++l)
      if (!positive(l)) out.push_back(l);
    return out;
  }
  if (negatives == 0) return out;

  if (complement >= 2 * negatives) {
    // Sparse draw: rejection against positives and earlier picks.
    std::unordered_set<std::size_t> taken;
    while (taken.size() < negatives) {
      const auto l = static_cast<std::size_t>(rng.below(k));
      if (positive(l) || !taken.insert(l).second) continue;
      out.push_back(l);
    }
    return out;
  }
  // Dense draw: partial Fisher-Yates over the complement.
  std::vector<std::size_t> pool;
  pool.reserve(complement);
  for (std::size_t l = 0; l < k; ++l)
    if (!positive(l)) pool.push_back(l);
  for (std::size_t i = 0; i < negatives; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace laha
