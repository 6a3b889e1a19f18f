// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "laha/labelgraph/graph.hpp"
#include "laha/random.hpp"

namespace laha {

struct WalkConfig {
  double p = 1.0;  // return parameter
  double q = 1.0;  // in-out parameter
  std::size_t walk_length = 40;
  std::size_t walks_per_node = 10;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(p > 0.0) || !(q > 0.0)) throw ValidationError("walk config: p and q must be positive");
    if (walk_length < 1 || walks_per_node < 1) {
      throw ValidationError("walk config: walk_length and walks_per_node must be >= 1");
    }
  }
};

namespace detail {

// Draws index i with probability weights[i] / sum(weights).
inline std::size_t sample_weighted(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  // Rounding fallthrough: last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return weights.size() - 1;
}

}  // namespace detail

/// Next node of a second-order walk currently at `cur` having arrived from `prev`.
///
/// Unnormalized weight of neighbor x is w(cur, x) scaled by 1/p when x is
/// `prev`, by 1 when x is adjacent to `prev`, and by 1/q otherwise.
inline std::size_t node2vec_step(const LabelGraph& g, std::size_t prev, std::size_t cur, const WalkConfig& cfg,
                                 Rng& rng, std::vector<double>& scratch) {
  const auto& nbrs = g.neighbors(cur);
  scratch.resize(nbrs.size());
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    const std::size_t x = nbrs[i].node;
    double bias = 1.0 / cfg.q;
    if (x == prev) {
      bias = 1.0 / cfg.p;
    } else if (g.has_edge(prev, x)) {
      bias = 1.0;
    }
    scratch[i] = nbrs[i].weight * bias;
  }
  return nbrs[detail::sample_weighted(scratch, rng)].node;
}

// First step: neighbor proportional to edge weight.
inline std::size_t first_order_step(const LabelGraph& g, std::size_t cur, Rng& rng, std::vector<double>& scratch) {
  const auto& nbrs = g.neighbors(cur);
  scratch.resize(nbrs.size());
  for (std::size_t i = 0; i < nbrs.size(); ++i) scratch[i] = nbrs[i].weight;
  return nbrs[detail::sample_weighted(scratch, rng)].node;
}

inline std::vector<std::size_t> walk_from(const LabelGraph& g, std::size_t start, const WalkConfig& cfg, Rng& rng) {
  std::vector<std::size_t> walk{start};
  std::vector<double> scratch;
  while (walk.size() < cfg.walk_length) {
    const std::size_t cur = walk.back();
    if (g.neighbors(cur).empty()) break;
    walk.push_back(walk.size() == 1 ? first_order_step(g, cur, rng, scratch)
                                    : node2vec_step(g, walk[walk.size() - 2], cur, cfg, rng, scratch));
  }
  return walk;
}

/// `walks_per_node` rounds, each starting one walk at every node in index
/// order. Walk (node, round) draws from its own generator seeded by
/// (seed, node, round), so any walk can be regenerated independently.
inline std::vector<std::vector<std::size_t>> sample_walks(const LabelGraph& g, const WalkConfig& cfg) {
  cfg.validate();
  if (g.node_count() == 0) throw ValidationError("sample_walks: graph has no nodes");
  std::vector<std::vector<std::size_t>> walks;
  walks.reserve(g.node_count() * cfg.walks_per_node);
  for (std::size_t round = 0; round < cfg.walks_per_node; ++round) {
    for (std::size_t node = 0; node < g.node_count(); ++node) {
      Rng rng(derive_seed(cfg.seed, {node, round}));
      walks.push_back(walk_from(g, node, cfg, rng));
    }
  }
  return walks;
}

}  // namespace laha
