// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "laha/data/corpus.hpp"
#include "laha/error.hpp"
#include "laha/io.hpp"

namespace laha {

struct LabelEdge {
  std::size_t node;
  double weight;
};

/// Undirected label co-occurrence graph. Adjacency lists are sorted by
/// neighbor index; every edge is stored in both directions with equal weight.
class LabelGraph {
 public:
  LabelGraph() = default;
  explicit LabelGraph(std::size_t k) : adjacency_(k) {}

  std::size_t node_count() const { return adjacency_.size(); }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& a : adjacency_) n += a.size();
    return n / 2;
  }

  const std::vector<LabelEdge>& neighbors(std::size_t i) const { return adjacency_.at(i); }

  // Weight of edge (i, j), or 0 when absent.
  double weight(std::size_t i, std::size_t j) const {
    const auto& a = adjacency_[i];
    auto it = std::lower_bound(a.begin(), a.end(), j, [](const LabelEdge& e, std::size_t n) { return e.node < n; });
    return (it != a.end() && it->node == j) ? it->weight : 0.0;
  }
  bool has_edge(std::size_t i, std::size_t j) const { return weight(i, j) > 0.0; }

  std::size_t isolated_count() const {
    return static_cast<std::size_t>(
        std::count_if(adjacency_.begin(), adjacency_.end(), [](const auto& a) { return a.empty(); }));
  }

  // Adds w to edge (i, j) in both directions. Self-loops are rejected.
  void add_weight(std::size_t i, std::size_t j, double w) {
    if (i == j) throw ValidationError("label graph: self-loop on " + std::to_string(i));
    if (i >= node_count() || j >= node_count()) throw ValidationError("label graph: node index out of range");
    bump(i, j, w);
    bump(j, i, w);
  }

 private:
  void bump(std::size_t i, std::size_t j, double w) {
    auto& a = adjacency_[i];
    auto it = std::lower_bound(a.begin(), a.end(), j, [](const LabelEdge& e, std::size_t n) { return e.node < n; });
    if (it != a.end() && it->node == j) {
      it->weight += w;
    } else {
      a.insert(it, LabelEdge{j, w});
    }
  }

  std::vector<std::vector<LabelEdge>> adjacency_;
};

/// Edge (i, j) weighted by the number of documents carrying both labels.
inline LabelGraph build_cooccurrence_graph(const Corpus& corpus, std::size_t k) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
  for (const auto& doc : corpus) {
    for (auto l : doc.labels) {
      if (l >= k) {
        throw ValidationError("document '" + doc.doc_id + "': label " + std::to_string(l) + " >= k=" + std::to_string(k));
      }
    }
    // labels are sorted and unique, so each unordered pair is visited once per document.
    for (std::size_t a = 0; a < doc.labels.size(); ++a)
      for (std::size_t b = a + 1; b < doc.labels.size(); ++b) ++counts[{doc.labels[a], doc.labels[b]}];
  }
  LabelGraph g(k);
  for (const auto& [edge, n] : counts) g.add_weight(edge.first, edge.second, static_cast<double>(n));
  return g;
}

// Text format: "k edges" header, then one "i j weight" line per edge with i < j.
inline std::string serialize_graph(const LabelGraph& g) {
  std::ostringstream out;
  out << g.node_count() << ' ' << g.edge_count() << '\n';
  for (std::size_t i = 0; i < g.node_count(); ++i)
    for (const auto& e : g.neighbors(i))
      if (i < e.node) out << i << ' ' << e.node << ' ' << format_double(e.weight) << '\n';
  return out.str();
}

inline LabelGraph parse_graph(std::istream& in) {
  long long k = -1, edges = -1;
  if (!(in >> k >> edges) || k < 0 || edges < 0) throw FormatError("label graph: bad header");
  LabelGraph g(static_cast<std::size_t>(k));
  for (long long e = 0; e < edges; ++e) {
    long long i = -1, j = -1;
    double w = 0.0;
    if (!(in >> i >> j >> w)) throw FormatError("label graph: truncated at edge " + std::to_string(e));
    if (i < 0 || j < 0 || i >= k || j >= k || i == j || !(w >= 1.0)) {
      throw FormatError("label graph: invalid edge " + std::to_string(i) + " " + std::to_string(j));
    }
    if (g.has_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
      throw FormatError("label graph: duplicate edge " + std::to_string(i) + " " + std::to_string(j));
    }
    g.add_weight(static_cast<std::size_t>(i), static_cast<std::size_t>(j), w);
  }
  return g;
}

}  // namespace laha
