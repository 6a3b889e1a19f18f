// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "laha/model/forward.hpp"

namespace laha {

struct LabelAttention {
  std::size_t label = 0;
  std::string name;  // empty when no label names were supplied
  // (token, weight) over valid positions, heaviest first.
  std::vector<std::pair<std::string, double>> tokens;
};

struct AttentionReport {
  std::string doc_id;
  std::vector<LabelAttention> labels;
};

/// Fused per-word weight α_j A^S_tj + β_j A^I_tj for every valid position t
/// and every label j of the trace. A branch the variant skipped contributes 0.
inline Matrix fused_attention(const ForwardTrace& trace) {
  const std::size_t n = trace.mask.size();
  const std::size_t kp = trace.labels.size();
  Matrix out(n, kp);
  for (std::size_t j = 0; j < kp; ++j) {
    for (std::size_t t = 0; t < n; ++t) {
      double w = 0.0;
      if (!trace.attn_self.empty()) w += trace.alpha[j] * trace.attn_self(t, j);
      if (!trace.attn_inter.empty()) w += trace.beta[j] * trace.attn_inter(t, j);
      out(t, j) = w;
    }
  }
  return out;
}

/// `tokens` holds the document token at each encoded position (at least the
/// valid ones). Ties keep position order.
inline AttentionReport export_attention(const ForwardTrace& trace, std::string doc_id,
                                        const std::vector<std::string>& tokens,
                                        const std::vector<std::string>& label_names = {}) {
  const Matrix fused = fused_attention(trace);
  AttentionReport report{std::move(doc_id), {}};
  for (std::size_t j = 0; j < trace.labels.size(); ++j) {
    LabelAttention la;
    la.label = trace.labels[j];
    if (la.label < label_names.size()) la.name = label_names[la.label];
    for (std::size_t t = 0; t < trace.mask.size(); ++t) {
      if (!trace.mask[t]) continue;
      la.tokens.emplace_back(t < tokens.size() ? tokens[t] : std::string(Vocabulary::kUnkToken), fused(t, j));
    }
    std::stable_sort(la.tokens.begin(), la.tokens.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    report.labels.push_back(std::move(la));
  }
  return report;
}

inline nlohmann::json to_json(const AttentionReport& r) {
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& la : r.labels) {
    nlohmann::json toks = nlohmann::json::array();
    for (const auto& [tok, w] : la.tokens) toks.push_back({tok, w});
    nlohmann::json entry = {{"label", la.label}, {"tokens", toks}};
    if (!la.name.empty()) entry["name"] = la.name;
    labels.push_back(std::move(entry));
  }
  return {{"doc_id", r.doc_id}, {"labels", labels}};
}

}  // namespace laha
