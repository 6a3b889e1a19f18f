// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "laha/data/corpus.hpp"
#include "laha/metrics/histogram.hpp"
#include "laha/metrics/ranking.hpp"
#include "laha/model/forward.hpp"

namespace laha {

/// Frequency bands: group i holds labels with boundaries[i-1] < F <= boundaries[i];
/// the last group is open above.
struct LabelGroupSpec {
  std::vector<std::size_t> boundaries = {5, 50};

  void validate() const {
    for (std::size_t i = 1; i < boundaries.size(); ++i) {
      if (boundaries[i] <= boundaries[i - 1]) throw ValidationError("group boundaries must be strictly increasing");
    }
  }
  std::size_t group_count() const { return boundaries.size() + 1; }

  std::size_t group_of(std::size_t freq) const {
    for (std::size_t i = 0; i < boundaries.size(); ++i)
      if (freq <= boundaries[i]) return i;
    return boundaries.size();
  }

  // e.g. "G1(F<=5)", "G2(5<F<=50)", "G3(F>50)".
  std::string name(std::size_t g) const {
    std::string n = "G" + std::to_string(g + 1) + "(";
    if (boundaries.empty()) return n + "all)";
    if (g == 0) return n + "F<=" + std::to_string(boundaries[0]) + ")";
    if (g == boundaries.size()) return n + "F>" + std::to_string(boundaries.back()) + ")";
    return n + std::to_string(boundaries[g - 1]) + "<F<=" + std::to_string(boundaries[g]) + ")";
  }
};

inline std::vector<std::size_t> assign_groups(std::span<const std::size_t> freqs, const LabelGroupSpec& spec) {
  spec.validate();
  std::vector<std::size_t> out(freqs.size());
  for (std::size_t l = 0; l < freqs.size(); ++l) out[l] = spec.group_of(freqs[l]);
  return out;
}

struct TauMetrics {
  std::size_t tau;
  double precision;
  double ndcg;
  bool operator==(const TauMetrics&) const = default;
};

struct GroupReport {
  std::string name;
  std::size_t label_count = 0;
  std::size_t doc_count = 0;                        // test documents with a label in the group
  std::optional<std::vector<TauMetrics>> metrics;  // empty when doc_count == 0
};

struct EvalReport {
  std::size_t doc_count = 0;
  std::vector<TauMetrics> overall;
  std::vector<GroupReport> groups;
  std::optional<FusionHistogram> histogram;
};

/// Macro-averaged metrics over documents. Group metrics restrict both the
/// truth and the ranked candidates to the group's labels and average over
/// the documents that have at least one true label in the group.
inline EvalReport evaluate_scores(std::span<const std::vector<double>> scores,
                                  std::span<const std::vector<std::size_t>> truth, std::span<const std::size_t> taus,
                                  const LabelGroupSpec& spec, std::span<const std::size_t> train_freqs) {
  if (scores.size() != truth.size()) throw ValidationError("evaluate: score and truth counts differ");
  if (scores.empty()) throw ValidationError("evaluate: no documents");
  if (taus.empty()) throw ValidationError("evaluate: no cutoffs");
  const std::size_t k = train_freqs.size();
  for (auto t : taus) {
    if (t == 0 || t > k) throw ValidationError("evaluate: tau=" + std::to_string(t) + " outside [1, " + std::to_string(k) + "]");
  }
  const auto group = assign_groups(train_freqs, spec);
  const std::size_t g_count = spec.group_count();
  std::vector<std::vector<std::size_t>> members(g_count);
  for (std::size_t l = 0; l < k; ++l) members[group[l]].push_back(l);

  EvalReport rep;
  rep.doc_count = scores.size();
  std::vector<TauMetrics> overall;
  for (auto t : taus) overall.push_back({t, 0.0, 0.0});
  std::vector<std::vector<TauMetrics>> per_group(g_count, overall);
  std::vector<std::size_t> group_docs(g_count, 0);

  for (std::size_t d = 0; d < scores.size(); ++d) {
    if (scores[d].size() != k) {
      throw ValidationError("evaluate: document " + std::to_string(d) + " has " + std::to_string(scores[d].size()) +
                            " scores, label space has " + std::to_string(k));
    }
    detail::check_truth(truth[d], k);
    const auto ranking = rank_labels(scores[d]);
    for (std::size_t i = 0; i < taus.size(); ++i) {
      overall[i].precision += precision_at_k_ranked(ranking, truth[d], taus[i]);
      overall[i].ndcg += ndcg_at_k_ranked(ranking, truth[d], taus[i]);
    }
    for (std::size_t g = 0; g < g_count; ++g) {
      std::vector<std::size_t> g_truth;
      for (auto l : truth[d])
        if (group[l] == g) g_truth.push_back(l);
      if (g_truth.empty()) continue;
      std::vector<std::size_t> g_ranking;
      for (auto l : ranking)
        if (group[l] == g) g_ranking.push_back(l);
      ++group_docs[g];
      for (std::size_t i = 0; i < taus.size(); ++i) {
        per_group[g][i].precision += precision_at_k_ranked(g_ranking, g_truth, taus[i]);
        per_group[g][i].ndcg += ndcg_at_k_ranked(g_ranking, g_truth, taus[i]);
      }
    }
  }
  for (auto& m : overall) {
    m.precision /= static_cast<double>(scores.size());
    m.ndcg /= static_cast<double>(scores.size());
  }
  rep.overall = std::move(overall);
  for (std::size_t g = 0; g < g_count; ++g) {
    GroupReport gr{spec.name(g), members[g].size(), group_docs[g], std::nullopt};
    if (group_docs[g] > 0) {
      for (auto& m : per_group[g]) {
        m.precision /= static_cast<double>(group_docs[g]);
        m.ndcg /= static_cast<double>(group_docs[g]);
      }
      gr.metrics = std::move(per_group[g]);
    }
    rep.groups.push_back(std::move(gr));
  }
  return rep;
}

struct EvalOptions {
  std::vector<std::size_t> taus = {1, 3, 5};
  LabelGroupSpec groups;
  bool fusion_histogram = true;  // only meaningful for the fused variant
};

/// Scores every test document over the full label set; label frequencies for
/// grouping come from the training corpus.
inline EvalReport evaluate(const Model& model, const Corpus& test, const Vocabulary& vocab, const Corpus& train,
                           const EvalOptions& opt = {}) {
  const std::size_t k = model.config.k;
  const auto freqs = label_frequencies(train, k);
  std::vector<EncodedDocument> enc;
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<std::size_t>> truth;
  for (const auto& d : test) {
    for (auto l : d.labels) {
      if (l >= k) throw ValidationError("evaluate: test label " + std::to_string(l) + " outside model label space k=" +
                                        std::to_string(k));
    }
    enc.push_back(encode_document(d, vocab, model.config.max_len));
    scores.push_back(score_all(model, enc.back()));
    truth.push_back(d.labels);
  }
  // Clamp cutoffs to k so small label spaces still report.
  std::vector<std::size_t> taus;
  for (auto t : opt.taus)
    if (t <= k) taus.push_back(t);
  EvalReport rep = evaluate_scores(scores, truth, taus, opt.groups, freqs);
  if (opt.fusion_histogram && model.variant == Variant::kFused) {
    std::vector<LabelledDocument> docs;
    for (std::size_t i = 0; i < enc.size(); ++i) docs.push_back({&enc[i], truth[i]});
    rep.histogram = fusion_weight_histogram(model, docs);
  }
  return rep;
}

inline nlohmann::json to_json(const std::vector<TauMetrics>& ms) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& m : ms) {
    j["P@" + std::to_string(m.tau)] = m.precision;
    j["nDCG@" + std::to_string(m.tau)] = m.ndcg;
  }
  return j;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"name", g.name},
                      {"label_count", g.label_count},
                      {"doc_count", g.doc_count},
                      {"metrics", g.metrics ? to_json(*g.metrics) : nlohmann::json(nullptr)}});
  }
  nlohmann::json hist = nullptr;
  if (r.histogram) hist = to_json(*r.histogram);
  return {{"doc_count", r.doc_count}, {"overall", to_json(r.overall)}, {"groups", groups}, {"histograms", hist}};
}

}  // namespace laha
