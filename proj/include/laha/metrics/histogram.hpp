// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "laha/error.hpp"
#include "laha/model/forward.hpp"

namespace laha {

/// Equal-width bins over [0, 1]; the last bin is closed on the right.
inline std::size_t histogram_bin(double x, std::size_t bins) {
  if (!(x >= 0.0 && x <= 1.0)) throw ValidationError("histogram: value outside [0,1]");
  return std::min(static_cast<std::size_t>(std::floor(x * static_cast<double>(bins))), bins - 1);
}

struct FusionHistogram {
  std::size_t bins = 10;
  std::vector<std::size_t> alpha, beta;  // counts per bin
  std::size_t pairs = 0;                 // (document, positive label) pairs seen

  explicit FusionHistogram(std::size_t b = 10) : bins(b), alpha(b, 0), beta(b, 0) {
    if (b == 0) throw ValidationError("histogram: need at least one bin");
  }

  void add(double a, double b) {
    ++alpha[histogram_bin(a, bins)];
    ++beta[histogram_bin(b, bins)];
    ++pairs;
  }

  bool operator==(const FusionHistogram&) const = default;
};

struct LabelledDocument {
  const EncodedDocument* doc;
  std::span<const std::size_t> positives;
};

/// α_j, β_j over every (document, positive label) pair.
inline FusionHistogram fusion_weight_histogram(const Model& model, std::span<const LabelledDocument> docs,
                                               std::size_t bins = 10) {
  if (docs.empty()) throw ValidationError("histogram: no documents");
  FusionHistogram h(bins);
  for (const auto& d : docs) {
    if (d.positives.empty()) continue;
    const ForwardTrace t = forward(model, *d.doc, d.positives);
    for (std::size_t j = 0; j < t.alpha.size(); ++j) h.add(t.alpha[j], t.beta[j]);
  }
  return h;
}

inline nlohmann::json to_json(const FusionHistogram& h) {
  std::vector<double> edges(h.bins + 1);
  for (std::size_t i = 0; i <= h.bins; ++i) edges[i] = static_cast<double>(i) / static_cast<double>(h.bins);
  return {{"bins", h.bins}, {"edges", edges}, {"alpha", h.alpha}, {"beta", h.beta}, {"pairs", h.pairs}};
}

}  // namespace laha
