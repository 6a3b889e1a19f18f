// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "laha/data/corpus.hpp"
#include "laha/error.hpp"
#include "laha/random.hpp"

namespace laha {

/// Seeded toy corpus with planted token-label correlations. Label l owns the
/// tokens w{l*planted}..w{l*planted+planted-1}; the remaining tokens are
/// filler. Labels are drawn with Zipf-like weights so the last few are rare.
struct SyntheticConfig {
  std::size_t docs = 50;
  std::size_t labels = 8;
  std::size_t vocab = 100;
  std::size_t min_labels = 2;
  std::size_t max_labels = 3;
  std::size_t doc_length = 20;
  std::size_t planted_per_label = 3;
  std::size_t planted_per_doc = 2;  // planted tokens inserted per assigned label
  double zipf_exponent = 1.8;
  std::uint64_t seed = 7;

  void validate() const {
    if (docs == 0 || labels == 0) throw ValidationError("synthetic: docs and labels must be positive");
    if (min_labels == 0 || min_labels > max_labels || max_labels > labels) {
      throw ValidationError("synthetic: need 1 <= min_labels <= max_labels <= labels");
    }
    if (labels * planted_per_label >= vocab) throw ValidationError("synthetic: vocab too small for planted tokens");
    if (max_labels * planted_per_doc > doc_length) throw ValidationError("synthetic: doc_length too short");
  }
};

inline std::string synthetic_token(std::size_t i) { return "w" + std::to_string(i); }

inline Corpus generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::vector<double> cumulative(cfg.labels);
  double total = 0.0;
  for (std::size_t l = 0; l < cfg.labels; ++l) {
    total += 1.0 / std::pow(static_cast<double>(l + 1), cfg.zipf_exponent);
    cumulative[l] = total;
  }
  const std::size_t filler_begin = cfg.labels * cfg.planted_per_label;

  Rng rng(cfg.seed);
  Corpus corpus;
  corpus.reserve(cfg.docs);
  for (std::size_t i = 0; i < cfg.docs; ++i) {
    const std::size_t n_labels = cfg.min_labels + static_cast<std::size_t>(rng.below(cfg.max_labels - cfg.min_labels + 1));
    std::vector<std::size_t> labels;
    while (labels.size() < n_labels) {
      const double u = rng.uniform() * total;
      const auto l = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
      const std::size_t label = std::min(l, cfg.labels - 1);
      if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
    }
    std::sort(labels.begin(), labels.end());

    std::vector<std::string> tokens;
    tokens.reserve(cfg.doc_length);
    for (auto l : labels) {
      for (std::size_t j = 0; j < cfg.planted_per_doc; ++j) {
        tokens.push_back(synthetic_token(l * cfg.planted_per_label + rng.below(cfg.planted_per_label)));
      }
    }
    while (tokens.size() < cfg.doc_length) {
      tokens.push_back(synthetic_token(filler_begin + rng.below(cfg.vocab - filler_begin)));
    }
    shuffle(tokens, rng);

    Document d;
    d.doc_id = "syn-" + std::to_string(i);
    d.tokens = std::move(tokens);
    d.labels = std::move(labels);
    corpus.push_back(std::move(d));
  }
  return corpus;
}

}  // namespace laha
