// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "laha/io.hpp"
#include "laha/numeric/matrix.hpp"
#include "laha/random.hpp"

namespace laha {

/// r x k label matrix; column i is the vector of label i.
struct LabelEmbedding {
  Matrix vectors;

  std::size_t dim() const { return vectors.rows(); }
  std::size_t label_count() const { return vectors.cols(); }
  std::vector<double> label(std::size_t i) const { return vectors.col(i); }
};

struct SkipGramConfig {
  std::size_t dim = 256;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;  // decays linearly to lr * 1e-4
  std::uint64_t seed = 1;
};

/// Skip-gram with negative sampling over walk windows.
///
/// Input vectors start uniform(-0.5/r, 0.5/r) from the seeded generator,
/// output vectors start at zero. Negatives are drawn from walk-occurrence
/// counts raised to 0.75. Labels that never appear as a center word with a
/// context keep their initial vector.
inline LabelEmbedding train_skipgram(const std::vector<std::vector<std::size_t>>& walks, std::size_t k,
                                     const SkipGramConfig& cfg) {
  if (cfg.dim < 1) throw ValidationError("train_skipgram: dimension must be >= 1");
  if (cfg.window < 1) throw ValidationError("train_skipgram: window must be >= 1");
  if (walks.empty()) throw ValidationError("train_skipgram: no walks to train on");
  const std::size_t r = cfg.dim;

  Rng rng(cfg.seed);
  Matrix in(k, r);
  Matrix out(k, r);
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = rng.uniform(-0.5 / static_cast<double>(r), 0.5 / static_cast<double>(r));

  std::vector<double> counts(k, 0.0);
  std::size_t total_positions = 0;
  for (const auto& w : walks) {
    for (auto n : w) {
      if (n >= k) throw ValidationError("train_skipgram: walk node " + std::to_string(n) + " >= k");
      counts[n] += 1.0;
    }
    total_positions += w.size();
  }
  std::vector<double> cumulative(k);
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    acc += std::pow(counts[i], 0.75);
    cumulative[i] = acc;
  }
  auto draw_negative = [&]() {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(), static_cast<std::ptrdiff_t>(k) - 1));
  };

  const double total_steps = static_cast<double>(std::max<std::size_t>(1, total_positions * cfg.epochs));
  double processed = 0.0;
  std::vector<double> center_grad(r);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& walk : walks) {
      for (std::size_t pos = 0; pos < walk.size(); ++pos) {
        const double lr = cfg.learning_rate * std::max(1e-4, 1.0 - processed / total_steps);
        processed += 1.0;
        const std::size_t center = walk[pos];
        auto cv = in.row_span(center);
        const std::size_t lo = pos >= cfg.window ? pos - cfg.window : 0;
        const std::size_t hi = std::min(walk.size() - 1, pos + cfg.window);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          std::fill(center_grad.begin(), center_grad.end(), 0.0);
          for (std::size_t s = 0; s <= cfg.negatives; ++s) {
            std::size_t target = walk[c];
            double label = 1.0;
            if (s > 0) {
              target = draw_negative();
              if (target == walk[c]) continue;
              label = 0.0;
            }
            auto ov = out.row_span(target);
            double f = 0.0;
            for (std::size_t i = 0; i < r; ++i) f += cv[i] * ov[i];
            const double g = (label - sigmoid(f)) * lr;
            for (std::size_t i = 0; i < r; ++i) center_grad[i] += g * ov[i];
            for (std::size_t i = 0; i < r; ++i) ov[i] += g * cv[i];
          }
          for (std::size_t i = 0; i < r; ++i) cv[i] += center_grad[i];
        }
      }
    }
  }
  return LabelEmbedding{transpose(in)};
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

// "r k" header then k lines of r values, line i holding label i.
inline std::string serialize_embedding(const LabelEmbedding& e) {
  std::string s = std::to_string(e.dim()) + ' ' + std::to_string(e.label_count()) + '\n';
  for (std::size_t j = 0; j < e.label_count(); ++j) {
    for (std::size_t i = 0; i < e.dim(); ++i) {
      if (i) s.push_back(' ');
      s += format_double(e.vectors(i, j));
    }
    s.push_back('\n');
  }
  return s;
}

inline LabelEmbedding parse_embedding(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("label embedding: missing header");
  std::istringstream header(line);
  long long r = -1, k = -1;
  std::string extra;
  if (!(header >> r >> k) || (header >> extra) || r < 1 || k < 1) {
    throw FormatError("label embedding: header must be 'r k' with positive values");
  }
  LabelEmbedding e{Matrix(static_cast<std::size_t>(r), static_cast<std::size_t>(k))};
  for (long long j = 0; j < k; ++j) {
    if (!std::getline(in, line)) {
      throw FormatError("label embedding: header declares " + std::to_string(k) + " labels, found " + std::to_string(j));
    }
    std::istringstream row(line);
    std::string field;
    long long i = 0;
    while (row >> field) {
      auto v = parse_double(field);
      if (!v) throw FormatError("label embedding: bad value '" + field + "' on line " + std::to_string(j + 2));
      if (i >= r) throw FormatError("label embedding: line " + std::to_string(j + 2) + " holds more than " + std::to_string(r) + " values");
      e.vectors(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = *v;
      ++i;
    }
    if (i != r) {
      throw FormatError("label embedding: line " + std::to_string(j + 2) + " does not hold " + std::to_string(r) + " values");
    }
  }
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      throw FormatError("label embedding: more rows than the header declares");
    }
  }
  return e;
}

inline void save_embedding(const LabelEmbedding& e, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_embedding(e));
}

inline LabelEmbedding load_embedding(const std::filesystem::path& path) { return parse_embedding(read_file(path)); }

}  // namespace laha
