// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "laha/numeric/tape.hpp"

namespace laha {

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before the log.
inline constexpr double kProbClamp = 1e-7;

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

// Σ_j −[y_j log ŷ_j + (1 − y_j) log(1 − ŷ_j)] on clamped probabilities.
inline double bce_sum(std::span<const double> probs, std::span<const double> targets) {
  if (probs.size() != targets.size()) {
    throw DimensionError("bce: " + std::to_string(probs.size()) + " predictions vs " +
                         std::to_string(targets.size()) + " targets");
  }
  double loss = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double p = clamp_prob(probs[j]);
    loss -= targets[j] * std::log(p) + (1.0 - targets[j]) * std::log(1.0 - p);
  }
  return loss;
}

/// Summed binary cross-entropy over the entries of `probs` (1 x k'), multiplied
/// by `scale` (1/N for a batch of N documents). Entries outside the clamp
/// interval receive zero gradient.
inline Var bce_loss(Var probs, std::span<const double> targets, double scale = 1.0) {
  const Matrix& p = probs.value();
  if (p.size() != targets.size()) {
    throw DimensionError("bce_loss: prediction shape " + p.shape() + " vs " + std::to_string(targets.size()) +
                         " targets");
  }
  const double value = scale * bce_sum(p.data(), targets);
  std::vector<double> y(targets.begin(), targets.end());
  return probs.tape()->push(Matrix(1, 1, value), {probs}, [probs, y, scale](Tape& t, const Matrix& g, const Matrix&) {
    Matrix* gp = t.grad_target(probs);
    const Matrix& p = probs.value();
    for (std::size_t j = 0; j < y.size(); ++j) {
      const double pj = p[j];
      if (pj < kProbClamp || pj > 1.0 - kProbClamp) continue;
      (*gp)[j] += g[0] * scale * (pj - y[j]) / (pj * (1.0 - pj));
    }
  });
}

}  // namespace laha
