// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "laha/error.hpp"
#include "laha/model/params.hpp"
#include "laha/numeric/matrix.hpp"

namespace laha {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

/// First and second moments per parameter tensor, in parameter order.
struct AdamState {
  AdamConfig config;
  std::vector<Matrix> m, v;
  std::uint64_t step = 0;

  bool operator==(const AdamState&) const = default;
};

struct ParamRef {
  std::string name;
  Matrix* value;
  const Matrix* grad;
};

/// One bias-corrected Adam update. Moments are allocated on first use. All
/// gradients are screened before anything is written, so a non-finite
/// gradient leaves parameters and state untouched.
inline void adam_step(std::span<const ParamRef> params, AdamState& st, double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("adam: learning rate must be positive");
  for (const auto& p : params) {
    Matrix::require_same_shape(*p.value, *p.grad, "adam");
    if (!p.grad->all_finite()) {
      throw NumericalError("adam: non-finite gradient in parameter '" + p.name + "' at step " +
                           std::to_string(st.step + 1));
    }
  }
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.emplace_back(p.value->rows(), p.value->cols());
      st.v.emplace_back(p.value->rows(), p.value->cols());
    }
  }
  if (st.m.size() != params.size()) {
    throw DimensionError("adam: state holds " + std::to_string(st.m.size()) + " tensors, got " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!st.m[i].same_shape(*params[i].value) || !st.v[i].same_shape(*params[i].value)) {
      throw DimensionError("adam: moment shape mismatch for '" + params[i].name + "'");
    }
  }

  const auto& c = st.config;
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(c.beta1, t);
  const double c2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& w = *params[i].value;
    const Matrix& g = *params[i].grad;
    Matrix& m = st.m[i];
    Matrix& v = st.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mh = m[j] / c1;
      const double vh = v[j] / c2;
      w[j] -= lr * mh / (std::sqrt(vh) + c.eps);
    }
  }
}

inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& st, double lr) {
  auto pv = params.named();
  auto gv = grads.named();
  std::vector<ParamRef> refs;
  refs.reserve(pv.size());
  for (std::size_t i = 0; i < pv.size(); ++i) refs.push_back({pv[i].first, pv[i].second, gv[i].second});
  adam_step(refs, st, lr);
}

}  // namespace laha
