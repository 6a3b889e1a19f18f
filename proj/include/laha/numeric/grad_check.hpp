// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "laha/numeric/tape.hpp"

namespace laha {

// Builds a scalar (1x1) on `tape` from leaves holding the current parameter values.
using ScalarFunction = std::function<Var(Tape& tape, std::span<const Var> params)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  // Location of the worst entry.
  std::size_t param = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// |a - n| / max(|a|, |n|, floor). Both zero gives 0.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double diff = std::abs(analytic - numeric);
  if (diff == 0.0) return 0.0;
  return diff / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares reverse-mode gradients of `f` against central finite differences
/// (f(θ+ε) − f(θ−ε)) / 2ε for every entry of every parameter.
///
/// `floor` bounds the denominator of the relative error so entries whose true
/// gradient is ~0 are judged by absolute error instead.
inline GradCheckReport grad_check_report(const ScalarFunction& f, std::vector<Matrix> params, double epsilon,
                                         double floor = 1e-6) {
  if (!(epsilon > 0.0)) throw ValidationError("grad_check: epsilon must be positive");

  auto evaluate = [&](bool with_grad, std::vector<Matrix>* grads) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(with_grad ? tape.variable(p) : tape.constant(p));
    Var out = f(tape, leaves);
    if (out.rows() != 1 || out.cols() != 1) {
      throw DimensionError("grad_check: function must return a 1x1 value, got " + out.value().shape());
    }
    const double v = out.value()[0];
    if (!std::isfinite(v)) throw NumericalError("grad_check: function value is not finite");
    if (with_grad) {
      tape.backward(out);
      grads->clear();
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        // Leaves the output never touched keep a zero gradient.
        const Matrix& g = leaves[i].grad();
        grads->push_back(g.empty() && !params[i].empty() ? Matrix(params[i].rows(), params[i].cols()) : g);
      }
    }
    return v;
  };

  std::vector<Matrix> analytic;
  evaluate(true, &analytic);

  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double orig = params[p][i];
      params[p][i] = orig + epsilon;
      const double up = evaluate(false, nullptr);
      params[p][i] = orig - epsilon;
      const double down = evaluate(false, nullptr);
      params[p][i] = orig;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double err = relative_error(analytic[p][i], numeric, floor);
      ++report.entries_checked;
      if (err > report.max_relative_error || report.entries_checked == 1) {
        report.max_relative_error = std::max(report.max_relative_error, err);
        report.param = p;
        report.index = i;
        report.analytic = analytic[p][i];
        report.numeric = numeric;
      }
    }
  }
  return report;
}

inline double grad_check(const ScalarFunction& f, std::vector<Matrix> params, double epsilon, double floor = 1e-6) {
  return grad_check_report(f, std::move(params), epsilon, floor).max_relative_error;
}

}  // namespace laha
