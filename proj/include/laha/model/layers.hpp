// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "laha/model/params.hpp"
#include "laha/numeric/tape.hpp"

namespace laha {

struct LstmVars {
  Var w_ih;
  Var w_hh;
  Var bias;
};

struct BiLstmOutput {
  Var h_fwd;  // r x n
  Var h_bwd;  // r x n
  Var h;      // 2r x n, [h_fwd; h_bwd]
};

/// Runs one LSTM direction over the columns of `x` (d x n) and returns the
/// hidden states (r x n) in position order. Initial hidden and cell states
/// are zero. Gates: i, f, o sigmoid; candidate g tanh; h = o * tanh(c).
inline Var lstm_direction(Var x, const LstmVars& p, bool reverse) {
  const std::size_t n = x.cols();
  const std::size_t r = p.w_hh.cols();
  Var projected = add_bias(matmul(p.w_ih, x), p.bias);  // 4r x n
  std::vector<Var> states(n);
  Var h, c;
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    Var z = slice_cols(projected, t, 1);
    if (step > 0) z = add(z, matmul(p.w_hh, h));
    Var in_gate = sigmoid(slice_rows(z, 0, r));
    Var forget_gate = sigmoid(slice_rows(z, r, r));
    Var candidate = tanh(slice_rows(z, 2 * r, r));
    Var out_gate = sigmoid(slice_rows(z, 3 * r, r));
    Var written = hadamard(in_gate, candidate);
    c = step > 0 ? add(hadamard(forget_gate, c), written) : written;
    h = hadamard(out_gate, tanh(c));
    states[t] = h;
  }
  return hstack(states);
}

inline BiLstmOutput bilstm_forward(Var x, const LstmVars& fwd, const LstmVars& bwd) {
  if (x.cols() == 0) throw ValidationError("bilstm_forward: empty sequence");
  BiLstmOutput out;
  out.h_fwd = lstm_direction(x, fwd, false);
  out.h_bwd = lstm_direction(x, bwd, true);
  out.h = vstack({out.h_fwd, out.h_bwd});
  return out;
}

struct AttentionOutput {
  Var weights;  // n x k', column j is a distribution over words
  Var context;  // 2r x k', column j = H * weights_j
};

/// Content-only attention: T = tanh(W_s1 H), scores = W_s2[labels] T,
/// weights = masked softmax over words for each selected label.
inline AttentionOutput self_attention(Var h, Var w_s1, Var w_s2, std::span<const std::size_t> labels,
                                      const Mask* mask) {
  if (labels.empty()) throw ValidationError("self_attention: empty label subset");
  Var t = tanh(matmul(w_s1, h));                    // d_a x n
  Var scores = matmul(gather_rows(w_s2, labels), t);  // k' x n
  Var weights = softmax_columns(transpose(scores), mask);
  return {weights, matmul(h, weights)};
}

/// Label-structure attention: Q = W_q L[:, labels],
/// M = (H_f + H_b)^T Q, weights = masked softmax over words.
inline AttentionOutput interaction_attention(const BiLstmOutput& enc, Var label_matrix, Var w_q,
                                             std::span<const std::size_t> labels, const Mask* mask,
                                             std::size_t label_count) {
  if (labels.empty()) throw ValidationError("interaction_attention: empty label subset");
  if (label_matrix.cols() != label_count) {
    throw DimensionError("interaction_attention: label matrix has " + std::to_string(label_matrix.cols()) +
                         " columns, model has k=" + std::to_string(label_count));
  }
  if (label_matrix.rows() != w_q.cols()) {
    throw DimensionError("interaction_attention: label matrix " + label_matrix.value().shape() +
                         " incompatible with W_q " + w_q.value().shape());
  }
  Var q = matmul(w_q, gather_cols(label_matrix, labels));  // r x k'
  Var scores = matmul(transpose(add(enc.h_fwd, enc.h_bwd)), q);  // n x k'
  Var weights = softmax_columns(scores, mask);
  return {weights, matmul(enc.h, weights)};
}

// Interaction scores in the block form [H_f^T H_b^T][Q; Q], computed literally.
inline Matrix interaction_scores_block(const Matrix& h_fwd, const Matrix& h_bwd, const Matrix& q) {
  const Matrix keys = [&] {
    Matrix hf_t = transpose(h_fwd), hb_t = transpose(h_bwd);
    Matrix k(hf_t.rows(), hf_t.cols() + hb_t.cols());
    for (std::size_t i = 0; i < k.rows(); ++i) {
      for (std::size_t j = 0; j < hf_t.cols(); ++j) k(i, j) = hf_t(i, j);
      for (std::size_t j = 0; j < hb_t.cols(); ++j) k(i, hf_t.cols() + j) = hb_t(i, j);
    }
    return k;
  }();
  Matrix stacked(2 * q.rows(), q.cols());
  for (std::size_t i = 0; i < q.rows(); ++i)
    for (std::size_t j = 0; j < q.cols(); ++j) stacked(i, j) = stacked(q.rows() + i, j) = q(i, j);
  return matmul(keys, stacked);
}

// Same scores through the collapsed form (H_f + H_b)^T Q.
inline Matrix interaction_scores(const Matrix& h_fwd, const Matrix& h_bwd, const Matrix& q) {
  Matrix sum = h_fwd;
  sum += h_bwd;
  return matmul_tn(sum, q);
}

struct FusionOutput {
  Var context;  // 2r x k'
  Var alpha;    // 1 x k'
  Var beta;     // 1 x k'
};

/// a_j = σ(F1 C^S_j), b_j = σ(F2 C^I_j) with shared affine maps,
/// α = a / (a + b), β = 1 − α, C_j = α_j C^S_j + β_j C^I_j.
inline FusionOutput fuse(Var ctx_self, Var ctx_inter, Var f1_w, Var f1_b, Var f2_w, Var f2_b) {
  Matrix::require_same_shape(ctx_self.value(), ctx_inter.value(), "fuse");
  Var a = sigmoid(add_bias(matmul(f1_w, ctx_self), f1_b));
  Var b = sigmoid(add_bias(matmul(f2_w, ctx_inter), f2_b));
  Var alpha = divide(a, add(a, b));
  Var beta = affine(alpha, -1.0, 1.0);
  Var ctx = add(scale_columns(ctx_self, alpha), scale_columns(ctx_inter, beta));
  return {ctx, alpha, beta};
}

// Normalization of raw fusion weights on plain numbers.
inline std::pair<double, double> normalize_fusion(double a, double b) {
  const double alpha = a / (a + b);
  return {alpha, 1.0 - alpha};
}

struct PredictionOutput {
  Var logits;  // 1 x k'
  Var probs;   // 1 x k'
};

// ŷ_j = σ(W_o ReLU(W_f C_j) + b_o).
inline PredictionOutput predict(Var ctx, Var w_f, Var w_o, Var b_o) {
  Var hidden = relu(matmul(w_f, ctx));
  Var logits = add_bias(matmul(w_o, hidden), b_o);
  return {logits, sigmoid(logits)};
}

}  // namespace laha
