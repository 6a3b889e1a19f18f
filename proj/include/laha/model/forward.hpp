// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "laha/data/vocabulary.hpp"
#include "laha/model/layers.hpp"
#include "laha/model/params.hpp"

namespace laha {

/// Parameters plus everything a forward pass reads but never trains.
struct Model {
  ModelConfig config;
  ModelParams params;
  Matrix label_matrix;  // r x k; empty when the variant does not need it
  Variant variant = Variant::kFused;

  void validate() const {
    config.validate();
    check_shapes(params, config);
    if (uses_label_embedding(variant)) {
      if (label_matrix.empty()) {
        throw ValidationError("variant " + to_string(variant) + " requires a label embedding");
      }
      if (label_matrix.rows() != config.r || label_matrix.cols() != config.k) {
        throw DimensionError("label embedding " + label_matrix.shape() + " does not match r x k = " +
                             Matrix::shape_string(config.r, config.k));
      }
    }
  }
};

/// Intermediate values of one forward pass over a label subset of size k'.
struct ForwardTrace {
  Variant variant = Variant::kFused;
  std::vector<std::size_t> labels;
  Mask mask;
  Matrix h_fwd, h_bwd, h;       // r x n, r x n, 2r x n
  Matrix attn_self, attn_inter;  // n x k'; empty when the variant skips that branch
  Matrix ctx_self, ctx_inter;    // 2r x k'; empty likewise
  Matrix ctx;                    // 2r x k'
  std::vector<double> alpha, beta;
  std::vector<double> logits;
  std::vector<double> scores;  // ŷ, aligned with labels

  bool operator==(const ForwardTrace&) const = default;
};

// Tape handles for the pieces of a forward pass the loss and tests need.
struct ForwardVars {
  BiLstmOutput encoder;
  std::optional<AttentionOutput> self;
  std::optional<AttentionOutput> inter;
  Var ctx, alpha, beta;
  PredictionOutput prediction;
};

struct BoundParams {
  Var embedded;  // d x n
  LstmVars fwd, bwd;
  Var w_s1, w_s2, w_q, f1_w, f1_b, f2_w, f2_b, w_f, w_o, b_o;
  Var label_matrix;
};

/// Places the model's tensors on `tape`. With `grads` non-null every tensor
/// routes its gradient into the matching buffer; `finetune_embedding` = false
/// leaves the word table constant.
inline BoundParams bind_params(Tape& tape, const Model& m, std::span<const std::size_t> token_ids,
                               ModelParams* grads, bool finetune_embedding = true) {
  const ModelParams& p = m.params;
  auto bind = [&](Matrix ModelParams::*member) {
    return tape.bind(p.*member, grads ? &(grads->*member) : nullptr);
  };
  auto bind_lstm = [&](LstmParams ModelParams::*member) {
    const LstmParams& lp = p.*member;
    LstmParams* lg = grads ? &(grads->*member) : nullptr;
    return LstmVars{tape.bind(lp.w_ih, lg ? &lg->w_ih : nullptr), tape.bind(lp.w_hh, lg ? &lg->w_hh : nullptr),
                    tape.bind(lp.bias, lg ? &lg->bias : nullptr)};
  };
  BoundParams b;
  b.embedded = embedding_lookup(tape, p.embedding, grads && finetune_embedding ? &grads->embedding : nullptr, token_ids);
  b.fwd = bind_lstm(&ModelParams::forward);
  b.bwd = bind_lstm(&ModelParams::backward);
  b.w_s1 = bind(&ModelParams::w_s1);
  b.w_s2 = bind(&ModelParams::w_s2);
  b.w_q = bind(&ModelParams::w_q);
  b.f1_w = bind(&ModelParams::fuse_self_w);
  b.f1_b = bind(&ModelParams::fuse_self_b);
  b.f2_w = bind(&ModelParams::fuse_inter_w);
  b.f2_b = bind(&ModelParams::fuse_inter_b);
  b.w_f = bind(&ModelParams::w_f);
  b.w_o = bind(&ModelParams::w_o);
  b.b_o = bind(&ModelParams::b_o);
  // The label embedding is never trained here.
  if (!m.label_matrix.empty()) b.label_matrix = tape.constant(m.label_matrix);
  return b;
}

/// Composes encoder, attention branches, fusion and prediction for the
/// model's variant over the given label subset.
inline ForwardVars forward_on_tape(const Model& m, const BoundParams& b, const Mask& mask,
                                   std::span<const std::size_t> labels) {
  if (labels.empty()) throw ValidationError("forward: empty label subset");
  for (auto l : labels) {
    if (l >= m.config.k) {
      throw ValidationError("forward: label " + std::to_string(l) + " >= k=" + std::to_string(m.config.k));
    }
  }
  ForwardVars v;
  v.encoder = bilstm_forward(b.embedded, b.fwd, b.bwd);
  Tape& tape = *b.embedded.tape();
  const std::size_t kp = labels.size();
  if (m.variant != Variant::kInteractionOnly) v.self = self_attention(v.encoder.h, b.w_s1, b.w_s2, labels, &mask);
  if (uses_label_embedding(m.variant)) {
    if (!b.label_matrix.valid()) {
      throw ValidationError("variant " + to_string(m.variant) + " requires a label embedding");
    }
    v.inter = interaction_attention(v.encoder, b.label_matrix, b.w_q, labels, &mask, m.config.k);
  }
  switch (m.variant) {
    case Variant::kSelfOnly:
      v.ctx = v.self->context;
      v.alpha = tape.constant(Matrix(1, kp, 1.0));
      v.beta = tape.constant(Matrix(1, kp, 0.0));
      break;
    case Variant::kInteractionOnly:
      v.ctx = v.inter->context;
      v.alpha = tape.constant(Matrix(1, kp, 0.0));
      v.beta = tape.constant(Matrix(1, kp, 1.0));
      break;
    case Variant::kAveraged:
      v.ctx = affine(add(v.self->context, v.inter->context), 0.5);
      v.alpha = tape.constant(Matrix(1, kp, 0.5));
      v.beta = tape.constant(Matrix(1, kp, 0.5));
      break;
    case Variant::kFused: {
      auto f = fuse(v.self->context, v.inter->context, b.f1_w, b.f1_b, b.f2_w, b.f2_b);
      v.ctx = f.context;
      v.alpha = f.alpha;
      v.beta = f.beta;
      break;
    }
  }
  v.prediction = predict(v.ctx, b.w_f, b.w_o, b.b_o);
  return v;
}

inline ForwardTrace make_trace(const Model& m, const ForwardVars& v, const Mask& mask,
                               std::span<const std::size_t> labels) {
  ForwardTrace t;
  t.variant = m.variant;
  t.labels.assign(labels.begin(), labels.end());
  t.mask = mask;
  t.h_fwd = v.encoder.h_fwd.value();
  t.h_bwd = v.encoder.h_bwd.value();
  t.h = v.encoder.h.value();
  if (v.self) {
    t.attn_self = v.self->weights.value();
    t.ctx_self = v.self->context.value();
  }
  if (v.inter) {
    t.attn_inter = v.inter->weights.value();
    t.ctx_inter = v.inter->context.value();
  }
  t.ctx = v.ctx.value();
  auto row = [](const Matrix& x) { return std::vector<double>(x.data().begin(), x.data().end()); };
  t.alpha = row(v.alpha.value());
  t.beta = row(v.beta.value());
  t.logits = row(v.prediction.logits.value());
  t.scores = row(v.prediction.probs.value());
  return t;
}

/// Inference-only forward pass; no gradients are recorded.
inline ForwardTrace forward(const Model& m, const EncodedDocument& doc, std::span<const std::size_t> labels) {
  Tape tape;
  BoundParams b = bind_params(tape, m, doc.ids, nullptr);
  ForwardVars v = forward_on_tape(m, b, doc.mask, labels);
  return make_trace(m, v, doc.mask, labels);
}

inline std::vector<std::size_t> all_labels(std::size_t k) {
  std::vector<std::size_t> out(k);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

// ŷ over the full label set.
inline std::vector<double> score_all(const Model& m, const EncodedDocument& doc) {
  const auto labels = all_labels(m.config.k);
  return forward(m, doc, labels).scores;
}

}  // namespace laha
