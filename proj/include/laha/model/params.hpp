// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "laha/data/vocabulary.hpp"
#include "laha/error.hpp"
#include "laha/numeric/matrix.hpp"
#include "laha/random.hpp"

namespace laha {

struct ModelConfig {
  std::size_t vocab_size = 2;
  std::size_t d = 300;    // word-vector dimension
  std::size_t r = 256;    // LSTM hidden size per direction
  std::size_t d_a = 256;  // self-attention projection
  std::size_t k = 1;      // label count
  std::size_t max_len = 500;

  void validate() const {
    if (vocab_size < 2 || d == 0 || r == 0 || d_a == 0 || k == 0 || max_len == 0) {
      throw ValidationError("model config: all dimensions must be positive and vocab_size >= 2");
    }
  }
  bool operator==(const ModelConfig&) const = default;
};

enum class Variant { kSelfOnly, kInteractionOnly, kAveraged, kFused };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kSelfOnly: return "sa";
    case Variant::kInteractionOnly: return "ia";
    case Variant::kAveraged: return "sa+ia";
    case Variant::kFused: return "laha";
  }
  return "laha";
}

inline Variant parse_variant(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "sa") return Variant::kSelfOnly;
  if (s == "ia") return Variant::kInteractionOnly;
  if (s == "sa+ia") return Variant::kAveraged;
  if (s == "laha") return Variant::kFused;
  throw ValidationError("unknown variant '" + s + "' (expected sa, ia, sa+ia or laha)");
}

// Interaction attention needs the label embedding.
inline bool uses_label_embedding(Variant v) { return v != Variant::kSelfOnly; }

// Gate rows are stacked input, forget, cell, output (each r rows).
struct LstmParams {
  Matrix w_ih;  // 4r x d
  Matrix w_hh;  // 4r x r
  Matrix bias;  // 4r x 1

  bool operator==(const LstmParams&) const = default;
};

/// Every trainable tensor of the model.
struct ModelParams {
  Matrix embedding;  // vocab x d
  LstmParams forward;
  LstmParams backward;
  Matrix w_s1;    // d_a x 2r
  Matrix w_s2;    // k x d_a
  Matrix w_q;     // r x r
  Matrix fuse_self_w;   // 1 x 2r
  Matrix fuse_self_b;   // 1 x 1
  Matrix fuse_inter_w;  // 1 x 2r
  Matrix fuse_inter_b;  // 1 x 1
  Matrix w_f;     // r x 2r
  Matrix w_o;     // 1 x r
  Matrix b_o;     // 1 x 1

  // Fixed iteration order used by the optimizer and the checkpoint format.
  template <class Self, class Fn>
  static void visit(Self& self, Fn&& fn) {
    fn("embedding", self.embedding);
    fn("lstm_fwd.w_ih", self.forward.w_ih);
    fn("lstm_fwd.w_hh", self.forward.w_hh);
    fn("lstm_fwd.bias", self.forward.bias);
    fn("lstm_bwd.w_ih", self.backward.w_ih);
    fn("lstm_bwd.w_hh", self.backward.w_hh);
    fn("lstm_bwd.bias", self.backward.bias);
    fn("w_s1", self.w_s1);
    fn("w_s2", self.w_s2);
    fn("w_q", self.w_q);
    fn("fuse_self.w", self.fuse_self_w);
    fn("fuse_self.b", self.fuse_self_b);
    fn("fuse_inter.w", self.fuse_inter_w);
    fn("fuse_inter.b", self.fuse_inter_b);
    fn("w_f", self.w_f);
    fn("w_o", self.w_o);
    fn("b_o", self.b_o);
  }
  template <class Fn> void for_each(Fn&& fn) { visit(*this, std::forward<Fn>(fn)); }
  template <class Fn> void for_each(Fn&& fn) const { visit(*this, std::forward<Fn>(fn)); }

  std::vector<std::pair<std::string, Matrix*>> named() {
    std::vector<std::pair<std::string, Matrix*>> out;
    for_each([&](const char* n, Matrix& m) { out.emplace_back(n, &m); });
    return out;
  }
  std::vector<std::pair<std::string, const Matrix*>> named() const {
    std::vector<std::pair<std::string, const Matrix*>> out;
    for_each([&](const char* n, const Matrix& m) { out.emplace_back(n, &m); });
    return out;
  }

  // Same shapes, all zero; used as a gradient buffer.
  ModelParams zeros_like() const {
    ModelParams z = *this;
    z.for_each([](const char*, Matrix& m) { m.fill(0.0); });
    return z;
  }

  void set_zero() {
    for_each([](const char*, Matrix& m) { m.fill(0.0); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const char*, const Matrix& m) { n += m.size(); });
    return n;
  }

  bool operator==(const ModelParams&) const = default;
};

inline void check_shapes(const ModelParams& p, const ModelConfig& c) {
  const std::size_t r = c.r, g = 4 * c.r;
  const std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> expected = {
      {"embedding", {c.vocab_size, c.d}}, {"lstm_fwd.w_ih", {g, c.d}}, {"lstm_fwd.w_hh", {g, r}},
      {"lstm_fwd.bias", {g, 1}},          {"lstm_bwd.w_ih", {g, c.d}}, {"lstm_bwd.w_hh", {g, r}},
      {"lstm_bwd.bias", {g, 1}},          {"w_s1", {c.d_a, 2 * r}},    {"w_s2", {c.k, c.d_a}},
      {"w_q", {r, r}},                    {"fuse_self.w", {1, 2 * r}}, {"fuse_self.b", {1, 1}},
      {"fuse_inter.w", {1, 2 * r}},       {"fuse_inter.b", {1, 1}},    {"w_f", {r, 2 * r}},
      {"w_o", {1, r}},                    {"b_o", {1, 1}}};
  std::size_t i = 0;
  p.for_each([&](const char* name, const Matrix& m) {
    const auto& [rows, cols] = expected[i++].second;
    if (m.rows() != rows || m.cols() != cols) {
      throw DimensionError(std::string("parameter ") + name + " has shape " + m.shape() + ", expected " +
                           Matrix::shape_string(rows, cols));
    }
  });
}

/// Xavier-uniform weights and zero biases, each tensor drawn from its own
/// stream derived from (seed, tensor index). When `word_vectors` is given it
/// becomes the embedding table (PAD row forced to zero); otherwise the table
/// is uniform(-0.25, 0.25).
inline ModelParams init_params(const ModelConfig& c, std::uint64_t seed, const Matrix* word_vectors = nullptr) {
  c.validate();
  const std::size_t r = c.r;
  auto lstm = [&] { return LstmParams{Matrix(4 * r, c.d), Matrix(4 * r, r), Matrix(4 * r, 1)}; };
  ModelParams p{Matrix(c.vocab_size, c.d), lstm(), lstm(),
                Matrix(c.d_a, 2 * r), Matrix(c.k, c.d_a), Matrix(r, r),
                Matrix(1, 2 * r), Matrix(1, 1), Matrix(1, 2 * r), Matrix(1, 1),
                Matrix(r, 2 * r), Matrix(1, r), Matrix(1, 1)};
  std::uint64_t index = 0;
  p.for_each([&](const char* name, Matrix& m) {
    Rng rng(derive_seed(seed, {index++}));
    const std::string n = name;
    if (n == "embedding") {
      if (word_vectors) {
        if (!word_vectors->same_shape(m)) {
          throw DimensionError("word vectors " + word_vectors->shape() + " do not match embedding " + m.shape());
        }
        m = *word_vectors;
      } else {
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-0.25, 0.25);
      }
      for (auto& x : m.row_span(Vocabulary::kPad)) x = 0.0;
      return;
    }
    const bool is_bias = n.ends_with(".bias") || n.ends_with(".b") || n == "b_o";
    if (is_bias) return;
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-limit, limit);
  });
  return p;
}

}  // namespace laha
