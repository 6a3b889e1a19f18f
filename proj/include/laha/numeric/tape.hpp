// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "laha/numeric/matrix.hpp"

namespace laha {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode differentiation tape.
///
/// Nodes are appended in evaluation order, so walking the tape backwards is a
/// valid reverse topological order. Each backward() call zeroes every gradient
/// and then visits each reachable node exactly once. Leaves created with bind()
/// add their gradient into an external sink, which lets several tapes (one per
/// document) accumulate into one shared gradient buffer in a fixed order.
class Tape {
 public:
  // Receives the node's output gradient and output value; must accumulate into
  // parents only.
  using BackwardFn = std::function<void(Tape&, const Matrix& grad, const Matrix& value)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return append(std::move(value), false, nullptr); }

  // Leaf whose gradient is read back through Var::grad().
  Var variable(Matrix value) { return append(std::move(value), true, nullptr); }

  // Leaf copied from `value`; after backward its gradient is added into *sink.
  // A null sink makes the leaf a constant.
  Var bind(const Matrix& value, Matrix* sink) {
    if (sink && !sink->same_shape(value)) {
      throw DimensionError("bind: gradient sink " + sink->shape() + " does not match value " +
                           value.shape());
    }
    if (!sink) return constant(value);
    return append(value, true, [sink](Tape&, const Matrix& g, const Matrix&) { *sink += g; });
  }

  // Records an op output. The node needs a gradient iff any parent does.
  Var push(Matrix value, std::initializer_list<Var> parents, BackwardFn fn) {
    return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
  }
  Var push(Matrix value, std::span<const Var> parents, BackwardFn fn) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id()].needs_grad;
    return append(std::move(value), needs, needs ? std::move(fn) : nullptr);
  }

  // Records a parentless node that still routes gradient somewhere (e.g. an
  // embedding lookup scattering into a table gradient).
  Var push_source(Matrix value, BackwardFn fn) {
    const bool needs = static_cast<bool>(fn);
    return append(std::move(value), needs, std::move(fn));
  }

  bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }

  // grad(v) += g, skipped for nodes that need no gradient.
  void accumulate(Var v, const Matrix& g) {
    auto& n = nodes_[v.id()];
    if (!n.needs_grad) return;
    n.grad += g;
  }

  // Mutable gradient of v, or nullptr when v needs none. Only valid during backward.
  Matrix* grad_target(Var v) {
    auto& n = nodes_[v.id()];
    return n.needs_grad ? &n.grad : nullptr;
  }

  void backward(Var out) {
    if (out.tape() != this) throw std::invalid_argument("backward: variable belongs to another tape");
    const auto& ov = nodes_[out.id()].value;
    if (ov.rows() != 1 || ov.cols() != 1) {
      throw DimensionError("backward: output must be scalar (1x1), got " + ov.shape());
    }
    for (auto& n : nodes_) {
      if (n.needs_grad) n.grad = Matrix(n.value.rows(), n.value.cols());
    }
    if (!nodes_[out.id()].needs_grad) return;
    nodes_[out.id()].grad[0] = 1.0;
    for (std::size_t i = out.id() + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.needs_grad && n.backward) n.backward(*this, n.grad, n.value);
    }
  }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    BackwardFn backward;
  };

  Var append(Matrix value, bool needs_grad, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), Matrix(), needs_grad, std::move(fn)});
    return Var(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }

// ---------------------------------------------------------------------------
// Differentiable ops. Each records its output and a closure that pushes the
// output gradient to its inputs.

inline Var matmul(Var a, Var b) {
  Tape& t = *a.tape();
  return t.push(matmul(a.value(), b.value()), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.needs_grad(a)) t.accumulate(a, matmul_nt(g, b.value()));
    if (t.needs_grad(b)) t.accumulate(b, matmul_tn(a.value(), g));
  });
}

inline Var add(Var a, Var b) {
  Matrix::require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value();
  out += b.value();
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

inline Var sub(Var a, Var b) {
  Matrix::require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    if (Matrix* gb = t.grad_target(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
  });
}

inline Var hadamard(Var a, Var b) {
  Matrix::require_same_shape(a.value(), b.value(), "hadamard");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (Matrix* ga = t.grad_target(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b.value()[i];
    if (Matrix* gb = t.grad_target(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a.value()[i];
  });
}

inline Var divide(Var a, Var b) {
  Matrix::require_same_shape(a.value(), b.value(), "divide");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= b.value()[i];
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (Matrix* ga = t.grad_target(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / bv[i];
    if (Matrix* gb = t.grad_target(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i] * av[i] / (bv[i] * bv[i]);
  });
}

// scale * a + shift, elementwise.
inline Var affine(Var a, double scale, double shift = 0.0) {
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * out[i] + shift;
  return a.tape()->push(std::move(out), {a}, [a, scale](Tape& t, const Matrix& g, const Matrix&) {
    Matrix* ga = t.grad_target(a);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += scale * g[i];
  });
}

// Adds column vector `bias` (m x 1) to every column of `a` (m x n).
inline Var add_bias(Var a, Var bias) {
  const Matrix& av = a.value();
  const Matrix& bv = bias.value();
  if (bv.cols() != 1 || bv.rows() != av.rows()) {
    throw DimensionError("add_bias: bias " + bv.shape() + " incompatible with " + av.shape());
  }
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv[i];
  return a.tape()->push(std::move(out), {a, bias}, [a, bias](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    if (Matrix* gb = t.grad_target(bias))
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*gb)[i] += g(i, j);
  });
}

inline Var activate(Var a, Activation kind) {
  return a.tape()->push(activate(a.value(), kind), {a}, [a, kind](Tape& t, const Matrix& g, const Matrix& y) {
    Matrix* ga = t.grad_target(a);
    const Matrix& x = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * activation_derivative(x[i], y[i], kind);
  });
}

inline Var tanh(Var a) { return activate(a, Activation::kTanh); }
inline Var sigmoid(Var a) { return activate(a, Activation::kSigmoid); }
inline Var relu(Var a) { return activate(a, Activation::kRelu); }

inline Var transpose(Var a) {
  return a.tape()->push(transpose(a.value()), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, transpose(g));
  });
}


/// Differentiable column softmax; see the Matrix overload for masking semantics.
inline Var softmax_columns(Var a, const Mask* mask = nullptr) {
  return a.tape()->push(softmax_columns(a.value(), mask), {a}, [a](Tape& t, const Matrix& g, const Matrix& y) {
    Matrix* ga = t.grad_target(a);
    for (std::size_t j = 0; j < y.cols(); ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < y.rows(); ++i) dot += y(i, j) * g(i, j);
      // Masked rows have y == 0 and receive no gradient.
      for (std::size_t i = 0; i < y.rows(); ++i) (*ga)(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

inline Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Matrix& av = a.value();
  if (begin + count > av.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + av.shape());
  }
  Matrix out(count, av.cols());
  std::copy_n(av.data().begin() + static_cast<std::ptrdiff_t>(begin * av.cols()), count * av.cols(),
              out.data().begin());
  return a.tape()->push(std::move(out), {a}, [a, begin](Tape& t, const Matrix& g, const Matrix&) {
    Matrix* ga = t.grad_target(a);
    const std::size_t off = begin * g.cols();
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[off + i] += g[i];
  });
}

inline Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& av = a.value();
  if (begin + count > av.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + av.shape());
  }
  Matrix out(av.rows(), count);
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = av(i, begin + j);
  return a.tape()->push(std::move(out), {a}, [a, begin](Tape& t, const Matrix& g, const Matrix&) {
    Matrix* ga = t.grad_target(a);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) (*ga)(i, begin + j) += g(i, j);
  });
}

// Horizontal concatenation [a_0 a_1 ...]; all parts share a row count.
inline Var hstack(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("hstack: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("hstack: row mismatch " + parts[0].value().shape() + " vs " + p.value().shape());
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t c0 = 0;
  for (const auto& p : parts) {
    const Matrix& pv = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < pv.cols(); ++j) out(i, c0 + j) = pv(i, j);
    c0 += pv.cols();
  }
  std::vector<Var> owned(parts.begin(), parts.end());
  return parts[0].tape()->push(std::move(out), parts, [owned](Tape& t, const Matrix& g, const Matrix&) {
    std::size_t c = 0;
    for (const auto& p : owned) {
      const std::size_t pc = p.cols();
      if (Matrix* gp = t.grad_target(p)) {
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < pc; ++j) (*gp)(i, j) += g(i, c + j);
      }
      c += pc;
    }
  });
}

// Vertical concatenation [a_0; a_1; ...]; all parts share a column count.
inline Var vstack(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("vstack: no inputs");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("vstack: column mismatch " + parts[0].value().shape() + " vs " + p.value().shape());
    }
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += p.value().size();
  }
  std::vector<Var> owned(parts.begin(), parts.end());
  return parts[0].tape()->push(std::move(out), parts, [owned](Tape& t, const Matrix& g, const Matrix&) {
    std::size_t o = 0;
    for (const auto& p : owned) {
      const std::size_t n = p.value().size();
      if (Matrix* gp = t.grad_target(p))
        for (std::size_t i = 0; i < n; ++i) (*gp)[i] += g[o + i];
      o += n;
    }
  });
}

inline Var hstack(std::initializer_list<Var> parts) { return hstack(std::span<const Var>(parts.begin(), parts.size())); }
inline Var vstack(std::initializer_list<Var> parts) { return vstack(std::span<const Var>(parts.begin(), parts.size())); }

// Rows of `a` picked by index, in the given order (repeats allowed).
inline Var gather_rows(Var a, std::span<const std::size_t> idx) {
  const Matrix& av = a.value();
  Matrix out(idx.size(), av.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= av.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(idx[r]) + " out of range for " + av.shape());
    }
    std::copy_n(av.row_span(idx[r]).begin(), av.cols(), out.row_span(r).begin());
  }
  std::vector<std::size_t> ids(idx.begin(), idx.end());
  return a.tape()->push(std::move(out), {a}, [a, ids](Tape& t, const Matrix& g, const Matrix&) {
    Matrix* ga = t.grad_target(a);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      auto dst = ga->row_span(ids[r]);
      auto src = g.row_span(r);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
  });
}

// Columns of `a` picked by index, in the given order (repeats allowed).
inline Var gather_cols(Var a, std::span<const std::size_t> idx) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), idx.size());
  for (std::size_t c = 0; c < idx.size(); ++c) {
    if (idx[c] >= av.cols()) {
      throw DimensionError("gather_cols: index " + std::to_string(idx[c]) + " out of range for " + av.shape());
    }
    for (std::size_t i = 0; i < av.rows(); ++i) out(i, c) = av(i, idx[c]);
  }
  std::vector<std::size_t> ids(idx.begin(), idx.end());
  return a.tape()->push(std::move(out), {a}, [a, ids](Tape& t, const Matrix& g, const Matrix&) {
    Matrix* ga = t.grad_target(a);
    for (std::size_t c = 0; c < ids.size(); ++c)
      for (std::size_t i = 0; i < g.rows(); ++i) (*ga)(i, ids[c]) += g(i, c);
  });
}

// out(i, j) = a(i, j) * w(0, j); w is a 1 x n row of per-column weights.
inline Var scale_columns(Var a, Var w) {
  const Matrix& av = a.value();
  const Matrix& wv = w.value();
  if (wv.rows() != 1 || wv.cols() != av.cols()) {
    throw DimensionError("scale_columns: weights " + wv.shape() + " incompatible with " + av.shape());
  }
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) *= wv[j];
  return a.tape()->push(std::move(out), {a, w}, [a, w](Tape& t, const Matrix& g, const Matrix&) {
    const Matrix& av = a.value();
    const Matrix& wv = w.value();
    if (Matrix* ga = t.grad_target(a))
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*ga)(i, j) += g(i, j) * wv[j];
    if (Matrix* gw = t.grad_target(w))
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*gw)[j] += g(i, j) * av(i, j);
  });
}

// Sum of all entries as a 1 x 1 value.
inline Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return a.tape()->push(Matrix(1, 1, s), {a}, [a](Tape& t, const Matrix& g, const Matrix&) {
    Matrix* ga = t.grad_target(a);
    for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g[0];
  });
}

/// Columns of `table^T` selected by id: returns a (table.cols() x ids.size())
/// matrix whose column t is row ids[t] of `table`. The table itself is not
/// copied onto the tape; its gradient is scattered into *sink when non-null.
inline Var embedding_lookup(Tape& tape, const Matrix& table, Matrix* sink, std::span<const std::size_t> ids) {
  if (sink && !sink->same_shape(table)) {
    throw DimensionError("embedding_lookup: sink " + sink->shape() + " does not match table " + table.shape());
  }
  Matrix out(table.cols(), ids.size());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= table.rows()) {
      throw DimensionError("embedding_lookup: id " + std::to_string(ids[t]) + " out of range for " + table.shape());
    }
    for (std::size_t i = 0; i < table.cols(); ++i) out(i, t) = table(ids[t], i);
  }
  if (!sink) return tape.constant(std::move(out));
  std::vector<std::size_t> owned(ids.begin(), ids.end());
  return tape.push_source(std::move(out), [sink, owned](Tape&, const Matrix& g, const Matrix&) {
    for (std::size_t t = 0; t < owned.size(); ++t) {
      auto dst = sink->row_span(owned[t]);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g(i, t);
    }
  });
}

}  // namespace laha
