#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "numerics.hpp"

namespace archlab::ad {

/// Trainable tensor living outside any tape; tapes accumulate into `grad`.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node on a tape.
class Var {
public:
  Var() = default;
  Var(Tape *tape, std::size_t id) : tape_(tape), id_(id) {}

  [[nodiscard]] const Matrix &value() const;
  [[nodiscard]] const Matrix &grad() const;
  [[nodiscard]] Index rows() const { return value().rows(); }
  [[nodiscard]] Index cols() const { return value().cols(); }
  [[nodiscard]] double scalar() const;
  [[nodiscard]] Tape *tape() const noexcept { return tape_; }
  [[nodiscard]] std::size_t id() const noexcept { return id_; }

private:
  Tape *tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only computation graph. Nodes are created in topological order, so
/// backward is a reverse sweep. One backward pass per tape.
class Tape {
public:
  using Backward = std::function<void(Tape &, std::size_t)>;

  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter *param = nullptr;
  };

  Var constant(Matrix value) { return push(std::move(value), nullptr); }

  Var param(Parameter &p) {
    Var v = push(p.value, nullptr);
    nodes_[v.id()].param = &p;
    return v;
  }

  Var push(Matrix value, Backward backward) {
    if (backward_done_) fail(ErrorKind::Graph, "tape already differentiated");
    Node node;
    node.grad = Matrix::Zero(value.rows(), value.cols());
    node.value = std::move(value);
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return {this, nodes_.size() - 1};
  }

  /// Reverse sweep from a 1x1 root; parameter leaves add into Parameter::grad.
  void backward(const Var &root) {
    if (root.tape() != this) fail(ErrorKind::Graph, "root belongs to another tape");
    if (backward_done_) fail(ErrorKind::Graph, "double backward is not supported");
    Node &r = nodes_[root.id()];
    if (r.value.rows() != 1 || r.value.cols() != 1) fail(ErrorKind::Graph, "backward needs a scalar loss");
    backward_done_ = true;
    r.grad(0, 0) = 1.0;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node &n = nodes_[i];
      if (n.backward) n.backward(*this, i);
      if (n.param) n.param->grad += n.grad;
    }
  }

  [[nodiscard]] Node &node(std::size_t id) { return nodes_[id]; }
  [[nodiscard]] const Node &node(std::size_t id) const { return nodes_[id]; }
  [[nodiscard]] bool differentiated() const noexcept { return backward_done_; }
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

private:
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

inline const Matrix &Var::value() const { return tape_->node(id_).value; }

inline const Matrix &Var::grad() const {
  if (!tape_->differentiated()) fail(ErrorKind::Graph, "gradient read before backward");
  return tape_->node(id_).grad;
}

inline double Var::scalar() const {
  const Matrix &v = value();
  if (v.rows() != 1 || v.cols() != 1) fail(ErrorKind::Shape, "not a scalar node");
  return v(0, 0);
}

namespace detail {

inline void same_tape(const Var &a, const Var &b) {
  if (a.tape() != b.tape()) fail(ErrorKind::Graph, "operands live on different tapes");
}

inline void same_shape(const Var &a, const Var &b, const char *op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(ErrorKind::Shape, std::string(op) + ": shape mismatch");
}

inline Matrix &grad_of(Tape &t, const Var &v) { return t.node(v.id()).grad; }

} // namespace detail

inline Var matmul(const Var &a, const Var &b) {
  detail::same_tape(a, b);
  if (a.cols() != b.rows()) fail(ErrorKind::Shape, "matmul: inner dimensions differ");
  Tape &t = *a.tape();
  return t.push(a.value() * b.value(), [a, b](Tape &tape, std::size_t self) {
    const Matrix &g = tape.node(self).grad;
    detail::grad_of(tape, a).noalias() += g * b.value().transpose();
    detail::grad_of(tape, b).noalias() += a.value().transpose() * g;
  });
}

inline Var add(const Var &a, const Var &b) {
  detail::same_tape(a, b);
  detail::same_shape(a, b, "add");
  Tape &t = *a.tape();
  return t.push(a.value() + b.value(), [a, b](Tape &tape, std::size_t self) {
    const Matrix &g = tape.node(self).grad;
    detail::grad_of(tape, a) += g;
    detail::grad_of(tape, b) += g;
  });
}

inline Var sub(const Var &a, const Var &b) {
  detail::same_tape(a, b);
  detail::same_shape(a, b, "sub");
  Tape &t = *a.tape();
  return t.push(a.value() - b.value(), [a, b](Tape &tape, std::size_t self) {
    const Matrix &g = tape.node(self).grad;
    detail::grad_of(tape, a) += g;
    detail::grad_of(tape, b) -= g;
  });
}

/// a (m x n) plus a 1 x n row broadcast over rows.
inline Var add_row(const Var &a, const Var &row) {
  detail::same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) fail(ErrorKind::Shape, "add_row: bias must be 1 x cols");
  Tape &t = *a.tape();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return t.push(std::move(out), [a, row](Tape &tape, std::size_t self) {
    const Matrix &g = tape.node(self).grad;
    detail::grad_of(tape, a) += g;
    detail::grad_of(tape, row) += g.colwise().sum();
  });
}

/// Elementwise product.
inline Var mul(const Var &a, const Var &b) {
  detail::same_tape(a, b);
  detail::same_shape(a, b, "mul");
  Tape &t = *a.tape();
  return t.push(a.value().cwiseProduct(b.value()), [a, b](Tape &tape, std::size_t self) {
    const Matrix &g = tape.node(self).grad;
    detail::grad_of(tape, a) += g.cwiseProduct(b.value());
    detail::grad_of(tape, b) += g.cwiseProduct(a.value());
  });
}

inline Var scale(const Var &a, double s) {
  Tape &t = *a.tape();
  return t.push(a.value() * s, [a, s](Tape &tape, std::size_t self) {
    detail::grad_of(tape, a) += tape.node(self).grad * s;
  });
}

inline Var add_scalar(const Var &a, double s) {
  Tape &t = *a.tape();
  return t.push((a.value().array() + s).matrix(), [a](Tape &tape, std::size_t self) {
    detail::grad_of(tape, a) += tape.node(self).grad;
  });
}

inline Var relu(const Var &a) {
  Tape &t = *a.tape();
  return t.push(a.value().cwiseMax(0.0), [a](Tape &tape, std::size_t self) {
    const Matrix &g = tape.node(self).grad;
    detail::grad_of(tape, a) += (a.value().array() > 0.0).select(g, 0.0).matrix();
  });
}

inline Var tanh(const Var &a) {
  Tape &t = *a.tape();
  return t.push(a.value().array().tanh().matrix(), [a](Tape &tape, std::size_t self) {
    const Matrix &y = tape.node(self).value;
    const Matrix &g = tape.node(self).grad;
    detail::grad_of(tape, a) += (g.array() * (1.0 - y.array().square())).matrix();
  });
}

inline Var exp(const Var &a) {
  Tape &t = *a.tape();
  return t.push(a.value().array().exp().matrix(), [a](Tape &tape, std::size_t self) {
    const Matrix &y = tape.node(self).value;
    detail::grad_of(tape, a) += tape.node(self).grad.cwiseProduct(y);
  });
}

inline Var log(const Var &a) {
  Tape &t = *a.tape();
  return t.push(a.value().array().log().matrix(), [a](Tape &tape, std::size_t self) {
    detail::grad_of(tape, a) += tape.node(self).grad.cwiseQuotient(a.value());
  });
}

inline Var square(const Var &a) {
  Tape &t = *a.tape();
  return t.push(a.value().array().square().matrix(), [a](Tape &tape, std::size_t self) {
    detail::grad_of(tape, a) += 2.0 * tape.node(self).grad.cwiseProduct(a.value());
  });
}

/// Clamp to [lo, hi]; gradient passes only where the input is strictly inside.
inline Var clamp(const Var &a, double lo, double hi) {
  Tape &t = *a.tape();
  return t.push(a.value().cwiseMax(lo).cwiseMin(hi), [a, lo, hi](Tape &tape, std::size_t self) {
    const Matrix &g = tape.node(self).grad;
    const auto inside = (a.value().array() > lo) && (a.value().array() < hi);
    detail::grad_of(tape, a) += inside.select(g, 0.0).matrix();
  });
}

inline Var softmax_rows(const Var &a) {
  Tape &t = *a.tape();
  return t.push(row_softmax(a.value()), [a](Tape &tape, std::size_t self) {
    const Matrix &y = tape.node(self).value;
    const Matrix &g = tape.node(self).grad;
    // dL/dx = y * (g - <g, y>) per row
    const Vector dots = g.cwiseProduct(y).rowwise().sum();
    detail::grad_of(tape, a) += (y.array() * (g.colwise() - dots).array()).matrix();
  });
}

inline Var transpose(const Var &a) {
  Tape &t = *a.tape();
  return t.push(a.value().transpose(), [a](Tape &tape, std::size_t self) {
    detail::grad_of(tape, a) += tape.node(self).grad.transpose();
  });
}

inline Var sum(const Var &a) {
  Tape &t = *a.tape();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), [a](Tape &tape, std::size_t self) {
    detail::grad_of(tape, a).array() += tape.node(self).grad(0, 0);
  });
}

inline Var mean(const Var &a) {
  const double count = static_cast<double>(a.value().size());
  if (count == 0.0) fail(ErrorKind::Shape, "mean of an empty tensor");
  return scale(sum(a), 1.0 / count);
}

inline Var concat_cols(const Var &a, const Var &b) {
  detail::same_tape(a, b);
  if (a.rows() != b.rows()) fail(ErrorKind::Shape, "concat_cols: row counts differ");
  Tape &t = *a.tape();
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Index split = a.cols();
  return t.push(std::move(out), [a, b, split](Tape &tape, std::size_t self) {
    const Matrix &g = tape.node(self).grad;
    detail::grad_of(tape, a) += g.leftCols(split);
    detail::grad_of(tape, b) += g.rightCols(g.cols() - split);
  });
}

inline Var slice_cols(const Var &a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) fail(ErrorKind::Shape, "slice_cols out of range");
  Tape &t = *a.tape();
  return t.push(a.value().middleCols(start, count), [a, start, count](Tape &tape, std::size_t self) {
    detail::grad_of(tape, a).middleCols(start, count) += tape.node(self).grad;
  });
}

inline void zero_grads(const std::vector<Parameter *> &params) {
  for (auto *p : params) p->zero_grad();
}

} // namespace archlab::ad
