#pragma once

// Define-by-run reverse-mode differentiation over dense matrices.
//
// A BasicTape records primitive ops in construction order, which is always a
// valid topological order. Values are computed eagerly; leaves can be rebound
// and the whole tape re-evaluated with forward(), so one recorded graph can be
// evaluated many times (finite differences, repeated inference).

#include "fasd/ndiff/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fasd::ndiff {

enum class Op {
  Leaf,
  Add,
  Sub,
  Mul,
  Scale,
  MatMul,
  Transpose,
  RowSoftmax,
  RowLogSoftmax,
  Relu,
  Elu,
  Tanh,
  Concat,
  Sum,
  Mean,
  Dropout,
  GcnNormalize,
  MaskedSoftmax,
  Reshape,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::RowSoftmax: return "row_softmax";
    case Op::RowLogSoftmax: return "row_log_softmax";
    case Op::Relu: return "relu";
    case Op::Elu: return "elu";
    case Op::Tanh: return "tanh";
    case Op::Concat: return "concat";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Dropout: return "dropout";
    case Op::GcnNormalize: return "gcn_normalize";
    case Op::MaskedSoftmax: return "masked_softmax";
    case Op::Reshape: return "reshape";
  }
  return "?";
}

template <typename Scalar>
class BasicTape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename Scalar>
class BasicVar {
 public:
  BasicVar() = default;

  BasicTape<Scalar>* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Mat<Scalar>& value() const { return tape_->value(*this); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }

 private:
  friend class BasicTape<Scalar>;
  BasicVar(BasicTape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  BasicTape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients keyed by leaf id. Leaves not reachable from the loss get zeros.
template <typename Scalar>
class BasicGradientSet {
 public:
  void set(std::size_t id, Mat<Scalar> g) { grads_[id] = std::move(g); }
  bool contains(const BasicVar<Scalar>& v) const { return grads_.count(v.id()) != 0; }
  const Mat<Scalar>& operator[](const BasicVar<Scalar>& v) const {
    auto it = grads_.find(v.id());
    if (it == grads_.end()) throw std::out_of_range("gradient not requested for leaf");
    return it->second;
  }
  std::size_t size() const { return grads_.size(); }

 private:
  std::map<std::size_t, Mat<Scalar>> grads_;
};

template <typename Scalar>
class BasicTape {
 public:
  using Matrix = Mat<Scalar>;
  using Var = BasicVar<Scalar>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;
  BasicTape(BasicTape&&) = default;
  BasicTape& operator=(BasicTape&&) = default;

  /// Differentiable leaf (parameter or input).
  Var input(Matrix value, std::string name = {}) { return make_leaf(std::move(value), true, std::move(name)); }
  /// Leaf that never receives a gradient.
  Var constant(Matrix value) { return make_leaf(std::move(value), false, {}); }

  const Matrix& value(const Var& v) const { return nodes_.at(v.id()).value; }
  std::size_t size() const { return nodes_.size(); }
  Op op(const Var& v) const { return nodes_.at(v.id()).op; }

  /// Replace a leaf's value; shape must be unchanged. Call forward() afterwards.
  void bind(const Var& leaf, Matrix value) {
    Node& n = nodes_.at(leaf.id());
    if (n.op != Op::Leaf) throw std::invalid_argument("bind: node is not a leaf");
    if (n.value.rows() != value.rows() || n.value.cols() != value.cols())
      throw ShapeError("bind", "expected " + shape_str(n.value) + " got " + shape_str(value));
    n.value = std::move(value);
  }

  /// Re-evaluate every non-leaf node in recorded order.
  void forward() {
    for (auto& n : nodes_)
      if (n.op != Op::Leaf) compute(n);
  }

  /// Exact reverse-mode gradients of a scalar root with respect to `wrt`.
  BasicGradientSet<Scalar> backward(const Var& root, std::span<const Var> wrt) const;
  BasicGradientSet<Scalar> backward(const Var& root, std::initializer_list<Var> wrt) const {
    std::vector<Var> v(wrt);
    return backward(root, std::span<const Var>(v));
  }

  // Recording entry point used by the free-function ops.
  Var record(Op op, std::vector<std::size_t> inputs, Scalar param = Scalar(0), Index r = 0, Index c = 0,
             Matrix aux = Matrix()) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.param = param;
    n.r = r;
    n.c = c;
    n.aux = std::move(aux);
    n.needs_grad = false;
    for (auto i : n.inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
    compute(n);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

 private:
  struct Node {
    Op op = Op::Leaf;
    std::vector<std::size_t> inputs;
    Matrix value;
    Matrix aux;  // dropout mask / cached inverse-sqrt degrees
    Scalar param = Scalar(0);
    Index r = 0, c = 0;
    bool needs_grad = false;
    std::string name;
  };

  Var make_leaf(Matrix value, bool grad, std::string name) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.needs_grad = grad;
    n.name = std::move(name);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
  }

  const Matrix& in(const Node& n, std::size_t k) const { return nodes_[n.inputs[k]].value; }

  void compute(Node& n);
  void propagate(const Node& n, const Matrix& g, std::vector<Matrix>& grads, std::vector<char>& has) const;

  void accumulate(std::size_t id, const Matrix& g, std::vector<Matrix>& grads, std::vector<char>& has) const {
    if (!nodes_[id].needs_grad) return;
    if (has[id]) {
      grads[id] += g;
    } else {
      grads[id] = g;
      has[id] = 1;
    }
  }

  std::vector<Node> nodes_;
};

template <typename Scalar>
using Var = BasicVar<Scalar>;
template <typename Scalar>
using GradientSet = BasicGradientSet<Scalar>;

using Tape = BasicTape<double>;

namespace detail {

template <typename Scalar>
Mat<Scalar> row_softmax(const Mat<Scalar>& x) {
  Mat<Scalar> y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const Scalar m = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - m).exp().matrix();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

template <typename Scalar>
Mat<Scalar> row_log_softmax(const Mat<Scalar>& x) {
  Mat<Scalar> y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const Scalar m = x.row(i).maxCoeff();
    const Scalar lse = m + std::log((x.row(i).array() - m).exp().sum());
    y.row(i) = (x.row(i).array() - lse).matrix();
  }
  return y;
}

// Attention mask: positions with ap > 0 are open; an all-closed row opens
// only its diagonal entry and contributes no log-bias there.
template <typename Scalar>
bool row_has_support(const Mat<Scalar>& ap, Index i) {
  for (Index j = 0; j < ap.cols(); ++j)
    if (ap(i, j) > Scalar(0)) return true;
  return false;
}

template <typename Scalar>
Mat<Scalar> masked_softmax(const Mat<Scalar>& logits, const Mat<Scalar>& ap) {
  const Index n = logits.rows();
  Mat<Scalar> y = Mat<Scalar>::Zero(n, logits.cols());
  for (Index i = 0; i < n; ++i) {
    if (!row_has_support(ap, i)) {
      y(i, i) = Scalar(1);
      continue;
    }
    Scalar m = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < logits.cols(); ++j)
      if (ap(i, j) > Scalar(0)) m = std::max(m, logits(i, j) + std::log(ap(i, j)));
    Scalar z = Scalar(0);
    for (Index j = 0; j < logits.cols(); ++j) {
      if (ap(i, j) > Scalar(0)) {
        y(i, j) = std::exp(logits(i, j) + std::log(ap(i, j)) - m);
        z += y(i, j);
      }
    }
    y.row(i) /= z;
  }
  return y;
}

}  // namespace detail

template <typename Scalar>
void BasicTape<Scalar>::compute(Node& n) {
  const char* name = op_name(n.op);
  auto same_shape = [&](const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
      throw ShapeError(name, "operand shapes " + shape_str(a) + " and " + shape_str(b) + " differ");
  };
  switch (n.op) {
    case Op::Leaf:
      return;
    case Op::Add:
    case Op::Sub: {
      const Matrix& a = in(n, 0);
      const Matrix& b = in(n, 1);
      const Scalar sign = n.op == Op::Add ? Scalar(1) : Scalar(-1);
      if (b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols()) {
        n.value = a;
        n.value.rowwise() += sign * b.row(0);
      } else {
        same_shape(a, b);
        n.value = a + sign * b;
      }
      return;
    }
    case Op::Mul:
      same_shape(in(n, 0), in(n, 1));
      n.value = in(n, 0).cwiseProduct(in(n, 1));
      return;
    case Op::Scale:
      n.value = n.param * in(n, 0);
      return;
    case Op::MatMul: {
      const Matrix& a = in(n, 0);
      const Matrix& b = in(n, 1);
      if (a.cols() != b.rows())
        throw ShapeError(name, "inner dimensions of " + shape_str(a) + " and " + shape_str(b) + " differ");
      n.value.noalias() = a * b;
      return;
    }
    case Op::Transpose:
      n.value = in(n, 0).transpose();
      return;
    case Op::RowSoftmax:
      n.value = detail::row_softmax(in(n, 0));
      return;
    case Op::RowLogSoftmax:
      n.value = detail::row_log_softmax(in(n, 0));
      return;
    case Op::Relu:
      n.value = in(n, 0).cwiseMax(Scalar(0));
      return;
    case Op::Elu:
      n.value = in(n, 0).unaryExpr([](Scalar x) { return x > Scalar(0) ? x : std::expm1(x); });
      return;
    case Op::Tanh:
      n.value = in(n, 0).array().tanh().matrix();
      return;
    case Op::Concat: {
      const Index rows = in(n, 0).rows();
      Index cols = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        if (in(n, k).rows() != rows) throw ShapeError(name, "row counts differ across operands");
        cols += in(n, k).cols();
      }
      n.value.resize(rows, cols);
      Index off = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        n.value.middleCols(off, in(n, k).cols()) = in(n, k);
        off += in(n, k).cols();
      }
      return;
    }
    case Op::Sum:
      n.value = Matrix::Constant(1, 1, in(n, 0).sum());
      return;
    case Op::Mean:
      if (in(n, 0).size() == 0) throw ShapeError(name, "empty operand");
      n.value = Matrix::Constant(1, 1, in(n, 0).mean());
      return;
    case Op::Dropout:
      same_shape(in(n, 0), n.aux);
      n.value = in(n, 0).cwiseProduct(n.aux);
      return;
    case Op::GcnNormalize: {
      const Matrix& a = in(n, 0);
      if (a.rows() != a.cols()) throw ShapeError(name, "adjacency must be square, got " + shape_str(a));
      if (a.rows() == 0) throw ShapeError(name, "empty adjacency");
      Matrix at = a.cwiseMax(Scalar(0));
      at.diagonal().array() += Scalar(1);
      // aux caches deg^{-1/2} as a column
      n.aux = at.rowwise().sum().array().rsqrt().matrix();
      n.value = n.aux.asDiagonal() * at * n.aux.asDiagonal();
      return;
    }
    case Op::MaskedSoftmax: {
      const Matrix& l = in(n, 0);
      const Matrix& ap = in(n, 1);
      if (l.rows() != l.cols()) throw ShapeError(name, "logits must be square, got " + shape_str(l));
      same_shape(l, ap);
      n.value = detail::masked_softmax(l, ap);
      return;
    }
    case Op::Reshape: {
      const Matrix& x = in(n, 0);
      if (n.r * n.c != x.size())
        throw ShapeError(name, "cannot reshape " + shape_str(x) + " to (" + std::to_string(n.r) + "x" +
                                   std::to_string(n.c) + ")");
      n.value = Eigen::Map<const Matrix>(x.data(), n.r, n.c);
      return;
    }
  }
}

template <typename Scalar>
void BasicTape<Scalar>::propagate(const Node& n, const Matrix& g, std::vector<Matrix>& grads,
                                  std::vector<char>& has) const {
  auto need = [&](std::size_t k) { return nodes_[n.inputs[k]].needs_grad; };
  switch (n.op) {
    case Op::Leaf:
      return;
    case Op::Add:
    case Op::Sub: {
      const Matrix& a = in(n, 0);
      const Matrix& b = in(n, 1);
      const Scalar sign = n.op == Op::Add ? Scalar(1) : Scalar(-1);
      if (need(0)) accumulate(n.inputs[0], g, grads, has);
      if (need(1)) {
        if (b.rows() == 1 && a.rows() != 1)
          accumulate(n.inputs[1], (sign * g.colwise().sum()).eval(), grads, has);
        else
          accumulate(n.inputs[1], (sign * g).eval(), grads, has);
      }
      return;
    }
    case Op::Mul:
      if (need(0)) accumulate(n.inputs[0], g.cwiseProduct(in(n, 1)), grads, has);
      if (need(1)) accumulate(n.inputs[1], g.cwiseProduct(in(n, 0)), grads, has);
      return;
    case Op::Scale:
      accumulate(n.inputs[0], (n.param * g).eval(), grads, has);
      return;
    case Op::MatMul:
      if (need(0)) accumulate(n.inputs[0], (g * in(n, 1).transpose()).eval(), grads, has);
      if (need(1)) accumulate(n.inputs[1], (in(n, 0).transpose() * g).eval(), grads, has);
      return;
    case Op::Transpose:
      accumulate(n.inputs[0], g.transpose().eval(), grads, has);
      return;
    case Op::RowSoftmax: {
      const Matrix& y = n.value;
      Matrix dx = y.cwiseProduct(g);
      const auto s = dx.rowwise().sum().eval();
      dx -= y.cwiseProduct(s.replicate(1, y.cols()));
      accumulate(n.inputs[0], dx, grads, has);
      return;
    }
    case Op::RowLogSoftmax: {
      const Matrix p = n.value.array().exp().matrix();
      const auto s = g.rowwise().sum().eval();
      Matrix dx = g - p.cwiseProduct(s.replicate(1, p.cols()));
      accumulate(n.inputs[0], dx, grads, has);
      return;
    }
    case Op::Relu: {
      const Matrix& x = in(n, 0);
      Matrix dx = g.binaryExpr(x, [](Scalar gi, Scalar xi) { return xi > Scalar(0) ? gi : Scalar(0); });
      accumulate(n.inputs[0], dx, grads, has);
      return;
    }
    case Op::Elu: {
      const Matrix& x = in(n, 0);
      const Matrix& y = n.value;
      Matrix dx(x.rows(), x.cols());
      for (Index i = 0; i < x.size(); ++i)
        dx.data()[i] = g.data()[i] * (x.data()[i] > Scalar(0) ? Scalar(1) : y.data()[i] + Scalar(1));
      accumulate(n.inputs[0], dx, grads, has);
      return;
    }
    case Op::Tanh: {
      const Matrix& y = n.value;
      accumulate(n.inputs[0], g.cwiseProduct((Scalar(1) - y.array().square()).matrix()), grads, has);
      return;
    }
    case Op::Concat: {
      Index off = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const Index w = in(n, k).cols();
        if (need(k)) accumulate(n.inputs[k], g.middleCols(off, w).eval(), grads, has);
        off += w;
      }
      return;
    }
    case Op::Sum: {
      const Matrix& x = in(n, 0);
      accumulate(n.inputs[0], Matrix::Constant(x.rows(), x.cols(), g(0, 0)), grads, has);
      return;
    }
    case Op::Mean: {
      const Matrix& x = in(n, 0);
      accumulate(n.inputs[0], Matrix::Constant(x.rows(), x.cols(), g(0, 0) / Scalar(x.size())), grads, has);
      return;
    }
    case Op::Dropout:
      accumulate(n.inputs[0], g.cwiseProduct(n.aux), grads, has);
      return;
    case Op::GcnNormalize: {
      // out = R At R with R = diag(r), r = deg^{-1/2}, deg = rowsum(At), At = relu(A) + I
      const Matrix& a = in(n, 0);
      const auto& r = n.aux;  // column
      Matrix at = a.cwiseMax(Scalar(0));
      at.diagonal().array() += Scalar(1);
      const Index sz = a.rows();
      // dL/dr_u = sum_b g_ub At_ub r_b + sum_a g_au At_au r_a
      Matrix gat = g.cwiseProduct(at);
      Matrix dr = gat * r + gat.transpose() * r;
      // dL/ddeg_u = dL/dr_u * (-1/2) r_u^3
      Matrix ddeg = (dr.array() * (Scalar(-0.5) * r.array().cube())).matrix();
      Matrix da = r.asDiagonal() * g * r.asDiagonal();
      for (Index u = 0; u < sz; ++u) da.row(u).array() += ddeg(u, 0);
      // one-sided derivative at exactly zero, so absent edges still get a gradient
      for (Index u = 0; u < sz; ++u)
        for (Index v = 0; v < sz; ++v)
          if (!(a(u, v) >= Scalar(0))) da(u, v) = Scalar(0);
      accumulate(n.inputs[0], da, grads, has);
      return;
    }
    case Op::MaskedSoftmax: {
      const Matrix& y = n.value;
      const Matrix& ap = in(n, 1);
      Matrix dz = y.cwiseProduct(g);
      const auto s = dz.rowwise().sum().eval();
      dz -= y.cwiseProduct(s.replicate(1, y.cols()));
      if (need(0)) accumulate(n.inputs[0], dz, grads, has);
      if (need(1)) {
        Matrix dap = Matrix::Zero(ap.rows(), ap.cols());
        for (Index i = 0; i < ap.rows(); ++i) {
          if (!detail::row_has_support(ap, i)) continue;
          for (Index j = 0; j < ap.cols(); ++j)
            if (ap(i, j) > Scalar(0)) dap(i, j) = dz(i, j) / ap(i, j);
        }
        accumulate(n.inputs[1], dap, grads, has);
      }
      return;
    }
    case Op::Reshape: {
      const Matrix& x = in(n, 0);
      accumulate(n.inputs[0], Matrix(Eigen::Map<const Matrix>(g.data(), x.rows(), x.cols())), grads, has);
      return;
    }
  }
}

template <typename Scalar>
BasicGradientSet<Scalar> BasicTape<Scalar>::backward(const Var& root, std::span<const Var> wrt) const {
  const Node& r = nodes_.at(root.id());
  if (r.value.rows() != 1 || r.value.cols() != 1)
    throw ShapeError("backward", "loss root must be scalar, got " + shape_str(r.value));
  std::vector<Matrix> grads(root.id() + 1);
  std::vector<char> has(root.id() + 1, 0);
  if (r.needs_grad) {
    grads[root.id()] = Matrix::Ones(1, 1);
    has[root.id()] = 1;
  }
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    if (!has[i]) continue;
    const Node& n = nodes_[i];
    if (n.op != Op::Leaf) propagate(n, grads[i], grads, has);
  }
  BasicGradientSet<Scalar> out;
  for (const auto& v : wrt) {
    const Node& leaf = nodes_.at(v.id());
    if (v.id() <= root.id() && has[v.id()])
      out.set(v.id(), grads[v.id()]);
    else
      out.set(v.id(), Matrix::Zero(leaf.value.rows(), leaf.value.cols()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Free-function ops.

namespace detail {
template <typename Scalar>
BasicTape<Scalar>& tape_of(const BasicVar<Scalar>& a, const BasicVar<Scalar>& b, const char* op) {
  if (!a.valid() || a.tape() != b.tape()) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
  return *a.tape();
}
}  // namespace detail

template <typename S>
BasicVar<S> operator+(const BasicVar<S>& a, const BasicVar<S>& b) {
  return detail::tape_of(a, b, "add").record(Op::Add, {a.id(), b.id()});
}
template <typename S>
BasicVar<S> operator-(const BasicVar<S>& a, const BasicVar<S>& b) {
  return detail::tape_of(a, b, "sub").record(Op::Sub, {a.id(), b.id()});
}
template <typename S>
BasicVar<S> operator*(S k, const BasicVar<S>& a) {
  return a.tape()->record(Op::Scale, {a.id()}, k);
}
template <typename S>
BasicVar<S> operator-(const BasicVar<S>& a) {
  return S(-1) * a;
}
template <typename S>
BasicVar<S> mul(const BasicVar<S>& a, const BasicVar<S>& b) {
  return detail::tape_of(a, b, "mul").record(Op::Mul, {a.id(), b.id()});
}
template <typename S>
BasicVar<S> matmul(const BasicVar<S>& a, const BasicVar<S>& b) {
  return detail::tape_of(a, b, "matmul").record(Op::MatMul, {a.id(), b.id()});
}
template <typename S>
BasicVar<S> transpose(const BasicVar<S>& a) {
  return a.tape()->record(Op::Transpose, {a.id()});
}
template <typename S>
BasicVar<S> row_softmax(const BasicVar<S>& a) {
  return a.tape()->record(Op::RowSoftmax, {a.id()});
}
template <typename S>
BasicVar<S> row_log_softmax(const BasicVar<S>& a) {
  return a.tape()->record(Op::RowLogSoftmax, {a.id()});
}
template <typename S>
BasicVar<S> relu(const BasicVar<S>& a) {
  return a.tape()->record(Op::Relu, {a.id()});
}
template <typename S>
BasicVar<S> elu(const BasicVar<S>& a) {
  return a.tape()->record(Op::Elu, {a.id()});
}
template <typename S>
BasicVar<S> tanh(const BasicVar<S>& a) {
  return a.tape()->record(Op::Tanh, {a.id()});
}
template <typename S>
BasicVar<S> concat_cols(std::span<const BasicVar<S>> parts) {
  if (parts.empty()) throw ShapeError("concat", "no operands");
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    if (p.tape() != parts[0].tape()) throw std::invalid_argument("concat: operands on different tapes");
    ids.push_back(p.id());
  }
  return parts[0].tape()->record(Op::Concat, std::move(ids));
}
template <typename S>
BasicVar<S> concat_cols(const std::vector<BasicVar<S>>& parts) {
  return concat_cols(std::span<const BasicVar<S>>(parts));
}
template <typename S>
BasicVar<S> sum(const BasicVar<S>& a) {
  return a.tape()->record(Op::Sum, {a.id()});
}
template <typename S>
BasicVar<S> mean(const BasicVar<S>& a) {
  return a.tape()->record(Op::Mean, {a.id()});
}
/// x ∘ mask, with mask already scaled by 1/(1-rate).
template <typename S>
BasicVar<S> dropout(const BasicVar<S>& x, Mat<S> mask) {
  return x.tape()->record(Op::Dropout, {x.id()}, S(0), 0, 0, std::move(mask));
}
/// D^{-1/2}(relu(A)+I)D^{-1/2}, D the row sums of relu(A)+I.
template <typename S>
BasicVar<S> gcn_normalize(const BasicVar<S>& a) {
  return a.tape()->record(Op::GcnNormalize, {a.id()});
}
/// Row softmax of logits + log(ap) restricted to ap > 0; rows without support
/// attend to themselves.
template <typename S>
BasicVar<S> masked_softmax(const BasicVar<S>& logits, const BasicVar<S>& ap) {
  return detail::tape_of(logits, ap, "masked_softmax").record(Op::MaskedSoftmax, {logits.id(), ap.id()});
}
template <typename S>
BasicVar<S> reshape(const BasicVar<S>& a, Index rows, Index cols) {
  return a.tape()->record(Op::Reshape, {a.id()}, S(0), rows, cols);
}
template <typename S>
BasicVar<S> sum_squares(const BasicVar<S>& a) {
  return sum(mul(a, a));
}

}  // namespace fasd::ndiff
