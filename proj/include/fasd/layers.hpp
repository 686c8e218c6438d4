#pragma once

// Graph building blocks on top of ndiff: GCN layers, MLP stacks, adjacency
// powers and graph multi-head attention over masked adjacency powers.

#include "fasd/ndiff/tape.hpp"
#include "fasd/rng.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fasd {

enum class Activation { None, Relu, Elu, Tanh };

/// weight: in x out, bias: 1 x out.
template <typename Scalar>
struct AffineParams {
  Mat<Scalar> weight;
  Mat<Scalar> bias;

  Index in_dim() const { return weight.rows(); }
  Index out_dim() const { return weight.cols(); }
};

template <typename Scalar>
using GcnLayerParams = AffineParams<Scalar>;
template <typename Scalar>
using LinearParams = AffineParams<Scalar>;

template <typename Scalar>
struct GmhParams {
  std::vector<Mat<Scalar>> query, key, value;  // per head, in x head_dim
  Mat<Scalar> output;                          // heads*head_dim x out

  std::size_t heads() const { return query.size(); }
  Index in_dim() const { return query.empty() ? 0 : query[0].rows(); }
  Index head_dim() const { return query.empty() ? 0 : query[0].cols(); }
  Index out_dim() const { return output.cols(); }
};

// ---------------------------------------------------------------------------
// Initialisation

template <typename Scalar>
Mat<Scalar> glorot(Index in, Index out, Rng& rng) {
  const double limit = std::sqrt(6.0 / double(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Mat<Scalar> w(in, out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = Scalar(u(rng));
  return w;
}

template <typename Scalar>
AffineParams<Scalar> init_affine(Index in, Index out, Rng& rng) {
  return {glorot<Scalar>(in, out, rng), Mat<Scalar>::Zero(1, out)};
}

template <typename Scalar>
GmhParams<Scalar> init_gmh(Index in, Index out, std::size_t heads, Rng& rng) {
  if (heads == 0) throw std::invalid_argument("gmh: head count must be >= 1");
  if (out % Index(heads) != 0) throw std::invalid_argument("gmh: output dim must divide evenly across heads");
  const Index dh = out / Index(heads);
  GmhParams<Scalar> p;
  for (std::size_t h = 0; h < heads; ++h) {
    p.query.push_back(glorot<Scalar>(in, dh, rng));
    p.key.push_back(glorot<Scalar>(in, dh, rng));
    p.value.push_back(glorot<Scalar>(in, dh, rng));
  }
  p.output = glorot<Scalar>(dh * Index(heads), out, rng);
  return p;
}

// ---------------------------------------------------------------------------
// Parameter binding: model parameters become tape leaves in a fixed visiting
// order so gradients can be matched back to the tensors they came from.

template <typename Scalar>
class ParamBinder {
 public:
  explicit ParamBinder(ndiff::BasicTape<Scalar>& tape) : tape_(tape) {}

  ndiff::Var<Scalar> operator()(const Mat<Scalar>& m) {
    auto v = tape_.input(m);
    leaves_.push_back(v);
    return v;
  }
  ndiff::BasicTape<Scalar>& tape() { return tape_; }
  const std::vector<ndiff::Var<Scalar>>& leaves() const { return leaves_; }

 private:
  ndiff::BasicTape<Scalar>& tape_;
  std::vector<ndiff::Var<Scalar>> leaves_;
};

template <typename Scalar>
struct AffineVars {
  ndiff::Var<Scalar> weight, bias;
};

template <typename Scalar>
struct GmhVars {
  std::vector<ndiff::Var<Scalar>> query, key, value;
  ndiff::Var<Scalar> output;
};

template <typename Scalar>
AffineVars<Scalar> bind(ParamBinder<Scalar>& b, const AffineParams<Scalar>& p) {
  auto w = b(p.weight);
  auto bias = b(p.bias);
  return {w, bias};
}

template <typename Scalar>
GmhVars<Scalar> bind(ParamBinder<Scalar>& b, const GmhParams<Scalar>& p) {
  GmhVars<Scalar> v;
  for (std::size_t h = 0; h < p.heads(); ++h) {
    v.query.push_back(b(p.query[h]));
    v.key.push_back(b(p.key[h]));
    v.value.push_back(b(p.value[h]));
  }
  v.output = b(p.output);
  return v;
}

template <typename Scalar, typename F>
void visit(AffineParams<Scalar>& p, const std::string& prefix, F&& f) {
  f(prefix + ".weight", p.weight);
  f(prefix + ".bias", p.bias);
}

template <typename Scalar, typename F>
void visit(GmhParams<Scalar>& p, const std::string& prefix, F&& f) {
  for (std::size_t h = 0; h < p.heads(); ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    f(hp + ".query", p.query[h]);
    f(hp + ".key", p.key[h]);
    f(hp + ".value", p.value[h]);
  }
  f(prefix + ".output", p.output);
}

// ---------------------------------------------------------------------------
// Tape-level layers

template <typename Scalar>
ndiff::Var<Scalar> activate(const ndiff::Var<Scalar>& x, Activation act) {
  switch (act) {
    case Activation::None: return x;
    case Activation::Relu: return ndiff::relu(x);
    case Activation::Elu: return ndiff::elu(x);
    case Activation::Tanh: return ndiff::tanh(x);
  }
  return x;
}

template <typename Scalar>
ndiff::Var<Scalar> affine(const ndiff::Var<Scalar>& h, const AffineVars<Scalar>& p) {
  return ndiff::matmul(h, p.weight) + p.bias;
}

/// Â·H·W + b, with Â already normalised (see ndiff::gcn_normalize).
template <typename Scalar>
ndiff::Var<Scalar> gcn(const ndiff::Var<Scalar>& a_hat, const ndiff::Var<Scalar>& h, const AffineVars<Scalar>& p) {
  if (h.rows() == 0) throw ShapeError("gcn", "zero-size input");
  return ndiff::matmul(a_hat, ndiff::matmul(h, p.weight)) + p.bias;
}

/// Affine layers with `act` between them; the last layer is linear unless
/// `activate_last`.
template <typename Scalar>
ndiff::Var<Scalar> mlp(ndiff::Var<Scalar> h, std::span<const AffineVars<Scalar>> layers, Activation act,
                       bool activate_last = false) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (h.cols() != layers[i].weight.rows())
      throw ShapeError("mlp", "layer " + std::to_string(i) + " expects " + std::to_string(layers[i].weight.rows()) +
                                  " inputs, got " + std::to_string(h.cols()));
    h = affine(h, layers[i]);
    if (i + 1 < layers.size() || activate_last) h = activate(h, act);
  }
  return h;
}

template <typename Scalar>
ndiff::Var<Scalar> adjacency_power(const ndiff::Var<Scalar>& a, int p) {
  if (p < 1) throw std::invalid_argument("adjacency_power: exponent must be >= 1");
  auto out = a;
  for (int i = 1; i < p; ++i) out = ndiff::matmul(out, a);
  return out;
}

/// Multi-head attention masked by a (possibly weighted) adjacency power.
/// Per head: softmax over {v : ap[u][v] > 0} of q_u·k_v/sqrt(d_h) + log ap[u][v].
template <typename Scalar>
ndiff::Var<Scalar> gmh(const ndiff::Var<Scalar>& h, const ndiff::Var<Scalar>& ap, const GmhVars<Scalar>& p) {
  if (p.query.empty()) throw ShapeError("gmh", "no attention heads");
  if (h.cols() != p.query[0].rows())
    throw ShapeError("gmh", "expected " + std::to_string(p.query[0].rows()) + " input features, got " +
                                std::to_string(h.cols()));
  if (ap.rows() != h.rows() || ap.cols() != h.rows()) throw ShapeError("gmh", "mask shape does not match node count");
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(p.query[0].cols()));
  std::vector<ndiff::Var<Scalar>> heads;
  for (std::size_t k = 0; k < p.query.size(); ++k) {
    auto q = ndiff::matmul(h, p.query[k]);
    auto key = ndiff::matmul(h, p.key[k]);
    auto v = ndiff::matmul(h, p.value[k]);
    auto logits = scale * ndiff::matmul(q, ndiff::transpose(key));
    heads.push_back(ndiff::matmul(ndiff::masked_softmax(logits, ap), v));
  }
  return ndiff::matmul(ndiff::concat_cols(heads), p.output);
}

// ---------------------------------------------------------------------------
// Value-level conveniences

template <typename Scalar>
Mat<Scalar> adjacency_power(const Mat<Scalar>& a, int p) {
  if (p < 1) throw std::invalid_argument("adjacency_power: exponent must be >= 1");
  if (a.rows() != a.cols()) throw ShapeError("adjacency_power", "matrix must be square");
  Mat<Scalar> out = a;
  for (int i = 1; i < p; ++i) out = (out * a).eval();
  return out;
}

template <typename Scalar>
Mat<Scalar> normalized_adjacency(const Mat<Scalar>& a) {
  ndiff::BasicTape<Scalar> t;
  return ndiff::gcn_normalize(t.constant(a)).value();
}

template <typename Scalar>
Mat<Scalar> gcn_forward(const Mat<Scalar>& h, const Mat<Scalar>& a, const GcnLayerParams<Scalar>& p) {
  if (h.rows() == 0 || a.rows() == 0) throw ShapeError("gcn", "zero-size input");
  ndiff::BasicTape<Scalar> t;
  ParamBinder<Scalar> b(t);
  auto vars = bind(b, p);
  return gcn(ndiff::gcn_normalize(t.constant(a)), t.constant(h), vars).value();
}

template <typename Scalar>
Mat<Scalar> mlp_forward(const Mat<Scalar>& h, std::span<const AffineParams<Scalar>> layers, Activation act,
                        bool activate_last = false) {
  ndiff::BasicTape<Scalar> t;
  ParamBinder<Scalar> b(t);
  std::vector<AffineVars<Scalar>> vars;
  for (const auto& l : layers) vars.push_back(bind(b, l));
  return mlp(t.constant(h), std::span<const AffineVars<Scalar>>(vars), act, activate_last).value();
}

template <typename Scalar>
Mat<Scalar> gmh_forward(const Mat<Scalar>& h, const Mat<Scalar>& ap, const GmhParams<Scalar>& p) {
  ndiff::BasicTape<Scalar> t;
  ParamBinder<Scalar> b(t);
  auto vars = bind(b, p);
  return gmh(t.constant(h), t.constant(ap), vars).value();
}

}  // namespace fasd
