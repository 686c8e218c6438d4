#pragma once

#include "fasd/ndiff/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace fasd::ndiff {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
};

/// Adam with coupled L2 weight decay, one state slot per parameter tensor.
template <typename Scalar>
class BasicAdam {
 public:
  explicit BasicAdam(AdamOptions opt = {}) : opt_(opt) {}

  void step(std::span<Mat<Scalar>* const> params, std::span<const Mat<Scalar>> grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
        v_.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
      }
    }
    if (m_.size() != params.size()) throw std::invalid_argument("adam: parameter set changed between steps");
    ++t_;
    const Scalar b1 = Scalar(opt_.beta1), b2 = Scalar(opt_.beta2);
    const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Mat<Scalar>& p = *params[k];
      if (grads[k].rows() != p.rows() || grads[k].cols() != p.cols())
        throw ShapeError("adam", "gradient shape " + shape_str(grads[k]) + " vs parameter " + shape_str(p));
      Mat<Scalar> g = grads[k];
      if (opt_.weight_decay != 0.0) g += Scalar(opt_.weight_decay) * p;
      m_[k] = b1 * m_[k] + (Scalar(1) - b1) * g;
      v_[k] = b2 * v_[k] + (Scalar(1) - b2) * g.cwiseProduct(g);
      p.array() -= Scalar(opt_.lr) * (m_[k].array() / c1) /
                   ((v_[k].array() / c2).sqrt() + Scalar(opt_.eps));
    }
  }

  long steps() const { return t_; }

 private:
  AdamOptions opt_;
  std::vector<Mat<Scalar>> m_, v_;
  long t_ = 0;
};

using Adam = BasicAdam<double>;

}  // namespace fasd::ndiff
