#pragma once

// Variance-preserving perturbation kernels, the fairness-aware forward
// perturbation and the two score networks (node features / adjacency) with
// their joint training loop.

#include "fasd/layers.hpp"
#include "fasd/sensitive_model.hpp"
#include "fasd/subgraph.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fasd {

struct KernelParams {
  double beta_min = 0.1;
  double beta_max = 1.0;
  double horizon = 1.0;
  double t_floor = 1e-5;

  void validate(const std::string& what) const;
};

template <typename Scalar>
struct KernelCoeffs {
  Scalar mean_scale;
  Scalar sigma;
};

/// Log of the mean scale: -t^2 (bmax - bmin)/4 - t bmin/2.
template <typename Scalar>
Scalar kernel_log_mean(Scalar t, Scalar beta_min, Scalar beta_max) {
  return -t * t * (beta_max - beta_min) / Scalar(4) - t * beta_min / Scalar(2);
}

template <typename Scalar>
KernelCoeffs<Scalar> kernel_coeffs(Scalar t, Scalar beta_min, Scalar beta_max) {
  using std::exp, std::expm1, std::sqrt;
  const Scalar lm = kernel_log_mean(t, beta_min, beta_max);
  return {exp(lm), sqrt(-expm1(Scalar(2) * lm))};
}

template <typename Scalar>
KernelCoeffs<Scalar> kernel_coeffs(Scalar t, const KernelParams& k) {
  return kernel_coeffs(t, Scalar(k.beta_min), Scalar(k.beta_max));
}

/// Mean and standard deviation of the perturbation kernel started at m0.
template <typename Derived>
std::pair<Mat<typename Derived::Scalar>, typename Derived::Scalar> kernel_stats(
    typename Derived::Scalar t, typename Derived::Scalar beta_min, typename Derived::Scalar beta_max,
    const Eigen::MatrixBase<Derived>& m0) {
  const auto c = kernel_coeffs(t, beta_min, beta_max);
  return {Mat<typename Derived::Scalar>(c.mean_scale * m0), c.sigma};
}

/// lambda * ||noise||^2 / ||grad||^2, zero when the gradient vanishes.
template <typename DN, typename DG>
typename DN::Scalar gamma_coeff(const Eigen::MatrixBase<DN>& noise, const Eigen::MatrixBase<DG>& grad,
                                typename DN::Scalar lambda) {
  using S = typename DN::Scalar;
  const S g2 = grad.squaredNorm();
  if (g2 < S(1e-12) || lambda == S(0)) return S(0);
  return lambda * noise.squaredNorm() / g2;
}

struct DiffusionConfig {
  KernelParams x, a;
  double lambda_x = 0.1;
  double lambda_a = 0.1;
  int maxiters = 1000;
  double lr = 1e-2;
  double weight_decay = 1e-4;
  int batch_size = 1;

  void validate() const;
  bool fairness() const { return lambda_x > 0.0 || lambda_a > 0.0; }
};

struct PerturbResult {
  double t = 0.0;
  Tensor x_t, a_t;
  Tensor eps_x, eps_a;    // unit noise; eps_a symmetric with zero diagonal
  Tensor grad_x, grad_a;  // adversary input gradients (zero without fairness)
  double gamma_x = 0.0, gamma_a = 0.0;
  KernelCoeffs<double> kx{1.0, 0.0}, ka{1.0, 0.0};
};

/// X_t = mu_t X0 + sigma_t eps_X - gamma_X grad_X, and likewise for A.
/// `grads` may be null when both lambdas are zero.
PerturbResult perturb_with_grads(const Subgraph& sub, double t, const SenGrads* grads, const DiffusionConfig& cfg,
                                 Rng& rng);

/// As above, computing the adversary gradients on the clean subgraph.
PerturbResult forward_perturb(const Subgraph& sub, double t, const SensitiveModelParams* g_sen,
                              const DiffusionConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Score networks

struct ScoreArch {
  Index hidden = 32;
  int theta_layers = 3;  // GCN layers of the feature network (tanh)
  int phi_layers = 5;    // GCN layers of the adjacency network (elu)
  std::size_t heads = 4;
  int powers = 2;        // adjacency powers seen by attention
  int mlp_layers = 3;

  void validate() const;
};

struct ScoreThetaParams {
  std::vector<GcnLayerParams<double>> gcn;
  std::vector<LinearParams<double>> mlp;

  template <typename F>
  void visit(F&& f) {
    for (std::size_t i = 0; i < gcn.size(); ++i) fasd::visit(gcn[i], "theta.gcn" + std::to_string(i), f);
    for (std::size_t i = 0; i < mlp.size(); ++i) fasd::visit(mlp[i], "theta.mlp" + std::to_string(i), f);
  }
};

struct ScorePhiParams {
  std::vector<GcnLayerParams<double>> gcn;
  std::vector<GmhParams<double>> gmh;  // one per GCN depth, input included
  std::vector<LinearParams<double>> mlp;
  int powers = 2;

  template <typename F>
  void visit(F&& f) {
    for (std::size_t i = 0; i < gcn.size(); ++i) fasd::visit(gcn[i], "phi.gcn" + std::to_string(i), f);
    for (std::size_t i = 0; i < gmh.size(); ++i) fasd::visit(gmh[i], "phi.gmh" + std::to_string(i), f);
    for (std::size_t i = 0; i < mlp.size(); ++i) fasd::visit(mlp[i], "phi.mlp" + std::to_string(i), f);
  }
};

struct ScoreModelParams {
  ScoreThetaParams theta;
  ScorePhiParams phi;

  template <typename F>
  void visit(F&& f) {
    theta.visit(f);
    phi.visit(f);
  }
};

ScoreModelParams init_score_models(Index n_features, const ScoreArch& arch, Rng& rng);

std::vector<Tensor*> param_refs(ScoreModelParams& p);

/// Feature network: tanh GCN stack, concatenation of every depth (input
/// included), relu MLP back to the feature width. Output n x D.
ndiff::Var<double> score_theta(ParamBinder<double>& b, const ScoreThetaParams& p, ndiff::Var<double> x,
                               ndiff::Var<double> a);

/// Adjacency network: elu GCN stack; at every depth and adjacency power,
/// attention outputs O give a pairwise channel O O^T / width; these and the
/// raw powers feed a per-entry elu MLP. Output n x n, symmetric, zero diagonal.
ndiff::Var<double> score_phi(ParamBinder<double>& b, const ScorePhiParams& p, ndiff::Var<double> x,
                             ndiff::Var<double> a);

Tensor score_theta_forward(const ScoreThetaParams& p, const Tensor& x, const Tensor& a);
Tensor score_phi_forward(const ScorePhiParams& p, const Tensor& x, const Tensor& a);

struct ScoreLosses {
  double theta = 0.0;
  double phi = 0.0;
};

/// ||sigma_t s(G_t) - eps + (gamma / sigma_t) grad||^2 for both channels.
ScoreLosses score_losses(const ScoreModelParams& models, const PerturbResult& pr, const DiffusionConfig& cfg);

struct ScoreLossVars {
  ndiff::Var<double> theta, phi;
};

ScoreLossVars score_loss_vars(ParamBinder<double>& b, const ScoreModelParams& models, const PerturbResult& pr,
                              const DiffusionConfig& cfg);

struct ScoreCurvePoint {
  int iter = 0;
  double loss_theta = 0.0;
  double loss_phi = 0.0;
};

/// Per iteration: t ~ U[t_floor, T], a uniformly drawn subgraph (batch_size
/// of them), fairness-aware perturbation, one Adam step on both networks.
/// `g_sen` may be null when cfg has no fairness term.
std::vector<ScoreCurvePoint> train_score_models(ScoreModelParams& models, const std::vector<Subgraph>& set,
                                                const SensitiveModelParams* g_sen, const DiffusionConfig& cfg,
                                                std::uint64_t seed);

}  // namespace fasd
