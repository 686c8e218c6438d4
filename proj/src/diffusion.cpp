#include "fasd/diffusion.hpp"

#include "fasd/errors.hpp"
#include "fasd/ndiff/optim.hpp"

#include <random>

namespace fasd {

using ndiff::Var;

void KernelParams::validate(const std::string& what) const {
  if (!(beta_min > 0.0 && beta_min < beta_max))
    throw ConfigError(what + ": need 0 < beta_min < beta_max");
  if (!(horizon > 0.0)) throw ConfigError(what + ": horizon must be positive");
  if (!(t_floor > 0.0 && t_floor < horizon)) throw ConfigError(what + ": t_floor must lie in (0, horizon)");
}

void DiffusionConfig::validate() const {
  x.validate("diffusion.x");
  a.validate("diffusion.a");
  if (x.horizon != a.horizon || x.t_floor != a.t_floor)
    throw ConfigError("diffusion: both channels must share horizon and t_floor");
  if (!(lambda_x >= 0.0 && lambda_a >= 0.0)) throw ConfigError("diffusion: lambda must be >= 0");
  if (maxiters < 0) throw ConfigError("diffusion: maxiters must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("diffusion: lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("diffusion: weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("diffusion: batch_size must be >= 1");
}

void ScoreArch::validate() const {
  if (hidden < 1 || theta_layers < 1 || phi_layers < 1 || powers < 1 || mlp_layers < 1)
    throw ConfigError("score architecture: sizes must be >= 1");
  if (heads < 1 || hidden % Index(heads) != 0) throw ConfigError("score architecture: hidden must divide across heads");
}

PerturbResult perturb_with_grads(const Subgraph& sub, double t, const SenGrads* grads, const DiffusionConfig& cfg,
                                 Rng& rng) {
  if (!(t >= 0.0 && t <= cfg.x.horizon)) throw std::invalid_argument("forward_perturb: t outside [0, T]");
  const Index n = sub.size();
  const Index d = sub.features.cols();
  PerturbResult r;
  r.t = t;
  r.kx = kernel_coeffs(t, cfg.x);
  r.ka = kernel_coeffs(t, cfg.a);
  r.eps_x = gaussian(n, d, rng);
  r.eps_a = symmetric_gaussian(n, rng);
  if (cfg.fairness()) {
    if (grads == nullptr) throw std::invalid_argument("forward_perturb: fairness term needs adversary gradients");
    r.grad_x = grads->gx;
    r.grad_a = grads->ga;
  } else {
    r.grad_x = Tensor::Zero(n, d);
    r.grad_a = Tensor::Zero(n, n);
  }
  r.gamma_x = gamma_coeff(r.kx.sigma * r.eps_x, r.grad_x, cfg.lambda_x);
  r.gamma_a = gamma_coeff(r.ka.sigma * r.eps_a, r.grad_a, cfg.lambda_a);
  r.x_t = r.kx.mean_scale * sub.features + r.kx.sigma * r.eps_x - r.gamma_x * r.grad_x;
  r.a_t = r.ka.mean_scale * sub.adjacency + r.ka.sigma * r.eps_a - r.gamma_a * r.grad_a;
  return r;
}

PerturbResult forward_perturb(const Subgraph& sub, double t, const SensitiveModelParams* g_sen,
                              const DiffusionConfig& cfg, Rng& rng) {
  if (!cfg.fairness()) return perturb_with_grads(sub, t, nullptr, cfg, rng);
  if (g_sen == nullptr) throw std::invalid_argument("forward_perturb: fairness term needs an adversary");
  const SenGrads g = sen_input_grads(*g_sen, sub.features, sub.adjacency, sub.sensitive);
  return perturb_with_grads(sub, t, &g, cfg, rng);
}

// ---------------------------------------------------------------------------

ScoreModelParams init_score_models(Index n_features, const ScoreArch& arch, Rng& rng) {
  arch.validate();
  const Index h = arch.hidden;
  ScoreModelParams m;
  Index in = n_features;
  for (int i = 0; i < arch.theta_layers; ++i) {
    m.theta.gcn.push_back(init_affine<double>(in, h, rng));
    in = h;
  }
  in = n_features + Index(arch.theta_layers) * h;
  for (int i = 0; i < arch.mlp_layers; ++i) {
    const Index out = i + 1 == arch.mlp_layers ? n_features : h;
    m.theta.mlp.push_back(init_affine<double>(in, out, rng));
    in = out;
  }

  in = n_features;
  for (int i = 0; i < arch.phi_layers; ++i) {
    m.phi.gcn.push_back(init_affine<double>(in, h, rng));
    in = h;
  }
  for (int j = 0; j <= arch.phi_layers; ++j)
    m.phi.gmh.push_back(init_gmh<double>(j == 0 ? n_features : h, h, arch.heads, rng));
  m.phi.powers = arch.powers;
  in = Index(arch.phi_layers + 2) * arch.powers;
  for (int i = 0; i < arch.mlp_layers; ++i) {
    const Index out = i + 1 == arch.mlp_layers ? 1 : h;
    m.phi.mlp.push_back(init_affine<double>(in, out, rng));
    in = out;
  }
  return m;
}

std::vector<Tensor*> param_refs(ScoreModelParams& p) {
  std::vector<Tensor*> out;
  p.visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

Var<double> score_theta(ParamBinder<double>& b, const ScoreThetaParams& p, Var<double> x, Var<double> a) {
  if (p.gcn.empty() || x.cols() != p.gcn[0].in_dim()) throw ShapeError("score_theta", "feature width mismatch");
  std::vector<AffineVars<double>> g, m;
  for (const auto& l : p.gcn) g.push_back(bind(b, l));
  for (const auto& l : p.mlp) m.push_back(bind(b, l));
  auto a_hat = ndiff::gcn_normalize(a);
  std::vector<Var<double>> depths{x};
  auto h = x;
  for (const auto& l : g) {
    h = ndiff::tanh(gcn(a_hat, h, l));
    depths.push_back(h);
  }
  return mlp(ndiff::concat_cols(depths), std::span<const AffineVars<double>>(m), Activation::Relu);
}

Var<double> score_phi(ParamBinder<double>& b, const ScorePhiParams& p, Var<double> x, Var<double> a) {
  if (p.gcn.empty() || x.cols() != p.gcn[0].in_dim()) throw ShapeError("score_phi", "feature width mismatch");
  if (p.gmh.size() != p.gcn.size() + 1) throw ShapeError("score_phi", "need one attention module per depth");
  auto& tape = b.tape();
  const Index n = x.rows();
  std::vector<AffineVars<double>> g, m;
  std::vector<GmhVars<double>> att;
  for (const auto& l : p.gcn) g.push_back(bind(b, l));
  for (const auto& l : p.gmh) att.push_back(bind(b, l));
  for (const auto& l : p.mlp) m.push_back(bind(b, l));

  auto a_hat = ndiff::gcn_normalize(a);
  std::vector<Var<double>> depths{x};
  auto h = x;
  for (const auto& l : g) {
    h = ndiff::elu(gcn(a_hat, h, l));
    depths.push_back(h);
  }
  std::vector<Var<double>> powers;
  for (int k = 1; k <= p.powers; ++k) powers.push_back(k == 1 ? a : ndiff::matmul(powers.back(), a));

  std::vector<Var<double>> channels;
  for (std::size_t j = 0; j < depths.size(); ++j) {
    for (const auto& ap : powers) {
      auto o = gmh(depths[j], ap, att[j]);
      const double width = double(o.cols());
      auto pair = (1.0 / width) * ndiff::matmul(o, ndiff::transpose(o));
      channels.push_back(ndiff::reshape(pair, n * n, 1));
    }
  }
  for (const auto& ap : powers) channels.push_back(ndiff::reshape(ap, n * n, 1));

  auto s = mlp(ndiff::concat_cols(channels), std::span<const AffineVars<double>>(m), Activation::Elu);
  s = ndiff::reshape(s, n, n);
  s = 0.5 * (s + ndiff::transpose(s));
  Tensor off = Tensor::Ones(n, n);
  off.diagonal().setZero();
  return ndiff::mul(s, tape.constant(std::move(off)));
}

Tensor score_theta_forward(const ScoreThetaParams& p, const Tensor& x, const Tensor& a) {
  ndiff::Tape t;
  ParamBinder<double> b(t);
  return score_theta(b, p, t.constant(x), t.constant(a)).value();
}

Tensor score_phi_forward(const ScorePhiParams& p, const Tensor& x, const Tensor& a) {
  ndiff::Tape t;
  ParamBinder<double> b(t);
  return score_phi(b, p, t.constant(x), t.constant(a)).value();
}

namespace {

void check_time(const PerturbResult& pr, const DiffusionConfig& cfg) {
  if (!(pr.t >= cfg.x.t_floor)) throw NumericError("score_losses: t below t_floor");
}

Tensor target(const Tensor& eps, const Tensor& grad, double gamma, double sigma) {
  if (gamma == 0.0) return eps;
  return eps - (gamma / sigma) * grad;
}

}  // namespace

ScoreLossVars score_loss_vars(ParamBinder<double>& b, const ScoreModelParams& models, const PerturbResult& pr,
                              const DiffusionConfig& cfg) {
  check_time(pr, cfg);
  auto& t = b.tape();
  auto x = t.constant(pr.x_t);
  auto a = t.constant(pr.a_t);
  auto st = score_theta(b, models.theta, x, a);
  auto sp = score_phi(b, models.phi, x, a);
  auto rt = pr.kx.sigma * st - t.constant(target(pr.eps_x, pr.grad_x, pr.gamma_x, pr.kx.sigma));
  auto rp = pr.ka.sigma * sp - t.constant(target(pr.eps_a, pr.grad_a, pr.gamma_a, pr.ka.sigma));
  return {ndiff::sum_squares(rt), ndiff::sum_squares(rp)};
}

ScoreLosses score_losses(const ScoreModelParams& models, const PerturbResult& pr, const DiffusionConfig& cfg) {
  ndiff::Tape t;
  ParamBinder<double> b(t);
  auto v = score_loss_vars(b, models, pr, cfg);
  return {v.theta.value()(0, 0), v.phi.value()(0, 0)};
}

std::vector<ScoreCurvePoint> train_score_models(ScoreModelParams& models, const std::vector<Subgraph>& set,
                                                const SensitiveModelParams* g_sen, const DiffusionConfig& cfg,
                                                std::uint64_t seed) {
  cfg.validate();
  if (set.empty()) throw std::invalid_argument("train_score_models: empty subgraph set");
  if (cfg.fairness() && g_sen == nullptr) throw std::invalid_argument("train_score_models: fairness needs g_sen");
  Rng rng = substream(seed, "scores");
  std::uniform_real_distribution<double> time(cfg.x.t_floor, cfg.x.horizon);
  std::uniform_int_distribution<std::size_t> pick(0, set.size() - 1);
  ndiff::Adam adam({.lr = cfg.lr, .weight_decay = cfg.weight_decay});
  auto refs = param_refs(models);
  // adversary gradients depend only on the clean subgraph
  std::vector<std::optional<SenGrads>> cache(set.size());

  std::vector<ScoreCurvePoint> curve;
  std::vector<Tensor> acc(refs.size());
  for (int it = 0; it < cfg.maxiters; ++it) {
    for (std::size_t k = 0; k < refs.size(); ++k) acc[k] = Tensor::Zero(refs[k]->rows(), refs[k]->cols());
    ScoreCurvePoint pt{it, 0.0, 0.0};
    for (int s = 0; s < cfg.batch_size; ++s) {
      const double t = time(rng);
      const std::size_t i = pick(rng);
      const SenGrads* grads = nullptr;
      if (cfg.fairness()) {
        if (!cache[i]) cache[i] = sen_input_grads(*g_sen, set[i].features, set[i].adjacency, set[i].sensitive);
        grads = &*cache[i];
      }
      const PerturbResult pr = perturb_with_grads(set[i], t, grads, cfg, rng);
      ndiff::Tape tape;
      ParamBinder<double> b(tape);
      auto l = score_loss_vars(b, models, pr, cfg);
      auto total = l.theta + l.phi;
      auto g = tape.backward(total, std::span<const Var<double>>(b.leaves()));
      for (std::size_t k = 0; k < refs.size(); ++k) acc[k] += g[b.leaves()[k]];
      pt.loss_theta += l.theta.value()(0, 0);
      pt.loss_phi += l.phi.value()(0, 0);
    }
    const double inv = 1.0 / double(cfg.batch_size);
    for (auto& g : acc) g *= inv;
    for (const auto& g : acc)
      if (!all_finite(g)) throw NumericError("train_score_models: non-finite gradient at iteration " + std::to_string(it));
    adam.step(std::span<Tensor* const>(refs), std::span<const Tensor>(acc));
    pt.loss_theta *= inv;
    pt.loss_phi *= inv;
    curve.push_back(pt);
  }
  return curve;
}

}  // namespace fasd
