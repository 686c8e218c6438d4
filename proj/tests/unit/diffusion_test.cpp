#include "fasd/diffusion.hpp"
#include "fasd/errors.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace fasd {
namespace {

using testing::param_grad_check;
using testing::random_adjacency;
using testing::random_matrix;
using testing::random_positive;

// Closed-form kernel in long double: mean scale exp(-t^2 (bmax-bmin)/4 - t bmin/2),
// variance 1 - mean_scale^2.
std::pair<long double, long double> kernel_oracle(long double t, long double bmin, long double bmax) {
  const long double m = std::exp(-0.25L * t * t * (bmax - bmin) - 0.5L * t * bmin);
  return {m, std::sqrt(1.0L - m * m)};
}

TEST(Kernel, MatchesClosedForm) {
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    Tensor m0 = Tensor::Constant(2, 3, 1.5);
    auto [mean, sigma] = kernel_stats(t, 0.1, 1.0, m0);
    auto [om, os] = kernel_oracle(t, 0.1L, 1.0L);
    EXPECT_NEAR(mean(0, 0) / 1.5, double(om), 1e-9) << "t=" << t;
    EXPECT_NEAR(sigma, double(os), 1e-9) << "t=" << t;
  }
}

TEST(Kernel, ReferenceValues) {
  // Published sigmas are rounded loosely: t=1 gives 0.6504231, not 0.650487.
  auto c1 = kernel_coeffs(1.0, 0.1, 1.0);
  EXPECT_NEAR(c1.mean_scale, 0.759572, 1e-6);
  EXPECT_NEAR(c1.sigma, 0.650487, 1e-4);
  EXPECT_NEAR(c1.sigma, 0.6504231, 1e-7);
  auto c5 = kernel_coeffs(0.5, 0.1, 1.0);
  EXPECT_NEAR(c5.mean_scale, 0.921963, 1e-6);
  EXPECT_NEAR(c5.sigma, 0.387272, 1e-5);
  EXPECT_NEAR(c5.sigma, 0.3872776, 1e-7);
}

TEST(Kernel, IdentityAtTimeZero) {
  Rng rng{1};
  Tensor m0 = random_matrix(3, 4, rng);
  auto [mean, sigma] = kernel_stats(0.0, 0.1, 1.0, m0);
  EXPECT_EQ(mean, m0);
  EXPECT_EQ(sigma, 0.0);
}

TEST(Kernel, Monotone) {
  for (auto [bmin, bmax] : {std::pair{0.1, 1.0}, std::pair{0.2, 1.0}, std::pair{0.01, 0.05}}) {
    double prev_m = 2.0, prev_s = -1.0;
    for (int i = 0; i <= 1000; ++i) {
      const double t = i / 1000.0;
      auto c = kernel_coeffs(t, bmin, bmax);
      EXPECT_LT(c.mean_scale, prev_m);
      EXPECT_GT(c.sigma, prev_s);
      prev_m = c.mean_scale;
      prev_s = c.sigma;
    }
    EXPECT_NEAR(prev_s, std::sqrt(1.0 - std::exp(-(bmax - bmin) / 2.0 - bmin)), 1e-12);
  }
}

TEST(Kernel, SmallTimesStayAccurate) {
  // sigma^2 ~ bmin t for tiny t; a naive 1 - m^2 loses every digit here.
  const double t = 1e-9;
  EXPECT_NEAR(kernel_coeffs(t, 0.1, 1.0).sigma, std::sqrt(0.1 * t), 1e-13);
}

TEST(Kernel, ValidateRejectsBadRanges) {
  EXPECT_THROW((KernelParams{0.0, 1.0}).validate("k"), ConfigError);
  EXPECT_THROW((KernelParams{1.0, 0.5}).validate("k"), ConfigError);
  EXPECT_THROW((KernelParams{0.1, 1.0, 1.0, 0.0}).validate("k"), ConfigError);
  EXPECT_NO_THROW(KernelParams{}.validate("k"));
}

TEST(Gamma, Examples) {
  Tensor noise(1, 1), grad(1, 1);
  noise << 2.0;  // ||noise||^2 = 4
  grad << std::sqrt(2.0);
  EXPECT_NEAR(gamma_coeff(noise, grad, 0.1), 0.2, 1e-15);
  EXPECT_EQ(gamma_coeff(noise, grad, 0.0), 0.0);
  EXPECT_EQ(gamma_coeff(noise, Tensor(Tensor::Zero(1, 1)), 0.1), 0.0);
}

TEST(Gamma, ScalingLaw) {
  // gamma * grad keeps its direction when grad is rescaled; its norm is
  // lambda ||noise||^2 / ||grad||, so doubling grad halves the product.
  Rng rng{2};
  for (int trial = 0; trial < 20; ++trial) {
    Tensor noise = random_matrix(4, 3, rng), grad = random_matrix(4, 3, rng);
    const double lambda = 0.3;
    Tensor base = gamma_coeff(noise, grad, lambda) * grad;
    Tensor doubled = gamma_coeff(noise, Tensor(2.0 * grad), lambda) * (2.0 * grad);
    EXPECT_NEAR(gamma_coeff(noise, Tensor(2.0 * grad), lambda), 0.25 * gamma_coeff(noise, grad, lambda), 1e-15);
    EXPECT_TRUE(doubled.isApprox(0.5 * base, 1e-13));
    EXPECT_NEAR(base.norm(), lambda * noise.squaredNorm() / grad.norm(), 1e-12);
  }
}

Subgraph random_subgraph(Index n, Index d, Rng& rng) {
  Subgraph s;
  for (Index i = 0; i < n; ++i) s.parent_ids.push_back(i);
  s.features = random_matrix(n, d, rng);
  s.adjacency = testing::random_binary_adjacency(n, 0.4, rng);
  std::bernoulli_distribution b(0.5);
  for (Index i = 0; i < n; ++i) {
    s.sensitive.push_back(b(rng) ? 1 : 0);
    s.labels.push_back(b(rng) ? 1 : 0);
    s.labeled.push_back(1);
  }
  return s;
}

DiffusionConfig no_fairness() {
  DiffusionConfig cfg;
  cfg.lambda_x = cfg.lambda_a = 0.0;
  return cfg;
}

TEST(ForwardPerturb, MeanOnlyWithoutNoiseOrFairness) {
  Rng rng{3};
  Subgraph s = random_subgraph(5, 3, rng);
  auto r = perturb_with_grads(s, 0.6, nullptr, no_fairness(), rng);
  EXPECT_EQ(r.gamma_x, 0.0);
  EXPECT_EQ(r.gamma_a, 0.0);
  EXPECT_LT((r.x_t - r.kx.sigma * r.eps_x - r.kx.mean_scale * s.features).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((r.a_t - r.ka.sigma * r.eps_a - r.ka.mean_scale * s.adjacency).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ForwardPerturb, IdentityAtTimeZero) {
  Rng rng{4};
  Subgraph s = random_subgraph(5, 3, rng);
  auto r = perturb_with_grads(s, 0.0, nullptr, no_fairness(), rng);
  EXPECT_EQ(r.x_t, s.features);
  EXPECT_EQ(r.a_t, s.adjacency);
}

TEST(ForwardPerturb, RecombinationMatchesReturnedState) {
  Rng rng{5};
  auto g_sen = init_sensitive_model(3, rng, {{8, 6, 4}, 2, 0.1});
  DiffusionConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    Subgraph s = random_subgraph(6, 3, rng);
    auto r = forward_perturb(s, 0.05 + 0.045 * trial, &g_sen, cfg, rng);
    auto grads = sen_input_grads(g_sen, s.features, s.adjacency, s.sensitive);
    EXPECT_EQ(r.grad_x, grads.gx);
    EXPECT_EQ(r.grad_a, grads.ga);
    const auto kx = kernel_coeffs(r.t, cfg.x), ka = kernel_coeffs(r.t, cfg.a);
    const double gx = cfg.lambda_x * (kx.sigma * r.eps_x).squaredNorm() / grads.gx.squaredNorm();
    const double ga = cfg.lambda_a * (ka.sigma * r.eps_a).squaredNorm() / grads.ga.squaredNorm();
    EXPECT_NEAR(r.gamma_x, gx, 1e-12 * gx);
    EXPECT_NEAR(r.gamma_a, ga, 1e-12 * ga);
    Tensor x = kx.mean_scale * s.features + kx.sigma * r.eps_x - r.gamma_x * r.grad_x;
    Tensor a = ka.mean_scale * s.adjacency + ka.sigma * r.eps_a - r.gamma_a * r.grad_a;
    EXPECT_EQ(r.x_t, x);
    EXPECT_EQ(r.a_t, a);
  }
}

TEST(ForwardPerturb, AdjacencyNoiseSymmetricZeroDiagonal) {
  Rng rng{6};
  Subgraph s = random_subgraph(7, 2, rng);
  auto r = perturb_with_grads(s, 0.5, nullptr, no_fairness(), rng);
  EXPECT_EQ(r.eps_a, Tensor(r.eps_a.transpose()));
  EXPECT_EQ(r.eps_a.diagonal(), Tensor(Tensor::Zero(7, 1)));
  EXPECT_EQ(r.a_t, Tensor(r.a_t.transpose()));
  EXPECT_EQ(r.a_t.diagonal(), Tensor(Tensor::Zero(7, 1)));
}

TEST(ForwardPerturb, Errors) {
  Rng rng{7};
  Subgraph s = random_subgraph(4, 2, rng);
  EXPECT_THROW(perturb_with_grads(s, 1.5, nullptr, no_fairness(), rng), std::invalid_argument);
  EXPECT_THROW(perturb_with_grads(s, 0.5, nullptr, DiffusionConfig{}, rng), std::invalid_argument);
  EXPECT_THROW(forward_perturb(s, 0.5, nullptr, DiffusionConfig{}, rng), std::invalid_argument);
}

const ScoreArch kSmallArch{.hidden = 4, .theta_layers = 2, .phi_layers = 2, .heads = 2, .powers = 2, .mlp_layers = 2};

void zero_params(ScoreModelParams& m) {
  m.visit([](const std::string&, Tensor& t) { t.setZero(); });
}

TEST(ScoreNets, ShapesAndAdjacencyContract) {
  Rng rng{8};
  auto m = init_score_models(3, {}, rng);
  Tensor x = random_matrix(6, 3, rng), a = random_adjacency(6, rng);
  Tensor sx = score_theta_forward(m.theta, x, a);
  Tensor sa = score_phi_forward(m.phi, x, a);
  EXPECT_EQ(sx.rows(), 6);
  EXPECT_EQ(sx.cols(), 3);
  ASSERT_EQ(sa.rows(), 6);
  ASSERT_EQ(sa.cols(), 6);
  EXPECT_EQ(sa, Tensor(sa.transpose()));
  EXPECT_EQ(sa.diagonal(), Tensor(Tensor::Zero(6, 1)));
  EXPECT_TRUE(sx.allFinite() && sa.allFinite());
}

TEST(ScoreNets, FeatureWidthMismatchThrows) {
  Rng rng{9};
  auto m = init_score_models(3, kSmallArch, rng);
  EXPECT_THROW(score_theta_forward(m.theta, random_matrix(4, 2, rng), random_adjacency(4, rng)), ShapeError);
  EXPECT_THROW(score_phi_forward(m.phi, random_matrix(4, 2, rng), random_adjacency(4, rng)), ShapeError);
}

TEST(ScoreNets, ArchitectureValidation) {
  Rng rng{1};
  EXPECT_THROW(init_score_models(3, {.hidden = 6, .heads = 4}, rng), ConfigError);
  EXPECT_THROW(init_score_models(3, {.theta_layers = 0}, rng), ConfigError);
}

TEST(ScoreNets, PermutationEquivariant) {
  Rng rng{10};
  auto m = init_score_models(3, kSmallArch, rng);
  Tensor x = random_matrix(5, 3, rng), a = random_adjacency(5, rng);
  Tensor pi = testing::permutation(5, rng);
  Tensor xp = pi * x, ap = pi * a * pi.transpose();
  EXPECT_LT((score_theta_forward(m.theta, xp, ap) - pi * score_theta_forward(m.theta, x, a)).cwiseAbs().maxCoeff(),
            1e-9);
  EXPECT_LT((score_phi_forward(m.phi, xp, ap) - pi * score_phi_forward(m.phi, x, a) * pi.transpose())
                .cwiseAbs()
                .maxCoeff(),
            1e-9);
}

class ScoreGradCheck : public ::testing::TestWithParam<int> {};

TEST_P(ScoreGradCheck, ThetaParamsAndInputs) {
  Rng rng{std::uint64_t(GetParam()) + 300};
  auto m = init_score_models(3, kSmallArch, rng);
  Tensor x = random_matrix(4, 3, rng), a = random_positive(4, rng), w = random_matrix(4, 3, rng);
  double perr = param_grad_check<ScoreThetaParams>(m.theta, [&](ParamBinder<double>& b, const ScoreThetaParams& p) {
    auto& t = b.tape();
    return ndiff::sum(ndiff::mul(score_theta(b, p, t.constant(x), t.constant(a)), t.constant(w)));
  });
  EXPECT_LT(perr, 1e-4);
  double ierr = testing::grad_check({x, a}, [&](testing::Tape& t, const std::vector<testing::V>& in) {
    ParamBinder<double> b(t);
    return ndiff::sum(ndiff::mul(score_theta(b, m.theta, in[0], in[1]), t.constant(w)));
  });
  EXPECT_LT(ierr, 1e-4);
}

TEST_P(ScoreGradCheck, PhiParamsAndInputs) {
  Rng rng{std::uint64_t(GetParam()) + 400};
  auto m = init_score_models(3, kSmallArch, rng);
  Tensor x = random_matrix(4, 3, rng), a = random_positive(4, rng), w = random_matrix(4, 4, rng);
  double perr = param_grad_check<ScorePhiParams>(m.phi, [&](ParamBinder<double>& b, const ScorePhiParams& p) {
    auto& t = b.tape();
    return ndiff::sum(ndiff::mul(score_phi(b, p, t.constant(x), t.constant(a)), t.constant(w)));
  });
  EXPECT_LT(perr, 1e-4);
  double ierr = testing::grad_check({x, a}, [&](testing::Tape& t, const std::vector<testing::V>& in) {
    ParamBinder<double> b(t);
    return ndiff::sum(ndiff::mul(score_phi(b, m.phi, in[0], in[1]), t.constant(w)));
  });
  EXPECT_LT(ierr, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Seeds, ScoreGradCheck, ::testing::Range(0, 20));

TEST(ScoreLoss, ZeroNetworkLossIsNoiseEnergy) {
  Rng rng{11};
  auto m = init_score_models(3, kSmallArch, rng);
  zero_params(m);
  Subgraph s = random_subgraph(5, 3, rng);
  auto r = perturb_with_grads(s, 0.4, nullptr, no_fairness(), rng);
  auto l = score_losses(m, r, no_fairness());
  EXPECT_NEAR(l.theta, r.eps_x.squaredNorm(), 1e-12);
  EXPECT_NEAR(l.phi, r.eps_a.squaredNorm(), 1e-12);
}

TEST(ScoreLoss, PerfectDenoiserHasZeroLoss) {
  // Replace the noise with the network's own scaled output: the residual vanishes.
  Rng rng{12};
  auto m = init_score_models(3, kSmallArch, rng);
  Subgraph s = random_subgraph(5, 3, rng);
  auto r = perturb_with_grads(s, 0.4, nullptr, no_fairness(), rng);
  r.eps_x = r.kx.sigma * score_theta_forward(m.theta, r.x_t, r.a_t);
  r.eps_a = r.ka.sigma * score_phi_forward(m.phi, r.x_t, r.a_t);
  auto l = score_losses(m, r, no_fairness());
  EXPECT_NEAR(l.theta, 0.0, 1e-20);
  EXPECT_NEAR(l.phi, 0.0, 1e-20);
}

TEST(ScoreLoss, ReducesToDenoisingScoreMatching) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng{seed + 1000};
    auto m = init_score_models(3, kSmallArch, rng);
    Subgraph s = random_subgraph(5, 3, rng);
    std::uniform_real_distribution<double> time(1e-5, 1.0);
    auto r = perturb_with_grads(s, time(rng), nullptr, no_fairness(), rng);
    auto l = score_losses(m, r, no_fairness());
    const double ref_x = (r.kx.sigma * score_theta_forward(m.theta, r.x_t, r.a_t) - r.eps_x).squaredNorm();
    const double ref_a = (r.ka.sigma * score_phi_forward(m.phi, r.x_t, r.a_t) - r.eps_a).squaredNorm();
    EXPECT_NEAR(l.theta, ref_x, 1e-10) << "seed " << seed;
    EXPECT_NEAR(l.phi, ref_a, 1e-10) << "seed " << seed;
  }
}

TEST(ScoreLoss, FairnessResidualMatchesRecomputation) {
  Rng rng{13};
  auto g_sen = init_sensitive_model(3, rng, {{8, 6, 4}, 2, 0.1});
  auto m = init_score_models(3, kSmallArch, rng);
  DiffusionConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    Subgraph s = random_subgraph(5, 3, rng);
    auto r = forward_perturb(s, 0.1 + 0.08 * trial, &g_sen, cfg, rng);
    ASSERT_GT(r.gamma_x, 0.0);
    auto l = score_losses(m, r, cfg);
    Tensor sx = score_theta_forward(m.theta, r.x_t, r.a_t), sa = score_phi_forward(m.phi, r.x_t, r.a_t);
    double ref_x = 0, ref_a = 0;
    for (Index i = 0; i < sx.size(); ++i) {
      const double e = r.kx.sigma * sx.data()[i] - r.eps_x.data()[i] + r.gamma_x / r.kx.sigma * r.grad_x.data()[i];
      ref_x += e * e;
    }
    for (Index i = 0; i < sa.size(); ++i) {
      const double e = r.ka.sigma * sa.data()[i] - r.eps_a.data()[i] + r.gamma_a / r.ka.sigma * r.grad_a.data()[i];
      ref_a += e * e;
    }
    EXPECT_NEAR(l.theta, ref_x, 1e-10 * std::max(1.0, ref_x));
    EXPECT_NEAR(l.phi, ref_a, 1e-10 * std::max(1.0, ref_a));
  }
}

TEST(ScoreLoss, TimeBelowFloorIsError) {
  Rng rng{14};
  auto m = init_score_models(3, kSmallArch, rng);
  Subgraph s = random_subgraph(4, 3, rng);
  auto r = perturb_with_grads(s, 1e-7, nullptr, no_fairness(), rng);
  EXPECT_THROW(score_losses(m, r, no_fairness()), NumericError);
}

std::vector<Subgraph> fixture_set(std::size_t count, std::uint64_t seed, int fanout = 3, double scale = 1.0) {
  SbmBiasConfig sbm;
  sbm.n_nodes = 60;
  sbm.homophily = 0.15;
  sbm.cross_prob = 0.02;
  sbm.seed = seed;
  Graph g = generate_biased_sbm(sbm);
  standardize_columns(g.features);
  g.features *= scale;
  g = split_nodes(g, {}, seed);
  auto set = build_subgraph_set(g, {.depth = 2, .fanout = fanout}, seed);
  set.resize(count);
  return set;
}

TEST(TrainScores, ZeroItersLeavesParams) {
  Rng rng{15};
  auto m = init_score_models(8, kSmallArch, rng);
  auto before = m;
  DiffusionConfig cfg = no_fairness();
  cfg.maxiters = 0;
  EXPECT_TRUE(train_score_models(m, fixture_set(5, 1), nullptr, cfg, 1).empty());
  auto a = param_refs(m), b = param_refs(before);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i], *b[i]);
}

TEST(TrainScores, Errors) {
  Rng rng{16};
  auto m = init_score_models(8, kSmallArch, rng);
  EXPECT_THROW(train_score_models(m, {}, nullptr, no_fairness(), 1), std::invalid_argument);
  EXPECT_THROW(train_score_models(m, fixture_set(3, 1), nullptr, DiffusionConfig{}, 1), std::invalid_argument);
}

TEST(TrainScores, SameSeedBitIdentical) {
  auto set = fixture_set(6, 2);
  Rng init{3};
  auto g_sen = init_sensitive_model(8, init, {{8, 6, 4}, 2, 0.1});
  auto run = [&] {
    Rng r{17};
    auto m = init_score_models(8, kSmallArch, r);
    DiffusionConfig cfg;
    cfg.maxiters = 15;
    train_score_models(m, set, &g_sen, cfg, 9);
    return m;
  };
  auto a = run(), b = run();
  auto ra = param_refs(a), rb = param_refs(b);
  for (std::size_t i = 0; i < ra.size(); ++i) EXPECT_EQ(*ra[i], *rb[i]);
}

double window_mean(const std::vector<ScoreCurvePoint>& c, std::size_t from, std::size_t to, bool theta) {
  double s = 0;
  for (std::size_t i = from; i < to; ++i) s += theta ? c[i].loss_theta : c[i].loss_phi;
  return s / double(to - from);
}

TEST(TrainScores, LossesDecreaseOverTraining) {
  // Low-variance features leave most of the perturbation recoverable, so a
  // working training loop has room to cut the loss.
  auto set = fixture_set(10, 3, 10, 0.1);
  Rng rng{18};
  auto m = init_score_models(8, {}, rng);
  DiffusionConfig cfg = no_fairness();
  cfg.maxiters = 200;
  cfg.lr = 3e-3;
  auto curve = train_score_models(m, set, nullptr, cfg, 4);
  ASSERT_EQ(curve.size(), 200u);
  for (bool theta : {true, false}) {
    const double first = window_mean(curve, 0, 20, theta), last = window_mean(curve, 180, 200, theta);
    EXPECT_LE(last, 0.7 * first) << (theta ? "theta" : "phi") << " " << first << " -> " << last;
  }
}

}  // namespace
}  // namespace fasd
