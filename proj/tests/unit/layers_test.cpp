#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace fasd {
namespace {

using testing::grad_check;
using testing::permutation;
using testing::random_adjacency;
using testing::random_matrix;
using testing::random_positive;
using testing::Tape;
using testing::V;

TEST(Gcn, SingleNodeIsAffine) {
  Rng rng{3};
  Tensor h = random_matrix(1, 3, rng);
  auto p = init_affine<double>(3, 2, rng);
  p.bias << 0.5, -0.25;
  Tensor out = gcn_forward(h, Tensor(Tensor::Zero(1, 1)), p);
  EXPECT_TRUE(out.isApprox(h * p.weight + p.bias, 1e-14));
}

TEST(Gcn, OneEdgeAveragesEndpoints) {
  Tensor h(2, 3);
  h << 1, 2, 3, -1, 0, 5;
  Tensor a(2, 2);
  a << 0, 1, 1, 0;
  GcnLayerParams<double> p{Tensor::Identity(3, 3), Tensor::Zero(1, 3)};
  Tensor out = gcn_forward(h, a, p);
  const Tensor mid = 0.5 * (h.row(0) + h.row(1));
  for (Index i = 0; i < 2; ++i) EXPECT_NEAR((out.row(i) - mid).norm(), 0.0, 1e-14);
}

TEST(Gcn, ZeroSizeInputThrows) {
  GcnLayerParams<double> p{Tensor::Identity(2, 2), Tensor::Zero(1, 2)};
  EXPECT_THROW(gcn_forward(Tensor(0, 2), Tensor(0, 0), p), ShapeError);
}

TEST(Gcn, NormalizedAdjacencyMatchesDirectFormula) {
  Rng rng{5};
  Tensor a = random_adjacency(5, rng);
  a(0, 1) = a(1, 0) = -0.3;  // negatives are clamped
  Tensor at = a.cwiseMax(0.0) + Tensor::Identity(5, 5);
  Tensor expect(5, 5);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) expect(i, j) = at(i, j) / std::sqrt(at.row(i).sum() * at.row(j).sum());
  EXPECT_TRUE(normalized_adjacency(a).isApprox(expect, 1e-14));
}

TEST(Mlp, IdentityLayer) {
  Rng rng{1};
  Tensor h = random_matrix(4, 3, rng);
  std::vector<LinearParams<double>> layers{{Tensor::Identity(3, 3), Tensor::Zero(1, 3)}};
  EXPECT_TRUE(mlp_forward<double>(h, layers, Activation::Relu).isApprox(h));
}

TEST(Mlp, ReluOnLastLayer) {
  Tensor h(1, 2);
  h << -1, 2;
  std::vector<LinearParams<double>> layers{{Tensor::Identity(2, 2), Tensor::Zero(1, 2)}};
  Tensor out = mlp_forward<double>(h, layers, Activation::Relu, true);
  EXPECT_EQ(out(0, 0), 0.0);
  EXPECT_EQ(out(0, 1), 2.0);
}

TEST(Mlp, DimensionMismatchThrows) {
  Rng rng{1};
  std::vector<LinearParams<double>> layers{init_affine<double>(3, 4, rng), init_affine<double>(5, 2, rng)};
  EXPECT_THROW(mlp_forward<double>(random_matrix(2, 3, rng), layers, Activation::Relu), ShapeError);
}

TEST(AdjacencyPower, Cases) {
  Tensor p3(3, 3);
  p3 << 0, 1, 0, 1, 0, 1, 0, 1, 0;
  EXPECT_EQ(adjacency_power(p3, 1), p3);
  Tensor sq(3, 3);
  sq << 1, 0, 1, 0, 2, 0, 1, 0, 1;
  EXPECT_EQ(adjacency_power(p3, 2), sq);
  EXPECT_EQ(adjacency_power(Tensor(Tensor::Zero(4, 4)), 3), Tensor(Tensor::Zero(4, 4)));
  EXPECT_THROW(adjacency_power(p3, 0), std::invalid_argument);
}

TEST(AdjacencyPower, MatchesBruteForceMultiply) {
  Rng rng{9};
  Tensor a = random_adjacency(6, rng);
  Tensor brute = Tensor::Identity(6, 6);
  for (int k = 0; k < 4; ++k) {
    Tensor next = Tensor::Zero(6, 6);
    for (Index i = 0; i < 6; ++i)
      for (Index j = 0; j < 6; ++j)
        for (Index l = 0; l < 6; ++l) next(i, j) += brute(i, l) * a(l, j);
    brute = next;
  }
  EXPECT_TRUE(adjacency_power(a, 4).isApprox(brute, 1e-13));
}

TEST(Gmh, HeadCountAndDivisibility) {
  Rng rng{1};
  EXPECT_THROW(init_gmh<double>(4, 6, 0, rng), std::invalid_argument);
  EXPECT_THROW(init_gmh<double>(4, 6, 4, rng), std::invalid_argument);
  EXPECT_EQ(init_gmh<double>(4, 8, 4, rng).head_dim(), 2);
}

TEST(Gmh, IdenticalRowsUniformAttentionGiveIdenticalOutputs) {
  Rng rng{2};
  auto p = init_gmh<double>(3, 4, 1, rng);
  Tensor h = Tensor::Ones(5, 1) * random_matrix(1, 3, rng);
  Tensor out = gmh_forward(h, Tensor(Tensor::Ones(5, 5)), p);
  for (Index i = 1; i < 5; ++i) EXPECT_NEAR((out.row(i) - out.row(0)).norm(), 0.0, 1e-13);
}

TEST(Gmh, SingleNodeIsProjectedValue) {
  Rng rng{4};
  auto p = init_gmh<double>(3, 4, 2, rng);
  Tensor h = random_matrix(1, 3, rng);
  Tensor expect(1, 4);
  Tensor concat(1, 4);
  concat << h * p.value[0], h * p.value[1];
  expect = concat * p.output;
  EXPECT_TRUE(gmh_forward(h, Tensor(Tensor::Zero(1, 1)), p).isApprox(expect, 1e-13));
}

// Straight-line evaluation of masked multi-head attention.
Tensor gmh_oracle(const Tensor& h, const Tensor& ap, const GmhParams<double>& p) {
  const Index n = h.rows();
  const Index dh = p.head_dim();
  Tensor concat(n, dh * Index(p.heads()));
  for (std::size_t k = 0; k < p.heads(); ++k) {
    Tensor q = h * p.query[k], key = h * p.key[k], v = h * p.value[k];
    for (Index u = 0; u < n; ++u) {
      std::vector<double> w(std::size_t(n), 0.0);
      double z = 0.0;
      bool any = false;
      for (Index j = 0; j < n; ++j) any = any || ap(u, j) > 0;
      for (Index j = 0; j < n; ++j) {
        if (any ? ap(u, j) > 0 : j == u) {
          const double bias = any ? std::log(ap(u, j)) : 0.0;
          w[std::size_t(j)] = std::exp(q.row(u).dot(key.row(j)) / std::sqrt(double(dh)) + bias);
          z += w[std::size_t(j)];
        }
      }
      for (Index c = 0; c < dh; ++c) {
        double acc = 0.0;
        for (Index j = 0; j < n; ++j) acc += w[std::size_t(j)] / z * v(j, c);
        concat(u, Index(k) * dh + c) = acc;
      }
    }
  }
  return concat * p.output;
}

TEST(Gmh, MatchesDenseOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng{seed};
    auto p = init_gmh<double>(3, 6, 3, rng);
    Tensor h = random_matrix(4, 3, rng);
    Tensor ap = adjacency_power(testing::random_binary_adjacency(4, 0.5, rng), 2);
    EXPECT_TRUE(gmh_forward(h, ap, p).isApprox(gmh_oracle(h, ap, p), 1e-12)) << "seed " << seed;
  }
}

class Equivariance : public ::testing::TestWithParam<int> {};

TEST_P(Equivariance, LayersCommuteWithNodePermutation) {
  Rng rng{std::uint64_t(GetParam())};
  const Index n = 5;
  Tensor h = random_matrix(n, 3, rng);
  Tensor a = random_adjacency(n, rng);
  Tensor pi = permutation(n, rng);
  Tensor hp = pi * h, ap = pi * a * pi.transpose();

  auto g = init_affine<double>(3, 4, rng);
  EXPECT_LT((gcn_forward(hp, ap, g) - pi * gcn_forward(h, a, g)).cwiseAbs().maxCoeff(), 1e-9);

  std::vector<LinearParams<double>> layers{init_affine<double>(3, 4, rng), init_affine<double>(4, 2, rng)};
  EXPECT_LT((mlp_forward<double>(hp, layers, Activation::Elu) - pi * mlp_forward<double>(h, layers, Activation::Elu))
                .cwiseAbs()
                .maxCoeff(),
            1e-9);

  EXPECT_LT((adjacency_power(ap, 3) - pi * adjacency_power(a, 3) * pi.transpose()).cwiseAbs().maxCoeff(), 1e-9);

  auto m = init_gmh<double>(3, 4, 2, rng);
  Tensor a2 = adjacency_power(a, 2);
  Tensor a2p = pi * a2 * pi.transpose();
  EXPECT_LT((gmh_forward(hp, a2p, m) - pi * gmh_forward(h, a2, m)).cwiseAbs().maxCoeff(), 1e-9);
}

INSTANTIATE_TEST_SUITE_P(Seeds, Equivariance, ::testing::Range(0, 10));

class LayerGradients : public ::testing::TestWithParam<int> {};

TEST_P(LayerGradients, GcnInputsAndParams) {
  Rng rng{std::uint64_t(GetParam())};
  Tensor h = random_matrix(4, 3, rng);
  Tensor a = random_positive(4, rng);
  auto p = init_affine<double>(3, 2, rng);
  Tensor w = random_matrix(4, 2, rng);
  auto loss = [&](Tape& t, const std::vector<V>& in) {
    AffineVars<double> vars{in[2], in[3]};
    auto out = ndiff::tanh(gcn(ndiff::gcn_normalize(in[1]), in[0], vars));
    return ndiff::sum(ndiff::mul(out, t.constant(w)));
  };
  EXPECT_LT(grad_check({h, a, p.weight, p.bias}, loss), 1e-4);
}

TEST_P(LayerGradients, GmhInputsAndParams) {
  Rng rng{std::uint64_t(GetParam()) + 100};
  Tensor h = random_matrix(4, 3, rng);
  Tensor ap = random_positive(4, rng);
  auto p = init_gmh<double>(3, 4, 2, rng);
  Tensor w = random_matrix(4, 4, rng);
  std::vector<Tensor> inputs{h, ap};
  for (std::size_t k = 0; k < 2; ++k) {
    inputs.push_back(p.query[k]);
    inputs.push_back(p.key[k]);
    inputs.push_back(p.value[k]);
  }
  inputs.push_back(p.output);
  auto loss = [&](Tape& t, const std::vector<V>& in) {
    GmhVars<double> vars;
    for (std::size_t k = 0; k < 2; ++k) {
      vars.query.push_back(in[2 + 3 * k]);
      vars.key.push_back(in[3 + 3 * k]);
      vars.value.push_back(in[4 + 3 * k]);
    }
    vars.output = in[8];
    return ndiff::sum(ndiff::mul(gmh(in[0], in[1], vars), t.constant(w)));
  };
  EXPECT_LT(grad_check(inputs, loss), 1e-4);
}

TEST_P(LayerGradients, AdjacencyPowerAndMlp) {
  Rng rng{std::uint64_t(GetParam()) + 200};
  Tensor a = random_matrix(4, 4, rng);
  auto l1 = init_affine<double>(4, 5, rng), l2 = init_affine<double>(5, 3, rng);
  auto loss = [&](Tape&, const std::vector<V>& in) {
    std::vector<AffineVars<double>> layers{{in[1], in[2]}, {in[3], in[4]}};
    auto out = mlp(adjacency_power(in[0], 3), std::span<const AffineVars<double>>(layers), Activation::Tanh);
    return ndiff::sum_squares(out);
  };
  EXPECT_LT(grad_check({a, l1.weight, l1.bias, l2.weight, l2.bias}, loss), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Seeds, LayerGradients, ::testing::Range(0, 20));

}  // namespace
}  // namespace fasd
