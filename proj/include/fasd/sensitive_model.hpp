#pragma once

// Adversary predicting the sensitive attribute from a subgraph. Its input
// gradients are the fairness perturbation injected during forward diffusion.

#include "fasd/gcn_classifier.hpp"

namespace fasd {

using SensitiveModelParams = GcnClassifierParams;

inline GcnClassifierArch sensitive_arch() { return {{64, 32, 16}, 2, 0.1}; }

inline TrainOptions sensitive_train_defaults() { return {.epochs = 500, .lr = 1e-4, .weight_decay = 0.0, .batch_size = 1}; }

SensitiveModelParams init_sensitive_model(Index in_dim, Rng& rng, const GcnClassifierArch& arch = sensitive_arch());

/// n x 2 probabilities of S = 0 / 1.
Tensor g_sen_forward(const SensitiveModelParams& p, const Tensor& x, const Tensor& a, bool train = false,
                     Rng* rng = nullptr);

/// Cross-entropy against the subgraph's sensitive attribute over all of its
/// nodes. Returns per-epoch mean loss.
std::vector<double> train_g_sen(SensitiveModelParams& p, const std::vector<Subgraph>& set, const TrainOptions& opt,
                                Rng& rng);

/// Summed cross-entropy over all nodes, evaluation mode.
double sen_loss(const SensitiveModelParams& p, const Tensor& x, const Tensor& a, const std::vector<std::uint8_t>& s);

struct SenGrads {
  Tensor gx;  // n x D
  Tensor ga;  // n x n, symmetric, zero diagonal
  double loss = 0.0;
};

/// Gradients of the summed cross-entropy w.r.t. X and A in evaluation mode.
SenGrads sen_input_grads(const SensitiveModelParams& p, const Tensor& x, const Tensor& a,
                         const std::vector<std::uint8_t>& s);

/// Fraction of subgraph nodes (counted with multiplicity) whose argmax matches S.
double sen_accuracy(const SensitiveModelParams& p, const std::vector<Subgraph>& set);

}  // namespace fasd
