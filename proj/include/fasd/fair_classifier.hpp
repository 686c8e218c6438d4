#pragma once

// Node classifier trained on (debiased) subgraphs, subgraph-averaged node
// predictions and group fairness metrics.

#include "fasd/gcn_classifier.hpp"

#include <optional>

namespace fasd {

using ClassifierParams = GcnClassifierParams;

inline GcnClassifierArch classifier_arch() { return {{64, 64, 64}, 2, 0.3}; }

inline TrainOptions classifier_train_defaults() {
  return {.epochs = 500, .lr = 1e-3, .weight_decay = 1e-4, .batch_size = 1};
}

ClassifierParams init_classifier(Index in_dim, Rng& rng, const GcnClassifierArch& arch = classifier_arch());

Tensor f_forward(const ClassifierParams& p, const Tensor& x, const Tensor& a, bool train = false, Rng* rng = nullptr);

/// Cross-entropy over train-split nodes of every subgraph. Throws when no
/// subgraph has a labeled node. Returns per-epoch mean loss.
std::vector<double> train_classifier(ClassifierParams& p, const std::vector<Subgraph>& set, const TrainOptions& opt,
                                     Rng& rng);

struct NodePredictions {
  Tensor probs;                  // N x C, mean over containing subgraphs; zero rows where count is 0
  std::vector<Index> count;      // subgraphs containing each node
  std::vector<std::uint8_t> label;  // argmax, ties to class 0

  std::uint8_t operator[](Index u) const { return label[std::size_t(u)]; }
};

/// Averages per-subgraph probabilities over every subgraph containing a node,
/// accumulated in subgraph order.
NodePredictions predict_nodes(const std::vector<Subgraph>& set, const ClassifierParams& p, Index n_nodes);

struct MetricEntry {
  std::optional<double> acc, dp, eo;
  std::size_t evaluated = 0;
};

/// Accuracy, demographic parity gap and equal opportunity gap over mask.
/// A metric whose conditioning cell is empty stays undefined.
MetricEntry fairness_metrics(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& y,
                             const std::vector<std::uint8_t>& s, const std::vector<std::uint8_t>& mask);

}  // namespace fasd
