#pragma once

// Two GCN layers followed by two fully connected layers, ReLU and dropout
// after every hidden layer, softmax head. Both the sensitive-attribute
// adversary and the downstream node classifier use this shape.

#include "fasd/layers.hpp"
#include "fasd/subgraph.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace fasd {

struct GcnClassifierArch {
  std::array<Index, 3> hidden{64, 32, 16};
  Index classes = 2;
  double dropout = 0.1;
};

struct GcnClassifierParams {
  GcnLayerParams<double> gcn1, gcn2;
  LinearParams<double> fc1, fc2;
  double dropout = 0.1;

  Index in_dim() const { return gcn1.in_dim(); }

  template <typename F>
  void visit(F&& f) {
    fasd::visit(gcn1, "gcn1", f);
    fasd::visit(gcn2, "gcn2", f);
    fasd::visit(fc1, "fc1", f);
    fasd::visit(fc2, "fc2", f);
  }
};

GcnClassifierParams init_gcn_classifier(Index in_dim, const GcnClassifierArch& arch, Rng& rng);

/// Builds the forward pass on `b.tape()`; parameters are bound through `b`
/// in visit order. Dropout masks are drawn from `rng` when `train` is set.
ndiff::Var<double> gcn_classifier_logits(ParamBinder<double>& b, const GcnClassifierParams& p, ndiff::Var<double> x,
                                         ndiff::Var<double> a, bool train, Rng* rng);

/// Row-softmax probabilities in evaluation mode.
Tensor gcn_classifier_probs(const GcnClassifierParams& p, const Tensor& x, const Tensor& a);

/// Sum over rows with mask[u] of -log softmax(logits)[u, target[u]].
ndiff::Var<double> masked_cross_entropy(const ndiff::Var<double>& logits, const std::vector<std::uint8_t>& target,
                                        const std::vector<std::uint8_t>& mask);

struct TrainOptions {
  int epochs = 500;
  double lr = 1e-3;
  double weight_decay = 0.0;
  int batch_size = 1;  // subgraphs per optimizer step
};

/// Which nodes of a subgraph supervise, and with what class.
struct NodeTargets {
  std::function<const std::vector<std::uint8_t>&(const Subgraph&)> target;
  std::function<const std::vector<std::uint8_t>&(const Subgraph&)> mask;  // empty: every node
};

/// Adam over shuffled mini-batches of subgraphs; the loss is the mean
/// cross-entropy over supervised nodes in the batch. Returns per-epoch mean
/// training loss.
std::vector<double> train_gcn_classifier(GcnClassifierParams& p, const std::vector<Subgraph>& set,
                                         const NodeTargets& targets, const TrainOptions& opt, Rng& rng);

std::vector<Tensor*> param_refs(GcnClassifierParams& p);

}  // namespace fasd
