#include "fasd/fair_classifier.hpp"

#include <array>
#include <cmath>

namespace fasd {

ClassifierParams init_classifier(Index in_dim, Rng& rng, const GcnClassifierArch& arch) {
  return init_gcn_classifier(in_dim, arch, rng);
}

Tensor f_forward(const ClassifierParams& p, const Tensor& x, const Tensor& a, bool train, Rng* rng) {
  if (!train) return gcn_classifier_probs(p, x, a);
  ndiff::Tape t;
  ParamBinder<double> b(t);
  return ndiff::row_softmax(gcn_classifier_logits(b, p, t.constant(x), t.constant(a), true, rng)).value();
}

std::vector<double> train_classifier(ClassifierParams& p, const std::vector<Subgraph>& set, const TrainOptions& opt,
                                     Rng& rng) {
  NodeTargets targets{[](const Subgraph& s) -> const std::vector<std::uint8_t>& { return s.labels; },
                      [](const Subgraph& s) -> const std::vector<std::uint8_t>& { return s.labeled; }};
  return train_gcn_classifier(p, set, targets, opt, rng);
}

NodePredictions predict_nodes(const std::vector<Subgraph>& set, const ClassifierParams& p, Index n_nodes) {
  const Index c = p.fc2.out_dim();
  NodePredictions out;
  out.probs = Tensor::Zero(n_nodes, c);
  out.count.assign(std::size_t(n_nodes), 0);
  for (const auto& sg : set) {
    if (sg.size() == 0) continue;
    const Tensor pr = gcn_classifier_probs(p, sg.features, sg.adjacency);
    for (Index i = 0; i < sg.size(); ++i) {
      const Index u = sg.parent_ids[std::size_t(i)];
      if (u < 0 || u >= n_nodes) throw std::out_of_range("predict_nodes: parent id out of range");
      out.probs.row(u) += pr.row(i);
      ++out.count[std::size_t(u)];
    }
  }
  out.label.assign(std::size_t(n_nodes), 0);
  for (Index u = 0; u < n_nodes; ++u) {
    const Index k = out.count[std::size_t(u)];
    if (k == 0) continue;
    out.probs.row(u) /= double(k);
    Index best = 0;
    for (Index j = 1; j < c; ++j)
      if (out.probs(u, j) > out.probs(u, best)) best = j;
    out.label[std::size_t(u)] = std::uint8_t(best);
  }
  return out;
}

MetricEntry fairness_metrics(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& y,
                             const std::vector<std::uint8_t>& s, const std::vector<std::uint8_t>& mask) {
  const std::size_t n = pred.size();
  if (y.size() != n || s.size() != n || mask.size() != n)
    throw std::invalid_argument("fairness_metrics: length mismatch");
  std::array<double, 2> group{}, group_pos{}, tp_base{}, tp{};
  double hit = 0.0, total = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    if (!mask[u]) continue;
    const int g = s[u] ? 1 : 0;
    const bool positive = pred[u] == 1;
    total += 1.0;
    hit += pred[u] == y[u];
    group[g] += 1.0;
    group_pos[g] += positive;
    if (y[u] == 1) {
      tp_base[g] += 1.0;
      tp[g] += positive;
    }
  }
  MetricEntry m;
  m.evaluated = std::size_t(total);
  if (total > 0) m.acc = hit / total;
  if (group[0] > 0 && group[1] > 0) m.dp = std::abs(group_pos[0] / group[0] - group_pos[1] / group[1]);
  if (tp_base[0] > 0 && tp_base[1] > 0) m.eo = std::abs(tp[0] / tp_base[0] - tp[1] / tp_base[1]);
  return m;
}

}  // namespace fasd
