#include "fasd/sensitive_model.hpp"

namespace fasd {

SensitiveModelParams init_sensitive_model(Index in_dim, Rng& rng, const GcnClassifierArch& arch) {
  return init_gcn_classifier(in_dim, arch, rng);
}

Tensor g_sen_forward(const SensitiveModelParams& p, const Tensor& x, const Tensor& a, bool train, Rng* rng) {
  if (!train) return gcn_classifier_probs(p, x, a);
  ndiff::Tape t;
  ParamBinder<double> b(t);
  return ndiff::row_softmax(gcn_classifier_logits(b, p, t.constant(x), t.constant(a), true, rng)).value();
}

std::vector<double> train_g_sen(SensitiveModelParams& p, const std::vector<Subgraph>& set, const TrainOptions& opt,
                                Rng& rng) {
  NodeTargets targets{[](const Subgraph& s) -> const std::vector<std::uint8_t>& { return s.sensitive; }, {}};
  return train_gcn_classifier(p, set, targets, opt, rng);
}

double sen_loss(const SensitiveModelParams& p, const Tensor& x, const Tensor& a, const std::vector<std::uint8_t>& s) {
  ndiff::Tape t;
  ParamBinder<double> b(t);
  auto logits = gcn_classifier_logits(b, p, t.constant(x), t.constant(a), false, nullptr);
  return masked_cross_entropy(logits, s, {}).value()(0, 0);
}

SenGrads sen_input_grads(const SensitiveModelParams& p, const Tensor& x, const Tensor& a,
                         const std::vector<std::uint8_t>& s) {
  ndiff::Tape t;
  ParamBinder<double> b(t);
  auto xv = t.input(x);
  auto av = t.input(a);
  auto loss = masked_cross_entropy(gcn_classifier_logits(b, p, xv, av, false, nullptr), s, {});
  auto g = t.backward(loss, {xv, av});
  SenGrads out;
  out.gx = g[xv];
  out.ga = 0.5 * (g[av] + g[av].transpose());
  out.ga.diagonal().setZero();
  out.loss = loss.value()(0, 0);
  return out;
}

double sen_accuracy(const SensitiveModelParams& p, const std::vector<Subgraph>& set) {
  double hit = 0.0, total = 0.0;
  for (const auto& sg : set) {
    if (sg.size() == 0) continue;
    Tensor pr = gcn_classifier_probs(p, sg.features, sg.adjacency);
    for (Index u = 0; u < sg.size(); ++u) {
      const int pred = pr(u, 1) > pr(u, 0) ? 1 : 0;
      hit += pred == sg.sensitive[std::size_t(u)];
      total += 1.0;
    }
  }
  return total > 0 ? hit / total : 0.0;
}

}  // namespace fasd
