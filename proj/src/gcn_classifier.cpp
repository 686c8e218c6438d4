#include "fasd/gcn_classifier.hpp"

#include "fasd/errors.hpp"
#include "fasd/ndiff/optim.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace fasd {

using ndiff::Var;

GcnClassifierParams init_gcn_classifier(Index in_dim, const GcnClassifierArch& arch, Rng& rng) {
  if (!(arch.dropout >= 0.0 && arch.dropout < 1.0)) throw ConfigError("dropout must lie in [0,1)");
  GcnClassifierParams p;
  p.gcn1 = init_affine<double>(in_dim, arch.hidden[0], rng);
  p.gcn2 = init_affine<double>(arch.hidden[0], arch.hidden[1], rng);
  p.fc1 = init_affine<double>(arch.hidden[1], arch.hidden[2], rng);
  p.fc2 = init_affine<double>(arch.hidden[2], arch.classes, rng);
  p.dropout = arch.dropout;
  return p;
}

std::vector<Tensor*> param_refs(GcnClassifierParams& p) {
  std::vector<Tensor*> out;
  p.visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

namespace {

Var<double> maybe_dropout(const Var<double>& h, double rate, bool train, Rng* rng) {
  if (!train || rate <= 0.0) return h;
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(h.rows(), h.cols());
  const double scale = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? scale : 0.0;
  return ndiff::dropout(h, std::move(mask));
}

}  // namespace

Var<double> gcn_classifier_logits(ParamBinder<double>& b, const GcnClassifierParams& p, Var<double> x, Var<double> a,
                                  bool train, Rng* rng) {
  if (train && p.dropout > 0.0 && rng == nullptr) throw std::invalid_argument("training mode needs an rng");
  if (x.cols() != p.gcn1.in_dim())
    throw ShapeError("gcn_classifier", "expected " + std::to_string(p.gcn1.in_dim()) + " features, got " +
                                           std::to_string(x.cols()));
  auto g1 = bind(b, p.gcn1);
  auto g2 = bind(b, p.gcn2);
  auto f1 = bind(b, p.fc1);
  auto f2 = bind(b, p.fc2);
  auto a_hat = ndiff::gcn_normalize(a);
  auto h = maybe_dropout(ndiff::relu(gcn(a_hat, x, g1)), p.dropout, train, rng);
  h = maybe_dropout(ndiff::relu(gcn(a_hat, h, g2)), p.dropout, train, rng);
  h = maybe_dropout(ndiff::relu(affine(h, f1)), p.dropout, train, rng);
  return affine(h, f2);
}

Tensor gcn_classifier_probs(const GcnClassifierParams& p, const Tensor& x, const Tensor& a) {
  ndiff::Tape t;
  ParamBinder<double> b(t);
  auto logits = gcn_classifier_logits(b, p, t.constant(x), t.constant(a), false, nullptr);
  return ndiff::row_softmax(logits).value();
}

Var<double> masked_cross_entropy(const Var<double>& logits, const std::vector<std::uint8_t>& target,
                                 const std::vector<std::uint8_t>& mask) {
  const Index n = logits.rows();
  if (Index(target.size()) != n || (!mask.empty() && Index(mask.size()) != n))
    throw ShapeError("cross_entropy", "target/mask length does not match logits");
  Tensor pick = Tensor::Zero(n, logits.cols());
  for (Index u = 0; u < n; ++u) {
    if (!mask.empty() && !mask[std::size_t(u)]) continue;
    const Index c = target[std::size_t(u)];
    if (c >= logits.cols()) throw ShapeError("cross_entropy", "class index out of range");
    pick(u, c) = 1.0;
  }
  auto& t = *logits.tape();
  return -ndiff::sum(ndiff::mul(t.constant(std::move(pick)), ndiff::row_log_softmax(logits)));
}

std::vector<double> train_gcn_classifier(GcnClassifierParams& p, const std::vector<Subgraph>& set,
                                         const NodeTargets& targets, const TrainOptions& opt, Rng& rng) {
  if (set.empty()) throw std::invalid_argument("train: empty subgraph set");
  const int batch = std::max(1, opt.batch_size);
  ndiff::Adam adam({.lr = opt.lr, .weight_decay = opt.weight_decay});
  auto refs = param_refs(p);

  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set[i].size() == 0) continue;
    if (targets.mask) {
      const auto& m = targets.mask(set[i]);
      if (std::none_of(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; })) continue;
    }
    usable.push_back(i);
  }
  if (usable.empty()) throw std::invalid_argument("train: no supervised node in any subgraph");

  std::vector<double> curve;
  std::vector<Tensor> acc(refs.size());
  static const std::vector<std::uint8_t> kAll;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::vector<std::size_t> order = usable;
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    double epoch_count = 0.0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(batch)) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(batch));
      for (std::size_t k = 0; k < refs.size(); ++k) acc[k] = Tensor::Zero(refs[k]->rows(), refs[k]->cols());
      double batch_loss = 0.0;
      double batch_count = 0.0;
      for (std::size_t s = start; s < stop; ++s) {
        const Subgraph& sg = set[order[s]];
        const auto& mask = targets.mask ? targets.mask(sg) : kAll;
        const double count =
            mask.empty() ? double(sg.size()) : double(std::count(mask.begin(), mask.end(), std::uint8_t(1)));
        ndiff::Tape t;
        ParamBinder<double> b(t);
        auto logits = gcn_classifier_logits(b, p, t.constant(sg.features), t.constant(sg.adjacency), true, &rng);
        auto loss = masked_cross_entropy(logits, targets.target(sg), mask);
        auto grads = t.backward(loss, std::span<const Var<double>>(b.leaves()));
        for (std::size_t k = 0; k < refs.size(); ++k) acc[k] += grads[b.leaves()[k]];
        batch_loss += loss.value()(0, 0);
        batch_count += count;
      }
      for (auto& g : acc) g /= batch_count;
      adam.step(std::span<Tensor* const>(refs), std::span<const Tensor>(acc));
      epoch_loss += batch_loss;
      epoch_count += batch_count;
    }
    curve.push_back(epoch_loss / epoch_count);
  }
  return curve;
}

}  // namespace fasd
