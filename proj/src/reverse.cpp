#include "fasd/reverse.hpp"

#include "fasd/errors.hpp"
#include "fasd/io.hpp"

#include <cmath>
#include <sstream>

namespace fasd {

void SamplerParams::validate() const {
  if (n_steps < 1) throw ConfigError("reverse: n_steps must be >= 1");
  if (!(snr_x > 0.0 && snr_a > 0.0)) throw ConfigError("reverse: snr must be positive");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("reverse: tau must lie in [0,1]");
  x.validate("reverse.x");
  a.validate("reverse.a");
}

double schedule_beta(int j, int n_steps, double beta_min, double beta_max) {
  if (n_steps < 1 || j < 0 || j >= n_steps) throw std::out_of_range("schedule_beta: step index out of range");
  return beta_min + (double(j + 1) / double(n_steps)) * (beta_max - beta_min);
}

double step_time(int j, int n_steps, double horizon) {
  if (n_steps < 1 || j < 0 || j >= n_steps) throw std::out_of_range("step_time: step index out of range");
  return double(j + 1) / double(n_steps) * horizon;
}

StepNoise gaussian_step_noise(Index n, Index d, Rng& rng) {
  StepNoise e;
  e.eps_x = gaussian(n, d, rng);
  e.eps_a = symmetric_gaussian(n, rng);
  return e;
}

namespace {

StepNoise take_noise(const GraphState& g, Rng& rng, const StepNoise* forced, StepNoise* record) {
  StepNoise e = forced ? *forced : gaussian_step_noise(g.x.rows(), g.x.cols(), rng);
  if (e.eps_x.rows() != g.x.rows() || e.eps_x.cols() != g.x.cols() || e.eps_a.rows() != g.a.rows() ||
      e.eps_a.cols() != g.a.cols())
    throw ShapeError("pc_step", "noise shape does not match state");
  if (record) *record = e;
  return e;
}

void check_step(int j, const SamplerParams& p) {
  if (j < 0 || j >= p.n_steps) throw std::out_of_range("pc step index " + std::to_string(j) + " out of range");
}

}  // namespace

GraphState predictor_step(const GraphState& g, int j, const ScoreFn& scores, const SamplerParams& p, Rng& rng,
                          const StepNoise* forced, StepNoise* record) {
  check_step(j, p);
  const double bx = schedule_beta(j, p.n_steps, p.x.beta_min, p.x.beta_max);
  const double ba = schedule_beta(j, p.n_steps, p.a.beta_min, p.a.beta_max);
  const ScoreField s = scores(g.x, g.a, step_time(j, p.n_steps, p.x.horizon));
  const StepNoise e = take_noise(g, rng, forced, record);
  GraphState out;
  out.x = g.x + 0.5 * bx * g.x + bx * s.x + std::sqrt(bx) * e.eps_x;
  out.a = g.a + 0.5 * ba * g.a + ba * s.a + std::sqrt(ba) * e.eps_a;
  return out;
}

GraphState corrector_step(const GraphState& g, int j, const ScoreFn& scores, const SamplerParams& p, Rng& rng,
                          const StepNoise* forced, StepNoise* record) {
  check_step(j, p);
  const ScoreField s = scores(g.x, g.a, step_time(j, p.n_steps, p.x.horizon));
  const StepNoise e = take_noise(g, rng, forced, record);
  const double wx = langevin_step_size(p.snr_x, e.eps_x.norm(), s.x.norm());
  const double wa = langevin_step_size(p.snr_a, e.eps_a.norm(), s.a.norm());
  GraphState out;
  out.x = g.x + wx * s.x + std::sqrt(2.0 * wx) * e.eps_x;
  out.a = g.a + wa * s.a + std::sqrt(2.0 * wa) * e.eps_a;
  return out;
}

GraphState reverse_diffusion(const GraphState& init, const ScoreFn& scores, const SamplerParams& p, Rng& rng,
                             const NoiseFn& noise) {
  p.validate();
  GraphState g = init;
  const Index n = g.x.rows(), d = g.x.cols();
  for (int j = p.n_steps - 1; j >= 0; --j) {
    StepNoise e = noise(n, d, rng);
    g = predictor_step(g, j, scores, p, rng, &e);
    e = noise(n, d, rng);
    g = corrector_step(g, j, scores, p, rng, &e);
    if (!all_finite(g.x) || !all_finite(g.a))
      throw NumericError("reverse_diffusion: non-finite state at step " + std::to_string(j));
  }
  Tensor a = (0.5 * (g.a + g.a.transpose())).cwiseMax(0.0).cwiseMin(1.0);
  a.diagonal().setZero();
  g.a = std::move(a);
  return g;
}

ScoreFn model_scores(const ScoreModelParams& models, const SamplerParams& p) {
  return [&models, p](const Tensor& x, const Tensor& a, double t) {
    const double sx = p.sigma_scaled_scores ? kernel_coeffs(t, p.x).sigma : 1.0;
    const double sa = p.sigma_scaled_scores ? kernel_coeffs(t, p.a).sigma : 1.0;
    ScoreField s;
    s.x = -sx * score_theta_forward(models.theta, x, a);
    s.a = -sa * score_phi_forward(models.phi, x, a);
    return s;
  };
}

Subgraph reverse_diffusion(const Subgraph& sub, const ScoreModelParams& models, const SamplerParams& p, Rng& rng) {
  Subgraph out = sub;
  if (sub.size() == 0) return out;
  GraphState g = reverse_diffusion(GraphState{sub.features, sub.adjacency}, model_scores(models, p), p, rng);
  out.features = std::move(g.x);
  out.adjacency = std::move(g.a);
  return out;
}

std::vector<Subgraph> debias_set(const std::vector<Subgraph>& set, const ScoreModelParams& models,
                                 const SamplerParams& p, std::uint64_t seed) {
  p.validate();
  std::vector<Subgraph> out;
  out.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    Rng rng = substream(seed, "debias", i);
    Subgraph d = reverse_diffusion(set[i], models, p, rng);
    d.adjacency = prune_edges(d.adjacency, p.tau);
    out.push_back(std::move(d));
  }
  return out;
}

void write_edge_counts(const std::vector<Subgraph>& before, const std::vector<Subgraph>& after,
                       const std::filesystem::path& path) {
  if (before.size() != after.size()) throw std::invalid_argument("write_edge_counts: set sizes differ");
  std::ostringstream os;
  os << "subgraph,root,edges_before,edges_after\n";
  for (std::size_t i = 0; i < before.size(); ++i)
    os << i << ',' << before[i].root << ',' << before[i].n_edges() << ',' << after[i].n_edges() << '\n';
  write_file_atomic(path, os.str());
}

}  // namespace fasd
