#pragma once

// Predictor-corrector reverse diffusion started from the observed subgraph,
// followed by pruning of weak edges.

#include "fasd/diffusion.hpp"

#include <filesystem>
#include <functional>

namespace fasd {

struct SamplerParams {
  int n_steps = 5;
  double snr_x = 0.05;
  double snr_a = 0.05;
  double tau = 0.5;
  KernelParams x, a;
  // Reverse-time score as -sigma_t * net (true) or -net (false).
  bool sigma_scaled_scores = true;

  void validate() const;
};

struct GraphState {
  Tensor x;
  Tensor a;
};

using ScoreField = GraphState;
using ScoreFn = std::function<ScoreField(const Tensor& x, const Tensor& a, double t)>;

struct StepNoise {
  Tensor eps_x;
  Tensor eps_a;  // symmetric, zero diagonal
};

/// beta_min + ((j+1)/n_steps)(beta_max - beta_min).
double schedule_beta(int j, int n_steps, double beta_min, double beta_max);
/// (j+1)/n_steps * T.
double step_time(int j, int n_steps, double horizon);

/// 2 (snr ||eps|| / ||s||)^2, zero when ||s|| < 1e-12.
template <typename Scalar>
Scalar langevin_step_size(Scalar snr, Scalar eps_norm, Scalar score_norm) {
  if (score_norm < Scalar(1e-12)) return Scalar(0);
  const Scalar q = snr * eps_norm / score_norm;
  return Scalar(2) * q * q;
}

/// Euler-Maruyama reverse step: X + beta/2 X + beta s + sqrt(beta) eps.
/// `forced` replaces the Gaussian draws; `record` receives the noise used.
GraphState predictor_step(const GraphState& g, int j, const ScoreFn& scores, const SamplerParams& p, Rng& rng,
                          const StepNoise* forced = nullptr, StepNoise* record = nullptr);

/// Langevin step: X + omega s + sqrt(2 omega) eps.
GraphState corrector_step(const GraphState& g, int j, const ScoreFn& scores, const SamplerParams& p, Rng& rng,
                          const StepNoise* forced = nullptr, StepNoise* record = nullptr);

/// Draws noise for one step; the default is independent Gaussians.
using NoiseFn = std::function<StepNoise(Index n, Index d, Rng& rng)>;

StepNoise gaussian_step_noise(Index n, Index d, Rng& rng);

/// j = n_steps-1 .. 0: predictor then corrector. Returns X unclamped and A
/// symmetrised, clamped to [0,1] with an empty diagonal.
GraphState reverse_diffusion(const GraphState& init, const ScoreFn& scores, const SamplerParams& p, Rng& rng,
                             const NoiseFn& noise = gaussian_step_noise);

/// Scores of trained networks at time t.
ScoreFn model_scores(const ScoreModelParams& models, const SamplerParams& p);

/// Reverse diffusion of a subgraph (unpruned adjacency).
Subgraph reverse_diffusion(const Subgraph& sub, const ScoreModelParams& models, const SamplerParams& p, Rng& rng);

/// Entries >= tau keep their weight, the rest become zero.
template <typename Derived>
Mat<typename Derived::Scalar> prune_edges(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar tau) {
  using S = typename Derived::Scalar;
  return a.unaryExpr([tau](S v) { return v >= tau ? v : S(0); });
}

/// Reverse diffusion plus pruning for every subgraph, each on its own
/// substream keyed by (seed, subgraph index).
std::vector<Subgraph> debias_set(const std::vector<Subgraph>& set, const ScoreModelParams& models,
                                 const SamplerParams& p, std::uint64_t seed);

/// CSV `subgraph,root,edges_before,edges_after`.
void write_edge_counts(const std::vector<Subgraph>& before, const std::vector<Subgraph>& after,
                       const std::filesystem::path& path);

}  // namespace fasd
