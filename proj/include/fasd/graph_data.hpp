#pragma once

#include "fasd/ndiff/tensor.hpp"

#include <Eigen/SparseCore>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fasd {

enum class Split : std::uint8_t { None, Train, Val, Test };

const char* split_name(Split s);

using SparseAdjacency = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

/// Attributed input graph. The parent adjacency is stored sparse (the
/// benchmark graphs have tens of thousands of nodes); it is symmetric,
/// unweighted and has an empty diagonal. Subgraphs are dense.
struct Graph {
  Tensor features;  // N x D
  SparseAdjacency adjacency;
  std::vector<std::uint8_t> sensitive;  // {0,1}
  std::vector<std::uint8_t> labels;     // {0,1}
  std::vector<Split> split;

  Index n_nodes() const { return features.rows(); }
  Index n_features() const { return features.cols(); }
  std::size_t n_edges() const { return std::size_t(adjacency.nonZeros()) / 2; }
  std::span<const int> neighbors(Index u) const;
  bool has_edge(Index u, Index v) const;
};

Graph make_graph(Tensor features, const std::vector<std::pair<Index, Index>>& edges,
                 std::vector<std::uint8_t> sensitive, std::vector<std::uint8_t> labels, std::vector<Split> split);

struct LoadOptions {
  bool standardize = true;
  bool include_sensitive = false;  // append S as the last feature column
};

struct LoadReport {
  std::size_t self_loops_dropped = 0;
  std::size_t duplicate_edges = 0;
};

/// Reads the nodes/edges/splits CSV triple. An empty split path leaves every
/// node unassigned (see split_nodes).
Graph load_graph(const std::filesystem::path& nodes, const std::filesystem::path& edges,
                 const std::filesystem::path& splits, const LoadOptions& opt = {}, LoadReport* report = nullptr);

void save_graph(const Graph& g, const std::filesystem::path& nodes, const std::filesystem::path& edges,
                const std::filesystem::path& splits);

/// Column-wise zero mean / unit variance; constant columns are only centred.
void standardize_columns(Tensor& x);

struct SbmBiasConfig {
  Index n_nodes = 300;
  double group_fraction = 0.5;  // P(S=1)
  double homophily = 0.05;      // within-group edge probability
  double cross_prob = 0.005;    // cross-group edge probability
  double label_bias = 0.4;      // P(Y=1|S=1) - P(Y=1|S=0)
  double feature_leak = 2.0;    // shift on every feature for S=1
  Index n_features = 8;
  double label_signal = 1.0;    // shift on the label-carrying features for Y=1
  Index label_features = 4;     // how many leading features carry the label
  std::uint64_t seed = 1;

  void validate() const;
};

/// Two-block stochastic block model over the sensitive groups with label and
/// feature bias. Features are returned raw (not standardised).
Graph generate_biased_sbm(const SbmBiasConfig& cfg);

struct SplitFractions {
  double train = 0.2, val = 0.35, test = 0.45;
};

/// Stratified by (S, Y). Returns a copy with `split` replaced. Sets
/// *fell_back when some stratum is empty and an unstratified split was used.
Graph split_nodes(const Graph& g, SplitFractions fractions, std::uint64_t seed, bool* fell_back = nullptr);

}  // namespace fasd
