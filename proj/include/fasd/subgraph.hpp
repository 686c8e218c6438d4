#pragma once

#include "fasd/graph_data.hpp"
#include "fasd/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fasd {

/// Small dense sample of a parent Graph. Local node i corresponds to parent
/// node parent_ids[i]; local 0 is the root.
struct Subgraph {
  std::vector<Index> parent_ids;
  Tensor features;   // n x D
  Tensor adjacency;  // n x n, symmetric, zero diagonal
  std::vector<std::uint8_t> sensitive;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> labeled;  // 1 for train-split nodes
  Index root = 0;                     // parent id

  Index size() const { return Index(parent_ids.size()); }
  Index n_labeled() const;
  std::size_t n_edges(double threshold = 0.0) const;
};

struct SamplerConfig {
  int depth = 2;    // hops
  int fanout = 10;  // neighbours sampled per expanded node
  bool full_induction = false;  // keep every parent edge among sampled nodes
  bool per_node_depth = false;  // literal queue-length depth counter

  void validate() const;
};

Subgraph sample_subgraph(const Graph& g, Index root, const SamplerConfig& cfg, Rng& rng);

/// One subgraph per node that belongs to a split, in ascending root order.
/// Each root draws from its own substream keyed by (seed, root).
std::vector<Subgraph> build_subgraph_set(const Graph& g, const SamplerConfig& cfg, std::uint64_t seed);

/// Fills features/labels/masks of a subgraph from its parent ids.
Subgraph induce(const Graph& g, std::vector<Index> parent_ids, const std::vector<std::pair<Index, Index>>& local_edges);

/// One JSON object per line: root, parent_ids, edges ([u,v] or [u,v,w] when weighted).
void dump_subgraphs(const std::vector<Subgraph>& set, const std::filesystem::path& path, bool weighted = false);

}  // namespace fasd
