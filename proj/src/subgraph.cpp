#include "fasd/subgraph.hpp"

#include "fasd/errors.hpp"
#include "fasd/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <deque>
#include <sstream>
#include <unordered_map>

namespace fasd {

Index Subgraph::n_labeled() const { return Index(std::count(labeled.begin(), labeled.end(), std::uint8_t(1))); }

std::size_t Subgraph::n_edges(double threshold) const {
  std::size_t e = 0;
  for (Index u = 0; u < adjacency.rows(); ++u)
    for (Index v = u + 1; v < adjacency.cols(); ++v)
      if (adjacency(u, v) > threshold) ++e;
  return e;
}

void SamplerConfig::validate() const {
  if (depth < 1) throw ConfigError("sampler: depth must be >= 1");
  if (fanout < 1) throw ConfigError("sampler: fanout must be >= 1");
}

Subgraph induce(const Graph& g, std::vector<Index> ids, const std::vector<std::pair<Index, Index>>& local_edges) {
  Subgraph s;
  const Index n = Index(ids.size());
  s.root = ids.empty() ? 0 : ids[0];
  s.features.resize(n, g.n_features());
  s.adjacency = Tensor::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto p = std::size_t(ids[std::size_t(i)]);
    s.features.row(i) = g.features.row(Index(p));
    s.sensitive.push_back(g.sensitive[p]);
    s.labels.push_back(g.labels[p]);
    s.labeled.push_back(g.split[p] == Split::Train ? 1 : 0);
  }
  for (auto [a, b] : local_edges) {
    if (a == b) continue;
    s.adjacency(a, b) = 1.0;
    s.adjacency(b, a) = 1.0;
  }
  s.parent_ids = std::move(ids);
  return s;
}

Subgraph sample_subgraph(const Graph& g, Index root, const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (root < 0 || root >= g.n_nodes()) throw std::out_of_range("sample_subgraph: invalid root");

  std::vector<Index> ids{root};
  std::unordered_map<Index, Index> local{{root, 0}};
  std::vector<char> visited(1, 0);
  std::vector<int> hop{0};
  std::vector<std::pair<Index, Index>> edges;
  std::deque<Index> queue{0};
  int budget = cfg.depth;  // only consumed in per_node_depth mode

  std::vector<int> pool;
  while (!queue.empty() && (!cfg.per_node_depth || budget > 0)) {
    const Index lv = queue.front();
    queue.pop_front();
    if (visited[std::size_t(lv)]) continue;
    visited[std::size_t(lv)] = 1;
    if (!cfg.per_node_depth && hop[std::size_t(lv)] >= cfg.depth) continue;

    auto nb = g.neighbors(ids[std::size_t(lv)]);
    pool.assign(nb.begin(), nb.end());
    const std::size_t take = std::min<std::size_t>(std::size_t(cfg.fanout), pool.size());
    // partial Fisher-Yates: uniform sample without replacement
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    for (std::size_t i = 0; i < take; ++i) {
      const Index w = pool[i];
      auto it = local.find(w);
      Index lw;
      if (it == local.end()) {
        lw = Index(ids.size());
        local.emplace(w, lw);
        ids.push_back(w);
        visited.push_back(0);
        hop.push_back(hop[std::size_t(lv)] + 1);
        queue.push_back(lw);
      } else {
        lw = it->second;
      }
      edges.emplace_back(lv, lw);
    }
    --budget;
  }

  if (cfg.full_induction) {
    edges.clear();
    for (Index a = 0; a < Index(ids.size()); ++a)
      for (int w : g.neighbors(ids[std::size_t(a)])) {
        auto it = local.find(w);
        if (it != local.end() && it->second > a) edges.emplace_back(a, it->second);
      }
  }
  return induce(g, std::move(ids), edges);
}

std::vector<Subgraph> build_subgraph_set(const Graph& g, const SamplerConfig& cfg, std::uint64_t seed) {
  std::vector<Subgraph> out;
  for (Index u = 0; u < g.n_nodes(); ++u) {
    if (g.split[std::size_t(u)] == Split::None) continue;
    Rng rng = substream(seed, "sample", std::uint64_t(u));
    out.push_back(sample_subgraph(g, u, cfg, rng));
  }
  return out;
}

void dump_subgraphs(const std::vector<Subgraph>& set, const std::filesystem::path& path, bool weighted) {
  std::ostringstream out;
  for (const auto& s : set) {
    nlohmann::json j;
    j["root"] = s.root;
    j["parent_ids"] = s.parent_ids;
    auto edges = nlohmann::json::array();
    for (Index u = 0; u < s.size(); ++u)
      for (Index v = u + 1; v < s.size(); ++v) {
        const double w = s.adjacency(u, v);
        if (w == 0.0) continue;
        if (weighted)
          edges.push_back({s.parent_ids[std::size_t(u)], s.parent_ids[std::size_t(v)], w});
        else
          edges.push_back({s.parent_ids[std::size_t(u)], s.parent_ids[std::size_t(v)]});
      }
    j["edges"] = std::move(edges);
    out << j.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace fasd
