#include "fasd/graph_data.hpp"

#include "fasd/errors.hpp"
#include "fasd/io.hpp"
#include "fasd/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>

namespace fasd {

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::None: return "none";
  }
  return "none";
}

std::span<const int> Graph::neighbors(Index u) const {
  const int* outer = adjacency.outerIndexPtr();
  const int* inner = adjacency.innerIndexPtr();
  return {inner + outer[u], std::size_t(outer[u + 1] - outer[u])};
}

bool Graph::has_edge(Index u, Index v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), int(v));
}

Graph make_graph(Tensor features, const std::vector<std::pair<Index, Index>>& edges,
                 std::vector<std::uint8_t> sensitive, std::vector<std::uint8_t> labels, std::vector<Split> split) {
  Graph g;
  const Index n = features.rows();
  g.features = std::move(features);
  std::vector<Eigen::Triplet<double, int>> trip;
  trip.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u == v) continue;
    trip.emplace_back(int(u), int(v), 1.0);
    trip.emplace_back(int(v), int(u), 1.0);
  }
  g.adjacency.resize(n, n);
  // duplicates collapse to a single unit entry
  g.adjacency.setFromTriplets(trip.begin(), trip.end(), [](double, double) { return 1.0; });
  g.adjacency.makeCompressed();
  g.sensitive = std::move(sensitive);
  g.labels = std::move(labels);
  g.split = std::move(split);
  if (g.split.empty()) g.split.assign(std::size_t(n), Split::None);
  return g;
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
      field.remove_suffix(1);
    out.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

long parse_int(std::string_view s, const std::string& where) {
  long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError(where + ": expected integer, got '" + std::string(s) + "'");
  return v;
}

double parse_double(std::string_view s, const std::string& where) {
  try {
    std::size_t used = 0;
    std::string tmp(s);
    double v = std::stod(tmp, &used);
    if (used != tmp.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": expected number, got '" + std::string(s) + "'");
  }
}

std::ifstream open_or_throw(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  return in;
}

}  // namespace

void standardize_columns(Tensor& x) {
  if (x.rows() == 0) return;
  for (Index j = 0; j < x.cols(); ++j) {
    const double mu = x.col(j).mean();
    x.col(j).array() -= mu;
    const double sd = std::sqrt(x.col(j).squaredNorm() / double(x.rows()));
    if (sd > 1e-12) x.col(j) /= sd;
  }
}

Graph load_graph(const std::filesystem::path& nodes, const std::filesystem::path& edges,
                 const std::filesystem::path& splits, const LoadOptions& opt, LoadReport* report) {
  LoadReport rep;
  auto nin = open_or_throw(nodes);
  std::string line;
  if (!std::getline(nin, line)) throw DataError(nodes.string() + ": empty file");
  auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "node_id" || header[1] != "sensitive" || header[2] != "label")
    throw DataError(nodes.string() + ": header must start with node_id,sensitive,label");
  const std::size_t d = header.size() - 3;

  struct Row {
    long id;
    std::uint8_t s, y;
    std::vector<double> f;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(nin, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::string where = nodes.string() + ":" + std::to_string(lineno);
    auto f = split_csv(line);
    if (f.size() != header.size()) throw DataError(where + ": expected " + std::to_string(header.size()) + " fields");
    Row r;
    r.id = parse_int(f[0], where);
    const long s = parse_int(f[1], where), y = parse_int(f[2], where);
    if (s != 0 && s != 1) throw DataError(where + ": sensitive value must be 0 or 1");
    if (y != 0 && y != 1) throw DataError(where + ": label must be 0 or 1");
    r.s = std::uint8_t(s);
    r.y = std::uint8_t(y);
    for (std::size_t k = 0; k < d; ++k) r.f.push_back(parse_double(f[3 + k], where));
    rows.push_back(std::move(r));
  }
  const Index n = Index(rows.size());
  std::vector<char> seen(std::size_t(n), 0);
  for (const auto& r : rows) {
    if (r.id < 0 || r.id >= n) throw DataError(nodes.string() + ": node ids must be dense in 0..N-1, got " + std::to_string(r.id));
    if (seen[std::size_t(r.id)]) throw DataError(nodes.string() + ": duplicate node id " + std::to_string(r.id));
    seen[std::size_t(r.id)] = 1;
  }

  const Index cols = Index(d) + (opt.include_sensitive ? 1 : 0);
  Tensor x(n, cols);
  std::vector<std::uint8_t> sens(static_cast<std::size_t>(n)), lab(static_cast<std::size_t>(n));
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < d; ++k) x(r.id, Index(k)) = r.f[k];
    if (opt.include_sensitive) x(r.id, Index(d)) = r.s;
    sens[std::size_t(r.id)] = r.s;
    lab[std::size_t(r.id)] = r.y;
  }
  if (opt.standardize) standardize_columns(x);

  std::vector<std::pair<Index, Index>> edge_list;
  {
    auto ein = open_or_throw(edges);
    lineno = 0;
    while (std::getline(ein, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      auto f = split_csv(line);
      if (lineno == 1 && f.size() == 2 && f[0] == "src" && f[1] == "dst") continue;
      const std::string where = edges.string() + ":" + std::to_string(lineno);
      if (f.size() != 2) throw DataError(where + ": expected src,dst");
      const long u = parse_int(f[0], where), v = parse_int(f[1], where);
      if (u < 0 || u >= n || v < 0 || v >= n)
        throw DataError(where + ": unknown node id in edge " + std::to_string(u) + "," + std::to_string(v));
      if (u == v) {
        ++rep.self_loops_dropped;
        continue;
      }
      edge_list.emplace_back(std::min(u, v), std::max(u, v));
    }
  }
  std::sort(edge_list.begin(), edge_list.end());
  const auto before = edge_list.size();
  edge_list.erase(std::unique(edge_list.begin(), edge_list.end()), edge_list.end());
  rep.duplicate_edges = before - edge_list.size();

  std::vector<Split> split(std::size_t(n), Split::None);
  if (!splits.empty()) {
    auto sin = open_or_throw(splits);
    lineno = 0;
    while (std::getline(sin, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      auto f = split_csv(line);
      if (lineno == 1 && f.size() == 2 && f[0] == "node_id") continue;
      const std::string where = splits.string() + ":" + std::to_string(lineno);
      if (f.size() != 2) throw DataError(where + ": expected node_id,split");
      const long u = parse_int(f[0], where);
      if (u < 0 || u >= n) throw DataError(where + ": unknown node id " + std::to_string(u));
      if (f[1] == "train") split[std::size_t(u)] = Split::Train;
      else if (f[1] == "val") split[std::size_t(u)] = Split::Val;
      else if (f[1] == "test") split[std::size_t(u)] = Split::Test;
      else throw DataError(where + ": split must be train, val or test");
    }
  }
  if (report) *report = rep;
  return make_graph(std::move(x), edge_list, std::move(sens), std::move(lab), std::move(split));
}

void save_graph(const Graph& g, const std::filesystem::path& nodes, const std::filesystem::path& edges,
                const std::filesystem::path& splits) {
  std::ostringstream ns;
  ns.precision(17);
  ns << "node_id,sensitive,label";
  for (Index j = 0; j < g.n_features(); ++j) ns << ",f" << j;
  ns << '\n';
  for (Index u = 0; u < g.n_nodes(); ++u) {
    ns << u << ',' << int(g.sensitive[std::size_t(u)]) << ',' << int(g.labels[std::size_t(u)]);
    for (Index j = 0; j < g.n_features(); ++j) ns << ',' << g.features(u, j);
    ns << '\n';
  }
  write_file_atomic(nodes, ns.str());

  std::ostringstream es;
  es << "src,dst\n";
  for (Index u = 0; u < g.n_nodes(); ++u)
    for (int v : g.neighbors(u))
      if (v > u) es << u << ',' << v << '\n';
  write_file_atomic(edges, es.str());

  std::ostringstream ss;
  ss << "node_id,split\n";
  for (Index u = 0; u < g.n_nodes(); ++u)
    if (g.split[std::size_t(u)] != Split::None) ss << u << ',' << split_name(g.split[std::size_t(u)]) << '\n';
  write_file_atomic(splits, ss.str());
}

void SbmBiasConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("sbm: ") + name + " must lie in [0,1]");
  };
  if (n_nodes < 4) throw ConfigError("sbm: n_nodes must be >= 4");
  prob(group_fraction, "group_fraction");
  prob(homophily, "homophily");
  prob(cross_prob, "cross_prob");
  if (!(label_bias >= -1.0 && label_bias <= 1.0)) throw ConfigError("sbm: label_bias must lie in [-1,1]");
  if (n_features < 1) throw ConfigError("sbm: n_features must be >= 1");
  if (label_features < 0 || label_features > n_features) throw ConfigError("sbm: label_features out of range");
}

Graph generate_biased_sbm(const SbmBiasConfig& cfg) {
  cfg.validate();
  const Index n = cfg.n_nodes;
  Rng rng = substream(cfg.seed, "sbm");

  const Index n1 = Index(std::llround(cfg.group_fraction * double(n)));
  std::vector<std::uint8_t> s(std::size_t(n), 0);
  std::fill(s.begin(), s.begin() + n1, 1);
  std::shuffle(s.begin(), s.end(), rng);

  const double p0 = std::clamp(0.5 - cfg.label_bias / 2.0, 0.0, 1.0);
  const double p1 = std::clamp(0.5 + cfg.label_bias / 2.0, 0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::uint8_t> y(static_cast<std::size_t>(n));
  for (Index u = 0; u < n; ++u) y[std::size_t(u)] = unif(rng) < (s[std::size_t(u)] ? p1 : p0) ? 1 : 0;

  Tensor x = gaussian(n, cfg.n_features, rng);
  for (Index u = 0; u < n; ++u) {
    if (s[std::size_t(u)]) x.row(u).array() += cfg.feature_leak;
    if (y[std::size_t(u)]) x.row(u).head(cfg.label_features).array() += cfg.label_signal;
  }

  std::vector<std::pair<Index, Index>> edges;
  for (Index u = 0; u < n; ++u)
    for (Index v = u + 1; v < n; ++v) {
      const double p = s[std::size_t(u)] == s[std::size_t(v)] ? cfg.homophily : cfg.cross_prob;
      if (unif(rng) < p) edges.emplace_back(u, v);
    }
  return make_graph(std::move(x), edges, std::move(s), std::move(y), {});
}

namespace {

// Largest-remainder apportionment of `total` over `fractions`.
std::array<Index, 3> apportion(Index total, const std::array<double, 3>& f) {
  std::array<Index, 3> out{};
  std::array<double, 3> rem{};
  Index used = 0;
  for (int k = 0; k < 3; ++k) {
    const double q = f[std::size_t(k)] * double(total);
    out[std::size_t(k)] = Index(std::floor(q + 1e-9));
    rem[std::size_t(k)] = q - double(out[std::size_t(k)]);
    used += out[std::size_t(k)];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[std::size_t(a)] > rem[std::size_t(b)]; });
  for (int i = 0; used < total; ++i, ++used) ++out[std::size_t(order[std::size_t(i % 3)])];
  return out;
}

}  // namespace

Graph split_nodes(const Graph& g, SplitFractions fr, std::uint64_t seed, bool* fell_back) {
  const std::array<double, 3> f{fr.train, fr.val, fr.test};
  for (double v : f)
    if (!(v >= 0.0)) throw ConfigError("split fractions must be non-negative");
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  const Index n = g.n_nodes();
  Rng rng = substream(seed, "split");

  std::array<std::vector<Index>, 4> cells;
  for (Index u = 0; u < n; ++u) cells[std::size_t(2 * g.sensitive[std::size_t(u)] + g.labels[std::size_t(u)])].push_back(u);
  const bool stratify = std::all_of(cells.begin(), cells.end(), [](const auto& c) { return !c.empty(); });
  if (fell_back) *fell_back = !stratify;
  if (!stratify) {
    cells = {};
    for (Index u = 0; u < n; ++u) cells[0].push_back(u);
  }

  const auto target = apportion(n, f);
  std::array<Index, 3> assigned{};
  std::vector<std::array<Index, 3>> quota;
  std::vector<std::array<double, 3>> frac;
  for (const auto& c : cells) {
    std::array<Index, 3> q{};
    std::array<double, 3> r{};
    for (int k = 0; k < 3; ++k) {
      const double v = f[std::size_t(k)] * double(c.size());
      q[std::size_t(k)] = Index(std::floor(v + 1e-9));
      r[std::size_t(k)] = v - double(q[std::size_t(k)]);
      assigned[std::size_t(k)] += q[std::size_t(k)];
    }
    quota.push_back(q);
    frac.push_back(r);
  }
  // hand out each cell's leftover units to the splits furthest below target
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    Index left = Index(cells[ci].size()) - quota[ci][0] - quota[ci][1] - quota[ci][2];
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      const Index da = target[std::size_t(a)] - assigned[std::size_t(a)];
      const Index db = target[std::size_t(b)] - assigned[std::size_t(b)];
      if (da != db) return da > db;
      return frac[ci][std::size_t(a)] > frac[ci][std::size_t(b)];
    });
    for (int k : order) {
      if (left == 0) break;
      if (frac[ci][std::size_t(k)] <= 1e-12) continue;
      ++quota[ci][std::size_t(k)];
      ++assigned[std::size_t(k)];
      --left;
    }
    for (int k = 0; left > 0; k = (k + 1) % 3, --left) ++quota[ci][std::size_t(order[std::size_t(k)])];
  }

  Graph out = g;
  out.split.assign(std::size_t(n), Split::None);
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    auto members = cells[ci];
    std::shuffle(members.begin(), members.end(), rng);
    std::size_t pos = 0;
    const Split kinds[3] = {Split::Train, Split::Val, Split::Test};
    for (int k = 0; k < 3; ++k)
      for (Index i = 0; i < quota[ci][std::size_t(k)]; ++i) out.split[std::size_t(members[pos++])] = kinds[k];
  }
  return out;
}

}  // namespace fasd
