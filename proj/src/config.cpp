#include "fasd/config.hpp"

#include "fasd/errors.hpp"
#include "fasd/io.hpp"
#include "fasd/rng.hpp"

#include <algorithm>
#include <charconv>
#include <concepts>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace fasd {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Full: return "full";
    case Mode::NoDiffusion: return "no_diffusion";
    case Mode::NoFairness: return "no_fairness";
  }
  return "full";
}

Mode parse_mode(std::string_view s) {
  if (s == "full") return Mode::Full;
  if (s == "no_diffusion") return Mode::NoDiffusion;
  if (s == "no_fairness") return Mode::NoFairness;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected full, no_diffusion or no_fairness)");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

// value parsing -------------------------------------------------------------

template <typename T>
T parse_integer(std::string_view key, std::string_view v) {
  T out{};
  const auto s = trim(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError(std::string(key) + ": expected an integer, got '" + s + "'");
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  const auto s = trim(v);
  double out = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError(std::string(key) + ": expected a number, got '" + s + "'");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  const auto s = trim(v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + s + "'");
}

void assign(std::string_view key, std::string_view v, double& out) { out = parse_real(key, v); }
void assign(std::string_view key, std::string_view v, bool& out) { out = parse_bool(key, v); }
template <std::integral T>
void assign(std::string_view key, std::string_view v, T& out) {
  out = parse_integer<T>(key, v);
}
void assign(std::string_view, std::string_view v, std::string& out) { out = trim(v); }
void assign(std::string_view, std::string_view v, std::filesystem::path& out) { out = trim(v); }
void assign(std::string_view, std::string_view v, Mode& out) { out = parse_mode(trim(v)); }
void assign(std::string_view key, std::string_view v, std::array<Index, 3>& out) {
  const auto parts = split_list(v);
  if (parts.size() != 3) throw ConfigError(std::string(key) + ": expected three comma-separated sizes");
  for (std::size_t i = 0; i < 3; ++i) out[i] = parse_integer<Index>(key, parts[i]);
}
void assign(std::string_view key, std::string_view v, SplitFractions& out) {
  const auto parts = split_list(v);
  if (parts.size() != 3) throw ConfigError(std::string(key) + ": expected train,val,test fractions");
  out = {parse_real(key, parts[0]), parse_real(key, parts[1]), parse_real(key, parts[2])};
}
void assign(std::string_view key, std::string_view v, std::vector<std::uint64_t>& out) {
  out.clear();
  for (const auto& p : split_list(v)) out.push_back(parse_integer<std::uint64_t>(key, p));
}
void assign(std::string_view, std::string_view v, std::vector<std::string>& out) { out = split_list(v); }

// canonical formatting -------------------------------------------------------

std::string text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string text(bool v) { return v ? "true" : "false"; }
template <std::integral T>
std::string text(T v) {
  return std::to_string(v);
}
std::string text(const std::string& v) { return v; }
std::string text(const std::filesystem::path& v) { return v.generic_string(); }
std::string text(Mode m) { return mode_name(m); }
std::string text(const std::array<Index, 3>& a) {
  return text(a[0]) + "," + text(a[1]) + "," + text(a[2]);
}
std::string text(const SplitFractions& f) { return text(f.train) + "," + text(f.val) + "," + text(f.test); }
template <typename T>
std::string text(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + text(v[i]);
  return s;
}

struct Field {
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;  // empty for aliases
};

template <typename Ref>
Field field(std::string key, Ref ref) {
  return {[key, ref](ExperimentConfig& c, std::string_view v) { assign(key, v, ref(c)); },
          [ref](const ExperimentConfig& c) { return text(ref(const_cast<ExperimentConfig&>(c))); }};
}

#define FASD_FIELD(key, expr) \
  { key, field(key, [](ExperimentConfig& c) -> auto& { return expr; }) }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = [] {
    std::map<std::string, Field> m{
        FASD_FIELD("dataset.source", c.dataset.source),
        FASD_FIELD("dataset.nodes", c.dataset.nodes),
        FASD_FIELD("dataset.edges", c.dataset.edges),
        FASD_FIELD("dataset.splits", c.dataset.splits),
        FASD_FIELD("dataset.split", c.dataset.split),
        FASD_FIELD("dataset.standardize", c.dataset.standardize),
        FASD_FIELD("dataset.include_sensitive", c.dataset.include_sensitive),
        FASD_FIELD("dataset.sbm_nodes", c.dataset.sbm.n_nodes),
        FASD_FIELD("dataset.sbm_group_fraction", c.dataset.sbm.group_fraction),
        FASD_FIELD("dataset.sbm_homophily", c.dataset.sbm.homophily),
        FASD_FIELD("dataset.sbm_cross_prob", c.dataset.sbm.cross_prob),
        FASD_FIELD("dataset.sbm_label_bias", c.dataset.sbm.label_bias),
        FASD_FIELD("dataset.sbm_feature_leak", c.dataset.sbm.feature_leak),
        FASD_FIELD("dataset.sbm_features", c.dataset.sbm.n_features),
        FASD_FIELD("dataset.sbm_label_signal", c.dataset.sbm.label_signal),
        FASD_FIELD("dataset.sbm_label_features", c.dataset.sbm.label_features),

        FASD_FIELD("sampler.depth", c.sampler.depth),
        FASD_FIELD("sampler.fanout", c.sampler.fanout),
        FASD_FIELD("sampler.full_induction", c.sampler.full_induction),
        FASD_FIELD("sampler.per_node_depth", c.sampler.per_node_depth),

        FASD_FIELD("diffusion.beta_x_min", c.diffusion.x.beta_min),
        FASD_FIELD("diffusion.beta_x_max", c.diffusion.x.beta_max),
        FASD_FIELD("diffusion.beta_a_min", c.diffusion.a.beta_min),
        FASD_FIELD("diffusion.beta_a_max", c.diffusion.a.beta_max),
        FASD_FIELD("diffusion.lambda_x", c.diffusion.lambda_x),
        FASD_FIELD("diffusion.lambda_a", c.diffusion.lambda_a),
        FASD_FIELD("diffusion.maxiters", c.diffusion.maxiters),
        FASD_FIELD("diffusion.lr", c.diffusion.lr),
        FASD_FIELD("diffusion.weight_decay", c.diffusion.weight_decay),
        FASD_FIELD("diffusion.batch_size", c.diffusion.batch_size),
        FASD_FIELD("diffusion.hidden", c.score_arch.hidden),
        FASD_FIELD("diffusion.theta_layers", c.score_arch.theta_layers),
        FASD_FIELD("diffusion.phi_layers", c.score_arch.phi_layers),
        FASD_FIELD("diffusion.heads", c.score_arch.heads),
        FASD_FIELD("diffusion.powers", c.score_arch.powers),
        FASD_FIELD("diffusion.mlp_layers", c.score_arch.mlp_layers),
        FASD_FIELD("diffusion.sen_epochs", c.sen_train.epochs),
        FASD_FIELD("diffusion.sen_lr", c.sen_train.lr),
        FASD_FIELD("diffusion.sen_weight_decay", c.sen_train.weight_decay),
        FASD_FIELD("diffusion.sen_batch_size", c.sen_train.batch_size),
        FASD_FIELD("diffusion.sen_hidden", c.sen_arch.hidden),
        FASD_FIELD("diffusion.sen_dropout", c.sen_arch.dropout),

        FASD_FIELD("reverse.n_steps", c.reverse.n_steps),
        FASD_FIELD("reverse.snr_x", c.reverse.snr_x),
        FASD_FIELD("reverse.snr_a", c.reverse.snr_a),
        FASD_FIELD("reverse.tau", c.reverse.tau),
        FASD_FIELD("reverse.sigma_scaled_scores", c.reverse.sigma_scaled_scores),

        FASD_FIELD("classifier.epochs", c.cls_train.epochs),
        FASD_FIELD("classifier.lr", c.cls_train.lr),
        FASD_FIELD("classifier.weight_decay", c.cls_train.weight_decay),
        FASD_FIELD("classifier.batch_size", c.cls_train.batch_size),
        FASD_FIELD("classifier.hidden", c.cls_arch.hidden),
        FASD_FIELD("classifier.dropout", c.cls_arch.dropout),

        FASD_FIELD("run.seeds", c.seeds),
        FASD_FIELD("run.mode", c.mode),
        FASD_FIELD("run.sweep_param", c.sweep_param),
        FASD_FIELD("run.sweep_values", c.sweep_values),
    };
    m["dataset.sbm_seed"] = {[](ExperimentConfig& c, std::string_view v) {
                               assign("dataset.sbm_seed", v, c.dataset.sbm.seed);
                               c.dataset.sbm_seed_from_run = false;
                             },
                             [](const ExperimentConfig& c) {
                               return c.dataset.sbm_seed_from_run ? std::string("run") : text(c.dataset.sbm.seed);
                             }};
    m["diffusion.lambda"] = {[](ExperimentConfig& c, std::string_view v) {
                               assign("diffusion.lambda", v, c.diffusion.lambda_x);
                               c.diffusion.lambda_a = c.diffusion.lambda_x;
                             },
                             {}};
    m["diffusion.t_floor"] = {[](ExperimentConfig& c, std::string_view v) {
                                assign("diffusion.t_floor", v, c.diffusion.x.t_floor);
                                c.diffusion.a.t_floor = c.diffusion.x.t_floor;
                              },
                              [](const ExperimentConfig& c) { return text(c.diffusion.x.t_floor); }};
    return m;
  }();
  return f;
}

#undef FASD_FIELD

void sync_kernels(ExperimentConfig& c) {
  c.reverse.x = c.diffusion.x;
  c.reverse.a = c.diffusion.a;
}

void check_train(const TrainOptions& t, const std::string& what) {
  if (t.epochs < 0) throw ConfigError(what + ": epochs must be >= 0");
  if (!(t.lr > 0.0)) throw ConfigError(what + ": lr must be positive");
  if (t.weight_decay < 0.0) throw ConfigError(what + ": weight_decay must be >= 0");
  if (t.batch_size < 1) throw ConfigError(what + ": batch_size must be >= 1");
}

void check_arch(const GcnClassifierArch& a, const std::string& what) {
  for (Index h : a.hidden)
    if (h < 1) throw ConfigError(what + ": hidden sizes must be >= 1");
  if (!(a.dropout >= 0.0 && a.dropout < 1.0)) throw ConfigError(what + ": dropout must lie in [0,1)");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset.source == "sbm") {
    dataset.sbm.validate();
  } else if (dataset.source == "files") {
    if (dataset.nodes.empty() || dataset.edges.empty())
      throw ConfigError("dataset: files source needs nodes and edges paths");
  } else {
    throw ConfigError("dataset.source must be sbm or files");
  }
  const auto& f = dataset.split;
  if (f.train < 0 || f.val < 0 || f.test < 0 || f.train + f.val + f.test > 1.0 + 1e-9)
    throw ConfigError("dataset.split: fractions must be >= 0 and sum to at most 1");
  sampler.validate();
  diffusion.validate();
  score_arch.validate();
  ExperimentConfig c = *this;
  sync_kernels(c);
  c.reverse.validate();
  check_train(sen_train, "diffusion.sen");
  check_arch(sen_arch, "diffusion.sen");
  check_train(cls_train, "classifier");
  check_arch(cls_arch, "classifier");
  if (seeds.empty()) throw ConfigError("run.seeds must list at least one seed");
  if (!sweep_param.empty() && fields().count(sweep_param) == 0)
    throw ConfigError("run.sweep_param: unknown key '" + sweep_param + "'");
}

ExperimentConfig ExperimentConfig::effective() const {
  ExperimentConfig c = *this;
  if (c.mode == Mode::NoFairness) {
    c.diffusion.lambda_x = 0.0;
    c.diffusion.lambda_a = 0.0;
  }
  sync_kernels(c);
  return c;
}

void set_config_value(ExperimentConfig& cfg, std::string_view dotted_key, std::string_view value) {
  auto it = fields().find(std::string(dotted_key));
  if (it == fields().end()) throw ConfigError("unknown config key '" + std::string(dotted_key) + "'");
  it->second.set(cfg, value);
  sync_kernels(cfg);
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  static const std::set<std::string> sections{"dataset", "sampler", "diffusion", "reverse", "classifier", "run"};
  std::string section;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!sections.count(section)) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of a section");
    const std::string key = section + "." + trim(std::string_view(line).substr(0, eq));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key " + key);
    try {
      set_config_value(cfg, key, std::string_view(line).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  for (auto* p : {&cfg.dataset.nodes, &cfg.dataset.edges, &cfg.dataset.splits})
    if (!p->empty() && p->is_relative() && !base_dir.empty()) *p = base_dir / *p;
  sync_kernels(cfg);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path());
}

std::string canonical_config(const ExperimentConfig& cfg, const std::vector<std::string>& prefixes) {
  std::string out;
  for (const auto& [key, f] : fields()) {
    if (!f.get) continue;
    if (!prefixes.empty() && std::none_of(prefixes.begin(), prefixes.end(),
                                          [&](const std::string& p) { return key.rfind(p, 0) == 0; }))
      continue;
    out += key + "=" + f.get(cfg) + "\n";
  }
  return out;
}

std::string canonical_config(const ExperimentConfig& cfg) { return canonical_config(cfg, {}); }

std::string fingerprint(std::string_view canonical) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical)));
  return buf;
}

std::string config_fingerprint(const ExperimentConfig& cfg) { return fingerprint(canonical_config(cfg)); }

}  // namespace fasd
