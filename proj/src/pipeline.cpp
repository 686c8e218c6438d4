#include "fasd/pipeline.hpp"

#include "fasd/checkpoint.hpp"
#include "fasd/errors.hpp"
#include "fasd/io.hpp"

#include <algorithm>
#include <sstream>

namespace fasd {

namespace fs = std::filesystem;

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Sample: return "sample";
    case Stage::TrainSensitive: return "train-sensitive";
    case Stage::TrainScores: return "train-scores";
    case Stage::Debias: return "debias";
    case Stage::TrainClassifier: return "train-classifier";
    case Stage::Evaluate: return "evaluate";
  }
  return "?";
}

StageError::StageError(Stage stage, std::uint64_t seed, const std::string& what, int exit_code)
    : std::runtime_error(std::string("stage ") + stage_name(stage) + ", seed " + std::to_string(seed) + ": " + what),
      stage_(stage),
      seed_(seed),
      exit_code_(exit_code) {}

Graph load_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto& d = cfg.dataset;
  Graph g;
  if (d.source == "sbm") {
    SbmBiasConfig sbm = d.sbm;
    if (d.sbm_seed_from_run) sbm.seed = seed;
    g = generate_biased_sbm(sbm);
    if (d.include_sensitive) {
      Tensor x(g.n_nodes(), g.n_features() + 1);
      x.leftCols(g.n_features()) = g.features;
      for (Index u = 0; u < g.n_nodes(); ++u) x(u, g.n_features()) = g.sensitive[std::size_t(u)];
      g.features = std::move(x);
    }
    if (d.standardize) standardize_columns(g.features);
  } else {
    g = load_graph(d.nodes, d.edges, d.splits, {d.standardize, d.include_sensitive});
  }
  const bool has_split =
      std::any_of(g.split.begin(), g.split.end(), [](Split s) { return s != Split::None; });
  if (!has_split) g = split_nodes(g, d.split, seed);
  return g;
}

namespace {

struct Ctx {
  const ExperimentConfig& cfg;
  std::uint64_t seed;
  fs::path dir;
  const RunOptions& opt;

  void log(const std::string& msg) const {
    if (opt.log) *opt.log << "seed " << seed << ": " << msg << '\n';
  }
  bool writing() const { return opt.write_artifacts; }
};

std::string stage_key(const Ctx& c, Stage s) {
  std::vector<std::string> prefixes{"dataset.", "sampler."};
  if (s >= Stage::TrainSensitive) prefixes.push_back("diffusion.sen_");
  if (s >= Stage::TrainScores) prefixes.push_back("diffusion.");
  if (s >= Stage::Debias) prefixes.push_back("reverse.");
  if (s >= Stage::TrainClassifier) prefixes.push_back("classifier.");
  std::string key = canonical_config(c.cfg, prefixes);
  key += "seed=" + std::to_string(c.seed) + "\n";
  if (s >= Stage::TrainScores) key += std::string("mode=") + mode_name(c.cfg.mode) + "\n";
  return fingerprint(key);
}

std::optional<Checkpoint> try_resume(const Ctx& c, Stage s, const fs::path& path) {
  if (!c.writing() || !c.opt.resume || !fs::exists(path)) return std::nullopt;
  try {
    Checkpoint ck = load_checkpoint(path);
    if (ck.contains("meta/fingerprint") && ck.string("meta/fingerprint") == stage_key(c, s)) {
      c.log(std::string(stage_name(s)) + ": resumed from " + path.filename().string());
      return ck;
    }
  } catch (const DataError&) {
  }
  c.log(std::string(stage_name(s)) + ": stale checkpoint ignored");
  return std::nullopt;
}

Checkpoint stamped(const Ctx& c, Stage s) {
  Checkpoint ck;
  ck.add_string("meta/fingerprint", stage_key(c, s));
  ck.add_string("meta/stage", stage_name(s));
  ck.add_scalar("meta/seed", double(c.seed));
  return ck;
}

void store_set(Checkpoint& ck, const std::vector<Subgraph>& set, bool with_features) {
  ck.add_scalar("set/count", double(set.size()));
  ck.add_scalar("set/with_features", with_features ? 1.0 : 0.0);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& s = set[i];
    const std::string p = "set/" + std::to_string(i) + "/";
    std::vector<double> ids(s.parent_ids.begin(), s.parent_ids.end());
    ck.add_vector(p + "parent_ids", ids);
    std::vector<double> edges;
    for (Index u = 0; u < s.size(); ++u)
      for (Index v = u + 1; v < s.size(); ++v)
        if (s.adjacency(u, v) != 0.0) edges.insert(edges.end(), {double(u), double(v), s.adjacency(u, v)});
    const auto n_edges = std::uint64_t(edges.size() / 3);
    ck.add(p + "edges", {n_edges, 3}, std::move(edges));
    if (with_features) ck.add(p + "features", s.features);
  }
}

std::vector<Subgraph> load_set(const Checkpoint& ck, const Graph& g) {
  const auto n = std::size_t(ck.scalar("set/count"));
  const bool with_features = ck.scalar("set/with_features") != 0.0;
  std::vector<Subgraph> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "set/" + std::to_string(i) + "/";
    std::vector<Index> ids;
    for (double v : ck.vector(p + "parent_ids")) ids.push_back(Index(v));
    Subgraph s = induce(g, std::move(ids), {});
    const Tensor e = ck.tensor(p + "edges");
    for (Index k = 0; k < e.rows() && e.cols() == 3; ++k) {
      const Index u = Index(e(k, 0)), v = Index(e(k, 1));
      if (u < 0 || v < 0 || u >= s.size() || v >= s.size()) throw DataError("checkpoint edge out of range");
      s.adjacency(u, v) = s.adjacency(v, u) = e(k, 2);
    }
    if (with_features) {
      Tensor x = ck.tensor(p + "features");
      if (x.rows() != s.size() || x.cols() != g.n_features()) throw DataError("checkpoint features have wrong shape");
      s.features = std::move(x);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_curve(const fs::path& path, const std::string& header, const std::vector<double>& v) {
  std::ostringstream os;
  os << header << '\n';
  os.precision(10);
  for (std::size_t i = 0; i < v.size(); ++i) os << i << ',' << v[i] << '\n';
  write_file_atomic(path, os.str());
}

template <typename F>
auto guarded(const Ctx& c, Stage s, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw StageError(s, c.seed, e.what(), 2);
  } catch (const DataError& e) {
    throw StageError(s, c.seed, e.what(), 3);
  } catch (const std::exception& e) {
    throw StageError(s, c.seed, e.what(), 4);
  }
}

std::vector<Subgraph> stage_sample(const Ctx& c, const Graph& g) {
  const fs::path path = c.dir / "subgraphs.ckpt";
  if (auto ck = try_resume(c, Stage::Sample, path)) return load_set(*ck, g);
  auto set = build_subgraph_set(g, c.cfg.sampler, c.seed);
  c.log("sample: " + std::to_string(set.size()) + " subgraphs");
  if (c.writing()) {
    Checkpoint ck = stamped(c, Stage::Sample);
    store_set(ck, set, false);
    save_checkpoint(ck, path);
    dump_subgraphs(set, c.dir / "subgraphs.jsonl");
  }
  return set;
}

SensitiveModelParams stage_sensitive(const Ctx& c, const std::vector<Subgraph>& set, Index in_dim) {
  Rng init = substream(c.seed, "sen_init");
  SensitiveModelParams p = init_sensitive_model(in_dim, init, c.cfg.sen_arch);
  const fs::path path = c.dir / "g_sen.ckpt";
  if (auto ck = try_resume(c, Stage::TrainSensitive, path)) {
    load_params(*ck, p);
    return p;
  }
  Rng rng = substream(c.seed, "sen_train");
  const auto curve = train_g_sen(p, set, c.cfg.sen_train, rng);
  c.log("train-sensitive: adversary accuracy " + std::to_string(sen_accuracy(p, set)));
  if (c.writing()) {
    Checkpoint ck = stamped(c, Stage::TrainSensitive);
    store_params(ck, p);
    save_checkpoint(ck, path);
    write_curve(c.dir / "sen_curve.csv", "epoch,loss", curve);
  }
  return p;
}

ScoreModelParams stage_scores(const Ctx& c, const std::vector<Subgraph>& set, const SensitiveModelParams* g_sen,
                              Index in_dim) {
  Rng init = substream(c.seed, "score_init");
  ScoreModelParams m = init_score_models(in_dim, c.cfg.score_arch, init);
  const fs::path path = c.dir / "scores.ckpt";
  if (auto ck = try_resume(c, Stage::TrainScores, path)) {
    load_params(*ck, m);
    return m;
  }
  const auto curve = train_score_models(m, set, g_sen, c.cfg.diffusion, c.seed);
  if (!curve.empty())
    c.log("train-scores: final losses " + std::to_string(curve.back().loss_theta) + " / " +
          std::to_string(curve.back().loss_phi));
  if (c.writing()) {
    Checkpoint ck = stamped(c, Stage::TrainScores);
    store_params(ck, m);
    save_checkpoint(ck, path);
    std::ostringstream os;
    os.precision(10);
    os << "iter,loss_theta,loss_phi\n";
    for (const auto& p : curve) os << p.iter << ',' << p.loss_theta << ',' << p.loss_phi << '\n';
    write_file_atomic(c.dir / "score_curve.csv", os.str());
  }
  return m;
}

std::vector<Subgraph> stage_debias(const Ctx& c, const Graph& g, const std::vector<Subgraph>& set,
                                   const ScoreModelParams& m) {
  const fs::path path = c.dir / "debiased.ckpt";
  if (auto ck = try_resume(c, Stage::Debias, path)) return load_set(*ck, g);
  auto out = debias_set(set, m, c.cfg.reverse, c.seed);
  std::size_t before = 0, after = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    before += set[i].n_edges();
    after += out[i].n_edges();
  }
  c.log("debias: edges " + std::to_string(before) + " -> " + std::to_string(after));
  if (c.writing()) {
    Checkpoint ck = stamped(c, Stage::Debias);
    store_set(ck, out, true);
    save_checkpoint(ck, path);
    dump_subgraphs(out, c.dir / "debiased.jsonl", true);
    write_edge_counts(set, out, c.dir / "edge_counts.csv");
  }
  return out;
}

ClassifierParams stage_classifier(const Ctx& c, const std::vector<Subgraph>& set, Index in_dim) {
  Rng init = substream(c.seed, "cls_init");
  ClassifierParams p = init_classifier(in_dim, init, c.cfg.cls_arch);
  const fs::path path = c.dir / "classifier.ckpt";
  if (auto ck = try_resume(c, Stage::TrainClassifier, path)) {
    load_params(*ck, p);
    return p;
  }
  Rng rng = substream(c.seed, "cls_train");
  const auto curve = train_classifier(p, set, c.cfg.cls_train, rng);
  if (c.writing()) {
    Checkpoint ck = stamped(c, Stage::TrainClassifier);
    store_params(ck, p);
    save_checkpoint(ck, path);
    write_curve(c.dir / "classifier_curve.csv", "epoch,loss", curve);
  }
  return p;
}

SeedResult stage_evaluate(const Ctx& c, const Graph& g, const std::vector<Subgraph>& set, const ClassifierParams& p) {
  const NodePredictions pred = predict_nodes(set, p, g.n_nodes());
  std::vector<std::uint8_t> mask(std::size_t(g.n_nodes()), 0);
  SeedResult r;
  r.seed = c.seed;
  r.subgraphs = set.size();
  for (Index u = 0; u < g.n_nodes(); ++u) {
    if (g.split[std::size_t(u)] != Split::Test) continue;
    if (pred.count[std::size_t(u)] == 0) {
      ++r.excluded;
      continue;
    }
    mask[std::size_t(u)] = 1;
  }
  if (r.excluded) c.log("evaluate: " + std::to_string(r.excluded) + " test nodes in no subgraph were excluded");
  r.metrics = fairness_metrics(pred.label, g.labels, g.sensitive, mask);
  return r;
}

}  // namespace

SeedRun run_seed(const ExperimentConfig& cfg_in, std::uint64_t seed, Stage until, const fs::path& out_dir,
                 const RunOptions& opt) {
  const ExperimentConfig cfg = cfg_in.effective();
  Ctx c{cfg, seed, out_dir / ("seed-" + std::to_string(seed)), opt};
  if (c.writing()) fs::create_directories(c.dir);

  SeedRun run;
  run.graph = guarded(c, Stage::Sample, [&] { return load_dataset(cfg, seed); });
  const Index d = run.graph.n_features();
  run.subgraphs = guarded(c, Stage::Sample, [&] { return stage_sample(c, run.graph); });
  if (until == Stage::Sample) return run;

  const bool diffuse = cfg.mode != Mode::NoDiffusion;
  const bool fair = diffuse && cfg.diffusion.fairness();
  if (fair) run.g_sen = guarded(c, Stage::TrainSensitive, [&] { return stage_sensitive(c, run.subgraphs, d); });
  else c.log("train-sensitive: skipped");
  if (until == Stage::TrainSensitive) return run;

  if (diffuse) {
    run.scores = guarded(c, Stage::TrainScores, [&] {
      return stage_scores(c, run.subgraphs, run.g_sen ? &*run.g_sen : nullptr, d);
    });
  } else {
    c.log("train-scores: skipped");
  }
  if (until == Stage::TrainScores) return run;

  if (diffuse) {
    run.train_set = guarded(c, Stage::Debias, [&] { return stage_debias(c, run.graph, run.subgraphs, *run.scores); });
  } else {
    c.log("debias: skipped");
    run.train_set = run.subgraphs;
  }
  if (until == Stage::Debias) return run;

  run.classifier = guarded(c, Stage::TrainClassifier, [&] { return stage_classifier(c, run.train_set, d); });
  if (until == Stage::TrainClassifier) return run;

  run.result = guarded(c, Stage::Evaluate, [&] { return stage_evaluate(c, run.graph, run.train_set, *run.classifier); });
  return run;
}

FairnessReport run_pipeline(const ExperimentConfig& cfg, const fs::path& out_dir, const RunOptions& opt) {
  cfg.validate();
  std::vector<SeedResult> results;
  for (auto seed : cfg.seeds) results.push_back(*run_seed(cfg, seed, Stage::Evaluate, out_dir, opt).result);
  FairnessReport r = make_report(cfg, std::move(results));
  if (opt.write_artifacts) emit_report(r, out_dir);
  return r;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const std::string& param,
                                const std::vector<std::string>& values, const fs::path& out_dir,
                                const RunOptions& opt) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  std::vector<SweepRow> rows;
  for (const auto& v : values) {
    ExperimentConfig c = cfg;
    set_config_value(c, param, v);
    c.validate();
    rows.push_back({v, run_pipeline(c, out_dir / (param + "=" + v), opt)});
  }
  if (opt.write_artifacts) write_file_atomic(out_dir / "sweep.csv", sweep_csv(param, rows));
  return rows;
}

}  // namespace fasd
