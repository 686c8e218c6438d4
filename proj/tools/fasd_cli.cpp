#include "fasd/errors.hpp"
#include "fasd/io.hpp"
#include "fasd/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Common {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string out = "out";
  std::string mode;
  std::vector<std::string> overrides;
  bool no_resume = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seeds, "seed(s), replacing run.seeds");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--mode", c.mode, "full, no_diffusion or no_fairness");
  cmd->add_option("--set", c.overrides, "override a value, e.g. reverse.n_steps=4");
  cmd->add_flag("--no-resume", c.no_resume, "recompute stages even when checkpoints match");
  cmd->add_flag("-q,--quiet", c.quiet, "no progress output");
}

fasd::ExperimentConfig resolve(const Common& c) {
  fasd::ExperimentConfig cfg = fasd::load_config(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw fasd::ConfigError("--set expects key=value, got '" + kv + "'");
    fasd::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!c.seeds.empty()) cfg.seeds = c.seeds;
  if (!c.mode.empty()) cfg.mode = fasd::parse_mode(c.mode);
  cfg.validate();
  return cfg;
}

fasd::RunOptions options(const Common& c) {
  fasd::RunOptions o;
  o.resume = !c.no_resume;
  o.log = c.quiet ? nullptr : &std::cerr;
  return o;
}

void print_summary(const fasd::FairnessReport& r) {
  auto show = [](const char* name, const fasd::MetricSummary& s) {
    std::cout << name << ": ";
    if (s.mean) std::cout << 100.0 * *s.mean << " +- " << 100.0 * s.std.value_or(0.0);
    else std::cout << "undefined";
    std::cout << '\n';
  };
  std::cout << "run " << r.run_id << " (" << fasd::mode_name(r.mode) << ", " << r.seeds.size() << " seed(s))\n";
  show("acc", r.acc);
  show("dp ", r.dp);
  show("eo ", r.eo);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fairness-aware subgraph diffusion: debiased node classification"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    fasd::Stage stage;
  };
  const std::vector<Sub> stages{
      {"sample", "sample one subgraph per split node", fasd::Stage::Sample},
      {"train-sensitive", "train the sensitive-attribute adversary", fasd::Stage::TrainSensitive},
      {"train-scores", "train the feature and adjacency score networks", fasd::Stage::TrainScores},
      {"debias", "reverse-diffuse and prune every subgraph", fasd::Stage::Debias},
      {"train-classifier", "train the node classifier on the debiased set", fasd::Stage::TrainClassifier},
      {"evaluate", "evaluate and write the report", fasd::Stage::Evaluate},
  };

  Common common;
  std::vector<std::pair<CLI::App*, fasd::Stage>> stage_cmds;
  for (const auto& s : stages) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, common);
    stage_cmds.emplace_back(cmd, s.stage);
  }
  auto* pipeline = app.add_subcommand("pipeline", "run every stage and write the report");
  add_common(pipeline, common);
  auto* sweep = app.add_subcommand("sweep", "run the pipeline for each value of one parameter");
  add_common(sweep, common);
  std::string param;
  std::vector<std::string> values;
  sweep->add_option("--param", param, "config key, e.g. reverse.n_steps or diffusion.lambda");
  sweep->add_option("--values", values, "comma-separated values")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve(common);
    const auto opt = options(common);
    if (pipeline->parsed()) {
      print_summary(fasd::run_pipeline(cfg, common.out, opt));
      return 0;
    }
    if (sweep->parsed()) {
      const std::string p = param.empty() ? cfg.sweep_param : param;
      const auto v = values.empty() ? cfg.sweep_values : values;
      if (p.empty()) throw fasd::ConfigError("sweep: no parameter given (--param or run.sweep_param)");
      for (const auto& row : fasd::run_sweep(cfg, p, v, common.out, opt)) {
        std::cout << p << " = " << row.value << '\n';
        print_summary(row.report);
      }
      return 0;
    }
    for (const auto& [cmd, stage] : stage_cmds) {
      if (!cmd->parsed()) continue;
      if (stage == fasd::Stage::Evaluate) {
        print_summary(fasd::run_pipeline(cfg, common.out, opt));
        return 0;
      }
      for (auto seed : cfg.seeds) fasd::run_seed(cfg, seed, stage, common.out, opt);
      return 0;
    }
  } catch (const fasd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const fasd::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const fasd::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
