#include "fasd/errors.hpp"
#include "fasd/io.hpp"
#include "fasd/pipeline.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>

namespace fasd {
namespace {

namespace fs = std::filesystem;

const fs::path kSmoke = fs::path(FASD_CONFIG_DIR) / "sbm-smoke.cfg";

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "fasd-pipeline-test" / name;
  fs::remove_all(p);
  return p;
}

ExperimentConfig smoke(Mode mode = Mode::Full) {
  ExperimentConfig c = load_config(kSmoke);
  c.mode = mode;
  return c;
}

RunOptions in_memory() {
  RunOptions o;
  o.write_artifacts = false;
  return o;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FASD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

TEST(Pipeline, SmokeRunPopulatesMetrics) {
  auto r = run_pipeline(smoke(), {}, in_memory());
  ASSERT_EQ(r.per_seed.size(), 1u);
  ASSERT_TRUE(r.acc.mean && r.dp.mean && r.eo.mean);
  EXPECT_GE(*r.acc.mean, 0.0);
  EXPECT_LE(*r.acc.mean, 1.0);
  EXPECT_GT(r.per_seed[0].metrics.evaluated, 0u);
  EXPECT_EQ(r.config_fingerprint, config_fingerprint(smoke()));
}

TEST(Pipeline, NoDiffusionTrainsOnRawSubgraphs) {
  auto run = run_seed(smoke(Mode::NoDiffusion), 1, Stage::Evaluate, {}, in_memory());
  EXPECT_FALSE(run.g_sen);
  EXPECT_FALSE(run.scores);
  ASSERT_EQ(run.train_set.size(), run.subgraphs.size());
  for (std::size_t i = 0; i < run.subgraphs.size(); ++i) {
    EXPECT_EQ(run.train_set[i].features, run.subgraphs[i].features);
    EXPECT_EQ(run.train_set[i].adjacency, run.subgraphs[i].adjacency);
  }
  EXPECT_TRUE(run.result);
}

TEST(Pipeline, NoFairnessSkipsAdversary) {
  auto cfg = smoke(Mode::NoFairness);
  EXPECT_EQ(cfg.effective().diffusion.lambda_x, 0.0);
  auto run = run_seed(cfg, 1, Stage::Debias, {}, in_memory());
  EXPECT_FALSE(run.g_sen);
  EXPECT_TRUE(run.scores);
  EXPECT_EQ(run.train_set.size(), run.subgraphs.size());
}

TEST(Pipeline, FullModeDebiasesAndPrunes) {
  auto cfg = smoke();
  auto run = run_seed(cfg, 1, Stage::Debias, {}, in_memory());
  ASSERT_TRUE(run.g_sen);
  ASSERT_TRUE(run.scores);
  ASSERT_EQ(run.train_set.size(), run.subgraphs.size());
  for (const auto& s : run.train_set) {
    EXPECT_EQ(s.adjacency, Tensor(s.adjacency.transpose()));
    EXPECT_TRUE((s.adjacency.array() == 0 || s.adjacency.array() >= cfg.reverse.tau).all());
  }
}

TEST(Pipeline, ResumeReusesCheckpoints) {
  const auto out = scratch("resume");
  RunOptions o;
  auto first = run_pipeline(smoke(), out, o);
  ASSERT_TRUE(fs::exists(out / "seed-1" / "scores.ckpt"));
  const auto stamp = fs::last_write_time(out / "seed-1" / "scores.ckpt");
  std::ostringstream log;
  o.log = &log;
  auto second = run_pipeline(smoke(), out, o);
  EXPECT_EQ(report_json(first), report_json(second));
  EXPECT_EQ(fs::last_write_time(out / "seed-1" / "scores.ckpt"), stamp);

  // a changed classifier leaves earlier stages intact
  auto cfg = smoke();
  set_config_value(cfg, "classifier.epochs", "5");
  run_pipeline(cfg, out, o);
  EXPECT_EQ(fs::last_write_time(out / "seed-1" / "scores.ckpt"), stamp);
}

TEST(Pipeline, PerSeedCsvHasRowPerSeedAndFooter) {
  auto cfg = smoke(Mode::NoDiffusion);
  cfg.seeds = {1, 2, 3, 4, 5};
  set_config_value(cfg, "classifier.epochs", "5");
  const auto out = scratch("csv");
  run_pipeline(cfg, out);
  std::istringstream in(read_file(out / "per_seed.csv"));
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 8u);
  EXPECT_EQ(lines[0], "seed,acc,dp,eo");
  for (int i = 1; i <= 5; ++i) EXPECT_EQ(lines[std::size_t(i)].substr(0, 2), std::to_string(i) + ",");
  EXPECT_EQ(lines[6].substr(0, 5), "mean,");
  EXPECT_EQ(lines[7].substr(0, 4), "std,");

  auto j = nlohmann::json::parse(read_file(out / "report.json"));
  EXPECT_EQ(j["mode"], "no_diffusion");
  EXPECT_EQ(j["seeds"].size(), 5u);
  EXPECT_EQ(j["metrics"]["acc"]["per_seed"].size(), 5u);
}

TEST(Pipeline, SweepWritesOneRowPerValue) {
  auto cfg = smoke(Mode::NoDiffusion);
  set_config_value(cfg, "classifier.epochs", "3");
  const auto out = scratch("sweep");
  auto rows = run_sweep(cfg, "classifier.lr", {"1e-3", "1e-2"}, out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(fs::exists(out / "classifier.lr=1e-2" / "report.json"));
  std::istringstream in(read_file(out / "sweep.csv"));
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[2].substr(0, 19), "classifier.lr,1e-2,");
  EXPECT_THROW(run_sweep(cfg, "classifier.lr", {}, out), ConfigError);
}

TEST(Pipeline, MissingDataFilesAreStageErrors) {
  auto cfg = smoke();
  cfg.dataset.source = "files";
  cfg.dataset.nodes = "/nonexistent/nodes.csv";
  cfg.dataset.edges = "/nonexistent/edges.csv";
  try {
    run_seed(cfg, 1, Stage::Sample, {}, in_memory());
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), Stage::Sample);
    EXPECT_EQ(e.exit_code(), 3);
  }
}

TEST(Pipeline, BaselineClassifierIsBiased) {
  // strong leak and label bias: a plain classifier inherits the group gap
  ExperimentConfig cfg;
  cfg.mode = Mode::NoDiffusion;
  cfg.seeds = {1, 2, 3, 4, 5};
  set_config_value(cfg, "sampler.fanout", "5");
  set_config_value(cfg, "classifier.epochs", "50");
  auto r = run_pipeline(cfg, {}, in_memory());
  ASSERT_TRUE(r.dp.mean);
  EXPECT_GT(*r.dp.mean, 0.10);
}

TEST(Cli, PipelineIsByteIdenticalAcrossRuns) {
  const auto a = scratch("cli-a"), b = scratch("cli-b");
  ASSERT_EQ(run_cli("pipeline -q --config " + kSmoke.string() + " --out " + a.string()), 0);
  ASSERT_EQ(run_cli("pipeline -q --no-resume --config " + kSmoke.string() + " --out " + b.string()), 0);
  EXPECT_EQ(read_file(a / "report.json"), read_file(b / "report.json"));
  EXPECT_EQ(read_file(a / "per_seed.csv"), read_file(b / "per_seed.csv"));
  EXPECT_EQ(read_file(a / "seed-1" / "debiased.jsonl"), read_file(b / "seed-1" / "debiased.jsonl"));
}

TEST(Cli, StageCommandsAndOverrides) {
  const auto out = scratch("cli-stage");
  ASSERT_EQ(run_cli("sample -q --config " + kSmoke.string() + " --out " + out.string() + " --seed 7"), 0);
  EXPECT_TRUE(fs::exists(out / "seed-7" / "subgraphs.jsonl"));
  EXPECT_FALSE(fs::exists(out / "seed-7" / "g_sen.ckpt"));
  ASSERT_EQ(run_cli("evaluate -q --config " + kSmoke.string() + " --out " + out.string() +
                    " --seed 7 --mode no_diffusion --set classifier.epochs=3"),
            0);
  auto j = nlohmann::json::parse(read_file(out / "report.json"));
  EXPECT_EQ(j["mode"], "no_diffusion");
  EXPECT_EQ(j["seeds"], (std::vector<int>{7}));
}

TEST(Cli, ExitCodes) {
  const auto out = scratch("cli-errors");
  EXPECT_EQ(run_cli("pipeline"), 2);
  EXPECT_EQ(run_cli("pipeline -q --config " + kSmoke.string() + " --out " + out.string() + " --set nope.key=1"), 2);
  EXPECT_EQ(run_cli("pipeline -q --config " + kSmoke.string() + " --out " + out.string() + " --mode fast"), 2);
  EXPECT_EQ(run_cli("pipeline -q --config " + kSmoke.string() + " --out " + out.string() +
                    " --set dataset.source=files --set dataset.nodes=/nonexistent --set dataset.edges=/nonexistent"),
            3);
}

}  // namespace
}  // namespace fasd
