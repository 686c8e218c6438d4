#pragma once

// Staged per-seed execution. Every stage checkpoints under out/seed-N/ and,
// when resuming, reuses a checkpoint whose stage fingerprint matches.

#include "fasd/config.hpp"
#include "fasd/report.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>

namespace fasd {

enum class Stage { Sample, TrainSensitive, TrainScores, Debias, TrainClassifier, Evaluate };

const char* stage_name(Stage s);

/// A stage failure, tagged with stage, seed and the exit code of the
/// underlying error category.
class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, std::uint64_t seed, const std::string& what, int exit_code);
  Stage stage() const { return stage_; }
  std::uint64_t seed() const { return seed_; }
  int exit_code() const { return exit_code_; }

 private:
  Stage stage_;
  std::uint64_t seed_;
  int exit_code_;
};

struct RunOptions {
  bool write_artifacts = true;  // false keeps everything in memory
  bool resume = true;
  std::ostream* log = nullptr;
};

/// Builds or loads the graph for a seed, with splits applied and features
/// standardised when configured.
Graph load_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

struct SeedRun {
  Graph graph;
  std::vector<Subgraph> subgraphs;
  std::optional<SensitiveModelParams> g_sen;
  std::optional<ScoreModelParams> scores;
  std::vector<Subgraph> train_set;  // debiased, or the raw subgraphs without diffusion
  std::optional<ClassifierParams> classifier;
  std::optional<SeedResult> result;
};

/// Runs every stage up to and including `until` for one seed. The ablation
/// mode of cfg decides which stages apply.
SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed, Stage until, const std::filesystem::path& out_dir,
                 const RunOptions& opt = {});

/// All seeds, then report emission under out_dir when writing artifacts.
FairnessReport run_pipeline(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                            const RunOptions& opt = {});

/// One pipeline per value of `param` under out_dir/<param>=<value>/, then sweep.csv.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const std::string& param,
                                const std::vector<std::string>& values, const std::filesystem::path& out_dir,
                                const RunOptions& opt = {});

}  // namespace fasd
