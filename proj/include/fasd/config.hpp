#pragma once

// Sectioned key=value experiment configuration:
//
//   [dataset]
//   source = sbm
//   sbm_nodes = 300
//   [run]
//   seeds = 1,2,3
//
// '#' starts a comment. Unknown sections or keys are errors.

#include "fasd/diffusion.hpp"
#include "fasd/fair_classifier.hpp"
#include "fasd/graph_data.hpp"
#include "fasd/reverse.hpp"
#include "fasd/sensitive_model.hpp"
#include "fasd/subgraph.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fasd {

enum class Mode { Full, NoDiffusion, NoFairness };

const char* mode_name(Mode m);
Mode parse_mode(std::string_view s);

struct DatasetConfig {
  std::string source = "sbm";  // sbm | files
  std::filesystem::path nodes, edges, splits;
  SplitFractions split;
  bool standardize = true;
  bool include_sensitive = false;
  SbmBiasConfig sbm;
  bool sbm_seed_from_run = true;  // sbm.seed follows the run seed unless set
};

struct ExperimentConfig {
  DatasetConfig dataset;
  SamplerConfig sampler;

  DiffusionConfig diffusion;
  ScoreArch score_arch;
  GcnClassifierArch sen_arch = sensitive_arch();
  TrainOptions sen_train = sensitive_train_defaults();

  SamplerParams reverse;  // kernels mirror diffusion.x / diffusion.a

  GcnClassifierArch cls_arch = classifier_arch();
  TrainOptions cls_train = classifier_train_defaults();

  std::vector<std::uint64_t> seeds{1};
  Mode mode = Mode::Full;
  std::string sweep_param;
  std::vector<std::string> sweep_values;

  void validate() const;
  /// Copy with the ablation applied (no_fairness zeroes both lambdas).
  ExperimentConfig effective() const;
};

/// Parses config text; relative dataset paths resolve against base_dir.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets one `section.key` value as if it appeared in the file.
void set_config_value(ExperimentConfig& cfg, std::string_view dotted_key, std::string_view value);

/// Every field as sorted `section.key=value` lines.
std::string canonical_config(const ExperimentConfig& cfg);
/// Same lines restricted to keys starting with one of the prefixes.
std::string canonical_config(const ExperimentConfig& cfg, const std::vector<std::string>& prefixes);

/// 16 hex digits of FNV-1a 64 over the canonical text.
std::string fingerprint(std::string_view canonical);
std::string config_fingerprint(const ExperimentConfig& cfg);

}  // namespace fasd
