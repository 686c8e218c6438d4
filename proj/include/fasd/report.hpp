#pragma once

#include "fasd/config.hpp"
#include "fasd/fair_classifier.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fasd {

struct SeedResult {
  std::uint64_t seed = 0;
  MetricEntry metrics;
  std::size_t excluded = 0;  // test nodes contained in no subgraph
  std::size_t subgraphs = 0;
};

struct MetricSummary {
  std::optional<double> mean, std;  // over seeds where the metric is defined; std is the sample deviation
  std::vector<std::optional<double>> per_seed;
};

struct FairnessReport {
  std::string run_id;
  std::string config_fingerprint;
  Mode mode = Mode::Full;
  std::vector<std::uint64_t> seeds;
  std::vector<SeedResult> per_seed;
  MetricSummary acc, dp, eo;
};

MetricSummary summarize(const std::vector<std::optional<double>>& values);

FairnessReport make_report(const ExperimentConfig& cfg, std::vector<SeedResult> results);

std::string report_json(const FairnessReport& r);
/// `seed,acc,dp,eo` rows, then `mean,...` and `std,...`; undefined values are empty.
std::string per_seed_csv(const FairnessReport& r);

/// report.json and per_seed.csv under out_dir (created when missing).
void emit_report(const FairnessReport& r, const std::filesystem::path& out_dir);

struct SweepRow {
  std::string value;
  FairnessReport report;
};

std::string sweep_csv(const std::string& param, const std::vector<SweepRow>& rows);

}  // namespace fasd
