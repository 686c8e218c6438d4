#include "fasd/report.hpp"

#include "fasd/io.hpp"
#include "fasd/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>

namespace fasd {

MetricSummary summarize(const std::vector<std::optional<double>>& values) {
  MetricSummary s;
  s.per_seed = values;
  std::vector<double> v;
  for (const auto& x : values)
    if (x) v.push_back(*x);
  if (v.empty()) return s;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  s.mean = mean;
  s.std = v.size() > 1 ? std::sqrt(ss / double(v.size() - 1)) : 0.0;
  return s;
}

FairnessReport make_report(const ExperimentConfig& cfg, std::vector<SeedResult> results) {
  FairnessReport r;
  r.config_fingerprint = config_fingerprint(cfg);
  r.mode = cfg.mode;
  std::string id = r.config_fingerprint;
  for (const auto& s : results) {
    r.seeds.push_back(s.seed);
    id += "," + std::to_string(s.seed);
  }
  r.run_id = fingerprint(id);
  std::vector<std::optional<double>> acc, dp, eo;
  for (const auto& s : results) {
    acc.push_back(s.metrics.acc);
    dp.push_back(s.metrics.dp);
    eo.push_back(s.metrics.eo);
  }
  r.acc = summarize(acc);
  r.dp = summarize(dp);
  r.eo = summarize(eo);
  r.per_seed = std::move(results);
  return r;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

nlohmann::json summary_json(const MetricSummary& s) {
  nlohmann::json j;
  j["mean"] = opt(s.mean);
  j["std"] = opt(s.std);
  auto per = nlohmann::json::array();
  for (const auto& v : s.per_seed) per.push_back(opt(v));
  j["per_seed"] = std::move(per);
  return j;
}

std::string cell(const std::optional<double>& v) {
  if (!v) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}

}  // namespace

std::string report_json(const FairnessReport& r) {
  nlohmann::ordered_json j;
  j["run_id"] = r.run_id;
  j["config_fingerprint"] = r.config_fingerprint;
  j["mode"] = mode_name(r.mode);
  j["seeds"] = r.seeds;
  j["metrics"]["acc"] = summary_json(r.acc);
  j["metrics"]["dp"] = summary_json(r.dp);
  j["metrics"]["eo"] = summary_json(r.eo);
  auto excluded = nlohmann::json::array();
  for (const auto& s : r.per_seed) excluded.push_back(s.excluded);
  j["excluded_test_nodes"] = std::move(excluded);
  return j.dump(2) + "\n";
}

std::string per_seed_csv(const FairnessReport& r) {
  std::string out = "seed,acc,dp,eo\n";
  for (const auto& s : r.per_seed)
    out += std::to_string(s.seed) + "," + cell(s.metrics.acc) + "," + cell(s.metrics.dp) + "," + cell(s.metrics.eo) +
           "\n";
  out += "mean," + cell(r.acc.mean) + "," + cell(r.dp.mean) + "," + cell(r.eo.mean) + "\n";
  out += "std," + cell(r.acc.std) + "," + cell(r.dp.std) + "," + cell(r.eo.std) + "\n";
  return out;
}

void emit_report(const FairnessReport& r, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "report.json", report_json(r));
  write_file_atomic(out_dir / "per_seed.csv", per_seed_csv(r));
}

std::string sweep_csv(const std::string& param, const std::vector<SweepRow>& rows) {
  std::string out = "param,value,acc_mean,acc_std,dp_mean,dp_std,eo_mean,eo_std\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    out += param + "," + row.value + "," + cell(r.acc.mean) + "," + cell(r.acc.std) + "," + cell(r.dp.mean) + "," +
           cell(r.dp.std) + "," + cell(r.eo.mean) + "," + cell(r.eo.std) + "\n";
  }
  return out;
}

}  // namespace fasd
