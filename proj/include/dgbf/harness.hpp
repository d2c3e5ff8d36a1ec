#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dgbf/ensemble.hpp"
#include "dgbf/metrics.hpp"
#include "dgbf/tabular.hpp"

namespace dgbf::harness {

inline constexpr const char* kVersion = "1.0.0";

struct ModelSpec {
  std::string label;
  ForestConfig config;
};

// gbdt-100 (depth 3, lr 0.1), rf-100 (unbounded depth) and dgbf L=5/T=20 at
// depth 10: the three-way comparison used by `reproduce`.
std::vector<ModelSpec> standard_models(std::uint64_t seed = 0);

struct ExperimentSpec {
  std::string dataset_name;
  std::filesystem::path dataset_path;  // used by the path-based overloads
  std::string target_column;
  Index n_simulations = 20;
  std::vector<ModelSpec> models;
  double train_fraction = 0.8;
  Index ablation_k = 0;
  std::uint64_t master_seed = 0;
  Index threads = 1;  // simulations run in parallel; each fit is single-threaded
};

struct ModelResult {
  std::string label;
  ForestConfig config;
  metrics::ScoreSummary scores;  // adjusted R² on the test split, one per simulation
  std::vector<double> fit_seconds;
  std::vector<std::uint64_t> split_hashes;  // hash of (train, test) seen by each fit
};

struct PairDiff {
  std::string a;
  std::string b;
  metrics::ScoreSummary diff;  // a - b
};

struct ExperimentReport {
  ExperimentSpec spec;
  Index n_rows = 0;
  Index n_features = 0;  // features used at fit time (after ablation)
  std::vector<ModelResult> models;
  std::vector<PairDiff> paired;  // (later model) - (earlier model) for every pair

  [[nodiscard]] const ModelResult& model(const std::string& label) const;
  [[nodiscard]] const PairDiff& pair(const std::string& a, const std::string& b) const;
};

// Simulation i splits with seed master_seed + i for every model; each model is
// fitted with seed config.seed + master_seed + i.
ExperimentReport run_precision(const tabular::Dataset& data, const ExperimentSpec& spec);
ExperimentReport run_precision(const ExperimentSpec& spec);
// As run_precision, with drop_features(ablation_k, seed = master_seed + i)
// applied before each split.
ExperimentReport run_ablation(const tabular::Dataset& data, const ExperimentSpec& spec);
ExperimentReport run_ablation(const ExperimentSpec& spec);

struct TimingSeries {
  std::string label;
  std::vector<double> median_seconds;
  metrics::LinearFit fit;  // seconds against n * log2(n)
};

struct TimingReport {
  std::vector<Index> sizes;
  Index n_features = 5;
  Index repeats = 1;
  std::uint64_t seed = 0;
  std::vector<TimingSeries> series;
};

// Synthetic regression data: uniform features, linear target plus noise.
tabular::Dataset synthetic_dataset(Index n_rows, Index n_features, std::uint64_t seed);

TimingReport run_timing(const std::vector<ModelSpec>& models, const std::vector<Index>& sizes,
                        Index n_features = 5, Index repeats = 3, std::uint64_t seed = 0);

// Report documents. The stable top-level keys are spec, raw_scores,
// summaries, paired_diffs and timings; see docs/report-format.md.
std::string report_to_json(const ExperimentReport& report, bool include_timings = true);
std::string timing_to_json(const TimingReport& report);

// SVG 1.1 histogram: one translucent series per model, 20 shared bins.
std::string render_histogram_svg(const ExperimentReport& report);
void render_histograms(const ExperimentReport& report, const std::filesystem::path& out);

// Tab-separated summary rows: dataset, mean scores of gbdt, rf, dgbf,
// then mean and std of dgbf-gbdt and dgbf-rf.
std::string summary_table_header();
std::string summary_table_row(const ExperimentReport& report);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace dgbf::harness
