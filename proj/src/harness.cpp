#include "dgbf/harness.hpp"

#include <fmt/core.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dgbf/rng.hpp"
#include "dgbf/sampling.hpp"
#include "config_json.hpp"
#include "parallel.hpp"

namespace dgbf::harness {

using json = nlohmann::ordered_json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::uint64_t split_hash(const tabular::SplitIndices& split) {
  return mix64(sampling::hash_index_set(split.train) ^ mix64(sampling::hash_index_set(split.test)));
}

ExperimentReport run_experiment(const tabular::Dataset& data, const ExperimentSpec& spec,
                                Index ablation_k) {
  if (spec.models.empty()) throw std::invalid_argument("experiment: no models");
  if (spec.n_simulations == 0) throw std::invalid_argument("experiment: n_simulations is 0");
  if (ablation_k > 0 && data.n_features() <= ablation_k) {
    throw tabular::DataError(fmt::format("ablation: cannot drop {} of {} features", ablation_k,
                                         data.n_features()));
  }

  ExperimentReport report;
  report.spec = spec;
  report.spec.ablation_k = ablation_k;
  report.n_rows = data.n_rows();
  report.n_features = data.n_features() - ablation_k;

  const Index n_models = spec.models.size();
  const Index n_sims = spec.n_simulations;
  std::vector<std::vector<double>> scores(n_models, std::vector<double>(n_sims));
  std::vector<std::vector<double>> seconds(n_models, std::vector<double>(n_sims));
  std::vector<std::vector<std::uint64_t>> hashes(n_models, std::vector<std::uint64_t>(n_sims));

  detail::parallel_for(n_sims, spec.threads, [&](Index sim) {
    const std::uint64_t sim_seed = spec.master_seed + sim;
    const tabular::Dataset source =
        ablation_k > 0 ? tabular::drop_features(data, ablation_k, sim_seed) : data;
    for (Index m = 0; m < n_models; ++m) {
      const auto split =
          tabular::split_indices(source.n_rows(), {spec.train_fraction, sim_seed});
      const auto train = tabular::select_rows(source, split.train);
      const auto test = tabular::select_rows(source, split.test);
      ForestConfig config = spec.models[m].config;
      config.seed += sim_seed;
      try {
        const auto start = std::chrono::steady_clock::now();
        const ForestModel model = fit(train.features, train.target, config);
        seconds[m][sim] = seconds_since(start);
        const auto pred = predict(model, test.features);
        scores[m][sim] = metrics::adjusted_r2(test.target, pred, source.n_features());
      } catch (const std::exception& e) {
        throw std::runtime_error(fmt::format("simulation {} (split seed {}), model '{}': {}", sim,
                                             sim_seed, spec.models[m].label, e.what()));
      }
      hashes[m][sim] = split_hash(split);
    }
  });

  for (Index m = 0; m < n_models; ++m) {
    ModelResult result;
    result.label = spec.models[m].label;
    result.config = spec.models[m].config;
    result.scores = metrics::summarize(scores[m]);
    result.fit_seconds = seconds[m];
    result.split_hashes = hashes[m];
    report.models.push_back(std::move(result));
  }
  for (Index i = 0; i < n_models; ++i) {
    for (Index j = i + 1; j < n_models; ++j) {
      report.paired.push_back({report.models[j].label, report.models[i].label,
                               metrics::paired_diff(scores[j], scores[i])});
    }
  }
  return report;
}

tabular::Dataset load_dataset(const ExperimentSpec& spec) {
  const auto table = tabular::load_csv(spec.dataset_path, spec.target_column);
  return tabular::preprocess(table, spec.target_column);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const Index n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<ModelSpec> standard_models(std::uint64_t seed) {
  ForestConfig gbdt = preset_gbdt(100);
  ForestConfig rf = preset_rf(100);
  ForestConfig dgbf;
  gbdt.seed = rf.seed = dgbf.seed = seed;
  return {{"gbdt", gbdt}, {"rf", rf}, {"dgbf", dgbf}};
}

const ModelResult& ExperimentReport::model(const std::string& label) const {
  for (const auto& m : models) {
    if (m.label == label) return m;
  }
  throw std::out_of_range(fmt::format("report has no model '{}'", label));
}

const PairDiff& ExperimentReport::pair(const std::string& a, const std::string& b) const {
  for (const auto& p : paired) {
    if (p.a == a && p.b == b) return p;
  }
  throw std::out_of_range(fmt::format("report has no pair '{} - {}'", a, b));
}

ExperimentReport run_precision(const tabular::Dataset& data, const ExperimentSpec& spec) {
  return run_experiment(data, spec, 0);
}

ExperimentReport run_precision(const ExperimentSpec& spec) {
  return run_precision(load_dataset(spec), spec);
}

ExperimentReport run_ablation(const tabular::Dataset& data, const ExperimentSpec& spec) {
  return run_experiment(data, spec, spec.ablation_k);
}

ExperimentReport run_ablation(const ExperimentSpec& spec) {
  return run_ablation(load_dataset(spec), spec);
}

tabular::Dataset synthetic_dataset(Index n_rows, Index n_features, std::uint64_t seed) {
  Rng rng(mix64(seed ^ mix64(n_rows)));
  tabular::Dataset data;
  data.features = Matrix(n_rows, n_features);
  data.target.resize(n_rows);
  for (Index i = 0; i < n_rows; ++i) {
    double y = 0.0;
    for (Index j = 0; j < n_features; ++j) {
      const double x = rng.uniform();
      data.features(i, j) = x;
      y += static_cast<double>(j + 1) * x;
    }
    data.target[i] = y + 0.1 * (rng.uniform() - 0.5);
  }
  for (Index j = 0; j < n_features; ++j) data.feature_names.push_back(fmt::format("x{}", j));
  return data;
}

TimingReport run_timing(const std::vector<ModelSpec>& models, const std::vector<Index>& sizes,
                        Index n_features, Index repeats, std::uint64_t seed) {
  if (sizes.size() < 2) throw std::invalid_argument("timing: need at least 2 sizes");
  for (Index i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) throw std::invalid_argument("timing: sizes must increase");
  }
  if (repeats == 0) throw std::invalid_argument("timing: repeats must be >= 1");
  TimingReport report;
  report.sizes = sizes;
  report.n_features = n_features;
  report.repeats = repeats;
  report.seed = seed;
  std::vector<double> complexity;
  for (Index n : sizes) {
    complexity.push_back(static_cast<double>(n) * std::log2(static_cast<double>(n)));
  }
  for (const auto& spec : models) {
    TimingSeries series;
    series.label = spec.label;
    for (Index n : sizes) {
      const auto data = synthetic_dataset(n, n_features, seed);
      std::vector<double> runs;
      for (Index r = 0; r < repeats; ++r) {
        const auto start = std::chrono::steady_clock::now();
        const ForestModel model = fit(data.features, data.target, spec.config, {1, {}});
        runs.push_back(seconds_since(start));
        if (model.layers.empty()) throw std::logic_error("timing: empty model");
      }
      series.median_seconds.push_back(median(runs));
    }
    series.fit = metrics::fit_line(complexity, series.median_seconds);
    report.series.push_back(std::move(series));
  }
  return report;
}

std::string report_to_json(const ExperimentReport& report, bool include_timings) {
  const auto& spec = report.spec;
  json models = json::array();
  for (const auto& m : report.models) {
    models.push_back(json{{"label", m.label}, {"config", modelio::detail::config_to_json(m.config)}});
  }
  json doc;
  doc["spec"] = json{{"artifact_version", kVersion},
                     {"dataset", spec.dataset_name},
                     {"target", spec.target_column},
                     {"n_rows", report.n_rows},
                     {"n_features", report.n_features},
                     {"n_simulations", spec.n_simulations},
                     {"train_fraction", spec.train_fraction},
                     {"ablation_k", spec.ablation_k},
                     {"master_seed", spec.master_seed},
                     {"models", models}};

  json raw;
  raw["models"] = json::array();
  raw["scores"] = json::array();
  for (const auto& m : report.models) {
    raw["models"].push_back(m.label);
    raw["scores"].push_back(m.scores.values);
  }
  raw["split_hashes"] = json::array();
  if (!report.models.empty()) {
    for (auto h : report.models.front().split_hashes) raw["split_hashes"].push_back(hex64(h));
  }
  doc["raw_scores"] = raw;

  json summaries = json::object();
  for (const auto& m : report.models) {
    summaries[m.label] = json{{"mean", m.scores.mean}, {"std", m.scores.std}, {"n", m.scores.n}};
  }
  doc["summaries"] = summaries;

  json pairs = json::array();
  for (const auto& p : report.paired) {
    pairs.push_back(json{{"a", p.a},
                         {"b", p.b},
                         {"mean", p.diff.mean},
                         {"std", p.diff.std},
                         {"n", p.diff.n},
                         {"values", p.diff.values}});
  }
  doc["paired_diffs"] = pairs;

  json timings = json::object();
  if (include_timings) {
    json fit_seconds = json::object();
    for (const auto& m : report.models) fit_seconds[m.label] = m.fit_seconds;
    timings["fit_seconds"] = fit_seconds;
  }
  doc["timings"] = timings;
  return doc.dump(2) + "\n";
}

std::string timing_to_json(const TimingReport& report) {
  json series = json::array();
  for (const auto& s : report.series) {
    series.push_back(json{{"label", s.label},
                          {"median_seconds", s.median_seconds},
                          {"slope", s.fit.slope},
                          {"intercept", s.fit.intercept},
                          {"r2", s.fit.r2}});
  }
  json doc;
  doc["spec"] = json{{"artifact_version", kVersion},
                     {"experiment", "timing"},
                     {"sizes", report.sizes},
                     {"n_features", report.n_features},
                     {"repeats", report.repeats},
                     {"seed", report.seed},
                     {"x_axis", "n*log2(n)"}};
  doc["raw_scores"] = json::object();
  doc["summaries"] = json::object();
  doc["paired_diffs"] = json::array();
  doc["timings"] = json{{"series", series}};
  return doc.dump(2) + "\n";
}

std::string render_histogram_svg(const ExperimentReport& report) {
  constexpr Index kBins = 20;
  constexpr double kWidth = 640, kHeight = 400;
  constexpr double kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
  static const char* kColors[] = {"#1f77b4", "#8c564b", "#2ca02c", "#d62728",
                                  "#9467bd", "#ff7f0e", "#17becf", "#7f7f7f"};
  if (report.models.empty()) throw std::invalid_argument("histogram: empty report");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& m : report.models) {
    for (double v : m.scores.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double bin_width = (hi - lo) / kBins;
  std::vector<std::vector<Index>> counts(report.models.size(), std::vector<Index>(kBins, 0));
  Index max_count = 1;
  for (Index m = 0; m < report.models.size(); ++m) {
    for (double v : report.models[m].scores.values) {
      auto b = static_cast<Index>((v - lo) / bin_width);
      b = std::min(b, kBins - 1);
      max_count = std::max(max_count, ++counts[m][b]);
    }
  }

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  std::string svg = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{:.0f}\" "
      "height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n"
      "<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n"
      "<text x=\"{:.1f}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" "
      "text-anchor=\"middle\">{} adjusted R2 over {} simulations</text>\n",
      kWidth, kHeight, kWidth, kHeight, kWidth, kHeight, kWidth / 2, report.spec.dataset_name,
      report.spec.n_simulations);
  svg += fmt::format(
      "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"black\"/>\n"
      "<line x1=\"{0:.1f}\" y1=\"{3:.1f}\" x2=\"{0:.1f}\" y2=\"{1:.1f}\" stroke=\"black\"/>\n",
      kLeft, kTop + plot_h, kLeft + plot_w, kTop);
  for (Index tick = 0; tick <= 4; ++tick) {
    const double frac = static_cast<double>(tick) / 4.0;
    const double x = kLeft + frac * plot_w;
    svg += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"middle\">{:.4f}</text>\n",
        x, kTop + plot_h + 16, lo + frac * (hi - lo));
  }
  svg += fmt::format(
      "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" "
      "text-anchor=\"end\">{}</text>\n",
      kLeft - 6, kTop + 4, max_count);
  const double bar_w = plot_w / kBins;
  for (Index m = 0; m < report.models.size(); ++m) {
    const char* color = kColors[m % std::size(kColors)];
    svg += fmt::format("<g fill=\"{}\" fill-opacity=\"0.45\" stroke=\"{}\">\n", color, color);
    for (Index b = 0; b < kBins; ++b) {
      if (counts[m][b] == 0) continue;
      const double h = plot_h * static_cast<double>(counts[m][b]) / static_cast<double>(max_count);
      svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\"/>\n",
                         kLeft + b * bar_w, kTop + plot_h - h, bar_w, h);
    }
    svg += "</g>\n";
    const double ly = kTop + 8 + 18 * static_cast<double>(m);
    svg += fmt::format(
        "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"12\" height=\"12\" fill=\"{}\" "
        "fill-opacity=\"0.45\" stroke=\"{}\"/>\n"
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"12\">{} "
        "(mean {:.4f})</text>\n",
        kLeft + plot_w - 150, ly, color, color, kLeft + plot_w - 132, ly + 10,
        report.models[m].label, report.models[m].scores.mean);
  }
  svg += "</svg>\n";
  return svg;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
  out << text;
  out.flush();
  if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

void render_histograms(const ExperimentReport& report, const std::filesystem::path& out) {
  write_text(out, render_histogram_svg(report));
}

std::string summary_table_header() {
  return "dataset\tgbdt\trf\tdgbf\tdgbf-gbdt_mean\tdgbf-gbdt_std\tdgbf-rf_mean\tdgbf-rf_std";
}

std::string summary_table_row(const ExperimentReport& report) {
  const auto& gbdt_vs = report.pair("dgbf", "gbdt").diff;
  const auto& rf_vs = report.pair("dgbf", "rf").diff;
  return fmt::format("{}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}\t{:.4f}",
                     report.spec.dataset_name, report.model("gbdt").scores.mean,
                     report.model("rf").scores.mean, report.model("dgbf").scores.mean,
                     gbdt_vs.mean, gbdt_vs.std, rf_vs.mean, rf_vs.std);
}

}  // namespace dgbf::harness
