// dgbf: train, predict and benchmark Distributed Gradient Boosting Forests.

#include <fmt/core.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dgbf/ensemble.hpp"
#include "dgbf/harness.hpp"
#include "dgbf/metrics.hpp"
#include "dgbf/modelio.hpp"
#include "dgbf/tabular.hpp"

namespace fs = std::filesystem;
using namespace dgbf;

namespace {

// Model flags. Unset optionals leave the preset's value alone.
struct ConfigFlags {
  std::string preset = "dgbf";
  std::optional<Index> layers;
  std::optional<Index> trees;
  std::optional<double> lr;
  std::optional<Index> max_depth;
  std::optional<Index> min_samples_split;
  std::optional<Index> min_samples_leaf;
  std::optional<std::string> sampling;
  std::optional<double> p_max;
  std::optional<std::string> weights;
  std::optional<double> ridge;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--preset", f.preset, "dgbf, gbdt (T=1, full rows, unit weights) or rf (L=1, bootstrap)")
      ->check(CLI::IsMember({"dgbf", "gbdt", "rf"}))
      ->capture_default_str();
  cmd->add_option("--layers", f.layers, "Layers L (default 5)");
  cmd->add_option("--trees", f.trees,
                  "Trees per layer T (default 20); for --preset gbdt the number of boosting "
                  "stages, for rf the forest size (default 100)");
  cmd->add_option("--lr", f.lr, "Learning rate (default 0.1; rf 1.0)");
  cmd->add_option("--max-depth", f.max_depth, "Tree depth limit, 0 = unlimited (default 10; gbdt 3; rf 0)");
  cmd->add_option("--min-samples-split", f.min_samples_split, "Default 2");
  cmd->add_option("--min-samples-leaf", f.min_samples_leaf, "Default 1");
  cmd->add_option("--sampling", f.sampling, "full, bootstrap or dynamic (default dynamic)")
      ->check(CLI::IsMember({"full", "bootstrap", "dynamic"}));
  cmd->add_option("--p-max", f.p_max, "Last-layer sample fraction in dynamic mode (default 0.9)");
  cmd->add_option("--weights", f.weights, "uniform or least_squares (default least_squares)")
      ->check(CLI::IsMember({"uniform", "least_squares"}));
  cmd->add_option("--ridge", f.ridge, "Ridge on the output-weight solve (default 1e-8)");
}

ForestConfig build_config(const ConfigFlags& f, std::uint64_t seed) {
  ForestConfig c;
  if (f.preset == "gbdt") {
    c = preset_gbdt(f.trees.value_or(100));
  } else if (f.preset == "rf") {
    c = preset_rf(f.trees.value_or(100));
  } else if (f.trees) {
    c.trees = *f.trees;
  }
  if (f.layers) c.layers = *f.layers;
  if (f.lr) c.learning_rate = *f.lr;
  if (f.max_depth) c.tree.max_depth = *f.max_depth == 0 ? cart::kUnlimitedDepth : *f.max_depth;
  if (f.min_samples_split) c.tree.min_samples_split = *f.min_samples_split;
  if (f.min_samples_leaf) c.tree.min_samples_leaf = *f.min_samples_leaf;
  if (f.sampling) c.sampling_mode = sampling::mode_from_string(*f.sampling);
  if (f.p_max) c.p_max = *f.p_max;
  if (f.weights) c.weight_mode = weight_mode_from_string(*f.weights);
  if (f.ridge) c.ridge = *f.ridge;
  c.seed = seed;
  c.validate();
  return c;
}

std::string last_column(const fs::path& csv) {
  const auto table = tabular::read_csv(csv);
  if (table.columns.empty()) throw tabular::DataError(fmt::format("{}: no columns", csv.string()));
  return table.columns.back().name;
}

struct BenchFlags {
  std::string data;
  std::string target;
  Index sims = 20;
  std::string out = ".";
  double train_fraction = 0.8;
  Index ablation_k = 2;
};

harness::ExperimentSpec experiment_spec(const BenchFlags& b, const fs::path& data,
                                        std::uint64_t seed, Index threads,
                                        const ConfigFlags& dgbf_flags) {
  harness::ExperimentSpec spec;
  spec.dataset_path = data;
  spec.dataset_name = data.stem().string();
  spec.target_column = b.target.empty() ? last_column(data) : b.target;
  spec.n_simulations = b.sims;
  spec.train_fraction = b.train_fraction;
  spec.master_seed = seed;
  spec.threads = threads;
  spec.models = harness::standard_models();
  spec.models.back().config = build_config(dgbf_flags, 0);
  return spec;
}

void write_report(const harness::ExperimentReport& report, const fs::path& dir,
                  const std::string& suffix) {
  fs::create_directories(dir);
  const std::string base = report.spec.dataset_name + suffix;
  harness::write_text(dir / (base + ".report.json"), harness::report_to_json(report));
  harness::render_histograms(report, dir / (base + ".svg"));
}

void print_scores(const harness::ExperimentReport& report) {
  std::cout << "model\tmean\tstd\tn\n";
  for (const auto& m : report.models) {
    std::cout << fmt::format("{}\t{:.4f}\t{:.4f}\t{}\n", m.label, m.scores.mean, m.scores.std,
                             m.scores.n);
  }
  std::cout << "pair\tmean\tstd\n";
  for (const auto& p : report.paired) {
    std::cout << fmt::format("{}-{}\t{:.4f}\t{:.4f}\n", p.a, p.b, p.diff.mean, p.diff.std);
  }
}

std::vector<Index> parse_sizes(const std::string& text) {
  std::vector<Index> sizes;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, end - start);
    if (item.empty()) throw CLI::ValidationError("--sizes", "empty size in list");
    sizes.push_back(static_cast<Index>(std::stoull(item)));
    start = end + 1;
  }
  return sizes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed Gradient Boosting Forest: train, predict and benchmark"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.fallthrough();
  Index threads = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t seed = 0;
  app.add_option("--threads", threads, "Worker threads (timing always uses 1)")
      ->capture_default_str();
  app.add_option("--seed", seed, "Seed for sampling and splits")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Fit a model on a CSV file and save it");
  std::string train_data, train_target, train_out;
  ConfigFlags train_flags;
  train->add_option("--data", train_data, "Training CSV")->required();
  train->add_option("--target", train_target, "Target column")->required();
  train->add_option("--out", train_out, "Model file to write")->required();
  train->add_option("--seed", seed, "Seed for sampling");
  add_config_flags(train, train_flags);

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Predict a CSV file with a saved model");
  std::string predict_model, predict_data, predict_out;
  predict_cmd->add_option("--model", predict_model, "Model file")->required();
  predict_cmd->add_option("--data", predict_data, "Input CSV")->required();
  predict_cmd->add_option("--out", predict_out, "Output CSV with a `prediction` column")->required();

  // bench / ablate / reproduce
  BenchFlags bench_flags;
  ConfigFlags bench_model;
  auto* bench = app.add_subcommand("bench", "Paired gbdt/rf/dgbf comparison on one dataset");
  auto* ablate = app.add_subcommand("ablate", "As bench, removing random features per simulation");
  for (auto* cmd : {bench, ablate}) {
    cmd->add_option("--data", bench_flags.data, "Dataset CSV")->required();
    cmd->add_option("--target", bench_flags.target, "Target column (default: last column)");
    cmd->add_option("--seed", seed, "Master seed; simulation i splits with seed + i");
  }
  auto* reproduce = app.add_subcommand("reproduce", "Run bench on every CSV in a directory");
  std::string data_dir;
  reproduce->add_option("--data-dir", data_dir, "Directory of CSV files (target = last column)")
      ->required();
  reproduce->add_option("--seed", seed, "Master seed");
  for (auto* cmd : {bench, ablate, reproduce}) {
    cmd->add_option("--sims", bench_flags.sims, "Simulations")->capture_default_str();
    cmd->add_option("--out", bench_flags.out, "Output directory")->capture_default_str();
    cmd->add_option("--train-fraction", bench_flags.train_fraction)->capture_default_str();
    add_config_flags(cmd, bench_model);
  }
  ablate->add_option("--k", bench_flags.ablation_k, "Features removed")->capture_default_str();

  // timing
  auto* timing = app.add_subcommand("timing", "Fit time against training size, single-threaded");
  std::string sizes_text = "1000,2000,4000,8000,16000";
  Index timing_features = 5;
  Index repeats = 3;
  std::string timing_out = ".";
  timing->add_option("--sizes", sizes_text, "Comma-separated training sizes")->capture_default_str();
  timing->add_option("--features", timing_features)->capture_default_str();
  timing->add_option("--repeats", repeats, "Runs per point (median is kept)")->capture_default_str();
  timing->add_option("--out", timing_out, "Output directory")->capture_default_str();
  timing->add_option("--seed", seed, "Synthetic data seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const ForestConfig config = build_config(train_flags, seed);
      const auto table = tabular::load_csv(train_data, train_target);
      const auto data = tabular::preprocess(table, train_target);
      const auto start = std::chrono::steady_clock::now();
      ForestModel model = fit(data.features, data.target, config, {threads, {}});
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      model.schema = data.schema;
      modelio::save(model, train_out);
      const auto pred = predict(model, data.features);
      std::cout << fmt::format("train_rmse\t{:.6f}\nfit_seconds\t{:.3f}\n",
                               metrics::rmse(data.target, pred), secs);
      return 0;
    }

    if (*predict_cmd) {
      const ForestModel model = modelio::load(predict_model);
      std::string out_text = "prediction\n";
      if (fs::file_size(predict_data) > 0) {
        const auto table = tabular::read_csv(predict_data);
        const auto encoded = tabular::apply_schema(model.schema, table);
        if (encoded.unknown_categories > 0) {
          std::cerr << fmt::format("warning: {} unseen category values encoded as 0\n",
                                   encoded.unknown_categories);
        }
        if (table.n_rows > 0) {
          for (double v : predict(model, encoded.features)) out_text += fmt::format("{}\n", v);
        }
      }
      harness::write_text(predict_out, out_text);
      return 0;
    }

    if (*bench || *ablate) {
      auto spec = experiment_spec(bench_flags, bench_flags.data, seed, threads, bench_model);
      harness::ExperimentReport report;
      if (*ablate) {
        spec.ablation_k = bench_flags.ablation_k;
        report = harness::run_ablation(spec);
      } else {
        report = harness::run_precision(spec);
      }
      write_report(report, bench_flags.out, *ablate ? ".ablation" : "");
      print_scores(report);
      return 0;
    }

    if (*reproduce) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(data_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") {
          files.push_back(entry.path());
        }
      }
      std::sort(files.begin(), files.end());
      if (files.empty()) throw tabular::DataError(fmt::format("no .csv files in '{}'", data_dir));
      std::cout << harness::summary_table_header() << "\n";
      for (const auto& file : files) {
        BenchFlags per_file = bench_flags;
        per_file.target.clear();
        const auto spec = experiment_spec(per_file, file, seed, threads, bench_model);
        const auto report = harness::run_precision(spec);
        write_report(report, bench_flags.out, "");
        std::cout << harness::summary_table_row(report) << "\n" << std::flush;
      }
      return 0;
    }

    if (*timing) {
      ForestConfig dgbf_config;
      std::vector<harness::ModelSpec> models = harness::standard_models();
      models.back().config = dgbf_config;
      const auto report =
          harness::run_timing(models, parse_sizes(sizes_text), timing_features, repeats, seed);
      fs::create_directories(timing_out);
      harness::write_text(fs::path(timing_out) / "timing.report.json",
                          harness::timing_to_json(report));
      std::cout << "model\tn\tmedian_seconds\n";
      for (const auto& s : report.series) {
        for (Index i = 0; i < report.sizes.size(); ++i) {
          std::cout << fmt::format("{}\t{}\t{:.4f}\n", s.label, report.sizes[i],
                                   s.median_seconds[i]);
        }
      }
      std::cout << "model\tslope\tintercept\tr2\n";
      for (const auto& s : report.series) {
        std::cout << fmt::format("{}\t{:.6g}\t{:.6g}\t{:.4f}\n", s.label, s.fit.slope,
                                 s.fit.intercept, s.fit.r2);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
