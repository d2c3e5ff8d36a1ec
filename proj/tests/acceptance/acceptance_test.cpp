// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion names as
// arguments to run a subset. Exit status is nonzero if any criterion fails.

#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "dgbf/ensemble.hpp"
#include "dgbf/harness.hpp"
#include "dgbf/modelio.hpp"
#include "dgbf/tabular.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace dgbf;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  std::string name;
  std::function<Outcome()> check;
};

Index worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

tabular::Dataset load_dataset(const std::string& file, const std::string& target) {
  const fs::path path = fs::path(DGBF_DATASET_DIR) / file;
  return tabular::preprocess(tabular::load_csv(path, target), target);
}

harness::ExperimentSpec standard_spec(const std::string& name, const std::string& target,
                                      Index sims) {
  harness::ExperimentSpec spec;
  spec.dataset_name = name;
  spec.target_column = target;
  spec.n_simulations = sims;
  spec.models = harness::standard_models();
  spec.threads = worker_threads();
  return spec;
}

double squared_loss(const Matrix& h, const std::vector<double>& w, const std::vector<double>& r) {
  double loss = 0.0;
  for (Index i = 0; i < h.rows(); ++i) {
    double v = 0.0;
    for (Index k = 0; k < h.cols(); ++k) v += h(i, k) * w[k];
    loss += (r[i] - v) * (r[i] - v);
  }
  return loss;
}

Outcome reduction_equivalence() {
  double worst_gbdt = 0.0;
  double worst_rf = 0.0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng(1000 + s);
    const Matrix x = oracle::random_matrix(rng, 200, 5);
    const auto y = oracle::random_target(rng, x);
    const Matrix x_eval = oracle::random_matrix(rng, 100, 5);

    const auto gbdt = fit(x, y, preset_gbdt(100));
    worst_gbdt = std::max({worst_gbdt,
                           oracle::max_abs_diff(predict(gbdt, x), oracle::gbdt(x, y, x, 100, 0.1, 3)),
                           oracle::max_abs_diff(predict(gbdt, x_eval),
                                                oracle::gbdt(x, y, x_eval, 100, 0.1, 3))});

    ForestConfig rf_config = preset_rf(100);
    rf_config.seed = s;
    const auto rf = fit(x, y, rf_config);
    const auto depth = rf_config.tree.max_depth;
    worst_rf = std::max({worst_rf,
                         oracle::max_abs_diff(predict(rf, x),
                                              oracle::random_forest(x, y, x, 100, depth, s)),
                         oracle::max_abs_diff(predict(rf, x_eval),
                                              oracle::random_forest(x, y, x_eval, 100, depth, s))});
  }
  return {worst_gbdt <= 1e-9 && worst_rf <= 1e-9,
          fmt::format("5 datasets 200x5; max|gbdt - oracle| = {:.3g}, max|rf - oracle| = {:.3g} "
                      "(limit 1e-9)",
                      worst_gbdt, worst_rf)};
}

Outcome gradient_splitting_identity() {
  Rng rng(2000);
  const Matrix x = oracle::random_matrix(rng, 500, 5);
  const auto y = oracle::random_target(rng, x);
  const ForestConfig config;
  double worst = 0.0;
  Index checked = 0;
  FitOptions options;
  options.observer = [&](Index layer, const GradientState& state, const ForestModel& partial) {
    const auto global = predict_partial(partial, x, layer);
    for (Index i = 0; i < y.size(); ++i) {
      double mean = 0.0;
      for (const auto& r : state.residuals) mean += r[i];
      mean /= static_cast<double>(state.residuals.size());
      worst = std::max(worst, std::fabs(mean - config.learning_rate * (y[i] - global[i])));
    }
    ++checked;
  };
  fit(x, y, config, options);
  return {checked == config.layers + 1 && worst <= 1e-9,
          fmt::format("{} layer boundaries, 500 rows, T={}; max deviation {:.3g} (limit 1e-9)",
                      checked, config.trees, worst)};
}

Outcome weight_optimality() {
  Rng rng(3000);
  double worst_ratio = 0.0;
  Index failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 20 + rng.below(181);
    const Index t = 1 + rng.below(20);
    Matrix h = oracle::random_matrix(rng, n, t);
    if (trial % 4 == 0 && t > 1) {
      for (Index i = 0; i < n; ++i) h(i, t - 1) = h(i, 0);  // rank-deficient systems too
    }
    std::vector<double> r(n);
    for (auto& v : r) v = rng.uniform() * 10.0 - 5.0;
    const double ls = squared_loss(h, solve_weights(h, r, WeightMode::kLeastSquares, 1e-8), r);
    const double uni = squared_loss(h, solve_weights(h, r, WeightMode::kUniform, 1e-8), r);
    if (ls > uni + 1e-6 * uni) ++failures;
    worst_ratio = std::max(worst_ratio, ls / uni);
  }
  return {failures == 0,
          fmt::format("100 systems; {} with LS loss above uniform (+1e-6 rel); max LS/uniform "
                      "loss ratio {:.4f}",
                      failures, worst_ratio)};
}

Outcome cart_oracle() {
  Rng rng(4000);
  Index mismatches = 0;
  Index total = 0;
  for (Index n = 2; n <= 64; ++n) {
    for (Index p = 1; p <= 3; ++p) {
      for (int variant = 0; variant < 4; ++variant) {
        const Index levels = variant == 1 ? 5 : (variant == 3 ? 2 : 0);
        const Matrix x = oracle::random_matrix(rng, n, p, levels);
        const Index k = 1 + rng.below(3);
        const Matrix y = oracle::random_matrix(rng, n, k, variant >= 2 ? 4 : 0);
        cart::TreeConfig config;
        config.max_depth = 1 + rng.below(8);
        config.min_samples_leaf = 1 + rng.below(3);
        config.min_samples_split = 2 + rng.below(4);
        const cart::Tree tree = cart::fit_tree(x, y, config);
        if (!oracle::same_as_brute_force(tree, oracle::brute_force_tree(x, y, config))) {
          ++mismatches;
        }
        ++total;
      }
    }
  }
  return {mismatches == 0, fmt::format("{} instances (n 2..64, p 1..3, K 1..3, tied and untied "
                                       "values); {} mismatches",
                                       total, mismatches)};
}

Outcome shift_invariance() {
  Rng rng(5000);
  Index failures = 0;
  Index total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 10 + rng.below(300);
    const Matrix x = oracle::random_matrix(rng, n, 1 + rng.below(6), trial % 3 == 0 ? 7 : 0);
    const Matrix y = oracle::random_matrix(rng, n, 1 + rng.below(4));
    cart::TreeConfig config;
    config.max_depth = 1 + rng.below(12);
    for (double c : {0.0, 100.0, -7.25, rng.uniform() * 2e4 - 1e4}) {
      if (!cart::shift_targets_equivalence_check(x, y, c, config)) ++failures;
      ++total;
    }
  }
  return {failures == 0, fmt::format("{} (data, constant) pairs; {} with changed structure or "
                                     "leaves not shifted by the constant",
                                     total, failures)};
}

Outcome concrete_precision() {
  const auto data = load_dataset("concrete.csv", "compressive_strength");
  const auto report =
      harness::run_precision(data, standard_spec("concrete", "compressive_strength", 20));
  const auto& dgbf = report.model("dgbf").scores;
  const auto& diff = report.pair("dgbf", "gbdt").diff;
  const bool pass = dgbf.mean >= 0.90 && dgbf.mean <= 0.96 && diff.mean > 0.0;
  return {pass, fmt::format("20 sims; dgbf {:.4f} +- {:.4f} (band [0.90, 0.96]); gbdt {:.4f}; "
                            "rf {:.4f}; dgbf-gbdt {:.4f} +- {:.4f} (must be > 0)",
                            dgbf.mean, dgbf.std, report.model("gbdt").scores.mean,
                            report.model("rf").scores.mean, diff.mean, diff.std)};
}

Outcome wine_precision() {
  const auto data = load_dataset("wine.csv", "quality");
  const auto report = harness::run_precision(data, standard_spec("wine", "quality", 20));
  const auto& dgbf = report.model("dgbf").scores;
  const auto& rf_diff = report.pair("dgbf", "rf").diff;
  return {dgbf.mean >= 0.38 && dgbf.mean <= 0.52,
          fmt::format("20 sims; dgbf {:.4f} +- {:.4f} (band [0.38, 0.52]); gbdt {:.4f}; rf {:.4f}; "
                      "rf-dgbf {:.4f} +- {:.4f} (either sign)",
                      dgbf.mean, dgbf.std, report.model("gbdt").scores.mean,
                      report.model("rf").scores.mean, -rf_diff.mean, rf_diff.std)};
}

Outcome ablation_stability() {
  const auto data = load_dataset("concrete.csv", "compressive_strength");
  auto spec = standard_spec("concrete", "compressive_strength", 10);
  spec.ablation_k = 2;
  const auto report = harness::run_ablation(data, spec);
  const auto& dgbf = report.model("dgbf").scores;
  const auto& gbdt = report.model("gbdt").scores;
  const bool pass = dgbf.std <= 0.024 && dgbf.mean >= gbdt.mean;
  return {pass, fmt::format("10 sims, k=2; dgbf {:.4f} +- {:.4f} (std limit 0.024); gbdt {:.4f} "
                            "+- {:.4f}; rf {:.4f} +- {:.4f}; dgbf mean must be >= gbdt mean",
                            dgbf.mean, dgbf.std, gbdt.mean, gbdt.std,
                            report.model("rf").scores.mean, report.model("rf").scores.std)};
}

Outcome timing_linearity() {
  const auto report =
      harness::run_timing(harness::standard_models(), {1000, 2000, 4000, 8000, 16000}, 5, 3, 0);
  bool pass = true;
  std::string detail = "sizes 1k..16k, 3 repeats, 1 thread; fit R2 vs n*log2(n):";
  for (const auto& s : report.series) {
    pass = pass && s.fit.r2 >= 0.95;
    detail += fmt::format(" {} {:.4f} ({:.2f}s at 16k)", s.label, s.fit.r2, s.median_seconds.back());
  }
  return {pass, detail + " (limit 0.95)"};
}

Outcome determinism_persistence() {
  const auto data = load_dataset("concrete.csv", "compressive_strength");
  const auto [train, test] = tabular::train_test_split(data, {0.8, 3});
  ForestConfig config;
  config.seed = 9;
  const auto a = fit(train.features, train.target, config, {1, {}});
  const auto b = fit(train.features, train.target, config, {4, {}});
  const auto c = fit(train.features, train.target, config, {1, {}});
  bool same_fit = modelio::serialize(a) == modelio::serialize(b) &&
                  modelio::serialize(a) == modelio::serialize(c) &&
                  predict(a, test.features) == predict(b, test.features);

  const auto path = fs::temp_directory_path() / "dgbf_acceptance_model.json";
  modelio::save(a, path);
  const auto loaded = modelio::load(path);
  const bool round_trip = predict(loaded, test.features) == predict(a, test.features) &&
                          predict(loaded, train.features) == predict(a, train.features);

  auto spec = standard_spec("concrete", "compressive_strength", 3);
  spec.threads = 1;
  const auto body1 = harness::report_to_json(harness::run_precision(data, spec), false);
  spec.threads = 4;
  const auto body2 = harness::report_to_json(harness::run_precision(data, spec), false);
  const bool same_report = body1 == body2;
  return {same_fit && round_trip && same_report,
          fmt::format("fit threads 1 vs 4 bit-identical: {}; save/load predictions identical: {}; "
                      "report body threads 1 vs 4 identical: {}",
                      same_fit, round_trip, same_report)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {"reduction-equivalence", reduction_equivalence},
      {"gradient-splitting-identity", gradient_splitting_identity},
      {"weight-optimality", weight_optimality},
      {"cart-oracle", cart_oracle},
      {"shift-invariance", shift_invariance},
      {"concrete-precision", concrete_precision},
      {"wine-precision", wine_precision},
      {"ablation-stability", ablation_stability},
      {"timing-linearity", timing_linearity},
      {"determinism-persistence", determinism_persistence},
  };
  std::vector<std::string> only(argv + 1, argv + argc);
  Index failed = 0;
  Index ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ++ran;
    if (!outcome.pass) ++failed;
    std::cout << fmt::format("{} {}: {} [{:.1f}s]\n", outcome.pass ? "PASS" : "FAIL", c.name,
                             outcome.detail, secs)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
