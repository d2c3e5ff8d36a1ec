#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgbf/cart.hpp"
#include "dgbf/matrix.hpp"
#include "dgbf/sampling.hpp"
#include "dgbf/tabular.hpp"

namespace dgbf {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class WeightMode { kUniform, kLeastSquares };

const char* to_string(WeightMode mode);
WeightMode weight_mode_from_string(const std::string& name);

struct ForestConfig {
  Index layers = 5;
  Index trees = 20;
  double learning_rate = 0.1;
  cart::TreeConfig tree;
  sampling::Mode sampling_mode = sampling::Mode::kDynamic;
  double p_max = 0.9;
  WeightMode weight_mode = WeightMode::kLeastSquares;
  double ridge = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const ForestConfig&, const ForestConfig&) = default;
};

// Boosting special case: one tree per layer on all rows, unit weight, so each
// layer adds a tree fitted to learning_rate * (y - F).
ForestConfig preset_gbdt(Index n_estimators, double learning_rate = 0.1, Index max_depth = 3);
// Bagging special case: a single layer with learning rate 1, bootstrap samples
// and plain averaging of the trees.
ForestConfig preset_rf(Index n_estimators, Index max_depth = cart::kUnlimitedDepth);

struct Layer {
  std::vector<cart::Tree> trees;
  // Row t holds the output weights of tree t.
  Matrix weights;
  // Full index sets from fitting; empty for loaded models.
  std::vector<IndexSet> sample_sets;
  std::vector<std::uint64_t> sample_hashes;

  // Tree t's combined output for one row: sum_k weights(t,k) * output_k.
  [[nodiscard]] double combined_output(Index t, std::span<const double> row) const;
};

struct ForestModel {
  double f0 = 0.0;
  std::vector<Layer> layers;
  ForestConfig config;
  tabular::FeatureSchema schema;
  Index n_features = 0;
};

// Per-chain state at a layer boundary: chains[t][i] is the accumulated
// prediction of tree slot t at training row i.
struct GradientState {
  std::vector<std::vector<double>> chains;
  std::vector<std::vector<double>> residuals;  // learning_rate * (y - chains[t])
};

struct FitOptions {
  Index threads = 1;
  // Called after each layer's residuals are formed (before its trees are
  // fitted) with the model built so far, and once more after the last layer.
  std::function<void(Index layer, const GradientState&, const ForestModel&)> observer;
};

ForestModel fit(const Matrix& features, std::span<const double> target,
                const ForestConfig& config, const FitOptions& options = {});

// Weight vector for one tree given its n x T outputs on the training rows.
std::vector<double> solve_weights(const Matrix& tree_outputs,
                                  std::span<const double> target_residual, WeightMode mode,
                                  double ridge);

std::vector<double> predict(const ForestModel& model, const Matrix& features);
// Prediction using only the first `n_layers` layers.
std::vector<double> predict_partial(const ForestModel& model, const Matrix& features,
                                    Index n_layers);

// RMSE of the partial predictor after 0, 1, ..., L layers.
std::vector<double> staged_train_loss(const ForestModel& model, const Matrix& features,
                                      std::span<const double> target);

}  // namespace dgbf
