#include "dgbf/ensemble.hpp"

#include <fmt/core.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

#include "parallel.hpp"

namespace dgbf {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check_finite(const std::vector<double>& values, const char* what, Index layer, Index t) {
  for (Index i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw FitError(
          fmt::format("fit: non-finite {} at layer {}, chain {}, row {}", what, layer, t, i));
    }
  }
}

}  // namespace

const char* to_string(WeightMode mode) {
  return mode == WeightMode::kUniform ? "uniform" : "least_squares";
}

WeightMode weight_mode_from_string(const std::string& name) {
  if (name == "uniform") return WeightMode::kUniform;
  if (name == "least_squares") return WeightMode::kLeastSquares;
  throw FitError(fmt::format("unknown weight mode '{}'", name));
}

void ForestConfig::validate() const {
  if (layers < 1) throw FitError("config: layers must be >= 1");
  if (trees < 1) throw FitError("config: trees must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw FitError("config: learning_rate must be > 0");
  }
  if (!(p_max > 0.0 && p_max <= 1.0)) throw FitError("config: p_max must be in (0,1]");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw FitError("config: ridge must be >= 0");
  tree.validate();
}

ForestConfig preset_gbdt(Index n_estimators, double learning_rate, Index max_depth) {
  ForestConfig c;
  c.layers = n_estimators;
  c.trees = 1;
  c.learning_rate = learning_rate;
  c.tree.max_depth = max_depth;
  c.sampling_mode = sampling::Mode::kFull;
  c.weight_mode = WeightMode::kUniform;
  return c;
}

ForestConfig preset_rf(Index n_estimators, Index max_depth) {
  ForestConfig c;
  c.layers = 1;
  c.trees = n_estimators;
  c.learning_rate = 1.0;
  c.tree.max_depth = max_depth;
  c.sampling_mode = sampling::Mode::kBootstrap;
  c.weight_mode = WeightMode::kUniform;
  return c;
}

double Layer::combined_output(Index t, std::span<const double> row) const {
  auto out = trees[t].predict_row(row);
  auto w = weights.row(t);
  double acc = 0.0;
  for (Index k = 0; k < out.size(); ++k) acc += w[k] * out[k];
  return acc;
}

std::vector<double> solve_weights(const Matrix& tree_outputs,
                                  std::span<const double> target_residual, WeightMode mode,
                                  double ridge) {
  const Index n = tree_outputs.rows();
  const Index t_count = tree_outputs.cols();
  if (t_count == 0) throw FitError("solve_weights: no tree outputs");
  if (n != target_residual.size()) {
    throw FitError(fmt::format("solve_weights: {} output rows but {} residuals", n,
                               target_residual.size()));
  }
  if (n == 0) throw FitError("solve_weights: no rows");
  std::vector<double> uniform(t_count, 1.0 / static_cast<double>(t_count));
  if (mode == WeightMode::kUniform) return uniform;

  Eigen::Map<const RowMajor> h(tree_outputs.data().data(), static_cast<Eigen::Index>(n),
                               static_cast<Eigen::Index>(t_count));
  Eigen::Map<const Eigen::VectorXd> r(target_residual.data(), static_cast<Eigen::Index>(n));
  Eigen::MatrixXd normal = h.transpose() * h;
  normal.diagonal().array() += ridge;
  const Eigen::VectorXd rhs = h.transpose() * r;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 0.0)) return uniform;
  const Eigen::VectorXd w = ldlt.solve(rhs);
  if (!w.allFinite()) return uniform;
  return {w.data(), w.data() + w.size()};
}

ForestModel fit(const Matrix& features, std::span<const double> target,
                const ForestConfig& config, const FitOptions& options) {
  config.validate();
  const Index n = features.rows();
  const Index t_count = config.trees;
  if (n != target.size()) {
    throw FitError(fmt::format("fit: {} feature rows but {} targets", n, target.size()));
  }
  if (n < 2) throw FitError("fit: need at least 2 rows");
  if (config.sampling_mode == sampling::Mode::kDynamic && n < 2 * t_count) {
    throw FitError(fmt::format("fit: dynamic sampling needs n >= 2T ({} < {})", n, 2 * t_count));
  }
  for (Index i = 0; i < n; ++i) {
    if (!std::isfinite(target[i])) throw FitError(fmt::format("fit: non-finite target row {}", i));
  }

  ForestModel model;
  model.config = config;
  model.n_features = features.cols();
  model.f0 = mean_of(target);

  GradientState state;
  state.chains.assign(t_count, std::vector<double>(n, model.f0));
  state.residuals.assign(t_count, std::vector<double>(n, 0.0));

  const sampling::SamplingPlan plan{config.sampling_mode, n, config.layers, t_count, config.p_max,
                                    config.seed};
  std::vector<double> mean_residual(n);
  Matrix gradients(n, t_count);
  std::vector<std::vector<double>> updates(t_count, std::vector<double>(n));

  for (Index l = 0; l < config.layers; ++l) {
    for (Index t = 0; t < t_count; ++t) {
      auto& res = state.residuals[t];
      const auto& chain = state.chains[t];
      for (Index i = 0; i < n; ++i) res[i] = config.learning_rate * (target[i] - chain[i]);
      check_finite(res, "residual", l, t);
    }
    if (options.observer) options.observer(l, state, model);

    // Output weights are fitted against the unscaled global residual
    // y - F_{l-1} = mean_t (y - chains[t]) on all training rows.
    for (Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Index t = 0; t < t_count; ++t) acc += target[i] - state.chains[t][i];
      mean_residual[i] = acc / static_cast<double>(t_count);
    }
    for (Index i = 0; i < n; ++i) {
      for (Index t = 0; t < t_count; ++t) gradients(i, t) = state.residuals[t][i];
    }

    Layer layer;
    layer.sample_sets = sampling::layer_samples(plan, l);
    layer.trees.resize(t_count);
    layer.weights = Matrix(t_count, t_count);
    detail::parallel_for(t_count, options.threads, [&](Index t) {
      cart::Tree tree = cart::fit_tree(features, gradients, config.tree, layer.sample_sets[t]);
      const Matrix outputs = cart::predict_tree(tree, features);
      const auto w = solve_weights(outputs, mean_residual, config.weight_mode, config.ridge);
      std::copy(w.begin(), w.end(), layer.weights.row(t).begin());
      auto& update = updates[t];
      for (Index i = 0; i < n; ++i) {
        auto out = outputs.row(i);
        double acc = 0.0;
        for (Index k = 0; k < t_count; ++k) acc += w[k] * out[k];
        update[i] = acc;
      }
      layer.trees[t] = std::move(tree);
    });

    for (Index t = 0; t < t_count; ++t) {
      check_finite(updates[t], "tree update", l, t);
      auto& chain = state.chains[t];
      for (Index i = 0; i < n; ++i) chain[i] += updates[t][i];
    }
    for (const auto& s : layer.sample_sets) layer.sample_hashes.push_back(sampling::hash_index_set(s));
    model.layers.push_back(std::move(layer));
  }

  if (options.observer) {
    for (Index t = 0; t < t_count; ++t) {
      for (Index i = 0; i < n; ++i) {
        state.residuals[t][i] = config.learning_rate * (target[i] - state.chains[t][i]);
      }
    }
    options.observer(config.layers, state, model);
  }
  return model;
}

std::vector<double> predict_partial(const ForestModel& model, const Matrix& features,
                                    Index n_layers) {
  if (features.cols() != model.n_features) {
    throw FitError(fmt::format("predict: model expects {} features, got {}", model.n_features,
                               features.cols()));
  }
  n_layers = std::min(n_layers, model.layers.size());
  const Index t_count = model.config.trees;
  std::vector<double> out(features.rows());
  for (Index i = 0; i < features.rows(); ++i) {
    auto row = features.row(i);
    double sum = 0.0;
    for (Index t = 0; t < t_count; ++t) {
      double chain = 0.0;
      for (Index l = 0; l < n_layers; ++l) chain += model.layers[l].combined_output(t, row);
      sum += chain;
    }
    out[i] = model.f0 + sum / static_cast<double>(t_count);
  }
  return out;
}

std::vector<double> predict(const ForestModel& model, const Matrix& features) {
  return predict_partial(model, features, model.layers.size());
}

std::vector<double> staged_train_loss(const ForestModel& model, const Matrix& features,
                                      std::span<const double> target) {
  if (features.rows() != target.size()) {
    throw FitError("staged_train_loss: feature rows and target length differ");
  }
  std::vector<double> losses;
  for (Index l = 0; l <= model.layers.size(); ++l) {
    const auto pred = predict_partial(model, features, l);
    double sse = 0.0;
    for (Index i = 0; i < pred.size(); ++i) sse += (target[i] - pred[i]) * (target[i] - pred[i]);
    losses.push_back(std::sqrt(sse / static_cast<double>(pred.size())));
  }
  return losses;
}

}  // namespace dgbf
