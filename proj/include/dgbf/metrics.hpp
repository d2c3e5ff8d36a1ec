#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "dgbf/matrix.hpp"

namespace dgbf::metrics {

// Raised when a statistic is undefined for its input (constant truth for R²,
// too few rows for adjusted R²). Never reported as a number.
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct ScoreSummary {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) standard deviation; 0 when n < 2
  Index n = 0;
  std::vector<double> values;
};

ScoreSummary summarize(std::vector<double> values);

double r2(std::span<const double> y_true, std::span<const double> y_pred);
double adjusted_r2(std::span<const double> y_true, std::span<const double> y_pred,
                   Index n_features);
// From a precomputed R² and row count.
double adjust_r2(double r2_value, Index n, Index n_features);
double rmse(std::span<const double> y_true, std::span<const double> y_pred);

// Summary of a_i - b_i; positive mean means `a` scored higher.
ScoreSummary paired_diff(std::span<const double> scores_a, std::span<const double> scores_b);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
// Ordinary least squares of y on x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace dgbf::metrics
