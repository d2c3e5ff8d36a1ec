#include "dgbf/metrics.hpp"

#include <fmt/core.h>

#include <cmath>
#include <numeric>

namespace dgbf::metrics {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw MetricError(fmt::format("{}: length mismatch ({} vs {})", what, a.size(), b.size()));
  }
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ScoreSummary summarize(std::vector<double> values) {
  ScoreSummary s;
  s.n = values.size();
  if (s.n > 0) s.mean = mean_of(values);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  s.values = std::move(values);
  return s;
}

double r2(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true, y_pred, "r2");
  if (y_true.size() < 2) throw MetricError("r2: need at least 2 values");
  const double mu = mean_of(y_true);
  double sse = 0.0;
  double sst = 0.0;
  for (Index i = 0; i < y_true.size(); ++i) {
    sse += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    sst += (y_true[i] - mu) * (y_true[i] - mu);
  }
  if (!(sst > 0.0)) throw MetricError("r2: undefined for a constant y_true");
  return 1.0 - sse / sst;
}

double adjust_r2(double r2_value, Index n, Index n_features) {
  if (n <= n_features + 1) {
    throw MetricError(
        fmt::format("adjusted_r2: need n > p + 1 (n = {}, p = {})", n, n_features));
  }
  const auto nd = static_cast<double>(n);
  const auto pd = static_cast<double>(n_features);
  return 1.0 - (1.0 - r2_value) * (nd - 1.0) / (nd - pd - 1.0);
}

double adjusted_r2(std::span<const double> y_true, std::span<const double> y_pred,
                   Index n_features) {
  return adjust_r2(r2(y_true, y_pred), y_true.size(), n_features);
}

double rmse(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true, y_pred, "rmse");
  if (y_true.empty()) throw MetricError("rmse: empty input");
  double sse = 0.0;
  for (Index i = 0; i < y_true.size(); ++i) {
    sse += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
  }
  return std::sqrt(sse / static_cast<double>(y_true.size()));
}

ScoreSummary paired_diff(std::span<const double> scores_a, std::span<const double> scores_b) {
  check_lengths(scores_a, scores_b, "paired_diff");
  std::vector<double> d(scores_a.size());
  for (Index i = 0; i < d.size(); ++i) d[i] = scores_a[i] - scores_b[i];
  return summarize(std::move(d));
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  check_lengths(x, y, "fit_line");
  if (x.size() < 2) throw MetricError("fit_line: need at least 2 points");
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw MetricError("fit_line: x is constant");
  LinearFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return out;
}

}  // namespace dgbf::metrics
