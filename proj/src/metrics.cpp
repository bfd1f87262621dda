#include "fpv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fpv {

double rvd(const Eigen::MatrixXcd& w, const Eigen::MatrixXcd& w_bar) {
  if (w.rows() != w_bar.rows() || w.cols() != w_bar.cols()) {
    throw std::invalid_argument("rvd: matrices differ in shape");
  }
  const double den = w.cwiseAbs().sum();
  if (!(den > 0.0)) throw std::domain_error("rvd: reference matrix is zero");
  return (w - w_bar).cwiseAbs().sum() / den;
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double f = pos - static_cast<double>(lo);
  return sorted[lo] + f * (sorted[hi] - sorted[lo]);
}

}  // namespace

BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("box_stats: no samples");
  std::sort(values.begin(), values.end());
  BoxStats b;
  b.count = values.size();
  b.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(b.count);
  b.min = values.front();
  b.max = values.back();
  b.q1 = quantile(values, 0.25);
  b.median = quantile(values, 0.5);
  b.q3 = quantile(values, 0.75);
  const double lo = b.q1 - 1.5 * b.iqr();
  const double hi = b.q3 + 1.5 * b.iqr();
  b.whisker_low = *std::lower_bound(values.begin(), values.end(), lo);
  b.whisker_high = *(std::upper_bound(values.begin(), values.end(), hi) - 1);
  return b;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("linear_fit: size mismatch");
  if (x.size() < 3) throw std::domain_error("linear_fit: need at least three points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw std::domain_error("linear_fit: zero variance");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = sxy * sxy / (sxx * syy);
  return f;
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_std: no samples");
  const double n = static_cast<double>(values.size());
  MeanStd r;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / (n - 1.0));
  }
  return r;
}

RvdReport make_rvd_report(std::vector<double> layer_rvd, std::size_t phase_shifters) {
  if (layer_rvd.empty()) throw std::invalid_argument("rvd report needs at least one layer");
  if (phase_shifters == 0) throw std::invalid_argument("phase shifter count must be positive");
  RvdReport r;
  r.mean_rvd = mean_std(layer_rvd).mean;
  r.layer_rvd = std::move(layer_rvd);
  r.phase_shifters = phase_shifters;
  r.normalized_rvd = r.mean_rvd / static_cast<double>(phase_shifters);
  return r;
}

}  // namespace fpv
