#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace fpv {

// Sum |W - Wbar| / Sum |W| over all elements. Throws std::domain_error when
// W is all zeros and std::invalid_argument on a shape mismatch.
double rvd(const Eigen::MatrixXcd& w, const Eigen::MatrixXcd& w_bar);

struct BoxStats {
  std::size_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double whisker_low = 0.0;   // smallest sample >= q1 - 1.5 IQR
  double whisker_high = 0.0;  // largest sample <= q3 + 1.5 IQR

  double iqr() const { return q3 - q1; }
};

// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(std::vector<double> values);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Least squares y = a x + b. Needs >= 3 points and non-zero variance in
// both coordinates (std::domain_error otherwise).
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one value
};

MeanStd mean_std(std::span<const double> values);

struct RvdReport {
  std::vector<double> layer_rvd;  // one value per unitary / layer
  double mean_rvd = 0.0;
  std::size_t phase_shifters = 0;
  double normalized_rvd = 0.0;  // mean_rvd / phase_shifters
  std::uint64_t seed = 0;
  double sigma_scale = 1.0;
  double corr_length = 0.0;
};

RvdReport make_rvd_report(std::vector<double> layer_rvd, std::size_t phase_shifters);

}  // namespace fpv
