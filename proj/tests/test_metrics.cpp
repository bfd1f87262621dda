#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "fpv/metrics.hpp"

using namespace fpv;

TEST(Rvd, ZeroForIdenticalAndOneForDoubled) {
  Eigen::MatrixXcd w(2, 3);
  w << std::complex<double>(1, 2), 0.5, -3, 0, std::complex<double>(0, -1), 2;
  EXPECT_EQ(rvd(w, w), 0.0);
  EXPECT_NEAR(rvd(w, 2.0 * w), 1.0, 1e-15);
  EXPECT_NEAR(rvd(w, -w), 2.0, 1e-15);
}

TEST(Rvd, ElementwiseAbsoluteSum) {
  Eigen::MatrixXcd w(1, 2), v(1, 2);
  w << 3.0, std::complex<double>(0, 4);
  v << 3.0, 0.0;
  // |0| + |4i| over |3| + |4i|.
  EXPECT_NEAR(rvd(w, v), 4.0 / 7.0, 1e-15);
}

TEST(Rvd, Errors) {
  EXPECT_THROW(rvd(Eigen::MatrixXcd::Zero(2, 2), Eigen::MatrixXcd::Ones(2, 2)), std::domain_error);
  EXPECT_THROW(rvd(Eigen::MatrixXcd::Ones(2, 2), Eigen::MatrixXcd::Ones(2, 3)),
               std::invalid_argument);
}

TEST(BoxStats, HandExample) {
  const BoxStats s = box_stats({7, 1, 3, 2, 100, 5, 4, 6});
  EXPECT_EQ(s.count, 8u);
  EXPECT_DOUBLE_EQ(s.min, 1);
  EXPECT_DOUBLE_EQ(s.max, 100);
  // Sorted 1 2 3 4 5 6 7 100, positions (n-1) p.
  EXPECT_DOUBLE_EQ(s.q1, 2.75);
  EXPECT_DOUBLE_EQ(s.median, 4.5);
  EXPECT_DOUBLE_EQ(s.q3, 6.25);
  EXPECT_DOUBLE_EQ(s.mean, 128.0 / 8);
  EXPECT_DOUBLE_EQ(s.whisker_low, 1);
  EXPECT_DOUBLE_EQ(s.whisker_high, 7);
  EXPECT_DOUBLE_EQ(s.iqr(), 3.5);
}

TEST(BoxStats, SingleValueAndEmpty) {
  const BoxStats s = box_stats({2.5});
  EXPECT_DOUBLE_EQ(s.q1, 2.5);
  EXPECT_DOUBLE_EQ(s.q3, 2.5);
  EXPECT_DOUBLE_EQ(s.whisker_high, 2.5);
  EXPECT_THROW(box_stats({}), std::invalid_argument);
}

TEST(LinearFit, ExactLineAndNoisyR2) {
  const std::vector<double> x{0, 1, 2, 3, 4};
  const std::vector<double> y{1, 3, 5, 7, 9};
  const LinearFit f = linear_fit(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);

  const std::vector<double> yn{1, 0, 3, 2};
  const std::vector<double> xn{0, 1, 2, 3};
  const LinearFit g = linear_fit(xn, yn);
  // Sxy = 3, Sxx = 5, Syy = 5, both means 1.5.
  EXPECT_NEAR(g.slope, 0.6, 1e-14);
  EXPECT_NEAR(g.intercept, 1.5 - 0.6 * 1.5, 1e-14);
  EXPECT_NEAR(g.r_squared, 9.0 / 25.0, 1e-14);
}

TEST(LinearFit, Degenerate) {
  const std::vector<double> x{1, 1, 1}, y{1, 2, 3}, two{1, 2};
  EXPECT_THROW(linear_fit(x, y), std::domain_error);
  EXPECT_THROW(linear_fit(y, x), std::domain_error);
  EXPECT_THROW(linear_fit(two, two), std::domain_error);
  EXPECT_THROW(linear_fit(y, two), std::invalid_argument);
}

TEST(MeanStd, SampleStandardDeviation) {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  const MeanStd m = mean_std(v);
  EXPECT_DOUBLE_EQ(m.mean, 5.0);
  EXPECT_NEAR(m.stddev, std::sqrt(32.0 / 7.0), 1e-14);
  const std::vector<double> one{3.0};
  EXPECT_EQ(mean_std(one).stddev, 0.0);
  EXPECT_THROW(mean_std(std::span<const double>{}), std::invalid_argument);
}

TEST(RvdReport, NormalizesByPhaseShifters) {
  const RvdReport r = make_rvd_report({0.1, 0.2, 0.3}, 1380);
  EXPECT_NEAR(r.mean_rvd, 0.2, 1e-15);
  EXPECT_NEAR(r.normalized_rvd, 0.2 / 1380, 1e-18);
  EXPECT_EQ(r.phase_shifters, 1380u);
  EXPECT_THROW(make_rvd_report({}, 10), std::invalid_argument);
  EXPECT_THROW(make_rvd_report({0.1}, 0), std::invalid_argument);
}
