#ifndef GRAINFIELD_STATS_HPP_
#define GRAINFIELD_STATS_HPP_

#include <functional>
#include <span>
#include <vector>

namespace grainfield {

double mean(std::span<const double> x);
// Unbiased sample variance.
double variance(std::span<const double> x);
double correlation(std::span<const double> x, std::span<const double> y);
double median(std::vector<double> x);
double quantile(std::vector<double> x, double p);

// P(K > x) for the limiting Kolmogorov distribution.
double kolmogorov_sf(double x);

struct TestResult {
  double statistic = 0.0;
  double p_value = 0.0;
  double dof = 0.0;
};

// One-sample Kolmogorov-Smirnov test against a continuous CDF, asymptotic
// p-value with Stephens' small-sample correction.
TestResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);
TestResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// Pearson chi-square goodness of fit of integer observations against a pmf
// on {0, 1, ...}; adjacent cells are pooled until every expected count is
// at least min_expected.
TestResult chi_square_gof(std::span<const long> observations,
                          const std::function<double(long)>& pmf, double min_expected = 5.0);

double normal_cdf(double z);

}  // namespace grainfield

#endif  // GRAINFIELD_STATS_HPP_
