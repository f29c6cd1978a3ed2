#include "grainfield/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>

#include "grainfield/errors.hpp"

namespace grainfield {

double mean(std::span<const double> x) {
  if (x.empty()) throw DegenerateSampleError("mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) throw DegenerateSampleError("variance needs two observations");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DegenerateSampleError("correlation needs paired samples");
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateSampleError("correlation of a constant sample");
  return sxy / std::sqrt(sxx * syy);
}

double quantile(std::vector<double> x, double p) {
  if (x.empty()) throw DegenerateSampleError("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double pos = p * static_cast<double>(x.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  if (i + 1 >= x.size()) return x.back();
  const double w = pos - static_cast<double>(i);
  return (1.0 - w) * x[i] + w * x[i + 1];
}

double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.0) {
    // CDF = √(2π)/x Σ_{k>=1} exp(−(2k−1)²π²/(8x²)).
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double t = (2 * k - 1) * (2 * k - 1) * pi2 / (8 * x * x);
      cdf += std::exp(-t);
    }
    cdf *= std::sqrt(2 * std::numbers::pi) / x;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sf = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sf += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(sf, 0.0, 1.0);
}

namespace {

double stephens(double d, double n) {
  const double sn = std::sqrt(n);
  return kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
}

}  // namespace

TestResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.size() < 2) throw DegenerateSampleError("KS test needs at least two samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, stephens(d, n), 0.0};
}

TestResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.size() < 2 || b.size() < 2) throw DegenerateSampleError("KS test needs at least two samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, stephens(d, na * nb / (na + nb)), 0.0};
}

TestResult chi_square_gof(std::span<const long> observations, const std::function<double(long)>& pmf,
                          double min_expected) {
  if (observations.empty()) throw DegenerateSampleError("chi-square test of an empty sample");
  std::map<long, double> hist;
  long hi = 0;
  for (long v : observations) {
    if (v < 0) throw DegenerateSampleError("chi-square test expects nonnegative integers");
    hist[v] += 1.0;
    hi = std::max(hi, v);
  }
  const double n = static_cast<double>(observations.size());
  // Cells {0}, {1}, ..., pooled left to right; the last cell absorbs the upper tail.
  std::vector<double> obs, expct;
  double o = 0.0, e = 0.0, used = 0.0;
  for (long k = 0;; ++k) {
    const double p = pmf(k);
    o += hist.count(k) ? hist[k] : 0.0;
    e += n * p;
    used += p;
    if (e >= min_expected) {
      obs.push_back(o);
      expct.push_back(e);
      o = e = 0.0;
    }
    if (k >= hi && n * (1.0 - used) < min_expected) break;
  }
  const double tail = n * std::max(0.0, 1.0 - used);
  if (expct.empty()) throw DegenerateSampleError("chi-square test: too few expected counts");
  obs.back() += o;
  expct.back() += e + tail;
  if (expct.size() < 2) throw DegenerateSampleError("chi-square test needs at least two cells");
  double stat = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) stat += (obs[i] - expct[i]) * (obs[i] - expct[i]) / expct[i];
  const double dof = static_cast<double>(obs.size() - 1);
  boost::math::chi_squared dist(dof);
  return {stat, boost::math::cdf(boost::math::complement(dist, stat)), dof};
}

}  // namespace grainfield
