#include "grainfield/charlier.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/poisson.hpp>

#include "grainfield/errors.hpp"
#include "grainfield/quadrature.hpp"

namespace grainfield {

namespace {

// Neumaier compensated sum.
class Accumulator {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0, comp_ = 0.0;
};

long upper_cut(double mu) { return static_cast<long>(std::ceil(mu + 12.0 * std::sqrt(mu) + 40.0)); }
long lower_cut(double mu) {
  return std::max(0L, static_cast<long>(std::floor(mu - 12.0 * std::sqrt(mu) - 40.0)));
}

struct HermiteRule {
  std::vector<double> nodes;    // roots of the physicists' H_n
  std::vector<double> weights;  // normalized to sum 1
};

HermiteRule golub_welsch(int n) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  HermiteRule rule;
  for (int i = 0; i < n; ++i) {
    rule.nodes.push_back(solver.eigenvalues()(i));
    const double v = solver.eigenvectors()(0, i);
    rule.weights.push_back(v * v);
  }
  return rule;
}

const HermiteRule& hermite_rule(int n) {
  static std::mutex mu;
  static std::vector<std::pair<int, HermiteRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  for (const auto& [k, r] : cache)
    if (k == n) return r;
  cache.emplace_back(n, golub_welsch(n));
  return cache.back().second;
}

double gauss_hermite_h1(const Subordinator& g, double mu, int n) {
  const auto& rule = hermite_rule(n);
  const double s = std::sqrt(2.0 * mu);
  Accumulator acc;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double z = s * rule.nodes[i];
    acc.add(rule.weights[i] * g(z) * z);
  }
  return acc.value() / mu;
}

}  // namespace

Subordinator::Subordinator(std::string name, Fn fn, double c1, double c2, std::vector<double> kinks)
    : name_(std::move(name)), fn_(std::move(fn)), c1_(c1), c2_(c2), kinks_(std::move(kinks)) {
  if (!fn_) throw ConfigError("subordinator needs a function");
  std::sort(kinks_.begin(), kinks_.end());
}

Subordinator Subordinator::identity() {
  return {"identity", [](double x) { return x; }, 1.0, 1.0};
}

Subordinator Subordinator::exponential(double a) {
  std::ostringstream os;
  os.precision(17);
  os << "exp:" << a;
  return {os.str(), [a](double x) { return std::exp(a * x); }, 1.0, std::abs(a)};
}

Subordinator Subordinator::min_one() {
  return {"min1", [](double x) { return std::min(x, 1.0); }, 1.0, 1.0, {1.0}};
}

Subordinator Subordinator::constant(double c) {
  std::ostringstream os;
  os.precision(17);
  os << "const:" << c;
  return {os.str(), [c](double) { return c; }, std::abs(c), 0.0};
}

Subordinator Subordinator::charlier(int k, double mu) {
  if (k < 0) throw ConfigError("Charlier order must be >= 0");
  // |P_k(x)| <= (|x| + μ + k)^k <= k! e^{|x| + μ + k}.
  const double c1 = std::exp(std::lgamma(k + 1.0) + mu + k);
  return {"charlier:" + std::to_string(k), [k, mu](double x) { return charlier_poly(mu, k, x); }, c1, 1.0};
}

Subordinator Subordinator::table(std::vector<double> values) {
  if (values.empty()) throw ConfigError("subordinator table is empty");
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  auto shared = std::make_shared<std::vector<double>>(std::move(values));
  return {"table",
          [shared](double x) {
            const auto& v = *shared;
            const double k = std::clamp(std::round(x), 0.0, static_cast<double>(v.size() - 1));
            return v[static_cast<std::size_t>(k)];
          },
          m, 0.0};
}

Subordinator Subordinator::parse(const std::string& text) {
  if (text == "identity") return identity();
  if (text == "min1") return min_one();
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const std::string kind = text.substr(0, colon);
    double v = 0.0;
    try {
      std::size_t pos = 0;
      v = std::stod(text.substr(colon + 1), &pos);
      if (pos != text.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("bad subordinator parameter in '" + text + "'");
    }
    if (kind == "exp") return exponential(v);
    if (kind == "const") return constant(v);
  }
  throw ConfigError("unknown subordinator '" + text + "'");
}

bool Subordinator::check_growth(long lo, long hi) const {
  for (long x = lo; x <= hi; ++x) {
    const double v = fn_(static_cast<double>(x));
    if (!std::isfinite(v)) return false;
    const double bound = c1_ * std::exp(c2_ * std::abs(static_cast<double>(x)));
    if (std::abs(v) > bound * (1.0 + 1e-12)) return false;
  }
  return true;
}

double poisson_log_pmf(long x, double mu) {
  if (x < 0) return -std::numeric_limits<double>::infinity();
  return static_cast<double>(x) * std::log(mu) - mu - std::lgamma(static_cast<double>(x) + 1.0);
}

double poisson_pmf(long x, double mu) {
  if (x < 0) return 0.0;
  return boost::math::pdf(boost::math::poisson_distribution<double>(mu), static_cast<double>(x));
}

double charlier_poly(double mu, int k, double x) {
  if (k < 0) throw ConfigError("Charlier order must be >= 0");
  double prev = 1.0;
  if (k == 0) return prev;
  double cur = x - mu;
  for (int j = 1; j < k; ++j) {
    const double next = (x - mu - j) * cur - j * mu * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

CharlierBasis::CharlierBasis(double mu, int max_order) : mu_(mu), max_order_(max_order) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("Poisson mean must be positive");
  if (max_order < 1) throw ConfigError("Charlier order K must be >= 1");
  x_min_ = lower_cut(mu);
  x_max_ = upper_cut(mu);
  pmf_.assign(static_cast<std::size_t>(x_max_ - x_min_ + 1), 0.0);
  // Anchor at the mode in log space, then the ratio recurrence both ways.
  const long mode = std::clamp(static_cast<long>(std::floor(mu)), x_min_, x_max_);
  const auto at = [&](long x) -> double& { return pmf_[static_cast<std::size_t>(x - x_min_)]; };
  at(mode) = poisson_pmf(mode, mu);
  for (long x = mode; x < x_max_; ++x) at(x + 1) = at(x) * mu / static_cast<double>(x + 1);
  for (long x = mode; x > x_min_; --x) at(x - 1) = at(x) * static_cast<double>(x) / mu;
  Accumulator acc;
  for (double p : pmf_) acc.add(p);
  kept_mass_ = acc.value();
}

double CharlierBasis::pmf(long x) const {
  if (x < x_min_ || x > x_max_) return poisson_pmf(x, mu_);
  return pmf_[static_cast<std::size_t>(x - x_min_)];
}

namespace {

// √((k+1)μ) P̃_{k+1} = (x − μ − k) P̃_k − √(kμ) P̃_{k−1}.
std::vector<double> forward_normalized(double mu, int n, double x) {
  std::vector<double> p(static_cast<std::size_t>(n) + 1);
  p[0] = 1.0;
  if (n >= 1) p[1] = (x - mu) / std::sqrt(mu);
  for (int k = 1; k < n; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    p[uk + 1] = ((x - mu - k) * p[uk] - std::sqrt(k * mu) * p[uk - 1]) / std::sqrt((k + 1) * mu);
  }
  return p;
}

}  // namespace

std::vector<double> CharlierBasis::normalized_polys(double x) const {
  const int K = max_order_;
  if (!(x >= 0.0) || x != std::floor(x) || x >= K) return forward_normalized(mu_, K, x);
  // At integer points below the degree the polynomials are the minimal solution of the
  // recurrence, so orders above x come from duality P̃_k(x) = ±√(μ^{k−x} x!/k!) P̃_x(k).
  const int n = static_cast<int>(x);
  auto p = forward_normalized(mu_, K, x);
  for (int k = n + 1; k <= K; ++k) {
    const double scale = std::exp(0.5 * ((k - n) * std::log(mu_) + std::lgamma(n + 1.0) - std::lgamma(k + 1.0)));
    const double dual = forward_normalized(mu_, n, static_cast<double>(k)).back();
    p[static_cast<std::size_t>(k)] = ((k + n) % 2 ? -1.0 : 1.0) * scale * dual;
  }
  return p;
}

CharlierCoefficients coeff_proj(const CharlierBasis& basis, const Subordinator& g) {
  if (!g.check_growth(basis.x_min(), basis.x_max())) {
    throw ConfigError("subordinator '" + g.name() + "' violates its growth bound");
  }
  const int K = basis.max_order();
  std::vector<Accumulator> acc(static_cast<std::size_t>(K) + 1);
  Accumulator sq;
  for (long x = basis.x_min(); x <= basis.x_max(); ++x) {
    const double p = basis.pmf(x);
    if (p == 0.0) continue;
    const double gx = g(static_cast<double>(x));
    const auto poly = basis.normalized_polys(static_cast<double>(x));
    for (std::size_t k = 0; k < poly.size(); ++k) acc[k].add(p * gx * poly[k]);
    sq.add(p * gx * gx);
  }
  CharlierCoefficients out;
  out.second_moment = sq.value();
  const double mu = basis.mu();
  for (int k = 0; k <= K; ++k) {
    const double a = acc[static_cast<std::size_t>(k)].value();
    out.normalized.push_back(a);
    // c_k = a_k √(k!/μ^k).
    out.c.push_back(a * std::exp(0.5 * (std::lgamma(k + 1.0) - k * std::log(mu))));
  }
  out.variance = std::max(0.0, out.second_moment - out.c[0] * out.c[0]);
  for (double v : out.c) {
    if (!std::isfinite(v)) throw NumericalError("Charlier coefficient overflow for '" + g.name() + "'");
  }
  return out;
}

std::vector<double> coeff_diff(const CharlierBasis& basis, const Subordinator& g) {
  const int K = basis.max_order();
  const long lo = basis.x_min(), hi = basis.x_max() + K;
  if (!g.check_growth(lo, hi)) {
    throw ConfigError("subordinator '" + g.name() + "' violates its growth bound");
  }
  std::vector<double> d;
  for (long x = lo; x <= hi; ++x) d.push_back(g(static_cast<double>(x)));
  const std::size_t n = static_cast<std::size_t>(basis.x_max() - lo + 1);
  std::vector<double> out;
  for (int k = 0; k <= K; ++k) {
    Accumulator acc;
    for (std::size_t i = 0; i < n; ++i) acc.add(basis.pmf(lo + static_cast<long>(i)) * d[i]);
    out.push_back(acc.value());
    if (!std::isfinite(out.back())) throw NumericalError("forward difference overflow for '" + g.name() + "'");
    for (std::size_t i = 0; i + 1 < d.size(); ++i) d[i] = d[i + 1] - d[i];
    d.pop_back();
  }
  return out;
}

int charlier_rank(const CharlierBasis& basis, const Subordinator& g) {
  const auto c = coeff_proj(basis, g);
  const double scale = std::sqrt(c.second_moment);
  for (int k = 1; k <= basis.max_order(); ++k) {
    if (std::abs(c.normalized[static_cast<std::size_t>(k)]) > kRankTolerance * scale) return k;
  }
  throw UndefinedRankError("no Charlier coefficient of '" + g.name() + "' up to order " +
                           std::to_string(basis.max_order()) + " exceeds the rank tolerance");
}

void BivariatePoisson::validate() const {
  if (!(mu1 > 0.0) || !(mu2 > 0.0)) throw ConfigError("bivariate Poisson means must be positive");
  if (!(mu3 >= 0.0 && mu3 < std::min(mu1, mu2))) throw ConfigError("need 0 <= mu3 < min(mu1, mu2)");
}

double BivariatePoisson::rho() const { return mu3 / std::sqrt(mu1 * mu2); }

double bivariate_pmf_direct(const BivariatePoisson& biv, long x, long y) {
  biv.validate();
  if (x < 0 || y < 0) return 0.0;
  if (biv.mu3 == 0.0) return poisson_pmf(x, biv.mu1) * poisson_pmf(y, biv.mu2);
  const double a = biv.mu1 - biv.mu3, b = biv.mu2 - biv.mu3;
  Accumulator acc;
  for (long m = 0; m <= std::min(x, y); ++m) {
    const double pa = a > 0 ? poisson_log_pmf(x - m, a) : (x == m ? 0.0 : -INFINITY);
    const double pb = b > 0 ? poisson_log_pmf(y - m, b) : (y == m ? 0.0 : -INFINITY);
    acc.add(std::exp(poisson_log_pmf(m, biv.mu3) + pa + pb));
  }
  return acc.value();
}

MehlerResult mehler_pmf(const BivariatePoisson& biv, long x, long y, int order) {
  biv.validate();
  if (order < 0) throw ConfigError("Mehler order must be >= 0");
  const double rho = biv.rho();
  if (rho >= 1.0 - 1e-6) throw IllConditionedError("Mehler series: correlation too close to 1");
  if (x < 0 || y < 0) return {};
  const double p1 = poisson_pmf(x, biv.mu1), p2 = poisson_pmf(y, biv.mu2);
  const int K = std::max(order, 1);
  const CharlierBasis b1(biv.mu1, K), b2(biv.mu2, K);
  const auto q1 = b1.normalized_polys(static_cast<double>(x));
  const auto q2 = b2.normalized_polys(static_cast<double>(y));
  Accumulator acc;
  double rk = 1.0;
  for (int k = 0; k <= order; ++k) {
    acc.add(rk * q1[static_cast<std::size_t>(k)] * q2[static_cast<std::size_t>(k)]);
    rk *= rho;
  }
  MehlerResult r;
  r.value = p1 * p2 * acc.value();
  // |P̃_k(x)| <= p(x)^{-1/2}, so the tail is below √(p1 p2) ρ^{K+1} / (1 − ρ).
  r.tail_bound = std::sqrt(p1 * p2) * rk / (1.0 - rho);
  return r;
}

CovarianceSeries covariance_subordinated(const BivariatePoisson& biv, const Subordinator& g1,
                                         const Subordinator& g2, int order) {
  biv.validate();
  if (order < 1) throw ConfigError("covariance series order must be >= 1");
  const CharlierBasis b1(biv.mu1, order), b2(biv.mu2, order);
  const auto c1 = coeff_proj(b1, g1);
  const auto c2 = coeff_proj(b2, g2);
  const double rho = biv.rho();
  CovarianceSeries out;
  Accumulator acc;
  double rest1 = c1.variance, rest2 = c2.variance;
  double rk = 1.0;
  const double scale = std::sqrt(c1.second_moment * c2.second_moment);
  for (int k = 1; k <= order; ++k) {
    rk *= rho;
    const auto uk = static_cast<std::size_t>(k);
    // c1_k c2_k μ3^k / k! = ρ^k a1_k a2_k in normalized coefficients.
    const double term = rk * c1.normalized[uk] * c2.normalized[uk];
    out.terms.push_back(term);
    acc.add(term);
    rest1 -= c1.normalized[uk] * c1.normalized[uk];
    rest2 -= c2.normalized[uk] * c2.normalized[uk];
    if (out.leading_order == 0 && (std::abs(c1.normalized[uk]) > kRankTolerance * std::sqrt(c1.second_moment) ||
                                   std::abs(c2.normalized[uk]) > kRankTolerance * std::sqrt(c2.second_moment))) {
      out.leading_order = k;
      out.leading_term = term;
    }
  }
  out.value = acc.value();
  out.remainder = out.value - out.leading_term;
  const double roundoff = 1e-12 * scale;
  out.remainder_bound = rk * rho * std::sqrt(std::max(0.0, rest1) * std::max(0.0, rest2)) + roundoff;
  const int ks = std::max(out.leading_order, 1);
  out.correlation_bound = std::pow(rho, ks) * std::sqrt(c1.variance * c2.variance);
  return out;
}

std::vector<std::pair<long, long>> sample_bivariate(const BivariatePoisson& biv, std::uint64_t seed,
                                                    std::size_t n) {
  biv.validate();
  Engine eng = make_engine(seed);
  const double a = biv.mu1 - biv.mu3, b = biv.mu2 - biv.mu3;
  std::poisson_distribution<long> p1(a > 0 ? a : 1.0), p2(b > 0 ? b : 1.0), p3(biv.mu3 > 0 ? biv.mu3 : 1.0);
  std::vector<std::pair<long, long>> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const long m1 = a > 0 ? p1(eng) : 0;
    const long m2 = b > 0 ? p2(eng) : 0;
    const long m3 = biv.mu3 > 0 ? p3(eng) : 0;
    out.emplace_back(m1 + m3, m2 + m3);
  }
  return out;
}

double inar1_transition(double mu, double mu3, long x, long y) {
  const BivariatePoisson biv{mu, mu, mu3};
  const double px = poisson_pmf(x, mu);
  if (!(px > 0.0)) throw ConfigError("transition from a state of zero probability");
  return bivariate_pmf_direct(biv, x, y) / px;
}

double hermite_h1(const Subordinator& g, double mu) {
  if (!(mu > 0.0)) throw ConfigError("hermite_h1 needs mu > 0");
  if (!g.kinks().empty()) {
    const double s = std::sqrt(mu);
    const double reach = 14.0 * s;
    auto f = [&](double z) {
      return g(z) * z * std::exp(-0.5 * z * z / mu) / (s * std::sqrt(2.0 * std::numbers::pi));
    };
    const double scale = s * std::max(std::abs(g(s)), std::abs(g(-s))) + 1e-300;
    return integrate_pieces(f, -reach, reach, g.kinks(), 1e-11, 1e-14 * scale, "hermite h1").value / mu;
  }
  const double a = gauss_hermite_h1(g, mu, 128);
  const double b = gauss_hermite_h1(g, mu, 96);
  if (!std::isfinite(a) || std::abs(a - b) > 1e-8 * std::max(std::abs(a), 1.0)) {
    throw NumericalError("Gauss-Hermite quadrature for h1 of '" + g.name() + "' did not converge");
  }
  return a;
}

CoeffLimit coeff_limit_check(const Subordinator& g, double mu, const std::vector<double>& intensities) {
  if (intensities.empty()) throw ConfigError("coeff_limit_check needs at least one intensity");
  CoeffLimit out;
  out.h1 = hermite_h1(g, mu);
  for (double m : intensities) {
    if (!(m > 0.0)) throw ConfigError("intensity M must be positive");
    const double mean = mu * m;
    const double root = std::sqrt(m);
    const CharlierBasis basis(mean, 1);
    Accumulator acc;
    for (long x = basis.x_min(); x <= basis.x_max(); ++x) {
      const double p = basis.pmf(x);
      const double d = static_cast<double>(x) - mean;
      acc.add(p * g(d / root) * d);
    }
    // c_{G_M}(1) = E G_M(N)(N − μM) / (μM).
    out.intensities.push_back(m);
    out.scaled_c1.push_back(root * acc.value() / mean);
  }
  out.distance = std::abs(out.scaled_c1.back() - out.h1);
  return out;
}

}  // namespace grainfield
