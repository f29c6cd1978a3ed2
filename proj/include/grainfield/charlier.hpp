#ifndef GRAINFIELD_CHARLIER_HPP_
#define GRAINFIELD_CHARLIER_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "grainfield/rng.hpp"

namespace grainfield {

// A function G applied to Poisson counts (and to reals in the Gaussian
// limit), with constants of a growth bound |G(x)| <= c1 exp(c2 |x|) and the
// points where G fails to be smooth.
class Subordinator {
 public:
  using Fn = std::function<double(double)>;

  Subordinator(std::string name, Fn fn, double c1, double c2, std::vector<double> kinks = {});

  static Subordinator identity();
  static Subordinator exponential(double a);
  static Subordinator min_one();
  static Subordinator constant(double c);
  static Subordinator charlier(int k, double mu);
  // Integer-valued table; arguments beyond the table use the last entry.
  static Subordinator table(std::vector<double> values);
  // Parses "identity", "exp:a", "min1", "const:c".
  static Subordinator parse(const std::string& text);

  double operator()(double x) const { return fn_(x); }
  const std::string& name() const { return name_; }
  double growth_c1() const { return c1_; }
  double growth_c2() const { return c2_; }
  const std::vector<double>& kinks() const { return kinks_; }
  // Whether the growth bound holds at the integers lo..hi.
  bool check_growth(long lo, long hi) const;

 private:
  std::string name_;
  Fn fn_;
  double c1_, c2_;
  std::vector<double> kinks_;
};

double poisson_log_pmf(long x, double mu);
double poisson_pmf(long x, double mu);

// Charlier polynomial P_k(x; μ) by the three-term recurrence
// P_{k+1} = (x − μ − k) P_k − k μ P_{k−1}.
double charlier_poly(double mu, int k, double x);

// Poisson(μ) on the truncation range [x_min, x_max] together with the
// Charlier polynomials up to order K. x_max = ⌈μ + 12√μ + 40⌉ and x_min is
// the symmetric lower cut (0 for small μ); the discarded mass is below 1e-12.
class CharlierBasis {
 public:
  CharlierBasis(double mu, int max_order);

  double mu() const { return mu_; }
  int max_order() const { return max_order_; }
  long x_min() const { return x_min_; }
  long x_max() const { return x_max_; }
  double pmf(long x) const;
  double truncated_mass() const { return 1.0 - kept_mass_; }

  double poly(int k, double x) const { return charlier_poly(mu_, k, x); }
  // P_k(x)/√(k! μ^k) for k = 0..K; bounded by p(x)^{-1/2}.
  std::vector<double> normalized_polys(double x) const;

 private:
  double mu_;
  int max_order_;
  long x_min_, x_max_;
  std::vector<double> pmf_;
  double kept_mass_ = 0.0;
};

struct CharlierCoefficients {
  std::vector<double> c;           // c_G(k; μ), k = 0..K
  std::vector<double> normalized;  // c_G(k; μ) √(μ^k / k!)
  double second_moment = 0.0;      // E G(N)²
  double variance = 0.0;           // Var G(N)
};

// c_G(k; μ) = μ^{−k} E G(N) P_k(N; μ) by compensated truncated sums.
CharlierCoefficients coeff_proj(const CharlierBasis& basis, const Subordinator& g);
// c_G(k; μ) = E D_+^k G(N), D_+ G(x) = G(x + 1) − G(x).
std::vector<double> coeff_diff(const CharlierBasis& basis, const Subordinator& g);

inline constexpr double kRankTolerance = 1e-10;

// min{k >= 1 : |c_G(k)| √(μ^k/k!) > 1e-10 √(E G²)}; UndefinedRankError if none.
int charlier_rank(const CharlierBasis& basis, const Subordinator& g);

struct BivariatePoisson {
  double mu1 = 1.0, mu2 = 1.0, mu3 = 0.0;
  void validate() const;
  double rho() const;
};

double bivariate_pmf_direct(const BivariatePoisson& biv, long x, long y);

struct MehlerResult {
  double value = 0.0;
  double tail_bound = 0.0;
};

MehlerResult mehler_pmf(const BivariatePoisson& biv, long x, long y, int order);

struct CovarianceSeries {
  double value = 0.0;            // Σ_{k=1..K} c1_k c2_k μ3^k / k!
  double remainder_bound = 0.0;  // bound on the omitted k > K terms
  int leading_order = 0;         // k*(G1) ∧ k*(G2) over computed terms
  double leading_term = 0.0;
  double remainder = 0.0;        // value − leading_term
  double correlation_bound = 0.0;  // ρ^{k*} √(Var G1 Var G2)
  std::vector<double> terms;
};

CovarianceSeries covariance_subordinated(const BivariatePoisson& biv, const Subordinator& g1,
                                         const Subordinator& g2, int order);

std::vector<std::pair<long, long>> sample_bivariate(const BivariatePoisson& biv, std::uint64_t seed,
                                                    std::size_t n);

// p(y | x) = p(x, y; μ, μ, μ3) / p(x; μ).
double inar1_transition(double mu, double mu3, long x, long y);

// h_{G,μ}(1) = μ^{-1} E G(Z) Z, Z ~ N(0, μ). Gauss-Hermite (128 nodes,
// checked against 96) for smooth G; G with kinks is integrated piecewise
// against the normal density.
double hermite_h1(const Subordinator& g, double mu);

struct CoeffLimit {
  std::vector<double> intensities;
  std::vector<double> scaled_c1;  // √M c_{G_M}(1; μM)
  double h1 = 0.0;
  double distance = 0.0;  // |last − h1|
};

// G_M(x) = G((x − μM)/√M) against Poisson(μM).
CoeffLimit coeff_limit_check(const Subordinator& g, double mu, const std::vector<double>& intensities);

}  // namespace grainfield

#endif  // GRAINFIELD_CHARLIER_HPP_
