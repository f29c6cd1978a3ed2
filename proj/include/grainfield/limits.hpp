#ifndef GRAINFIELD_LIMITS_HPP_
#define GRAINFIELD_LIMITS_HPP_

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "grainfield/model.hpp"
#include "grainfield/rng.hpp"
#include "grainfield/test_function.hpp"

namespace grainfield {

using Complex = std::complex<double>;

// Ψ(z) = e^{iz} − 1 − iz without cancellation for small z.
Complex psi(double z);

enum class LawKind { GaussianB, StableL, IntermediateJ };

std::string to_string(LawKind kind);

// Law of prefactor · Z(φ) with Z one of B_α(φ), L_α(φ), J_α(φ).
struct LimitLaw {
  LawKind kind = LawKind::GaussianB;
  GrainSpec spec;
  TestFunction phi = TestFunction::rectangle(1, {0.0, 0.0}, {1.0, 0.0});
  double prefactor = 1.0;
  double variance = 0.0;          // c(φ) for the Gaussian law
  double sigma = 0.0;             // σ_α
  double grain_volume = 0.0;      // Leb_d(Ξ⁰)
  double abs_power = 0.0;         // ∫ |φ|^α
  double signed_power = 0.0;      // ∫ |φ|^α sgn φ

  static LimitLaw gaussian(const GrainSpec& spec, const TestFunction& phi, double prefactor = 1.0);
  // Gaussian law with a known c(φ), skipping its quadrature.
  static LimitLaw gaussian_with_variance(const GrainSpec& spec, const TestFunction& phi,
                                         double variance, double prefactor = 1.0);
  static LimitLaw stable(const GrainSpec& spec, const TestFunction& phi, double prefactor = 1.0);
  static LimitLaw intermediate(const GrainSpec& spec, const TestFunction& phi,
                               double prefactor = 1.0);

  LimitLaw with_prefactor(double c) const;
  Complex log_cf(double theta) const;
  Complex cf(double theta) const;
};

// Exponents log CF(θ), continuous in θ.
Complex log_cf_gaussian(const LimitLaw& law, double theta);
Complex log_cf_stable(const LimitLaw& law, double theta);
Complex log_cf_intermediate(const LimitLaw& law, double theta);
// Exact log CF of λ^{−H}(X_{λ,M}(φ) − E X_{λ,M}(φ)) for the continuum integral
// at finite λ and M, d = 1 (H = `exponent`).
Complex log_cf_finite(const GrainSpec& spec, const TestFunction& phi, double lambda, double intensity,
                      double exponent, double theta);

Complex cf_gaussian(const LimitLaw& law, double theta);
Complex cf_stable(const LimitLaw& law, double theta);
// d = 1 only; nested adaptive quadrature over the grain interval.
Complex cf_intermediate(const LimitLaw& law, double theta);

// Chambers-Mallows-Stuck draw with CF exp{−scale^α |θ|^α (1 − iβ sgn θ tan(πα/2))}, α ≠ 1.
double sample_stable(double alpha, double beta, double scale, Engine& eng);
// Exact draws from the Gaussian and stable laws (the J law has no sampler).
std::vector<double> sample_law(const LimitLaw& law, std::size_t n, std::uint64_t seed);

// Symmetric θ-grid with `clusters` groups of `per_cluster` positive values
// spread over (0, θ*], θ* the point where |CF| falls to `floor`.
std::vector<double> theta_grid(const LimitLaw& law, int clusters = 5, int per_cluster = 4,
                               double floor = 0.1);
std::vector<double> theta_grid(const std::function<Complex(double)>& cf, int clusters = 5,
                               int per_cluster = 4, double floor = 0.1);

struct CfDistance {
  std::vector<double> theta;
  std::vector<Complex> empirical;
  std::vector<Complex> target;
  double distance = 0.0;  // max_θ |ĈF − CF|
  double band = 0.0;      // bootstrap 95% quantile of max_θ |ĈF* − ĈF|
  std::vector<double> cluster_distance;
  std::vector<double> cluster_band;
  int clusters_within = 0;
};

struct CfDistanceOptions {
  int clusters = 5;
  int bootstrap = 500;
  double level = 0.95;
  std::uint64_t seed = 1;
};

// Clusters are contiguous groups of the sorted distinct |θ| values.
CfDistance cf_distance(std::span<const double> samples, const LimitLaw& law,
                       std::span<const double> theta, const CfDistanceOptions& options = {});
CfDistance cf_distance(std::span<const double> samples, const std::function<Complex(double)>& target_cf,
                       std::span<const double> theta, const CfDistanceOptions& options = {});

}  // namespace grainfield

#endif  // GRAINFIELD_LIMITS_HPP_
