#ifndef GRAINFIELD_MODEL_HPP_
#define GRAINFIELD_MODEL_HPP_

#include <span>
#include <string>
#include <vector>

#include "grainfield/quadrature.hpp"
#include "grainfield/test_function.hpp"

namespace grainfield {

enum class Shape { Ball, Cube };

std::string to_string(Shape shape);
Shape parse_shape(const std::string& text);

// Generic grain Ξ⁰ (unit ball of radius 1, or the unit cube (0,1]^d) with an
// exact Pareto law for the volume mark: f(r) = α r0^α r^{-1-α}, r >= r0.
struct GrainSpec {
  int dimension = 1;
  Shape shape = Shape::Cube;
  double alpha = 1.5;
  double r0 = 1.0;

  void validate() const;

  double tail_constant() const;          // c_f = α r0^α
  double density(double r) const;        // f(r)
  double radius_moment(double q) const;  // E R^q, q < α
  double mean_volume() const { return radius_moment(1.0); }
  double grain_volume() const;           // Leb_d(Ξ⁰)
  double diameter() const;               // diam(Ξ⁰)
  // Linear scale r^{1/d} of a grain with volume mark r.
  double linear_scale(double r) const;

  bool operator==(const GrainSpec&) const = default;
};

// Leb_d(sΞ⁰ ∩ (sΞ⁰ − t)) in closed form.
double overlap_volume(const GrainSpec& spec, double scale, const Point& shift);

double mean_mu(const GrainSpec& spec);

// Cov(X(0), X(t)) by quadrature over the volume mark.
double covariance_rX(const GrainSpec& spec, const Point& t);

// Angular function ℓ(z) of the covariance tail, ‖z‖ = 1.
double angular_ell(const GrainSpec& spec, const Point& z);

// c(φ) = ∫∫ φ(t1)φ(t2) ℓ(e12) ‖t1 − t2‖^{-d(α−1)} dt1 dt2, i.e. Var B_α(φ).
// d = 1 by nested adaptive quadrature, d = 2 by randomized quasi-Monte Carlo.
QuadResult c_phi(const GrainSpec& spec, const TestFunction& phi);

// c_λ(φ) = ∫∫ φ(t1/λ)φ(t2/λ) r_X(t1 − t2) dt1 dt2.
QuadResult c_lambda(const GrainSpec& spec, const TestFunction& phi,
                    double lambda);

struct VarianceScaling {
  std::vector<double> lambdas;
  std::vector<double> c_lambda;
  double slope = 0.0;        // target d(3 − α)
  double intercept = 0.0;
  double limit_ratio = 0.0;  // c_λ / λ^{d(3−α)} at the largest λ
};

VarianceScaling variance_scaling_check(const GrainSpec& spec,
                                       const TestFunction& phi,
                                       std::span<const double> lambdas);

enum class Regime { Gaussian, Stable, Intermediate, Unaggregated };

std::string to_string(Regime regime);

struct ScalingRegime {
  double gamma = 0.0;
  Regime regime = Regime::Unaggregated;
  double exponent = 0.0;  // H(γ)
};

ScalingRegime scaling_exponent(const GrainSpec& spec, double gamma);

// Positive scale of the totally skewed α-stable law:
// c_f ∫_0^∞ (e^{iθr} − 1 − iθr) r^{-1-α} dr = −σ_α |θ|^α (1 − i sgn θ tan(πα/2)).
double sigma_alpha(const GrainSpec& spec);

}  // namespace grainfield

#endif  // GRAINFIELD_MODEL_HPP_
