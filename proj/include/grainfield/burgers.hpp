#ifndef GRAINFIELD_BURGERS_HPP_
#define GRAINFIELD_BURGERS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "grainfield/experiments.hpp"
#include "grainfield/model.hpp"
#include "grainfield/sampler.hpp"

namespace grainfield {

// g(t, x, y) = (2πκt)^{−d/2} exp{−‖x − y‖²/2κt}.
double heat_kernel(int dimension, double t, const Point& x, const Point& y, double kappa);
// ∇_x g = −(x − y)/(κt) g.
Point heat_kernel_grad(int dimension, double t, const Point& x, const Point& y, double kappa);

struct BurgersConfig {
  std::string name = "burgers";
  GrainSpec spec;
  double kappa = 1.0;
  std::vector<double> times{0.5, 1.0};
  std::vector<double> points{0.0, 0.25};
  double gamma = 1.0;
  std::vector<double> lambdas{16.0, 32.0, 64.0, 128.0};
  int replications = 200;
  std::uint64_t seed = 1;
  double nodes_per_unit = 2.0;
  // Quadrature domain λ(x ± c√(κt)).
  double truncation = 8.0;
  std::string output = "out";

  void validate() const;
  bool operator==(const BurgersConfig&) const = default;
};

// Potential ξ on the grid with the exact E G(ξ) for G(x) = e^{x/κ}.
struct Potential {
  Window window;
  std::vector<double> values;
  double mean_g = 1.0;
};

// ξ = (X_M − μM)/√M for γ > 0 and ξ = X for γ = 0.
Potential make_potential(const FieldSample& field, double gamma, double kappa);

// E e^{ξ/κ}: exp{(e^{1/(κ√M)} − 1 − 1/(κ√M))μM} for γ > 0, exp{μ(e^{1/κ} − 1)} for γ = 0.
double exponential_mean(double mu, double intensity, double gamma, double kappa);

struct VelocityValue {
  double v = 0.0;
  double numerator = 0.0;    // h Σ ∇g(t, x, y/λ)(G(ξ(y)) − E G)
  double denominator = 0.0;  // λ h Σ g(t, x, y/λ) G(ξ(y))
};

// Rescaled Hopf-Cole velocity v(λ²t, λx) in d = 1 from grid sums over
// λ(x ± c√(κt)). Throws DegenerateSampleError when the denominator falls
// below 1e-12 of its expected size.
VelocityValue hopf_cole_velocity(const Potential& xi, double kappa, double lambda, double t, double x,
                                 double truncation = 8.0);

struct VelocitySample {
  double lambda = 0.0;
  double t = 0.0;
  double x = 0.0;
  int replication = 0;
  std::uint64_t seed = 0;
  double v = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  // Linear functional of the same field with φ = ∇g, normalized as the
  // numerator's limit.
  double identity = 0.0;
};

struct BurgersExperiment {
  BurgersConfig config;
  ScalingRegime regime;
  double exponent = 0.0;  // λ^{exponent} v_λ has a nondegenerate limit
  std::vector<VelocitySample> samples;
  std::vector<int> dropped;  // degenerate denominators per λ
  Verdict verdict;
};

// Normalizing exponent 1 + d + γ/2 − H(γ) for γ > 0 and 1 + d − d/α for γ = 0.
double velocity_exponent(const GrainSpec& spec, double gamma);

// Slope of log median |v_λ| against log λ per evaluation point, checked
// against −exponent ± 0.15, and the degenerate-denominator rate below 1%.
BurgersExperiment burgers_scaling_experiment(const BurgersConfig& config, int threads,
                                             const std::filesystem::path& cache_dir = {});

// Columns lambda, t, x, replication, v, numerator, denominator.
std::string velocity_csv(const BurgersExperiment& experiment);

}  // namespace grainfield

#endif  // GRAINFIELD_BURGERS_HPP_
