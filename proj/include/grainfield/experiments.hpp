#ifndef GRAINFIELD_EXPERIMENTS_HPP_
#define GRAINFIELD_EXPERIMENTS_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "grainfield/charlier.hpp"
#include "grainfield/model.hpp"
#include "grainfield/sampler.hpp"
#include "grainfield/test_function.hpp"

namespace grainfield {

struct ExperimentConfig {
  std::string name = "experiment";
  GrainSpec spec;
  TestFunction phi = TestFunction::rectangle(1, {0.0, 0.0}, {1.0, 0.0});
  double gamma = 1.0;
  std::vector<double> lambdas{32.0, 64.0, 128.0, 256.0};
  int replications = 1000;
  // Subordinator text form (see Subordinator::parse); "identity" when absent.
  std::string subordinator = "identity";
  std::uint64_t seed = 1;
  // Grid nodes per unit length of the field window.
  double nodes_per_unit = 4.0;
  std::string output = "out";

  // Throws ConfigError; `distributional` also requires R >= 200.
  void validate(bool distributional = false) const;
  bool has_subordinator() const { return subordinator != "identity"; }
  bool operator==(const ExperimentConfig&) const = default;
};

// Observation window λ·supp φ (square hull) with the configured grid.
Window functional_window(const TestFunction& phi, double lambda, double nodes_per_unit);

struct FunctionalValue {
  double value = 0.0;
  double error = 0.0;  // |S_h − S_{2h}|, the first-order Richardson estimate
};

// h^d Σ_t v(X(t)) φ(t/λ) over grid nodes, v the identity when absent.
FunctionalValue integrate_functional(const FieldSample& field, const TestFunction& phi, double lambda,
                                     const std::function<double(std::int32_t)>& transform = {});

// h^d Σ_t φ(t/λ): the grid-consistent ∫ φ(t/λ) dt used for analytic centering.
double grid_phi_sum(const Window& window, const TestFunction& phi, double lambda);

// E v(N) for N ~ Poisson(mean) by exact truncated summation.
double poisson_expectation(const std::function<double(long)>& v, double mean);

struct StatisticSample {
  double lambda = 0.0;
  double gamma = 0.0;
  int replication = 0;
  std::uint64_t seed = 0;
  double statistic = 0.0;           // normalized, centered with the analytic mean
  double raw = 0.0;                 // uncentered functional
  double identity_statistic = 0.0;  // same field with the identity subordinator
};

struct LambdaRun {
  double lambda = 0.0;
  double intensity = 0.0;  // M = λ^γ
  double normalization = 0.0;
  double analytic_mean = 0.0;
  double identity_mean = 0.0;
  std::vector<StatisticSample> samples;
};

struct ReplicationSet {
  ExperimentConfig config;
  ScalingRegime regime;
  std::vector<LambdaRun> runs;
};

// For each λ: M = λ^γ, window λ·supp φ, R fields from seeds
// derive_seed(master, {λ index, replication}). With γ > 0 the subordinator
// acts on ξ_M = (X_M − μM)/√M and the statistic is λ^{γ/2−H}(Y − EY); with
// γ = 0 it acts on the raw counts and the statistic is λ^{−d/α}(Y − EY).
// `cache_dir` (optional) stores and reuses the sampled fields.
ReplicationSet run_replications(const ExperimentConfig& config, int threads,
                                const std::filesystem::path& cache_dir = {});

struct HillEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
  int k = 0;
};

// Hill estimator on the k = ⌊k_frac n⌋ largest |x|, bootstrap standard error.
HillEstimate hill_estimator(std::span<const double> samples, double k_frac = 0.05,
                            std::uint64_t seed = 1, int bootstrap = 200);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double standard_error = 0.0;
};

// Least squares of log y on log x.
SlopeFit slope_fit(std::span<const double> x, std::span<const double> y);

struct Check {
  std::string name;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool pass = false;
  bool gating = true;
};

Check make_check(std::string name, double value, double lower, double upper, bool gating = true);

struct Verdict {
  std::string name;
  std::vector<Check> checks;
  nlohmann::json details = nlohmann::json::object();

  bool pass() const;
  const Check& check(const std::string& name) const;
  nlohmann::json to_json() const;
};

// Target prefactor of the limit law: 1 for the identity, h_{G,μ}(1) for
// γ > 0 and c_G(1; μ) for γ = 0.
double limit_prefactor(const ExperimentConfig& config);

// Regime checks at the largest λ: normality and variance (Gaussian), Hill and
// CF clusters (stable and unaggregated), CF clusters against the intermediate
// law (boundary), prefactor and shared-seed correlation for subordinators.
Verdict regime_report(const ReplicationSet& set);

// RFC 4180 CSV with 17 significant digits.
std::string samples_csv(const ReplicationSet& set);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace grainfield

#endif  // GRAINFIELD_EXPERIMENTS_HPP_
