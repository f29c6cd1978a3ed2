#ifndef GRAINFIELD_BOOLEAN_HPP_
#define GRAINFIELD_BOOLEAN_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "grainfield/experiments.hpp"
#include "grainfield/sampler.hpp"
#include "grainfield/test_function.hpp"

namespace grainfield {

// A is given by its indicator, a single rectangle or ball term.
void validate_boolean_set(const TestFunction& set);

// h^d #{grid nodes t with t/λ ∈ A}: the grid measure of λA.
double region_volume(const Window& window, const TestFunction& set, double lambda);
// h^d #{grid nodes in λA covered by at least one grain}.
double boolean_volume(const FieldSample& field, const TestFunction& set, double lambda);
// h^d #{grid nodes in λA covered by no grain}.
double uncovered_volume(const FieldSample& field, const TestFunction& set, double lambda);

struct BooleanVolumeSample {
  double lambda = 0.0;
  int replication = 0;
  std::uint64_t seed = 0;
  double volume = 0.0;
  double region = 0.0;         // grid measure of λA
  double analytic_mean = 0.0;  // (1 − e^{−Mμ}) · region
  double statistic = 0.0;      // λ^{−d/α}(volume − analytic_mean)
};

struct BooleanExperiment {
  ReplicationSet set;
  std::vector<BooleanVolumeSample> samples;  // largest λ
  Verdict verdict;
};

// γ = 0 and G = min(x, 1) on the configured set; the verdict adds the mean
// volume check to the stable-regime report.
BooleanExperiment boolean_limit_experiment(ExperimentConfig config, int threads,
                                           const std::filesystem::path& cache_dir = {});

}  // namespace grainfield

#endif  // GRAINFIELD_BOOLEAN_HPP_
