#include "grainfield/boolean.hpp"

#include <cmath>

#include "grainfield/errors.hpp"
#include "grainfield/stats.hpp"

namespace grainfield {

void validate_boolean_set(const TestFunction& set) {
  if (set.term_count() != 1) throw ConfigError("the Boolean set must be a single rectangle or ball");
  const std::string text = set.to_string();
  if (text.rfind("rectangle:", 0) != 0 && text.rfind("ball:", 0) != 0) {
    throw ConfigError("the Boolean set must be a rectangle or ball indicator");
  }
}

namespace {

template <class F>
void for_nodes_in(const Window& window, const TestFunction& set, double lambda, F&& f) {
  const Box box = set.support();
  for (int i = 0; i < window.dimension; ++i) {
    if (window.lo > lambda * box.lo[i] || window.hi < lambda * box.hi[i]) {
      throw ConfigError("field window does not contain lambda A");
    }
  }
  const int n = window.n_grid;
  if (window.dimension == 1) {
    for (int i = 0; i < n; ++i)
      if (set(window.node(i) / lambda) != 0.0) f(static_cast<std::size_t>(i));
    return;
  }
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix)
      if (set(Point{window.node(ix) / lambda, window.node(iy) / lambda}) != 0.0) {
        f(static_cast<std::size_t>(iy) * static_cast<std::size_t>(n) + static_cast<std::size_t>(ix));
      }
}

double cell(const Window& window) {
  const double h = window.spacing();
  return window.dimension == 1 ? h : h * h;
}

}  // namespace

double region_volume(const Window& window, const TestFunction& set, double lambda) {
  validate_boolean_set(set);
  std::size_t k = 0;
  for_nodes_in(window, set, lambda, [&](std::size_t) { ++k; });
  return cell(window) * static_cast<double>(k);
}

double boolean_volume(const FieldSample& field, const TestFunction& set, double lambda) {
  validate_boolean_set(set);
  std::size_t k = 0;
  for_nodes_in(field.window, set, lambda, [&](std::size_t i) { k += field.counts[i] >= 1; });
  return cell(field.window) * static_cast<double>(k);
}

double uncovered_volume(const FieldSample& field, const TestFunction& set, double lambda) {
  validate_boolean_set(set);
  std::size_t k = 0;
  for_nodes_in(field.window, set, lambda, [&](std::size_t i) { k += field.counts[i] == 0; });
  return cell(field.window) * static_cast<double>(k);
}

BooleanExperiment boolean_limit_experiment(ExperimentConfig config, int threads,
                                           const std::filesystem::path& cache_dir) {
  validate_boolean_set(config.phi);
  if (config.gamma != 0.0) throw ConfigError("the Boolean experiment is unaggregated (gamma = 0)");
  config.subordinator = "min1";
  config.validate(true);
  BooleanExperiment out;
  out.set = run_replications(config, threads, cache_dir);
  const LambdaRun& run = out.set.runs.back();
  const Window window = functional_window(config.phi, run.lambda, config.nodes_per_unit);
  const double region = region_volume(window, config.phi, run.lambda);
  std::vector<double> volumes;
  std::size_t full = 0, empty = 0;
  for (const auto& s : run.samples) {
    BooleanVolumeSample b;
    b.lambda = s.lambda;
    b.replication = s.replication;
    b.seed = s.seed;
    b.volume = s.raw;
    b.region = region;
    b.analytic_mean = run.analytic_mean;
    b.statistic = s.statistic;
    out.samples.push_back(b);
    volumes.push_back(b.volume);
    full += b.volume == region;
    empty += b.volume == 0.0;
  }
  out.verdict = regime_report(out.set);
  out.verdict.name = config.name;
  const double se = std::sqrt(variance(volumes) / static_cast<double>(volumes.size()));
  const double z = se > 0.0 ? (mean(volumes) - run.analytic_mean) / se : 0.0;
  auto& det = out.verdict.details;
  det["region_volume"] = region;
  det["mean_volume"] = mean(volumes);
  det["analytic_mean_volume"] = run.analytic_mean;
  det["full_cover_fraction"] = static_cast<double>(full) / static_cast<double>(volumes.size());
  det["empty_fraction"] = static_cast<double>(empty) / static_cast<double>(volumes.size());
  out.verdict.checks.push_back(make_check("mean_volume_z", z, -3.0, 3.0));
  return out;
}

}  // namespace grainfield
