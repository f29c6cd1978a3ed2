#include <cmath>

#include <gtest/gtest.h>

#include "grainfield/boolean.hpp"
#include "grainfield/errors.hpp"
#include "grainfield/rng.hpp"
#include "grainfield/stats.hpp"

namespace gf = grainfield;

namespace {

const gf::TestFunction kUnit = gf::TestFunction::rectangle(1, {0.0, 0.0}, {1.0, 0.0});
const gf::TestFunction kDisk = gf::TestFunction::ball(2, {0.5, 0.5}, 0.5);

}  // namespace

TEST(BooleanSet, Validation) {
  EXPECT_NO_THROW(gf::validate_boolean_set(kUnit));
  EXPECT_NO_THROW(gf::validate_boolean_set(kDisk));
  EXPECT_THROW(gf::validate_boolean_set(gf::TestFunction::gaussian_bump(1, {0.0, 0.0}, 1.0)), gf::ConfigError);
  EXPECT_THROW(gf::validate_boolean_set(kUnit + gf::TestFunction::rectangle(1, {2.0, 0.0}, {3.0, 0.0})),
               gf::ConfigError);
}

TEST(BooleanVolume, NoGrainsGiveZero) {
  gf::FieldSample f;
  f.window = gf::functional_window(kUnit, 32.0, 4.0);
  f.counts.assign(f.window.node_count(), 0);
  EXPECT_EQ(gf::boolean_volume(f, kUnit, 32.0), 0.0);
  EXPECT_DOUBLE_EQ(gf::uncovered_volume(f, kUnit, 32.0), 32.0);
  EXPECT_DOUBLE_EQ(gf::region_volume(f.window, kUnit, 32.0), 32.0);
}

TEST(BooleanVolume, WindowMustContainTheSet) {
  gf::FieldSample f;
  f.window = gf::Window{1, 0.0, 16.0, 64};
  f.counts.assign(f.window.node_count(), 1);
  EXPECT_THROW(gf::boolean_volume(f, kUnit, 32.0), gf::ConfigError);
}

TEST(BooleanVolume, ComplementIdentityIsExact) {
  const gf::GrainSpec line{1, gf::Shape::Cube, 1.5, 1.0};
  const gf::GrainSpec plane{2, gf::Shape::Ball, 1.5, 1.0};
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto f1 = gf::sample_field(line, gf::functional_window(kUnit, 64.0, 4.0), 0.3, seed);
    EXPECT_EQ(gf::boolean_volume(f1, kUnit, 64.0) + gf::uncovered_volume(f1, kUnit, 64.0),
              gf::region_volume(f1.window, kUnit, 64.0));
    const auto f2 = gf::sample_field(plane, gf::functional_window(kDisk, 16.0, 2.0), 0.05, seed);
    const double v = gf::boolean_volume(f2, kDisk, 16.0);
    EXPECT_EQ(v + gf::uncovered_volume(f2, kDisk, 16.0), gf::region_volume(f2.window, kDisk, 16.0));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, gf::region_volume(f2.window, kDisk, 16.0));
  }
  // Grid measure of λ·disk approaches π(λ/2)².
  gf::Window w = gf::functional_window(kDisk, 64.0, 8.0);
  EXPECT_NEAR(gf::region_volume(w, kDisk, 64.0) / (M_PI * 32.0 * 32.0), 1.0, 0.01);
}

TEST(BooleanVolume, MonotoneInTheGrains) {
  const gf::GrainSpec spec;
  const auto window = gf::functional_window(kUnit, 64.0, 4.0);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto field = gf::sample_field(spec, window, 0.5, seed);
    double prev = -1.0;
    std::vector<gf::Grain> grains;
    for (std::size_t i = 0; i <= field.grains.size(); ++i) {
      gf::FieldSample partial = field;
      partial.grains = grains;
      partial.counts = gf::evaluate_field(spec, grains, window);
      const double v = gf::boolean_volume(partial, kUnit, 64.0);
      EXPECT_GE(v, prev);
      prev = v;
      if (i < field.grains.size()) grains.push_back(field.grains[i]);
    }
    EXPECT_EQ(prev, gf::boolean_volume(field, kUnit, 64.0));
  }
}

TEST(BooleanVolume, EqualsTheMinOneFunctional) {
  const gf::GrainSpec spec;
  const auto window = gf::functional_window(kUnit, 128.0, 4.0);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto f = gf::sample_field(spec, window, 1.0, seed);
    const double v = gf::integrate_functional(f, kUnit, 128.0, [](std::int32_t x) { return std::min(x, 1) * 1.0; }).value;
    EXPECT_NEAR(gf::boolean_volume(f, kUnit, 128.0), v, 1e-10);
  }
}

TEST(BooleanVolume, NodeCoverageProbability) {
  // P(X(t) >= 1) = 1 − e^{−Mμ}, one node per independent field.
  const gf::GrainSpec spec;
  const auto window = gf::functional_window(kUnit, 16.0, 4.0);
  for (double m : {0.3, 1.0}) {
    std::vector<long> covered;
    for (int rep = 0; rep < 2000; ++rep) {
      const auto f = gf::sample_field(spec, window, m, gf::derive_seed(11, {0, static_cast<std::uint64_t>(rep)}));
      covered.push_back(f.counts[32] >= 1);
    }
    const double p0 = std::exp(-m * 3.0);
    const auto gof = gf::chi_square_gof(covered, [&](long k) { return k == 0 ? p0 : k == 1 ? 1 - p0 : 0.0; });
    EXPECT_GT(gof.p_value, 0.001) << "M " << m;
  }
}

TEST(BooleanExperiment, MeanVolumeAndPrefactor) {
  gf::ExperimentConfig c;
  c.gamma = 0.0;
  c.lambdas = {32.0, 64.0};
  c.replications = 600;
  const auto e = gf::boolean_limit_experiment(c, 1);
  EXPECT_EQ(e.samples.size(), 600u);
  const auto& v = e.verdict;
  EXPECT_TRUE(v.check("mean_volume_z").pass);
  EXPECT_NEAR(v.details["analytic_mean_volume"].get<double>(), -std::expm1(-3.0) * 64.0, 1e-9);
  EXPECT_TRUE(v.details.contains("prefactor_estimate"));
  EXPECT_NO_THROW(v.check("hill_index"));
  for (const auto& s : e.samples) {
    EXPECT_GE(s.volume, 0.0);
    EXPECT_LE(s.volume, s.region);
  }
  c.gamma = 0.5;
  EXPECT_THROW(gf::boolean_limit_experiment(c, 1), gf::ConfigError);
  c.gamma = 0.0;
  c.phi = gf::TestFunction::gaussian_bump(1, {0.0, 0.0}, 1.0);
  EXPECT_THROW(gf::boolean_limit_experiment(c, 1), gf::ConfigError);
}

TEST(BooleanExperiment, PrefactorTracksDensity) {
  // μ = 3 r0 here, so halving r0 moves the prefactor e^{−μ} by e^{1.5}.
  std::vector<double> est;
  for (double r0 : {1.0, 0.5}) {
    gf::ExperimentConfig c;
    c.gamma = 0.0;
    c.spec.r0 = r0;
    c.lambdas = {128.0};
    c.replications = 1000;
    est.push_back(gf::boolean_limit_experiment(c, 1).verdict.details["prefactor_estimate"].get<double>());
  }
  EXPECT_NEAR(est[0] / est[1], std::exp(-1.5), 0.15 * std::exp(-1.5));
}
