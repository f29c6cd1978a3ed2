#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "grainfield/charlier.hpp"
#include "grainfield/errors.hpp"
#include "grainfield/experiments.hpp"
#include "grainfield/model.hpp"
#include "grainfield/quadrature.hpp"
#include "grainfield/stats.hpp"

namespace gf = grainfield;

namespace {

gf::ExperimentConfig small_config(double gamma, int replications) {
  gf::ExperimentConfig c;
  c.gamma = gamma;
  c.lambdas = {16.0, 32.0};
  c.replications = replications;
  c.seed = 7;
  return c;
}

std::vector<double> statistics(const gf::LambdaRun& run) {
  std::vector<double> out;
  for (const auto& s : run.samples) out.push_back(s.statistic);
  return out;
}

std::vector<double> raws(const gf::LambdaRun& run) {
  std::vector<double> out;
  for (const auto& s : run.samples) out.push_back(s.raw);
  return out;
}

}  // namespace

TEST(ExperimentConfig, Validation) {
  gf::ExperimentConfig c;
  EXPECT_NO_THROW(c.validate(true));
  auto bad = c;
  bad.lambdas = {32.0, 40.0};
  EXPECT_THROW(bad.validate(), gf::ConfigError);
  bad = c;
  bad.replications = 100;
  EXPECT_NO_THROW(bad.validate(false));
  EXPECT_THROW(bad.validate(true), gf::ConfigError);
  bad = c;
  bad.subordinator = "cube";
  EXPECT_THROW(bad.validate(), gf::Error);
  bad = c;
  bad.gamma = -0.1;
  EXPECT_THROW(bad.validate(), gf::ConfigError);
  bad = c;
  bad.phi = gf::TestFunction::rectangle(2, {0.0, 0.0}, {1.0, 1.0});
  EXPECT_THROW(bad.validate(), gf::ConfigError);
}

TEST(IntegrateFunctional, ConstantField) {
  for (double lambda : {8.0, 32.0}) {
    gf::FieldSample f;
    f.window = gf::functional_window(gf::TestFunction::rectangle(1, {0.0, 0.0}, {1.0, 0.0}), lambda, 4.0);
    f.counts.assign(f.window.node_count(), 3);
    const auto phi = gf::TestFunction::rectangle(1, {0.0, 0.0}, {1.0, 0.0});
    const auto v = gf::integrate_functional(f, phi, lambda);
    EXPECT_NEAR(v.value, 3.0 * lambda, 1e-9 * lambda);
    EXPECT_NEAR(v.error, 0.0, 1e-9 * lambda);
    const auto sq = gf::integrate_functional(f, phi, lambda, [](std::int32_t x) { return double(x) * x; });
    EXPECT_NEAR(sq.value, 9.0 * lambda, 1e-9 * lambda);
  }
}

TEST(IntegrateFunctional, ConstantFieldInThePlane) {
  const auto phi = gf::TestFunction::rectangle(2, {0.0, 0.0}, {1.0, 1.0});
  gf::FieldSample f;
  f.window = gf::functional_window(phi, 8.0, 4.0);
  f.counts.assign(f.window.node_count(), 2);
  EXPECT_NEAR(gf::integrate_functional(f, phi, 8.0).value, 2.0 * 64.0, 1e-9);
}

TEST(IntegrateFunctional, WindowMustCoverSupport) {
  const auto phi = gf::TestFunction::rectangle(1, {0.0, 0.0}, {1.0, 0.0});
  gf::FieldSample f;
  f.window = gf::Window{1, 0.0, 10.0, 40};
  f.counts.assign(f.window.node_count(), 1);
  EXPECT_THROW(gf::integrate_functional(f, phi, 16.0), gf::ConfigError);
  EXPECT_NO_THROW(gf::integrate_functional(f, phi, 10.0));
}

TEST(IntegrateFunctional, MatchesContinuumIntegralUpToGridError) {
  // ∫ X(t) 1(0 < t <= λ) dt = Σ_j |grain_j ∩ (0, λ]|; each grain moves the grid sum by at most h.
  const gf::GrainSpec spec;
  const auto phi = gf::TestFunction::rectangle(1, {0.0, 0.0}, {1.0, 0.0});
  const double lambda = 64.0;
  const auto window = gf::functional_window(phi, lambda, 4.0);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto field = gf::sample_field(spec, window, 8.0, seed);
    double exact = 0.0;
    for (const auto& g : field.grains) {
      exact += std::max(0.0, std::min(lambda, g.center[0] + g.scale) - std::max(0.0, g.center[0]));
    }
    const double v = gf::integrate_functional(field, phi, lambda).value;
    EXPECT_LE(std::abs(v - exact), window.spacing() * field.grains.size() + 1e-9);
  }
}

TEST(PoissonExpectation, Moments) {
  for (double mu : {0.5, 3.0, 300.0}) {
    EXPECT_NEAR(gf::poisson_expectation([](long x) { return double(x); }, mu), mu, 1e-12 * mu);
    EXPECT_NEAR(gf::poisson_expectation([](long x) { return double(x) * x; }, mu), mu + mu * mu,
                1e-11 * (mu + mu * mu));
    const double a = 0.1;
    EXPECT_NEAR(gf::poisson_expectation([&](long x) { return std::exp(a * x); }, mu),
                std::exp(mu * std::expm1(a)), 1e-10 * std::exp(mu * std::expm1(a)));
    EXPECT_NEAR(gf::poisson_expectation([](long x) { return std::min(x, 1L); }, mu), -std::expm1(-mu), 1e-13);
  }
}

TEST(RunReplications, StatisticsAreCenteredWithTheAnalyticMean) {
  for (double gamma : {1.0, 0.2}) {
    const auto set = gf::run_replications(small_config(gamma, 400), 1);
    for (const auto& run : set.runs) {
      const auto r = raws(run);
      const double se = std::sqrt(gf::variance(r) / r.size());
      EXPECT_LT(std::abs(gf::mean(r) - run.analytic_mean), 3.0 * se) << "gamma " << gamma;
      EXPECT_DOUBLE_EQ(run.intensity, std::pow(run.lambda, gamma));
    }
  }
}

TEST(RunReplications, SubordinatedAnalyticMean) {
  for (const char* g : {"exp:0.5", "min1"}) {
    auto c = small_config(1.0, 400);
    c.subordinator = g;
    const auto set = gf::run_replications(c, 1);
    const auto& run = set.runs.back();
    const auto r = raws(run);
    const double se = std::sqrt(gf::variance(r) / r.size());
    EXPECT_LT(std::abs(gf::mean(r) - run.analytic_mean), 4.0 * se) << g;
  }
}

TEST(RunReplications, DeterministicAcrossThreadCounts) {
  auto c = small_config(0.5, 200);
  c.subordinator = "exp:0.5";
  const auto a = gf::run_replications(c, 1);
  const auto b = gf::run_replications(c, 4);
  EXPECT_EQ(gf::samples_csv(a), gf::samples_csv(b));
  c.seed = 8;
  EXPECT_NE(gf::samples_csv(a), gf::samples_csv(gf::run_replications(c, 2)));
}

TEST(RunReplications, LinearInTheTestFunction) {
  auto c = small_config(1.0, 200);
  const auto a = gf::run_replications(c, 1);
  c.phi = c.phi.scaled(2.5);
  const auto b = gf::run_replications(c, 1);
  for (std::size_t i = 0; i < a.runs.size(); ++i)
    for (std::size_t r = 0; r < a.runs[i].samples.size(); ++r) {
      const double x = a.runs[i].samples[r].statistic, y = b.runs[i].samples[r].statistic;
      EXPECT_NEAR(y, 2.5 * x, 1e-9 * (1.0 + std::abs(y)));
    }
}

TEST(RunReplications, SubordinatedTracksIdentityInTheGaussianRegime) {
  auto c = small_config(1.0, 300);
  c.lambdas = {64.0};
  c.subordinator = "exp:0.5";
  const auto set = gf::run_replications(c, 1);
  std::vector<double> y, x;
  for (const auto& s : set.runs[0].samples) {
    y.push_back(s.statistic);
    x.push_back(s.identity_statistic);
  }
  EXPECT_GT(gf::correlation(x, y), 0.9);
}

TEST(HillEstimator, ParetoTail) {
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x;
  for (int i = 0; i < 10000; ++i) x.push_back(std::pow(1.0 - u(eng), -1.0 / 1.5) * (i % 2 ? 1 : -1));
  const auto h = gf::hill_estimator(x, 0.05);
  EXPECT_NEAR(h.estimate, 1.5, 0.1);
  EXPECT_GT(h.standard_error, 0.0);
  EXPECT_LT(h.standard_error, 0.2);
  EXPECT_EQ(h.k, 500);
}

TEST(HillEstimator, GaussianTailIsLight) {
  std::mt19937_64 eng(4);
  std::normal_distribution<double> n;
  std::vector<double> x;
  for (int i = 0; i < 10000; ++i) x.push_back(n(eng));
  EXPECT_GT(gf::hill_estimator(x, 0.05).estimate, 2.5);
}

TEST(HillEstimator, ScaleInvariant) {
  std::mt19937_64 eng(5);
  std::student_t_distribution<double> t(1.5);
  std::vector<double> x, y;
  for (int i = 0; i < 2000; ++i) {
    x.push_back(t(eng));
    y.push_back(37.5 * x.back());
  }
  const auto a = gf::hill_estimator(x, 0.05), b = gf::hill_estimator(y, 0.05);
  EXPECT_NEAR(a.estimate, b.estimate, 1e-12 * a.estimate);
  EXPECT_NEAR(a.standard_error, b.standard_error, 1e-9 * a.standard_error);
}

TEST(HillEstimator, Preconditions) {
  std::vector<double> few(499, 1.0);
  EXPECT_THROW(gf::hill_estimator(few, 0.05), gf::ConfigError);
  std::vector<double> x;
  for (int i = 1; i <= 1000; ++i) x.push_back(i);
  EXPECT_THROW(gf::hill_estimator(x, 0.005), gf::ConfigError);
  EXPECT_THROW(gf::hill_estimator(x, 0.25), gf::ConfigError);
  std::vector<double> tied(1000, 1.0);
  for (int i = 0; i < 900; ++i) tied[i] = 0.001 * i;
  EXPECT_THROW(gf::hill_estimator(tied, 0.05), gf::DegenerateSampleError);
}

TEST(SlopeFit, ExactPowerLaw) {
  const std::vector<double> x{2.0, 4.0, 8.0, 16.0, 32.0};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 1.25));
  const auto f = gf::slope_fit(x, y);
  EXPECT_NEAR(f.slope, 1.25, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
  EXPECT_NEAR(f.standard_error, 0.0, 1e-10);
}

TEST(SlopeFit, Errors) {
  const std::vector<double> x3{1.0, 2.0, 3.0}, y3{1.0, 2.0, 3.0};
  EXPECT_THROW(gf::slope_fit(x3, y3), gf::ConfigError);
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0}, y{1.0, 0.0, 3.0, 4.0};
  EXPECT_THROW(gf::slope_fit(x, y), gf::ConfigError);
}

TEST(SlopeFit, GaussianRegimeVarianceGrowsAsTwiceH) {
  // Var X_{λ,M}(φ) = M c_λ(φ) ≍ λ^{γ + 3 − α} = λ^{2H}.
  gf::ExperimentConfig c;
  c.gamma = 1.0;
  c.lambdas = {16.0, 32.0, 64.0, 128.0};
  c.replications = 400;
  const auto set = gf::run_replications(c, 1);
  std::vector<double> lam, var;
  for (const auto& run : set.runs) {
    lam.push_back(run.lambda);
    var.push_back(gf::variance(raws(run)));
  }
  EXPECT_NEAR(gf::slope_fit(lam, var).slope, 2.0 * set.regime.exponent, 0.1);
}

TEST(SlopeFit, BooleanVarianceSlopeSeparatesTailIndices) {
  // Node covariance of the coverage indicator is e^{−2μ}(e^{r_X(t)} − 1), so
  // Var X̂_λ(0,1] = 2e^{−2μ} ∫_0^λ (λ − t)(e^{r_X(t)} − 1) dt.
  const std::vector<double> lambdas{32.0, 64.0, 128.0, 256.0};
  std::vector<double> simulated, exact;
  for (double alpha : {1.3, 1.7}) {
    gf::ExperimentConfig c;
    c.spec.alpha = alpha;
    c.gamma = 0.0;
    c.subordinator = "min1";
    c.lambdas = lambdas;
    c.replications = 1000;
    const auto set = gf::run_replications(c, 1);
    const double mu = gf::mean_mu(c.spec);
    std::vector<double> var, var_exact;
    for (const auto& run : set.runs) {
      var.push_back(gf::variance(raws(run)));
      const double l = run.lambda;
      const auto f = [&](double t) { return (l - t) * std::expm1(gf::covariance_rX(c.spec, {t, 0.0})); };
      var_exact.push_back(2.0 * std::exp(-2.0 * mu) * gf::integrate(f, 0.0, l, 1e-9).value);
    }
    simulated.push_back(gf::slope_fit(lambdas, var).slope);
    exact.push_back(gf::slope_fit(lambdas, var_exact).slope);
    EXPECT_NEAR(simulated.back(), exact.back(), 0.1) << "alpha " << alpha;
  }
  EXPECT_GT(std::abs(exact[0] - exact[1]), 0.05);
  EXPECT_EQ(simulated[0] > simulated[1], exact[0] > exact[1]);
}

TEST(LimitPrefactor, Values) {
  gf::ExperimentConfig c;
  EXPECT_DOUBLE_EQ(gf::limit_prefactor(c), 1.0);
  c.subordinator = "exp:0.5";
  EXPECT_NEAR(gf::limit_prefactor(c), 0.5 * std::exp(0.25 * 3.0 / 2.0), 1e-8);
  c.gamma = 0.0;
  c.subordinator = "min1";
  EXPECT_NEAR(gf::limit_prefactor(c), std::exp(-3.0), 1e-12);
  c.subordinator = "exp:1";
  // Cov(e^N, N)/μ = (e − 1) e^{(e−1)μ}.
  EXPECT_NEAR(gf::limit_prefactor(c) / (std::expm1(1.0) * std::exp(std::expm1(1.0) * 3.0)), 1.0, 1e-9);
}

TEST(RegimeReport, IdentityMatchesScalingRegime) {
  auto c = small_config(1.0, 500);
  c.lambdas = {64.0};
  const auto v = gf::regime_report(gf::run_replications(c, 1));
  EXPECT_EQ(v.details["regime"], "gaussian");
  EXPECT_NO_THROW(v.check("ks_p_value"));
  EXPECT_NO_THROW(v.check("variance_ratio"));
  EXPECT_THROW(v.check("hill_index"), gf::ConfigError);
  c.gamma = 0.2;
  const auto s = gf::regime_report(gf::run_replications(c, 1));
  EXPECT_EQ(s.details["regime"], "stable");
  EXPECT_NO_THROW(s.check("hill_index"));
  EXPECT_NO_THROW(s.check("cf_clusters_within"));
  const auto j = s.to_json();
  EXPECT_EQ(j["schema"], "grainfield-verdict-v1");
  EXPECT_EQ(j["pass"], s.pass());
  EXPECT_EQ(j["checks"].size(), s.checks.size());
}

TEST(RegimeReport, ExactFiniteLawMatchesSimulationInEveryRegime) {
  // The exact finite-λ law has no asymptotic error, so only sampling error remains.
  for (double gamma : {1.0, 0.5, 0.2}) {
    auto c = small_config(gamma, 1000);
    c.lambdas = {64.0};
    const auto v = gf::regime_report(gf::run_replications(c, 1));
    EXPECT_GE(v.check("cf_finite_clusters_within").value, 4.0) << "gamma " << gamma;
  }
}

TEST(RegimeReport, BooleanPrefactor) {
  auto c = small_config(0.0, 1000);
  c.lambdas = {128.0};
  c.subordinator = "min1";
  const auto v = gf::regime_report(gf::run_replications(c, 1));
  EXPECT_NEAR(v.details["target_prefactor"].get<double>(), std::exp(-3.0), 1e-12);
  EXPECT_NEAR(v.check("prefactor_ratio").value, 1.0, 0.15);
}

TEST(RegimeReport, GaussianChecksGateOnlyWithoutSubordinator) {
  auto c = small_config(1.0, 300);
  c.lambdas = {32.0};
  c.subordinator = "exp:0.5";
  const auto v = gf::regime_report(gf::run_replications(c, 1));
  EXPECT_FALSE(v.check("variance_ratio").gating);
  EXPECT_TRUE(v.check("sd_ratio_over_prefactor").gating);
  EXPECT_TRUE(v.check("shared_seed_correlation").gating);
}

TEST(Verdict, PassIgnoresNonGatingChecks) {
  gf::Verdict v;
  v.checks.push_back(gf::make_check("a", 1.0, 0.0, 2.0));
  v.checks.push_back(gf::make_check("b", 5.0, 0.0, 2.0, false));
  EXPECT_TRUE(v.pass());
  v.checks.push_back(gf::make_check("c", std::nan(""), 0.0, 2.0));
  EXPECT_FALSE(v.check("c").pass);
  EXPECT_FALSE(v.pass());
}

TEST(SamplesCsv, Format) {
  auto c = small_config(1.0, 200);
  c.lambdas = {16.0};
  c.subordinator = "exp:0.5";
  const auto set = gf::run_replications(c, 1);
  const std::string csv = gf::samples_csv(set);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "lambda,gamma,replication,seed,statistic,identity_statistic\r");
  int rows = 0;
  while (std::getline(in, line)) {
    ASSERT_FALSE(line.empty());
    EXPECT_EQ(line.back(), '\r');
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    ASSERT_EQ(cells.size(), 6u);
    const auto& s = set.runs[0].samples[rows];
    EXPECT_EQ(std::stod(cells[4]), s.statistic);
    EXPECT_EQ(std::stoull(cells[3]), s.seed);
    ++rows;
  }
  EXPECT_EQ(rows, 200);
  c.subordinator = "identity";
  EXPECT_EQ(gf::samples_csv(gf::run_replications(c, 1)).substr(0, 41), "lambda,gamma,replication,seed,statistic\r\n");
}
