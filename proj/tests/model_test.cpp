#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "grainfield/errors.hpp"
#include "grainfield/model.hpp"
#include "grainfield/quadrature.hpp"

namespace gf = grainfield;

namespace {

gf::GrainSpec reference() { return {1, gf::Shape::Cube, 1.5, 1.0}; }
gf::GrainSpec ball2() { return {2, gf::Shape::Ball, 1.5, 1.0}; }

// r_X for the d=1 unit-interval grain with alpha = 1.5, r0 = 1.
double rx_closed_form(double s) {
  s = std::abs(s);
  return s < 1.0 ? 3.0 - s : 2.0 / std::sqrt(s);
}

}  // namespace

TEST(GrainSpec, ParetoConstants) {
  const auto s = reference();
  EXPECT_DOUBLE_EQ(s.tail_constant(), 1.5);
  EXPECT_DOUBLE_EQ(s.mean_volume(), 3.0);
  const auto body = gf::integrate_pieces([&](double r) { return s.density(r); }, 1.0, 1e6,
                                         {10, 100, 1e3, 1e4, 1e5}, 1e-10);
  EXPECT_NEAR(body.value + std::pow(1e6, -1.5), 1.0, 1e-9);
  EXPECT_THROW((gf::GrainSpec{1, gf::Shape::Cube, 2.0, 1.0}.validate()), gf::ConfigError);
  EXPECT_THROW((gf::GrainSpec{3, gf::Shape::Cube, 1.5, 1.0}.validate()), gf::ConfigError);
  EXPECT_THROW((gf::GrainSpec{1, gf::Shape::Cube, 1.5, 0.0}.validate()), gf::ConfigError);
}

TEST(MeanMu, ClosedForms) {
  EXPECT_DOUBLE_EQ(gf::mean_mu(reference()), 3.0);
  EXPECT_NEAR(gf::mean_mu(ball2()), 3.0 * std::numbers::pi, 1e-12);
  EXPECT_NEAR(gf::mean_mu(ball2()), 9.42478, 1e-5);
}

TEST(OverlapVolume, Geometry) {
  const auto c1 = reference();
  EXPECT_DOUBLE_EQ(gf::overlap_volume(c1, 2.0, {0.5, 0}), 1.5);
  EXPECT_DOUBLE_EQ(gf::overlap_volume(c1, 2.0, {-2.5, 0}), 0.0);
  const gf::GrainSpec c2{2, gf::Shape::Cube, 1.5, 1.0};
  EXPECT_DOUBLE_EQ(gf::overlap_volume(c2, 1.0, {0.25, -0.5}), 0.75 * 0.5);
  const auto b2 = ball2();
  EXPECT_NEAR(gf::overlap_volume(b2, 1.0, {0, 0}), std::numbers::pi, 1e-12);
  // Lens of two unit disks at distance 1: 2π/3 − √3/2.
  EXPECT_NEAR(gf::overlap_volume(b2, 1.0, {0.6, 0.8}), 2 * std::numbers::pi / 3 - std::sqrt(3.0) / 2,
              1e-12);
  EXPECT_DOUBLE_EQ(gf::overlap_volume(b2, 1.0, {2.0, 0.0}), 0.0);
}

TEST(CovarianceRX, ZeroLagIsMean) {
  for (const auto& s : {reference(), ball2(), gf::GrainSpec{2, gf::Shape::Cube, 1.3, 0.5},
                        gf::GrainSpec{1, gf::Shape::Ball, 1.8, 2.0}}) {
    EXPECT_NEAR(gf::covariance_rX(s, {0, 0}), gf::mean_mu(s), 1e-6 * gf::mean_mu(s));
  }
}

TEST(CovarianceRX, MatchesClosedForm) {
  for (double t : {0.0, 0.1, 0.5, 0.99, 1.0, 1.5, 7.0, 100.0, 1e4}) {
    EXPECT_NEAR(gf::covariance_rX(reference(), {t, 0}), rx_closed_form(t), 1e-6 * rx_closed_form(t))
        << t;
  }
}

TEST(CovarianceRX, MatchesRiemannSum) {
  // Midpoint rule in log r on [1, 1e6] plus the exact tail beyond.
  const double t = 0.5, hi = 1e6;
  const int n = 2'000'000;
  const double h = std::log(hi) / n;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = std::exp((i + 0.5) * h);
    sum += (r - t) * 1.5 * std::pow(r, -2.5) * r * h;
  }
  sum += 1.5 * (2.0 / std::sqrt(hi) - t * (2.0 / 3.0) * std::pow(hi, -1.5));
  EXPECT_NEAR(gf::covariance_rX(reference(), {t, 0}), sum, 1e-6);
}

TEST(CovarianceRX, SymmetricInSign) {
  const gf::GrainSpec s{2, gf::Shape::Cube, 1.4, 1.0};
  EXPECT_NEAR(gf::covariance_rX(s, {0.7, -2.0}), gf::covariance_rX(s, {-0.7, 2.0}), 1e-12);
  EXPECT_NEAR(gf::covariance_rX(s, {0.7, -2.0}), gf::covariance_rX(s, {2.0, 0.7}), 1e-9);
}

TEST(CovarianceRX, TailApproachesAngularFunctionMonotonically) {
  // With an exact Pareto law the tail is exact once the lag exceeds the grain scale.
  const auto b = ball2();
  const double ell = gf::angular_ell(b, {1, 0});
  double prev = std::numeric_limits<double>::infinity();
  for (double r = 0.25; r <= 0.25 * 4096; r *= 2) {
    const double gap = std::abs(gf::covariance_rX(b, {r * 0.6, r * 0.8}) * std::pow(r, 1.0) - ell);
    EXPECT_LE(gap, prev + 1e-9) << r;
    prev = gap;
  }
  EXPECT_LT(prev, 1e-3 * ell);
  const auto s = reference();
  for (double r = 10.0; r < 1e5; r *= 3) {
    EXPECT_NEAR(gf::covariance_rX(s, {r, 0}) * std::sqrt(r), gf::angular_ell(s, {1, 0}), 1e-6);
  }
}

TEST(CovarianceRX, ProofBound) {
  for (const auto& s : {reference(), ball2()}) {
    const double mu = gf::mean_mu(s);
    const double c = std::max(mu, 2.0 * gf::angular_ell(s, {1, 0}));
    const double beta = s.dimension * (s.alpha - 1.0);
    for (double r = 0.01; r < 1e4; r *= 1.7) {
      EXPECT_LE(gf::covariance_rX(s, {r, 0}), c * std::min(1.0, std::pow(r, -beta)) * (1 + 1e-9));
    }
  }
}

TEST(AngularEll, UnitIntervalSymbolic) {
  const auto s = reference();
  const double cf = s.tail_constant(), a = s.alpha;
  EXPECT_NEAR(gf::angular_ell(s, {1, 0}), cf * (1 / (a - 1) - 1 / a), 1e-6);
  EXPECT_NEAR(gf::angular_ell(s, {1, 0}), 2.0, 1e-6);
  EXPECT_NEAR(gf::angular_ell(s, {-1, 0}), gf::angular_ell(s, {1, 0}), 1e-12);
  const gf::GrainSpec other{1, gf::Shape::Cube, 1.25, 2.0};
  EXPECT_NEAR(gf::angular_ell(other, {1, 0}),
              other.tail_constant() * (1 / (other.alpha - 1) - 1 / other.alpha), 1e-6);
  EXPECT_THROW(gf::angular_ell(s, {0.5, 0}), gf::ConfigError);
}

TEST(AngularEll, BallIsIsotropic) {
  const auto b = ball2();
  const double e0 = gf::angular_ell(b, {1, 0});
  for (double th = 0.1; th < 6.3; th += 0.37) {
    EXPECT_NEAR(gf::angular_ell(b, {std::cos(th), std::sin(th)}), e0, 1e-8 * e0);
  }
}

TEST(AngularEll, SquareClosedForm) {
  // ∫_0^V (1 − a v^q)(1 − b v^q) dv with V = max(a, b)^{-1/q}.
  const gf::GrainSpec s{2, gf::Shape::Cube, 1.5, 1.0};
  const double q = 1.0;
  for (double th : {0.0, 0.3, 0.785, 1.2}) {
    const double a = std::abs(std::cos(th)), b = std::abs(std::sin(th));
    const double v = std::pow(std::max(a, b), -1.0 / q);
    const double exact = v - (a + b) * std::pow(v, q + 1) / (q + 1) + a * b * std::pow(v, 2 * q + 1) / (2 * q + 1);
    EXPECT_NEAR(gf::angular_ell(s, {std::cos(th), std::sin(th)}), 3.0 * exact, 1e-6);
  }
}

TEST(CPhi, UnitIndicator) {
  const auto s = reference();
  const auto phi = gf::TestFunction::rectangle(1, {0, 0}, {1, 0});
  const double ell = gf::angular_ell(s, {1, 0});
  const auto c = gf::c_phi(s, phi);
  EXPECT_NEAR(c.value, ell * 8.0 / 3.0, 1e-4 * ell * 8.0 / 3.0);
  EXPECT_NEAR(c.value, 16.0 / 3.0, 1e-5);
  EXPECT_LT(c.error, 1e-4 * c.value);
}

TEST(CPhi, GeneralExponentIndicator) {
  // ∫∫|t1 − t2|^{-β} over (0,L]^2 = 2 L^{2−β} / ((1 − β)(2 − β)).
  const gf::GrainSpec s{1, gf::Shape::Ball, 1.3, 0.7};
  const double beta = s.alpha - 1.0, len = 2.5;
  const auto phi = gf::TestFunction::rectangle(1, {-1, 0}, {-1 + len, 0});
  const double want = gf::angular_ell(s, {1, 0}) * 2 * std::pow(len, 2 - beta) / ((1 - beta) * (2 - beta));
  EXPECT_NEAR(gf::c_phi(s, phi).value, want, 1e-5 * want);
}

TEST(CPhi, Homogeneous) {
  const auto s = reference();
  const auto phi = gf::TestFunction::gaussian_bump(1, {0.3, 0}, 0.7);
  const double c1 = gf::c_phi(s, phi).value;
  EXPECT_NEAR(gf::c_phi(s, phi.scaled(-2.5)).value, 6.25 * c1, 1e-6 * c1);
  EXPECT_EQ(gf::c_phi(s, phi.scaled(0.0)).value, 0.0);
}

TEST(CPhi, ParallelogramLaw) {
  const auto s = reference();
  const auto phi = gf::TestFunction::rectangle(1, {0, 0}, {1, 0});
  const auto psi = gf::TestFunction::gaussian_bump(1, {1.2, 0}, 0.4, 0.8);
  const double lhs = gf::c_phi(s, phi + psi).value + gf::c_phi(s, phi - psi).value;
  const double rhs = 2 * gf::c_phi(s, phi).value + 2 * gf::c_phi(s, psi).value;
  EXPECT_NEAR(lhs, rhs, 1e-5 * rhs);
}

TEST(CPhi, HeatGradientSignInvariant) {
  const auto s = reference();
  const auto g = gf::TestFunction::heat_kernel_gradient(1, 1.0, {0, 0}, 1.0);
  const auto c = gf::c_phi(s, g);
  EXPECT_GT(c.value, 0.0);
  EXPECT_NEAR(gf::c_phi(s, g.scaled(-1)).value, c.value, 1e-9 * c.value);
}

TEST(CPhi, UnitSquareWithDiskGrains) {
  // ℓ is constant for disks, and ∫∫_{[0,1]^4} ‖x − y‖^{-1} = 4(ln(1 + √2) − (√2 − 1)/3).
  const auto b = ball2();
  const auto phi = gf::TestFunction::rectangle(2, {0, 0}, {1, 1});
  const double kernel = 4 * (std::log(1 + std::sqrt(2.0)) - (std::sqrt(2.0) - 1) / 3);
  const double want = gf::angular_ell(b, {1, 0}) * kernel;
  const auto c = gf::c_phi(b, phi);
  EXPECT_NEAR(c.value, want, std::max(4 * c.error, 2e-3 * want));
  EXPECT_LT(c.error, 1e-3 * c.value);
}

TEST(CPhi, DimensionMismatch) {
  EXPECT_THROW(gf::c_phi(reference(), gf::TestFunction::rectangle(2, {0, 0}, {1, 1})), gf::ConfigError);
}

TEST(CLambda, SmallLambdaLimit) {
  // As λ → 0, c_λ(φ) → λ^{2d} μ (∫φ)^2.
  const auto s = reference();
  const auto phi = gf::TestFunction::rectangle(1, {0, 0}, {1, 0});
  const double lam = 1e-3;
  EXPECT_NEAR(gf::c_lambda(s, phi, lam).value / (lam * lam), 3.0, 2e-3);
}

TEST(CLambda, ExactForUnitIndicator) {
  // c_λ = 2λ² ∫_0^1 (1 − u) r_X(λu) du with r_X in closed form.
  const auto s = reference();
  const auto phi = gf::TestFunction::rectangle(1, {0, 0}, {1, 0});
  for (double lam : {0.5, 4.0, 64.0}) {
    const auto inner = gf::integrate_pieces(
        [&](double u) { return (1 - u) * rx_closed_form(lam * u); }, 0.0, 1.0, {1.0 / lam}, 1e-12);
    const double want = 2 * lam * lam * inner.value;
    EXPECT_NEAR(gf::c_lambda(s, phi, lam).value, want, 1e-5 * want) << lam;
  }
}

TEST(VarianceScaling, SlopeAndRatio) {
  const auto s = reference();
  const auto phi = gf::TestFunction::rectangle(1, {0, 0}, {1, 0});
  const std::vector<double> lams{256, 1024, 4096, 16384};
  const auto v = gf::variance_scaling_check(s, phi, lams);
  EXPECT_NEAR(v.slope, 1.5, 0.02);
  const double c = gf::c_phi(s, phi).value;
  EXPECT_NEAR(v.limit_ratio, c, 0.05 * c);
  EXPECT_LT(std::abs(v.limit_ratio / c - 1), std::abs(v.c_lambda[0] / std::pow(256.0, 1.5) / c - 1));
}

TEST(VarianceScaling, ZeroFunction) {
  const auto s = reference();
  const auto zero = gf::TestFunction::rectangle(1, {0, 0}, {1, 0}).scaled(0.0);
  const std::vector<double> lams{1, 2, 4, 8};
  const auto v = gf::variance_scaling_check(s, zero, lams);
  for (double c : v.c_lambda) EXPECT_EQ(c, 0.0);
  EXPECT_THROW(gf::variance_scaling_check(s, zero, std::vector<double>{1, 2, 3}), gf::ConfigError);
  EXPECT_THROW(gf::variance_scaling_check(s, zero, std::vector<double>{1, 3, 2, 4}), gf::ConfigError);
}

TEST(ScalingExponent, Branches) {
  const auto s = reference();
  auto g = gf::scaling_exponent(s, 1.0);
  EXPECT_EQ(g.regime, gf::Regime::Gaussian);
  EXPECT_DOUBLE_EQ(g.exponent, 1.25);
  g = gf::scaling_exponent(s, 0.5);
  EXPECT_EQ(g.regime, gf::Regime::Intermediate);
  EXPECT_DOUBLE_EQ(g.exponent, 1.0);
  g = gf::scaling_exponent(s, 0.0);
  EXPECT_EQ(g.regime, gf::Regime::Unaggregated);
  EXPECT_DOUBLE_EQ(g.exponent, 1.0 / 1.5);
  g = gf::scaling_exponent(s, 0.2);
  EXPECT_EQ(g.regime, gf::Regime::Stable);
  EXPECT_DOUBLE_EQ(g.exponent, 1.2 / 1.5);
  EXPECT_THROW(gf::scaling_exponent(s, -0.1), gf::ConfigError);
}

TEST(ScalingExponent, ContinuousAtBoundary) {
  for (const auto& s : {reference(), ball2(), gf::GrainSpec{2, gf::Shape::Cube, 1.2, 1.0}}) {
    const double b = s.dimension * (s.alpha - 1);
    const double below = gf::scaling_exponent(s, b * (1 - 1e-9)).exponent;
    const double above = gf::scaling_exponent(s, b * (1 + 1e-9)).exponent;
    EXPECT_NEAR(below, s.dimension, 1e-8);
    EXPECT_NEAR(above, s.dimension, 1e-8);
    EXPECT_EQ(gf::scaling_exponent(s, b).regime, gf::Regime::Intermediate);
  }
}

namespace {

// c_f ∫_0^∞ (e^{ir} − 1 − ir) r^{−1−α} dr by panel quadrature up to R = 2000π
// plus an asymptotic tail (integration by parts, three terms).
std::pair<double, double> stable_exponent_by_quadrature(double alpha, double cf) {
  const double pi = std::numbers::pi;
  const double big = 2000 * pi;
  std::vector<double> breaks;
  for (double x = pi; x < big; x += pi) breaks.push_back(x);
  const double p = 1 + alpha;
  auto re = [&](double r) { return -2 * std::pow(std::sin(r / 2), 2) * std::pow(r, -p); };
  auto im = [&](double r) {
    if (r >= 0.5) return (std::sin(r) - r) * std::pow(r, -p);
    const double r2 = r * r;
    return -r2 * r * (1.0 / 6 - r2 / 120 + r2 * r2 / 5040 - r2 * r2 * r2 / 362880) * std::pow(r, -p);
  };
  // Near zero the integrands are singular like r^{1−α}; split off [0, 1] with r = v^{1/(2−α)}.
  auto sub = [&](auto&& f) {
    const double e = 1.0 / (2.0 - alpha);
    return [&, e](double v) { return v <= 0 ? 0.0 : f(std::pow(v, e)) * e * std::pow(v, e - 1); };
  };
  double r_val = gf::integrate(sub(re), 0.0, 1.0, 1e-10).value +
                 gf::integrate_pieces(re, 1.0, big, breaks, 1e-10).value;
  double i_val = gf::integrate(sub(im), 0.0, 1.0, 1e-10).value +
                 gf::integrate_pieces([&](double r) { return std::sin(r) * std::pow(r, -p); }, 1.0, big,
                                      breaks, 1e-10).value -
                 1.0 / (alpha - 1.0);
  // ∫_R^∞ cos r r^{-p} ≈ −sin R R^{-p} + p cos R R^{-p-1}, with sin R = 0 and cos R = 1.
  r_val += -std::pow(big, -alpha) / alpha + p * std::pow(big, -p - 1);
  // ∫_R^∞ sin r r^{-p} ≈ cos R R^{-p} − p(p+1) cos R R^{-p-2}.
  i_val += std::pow(big, -p) - p * (p + 1) * std::pow(big, -p - 2);
  return {cf * r_val, cf * i_val};
}

}  // namespace

TEST(SigmaAlpha, MatchesQuadratureOracle) {
  const auto s = reference();
  const double sigma = gf::sigma_alpha(s);
  EXPECT_GT(sigma, 0.0);
  const auto [re, im] = stable_exponent_by_quadrature(s.alpha, s.tail_constant());
  EXPECT_NEAR(-re, sigma, 1e-4 * sigma);
  EXPECT_NEAR(im, sigma * std::tan(std::numbers::pi * s.alpha / 2), 1e-4 * sigma);
  EXPECT_NEAR(sigma, 2.5066, 1e-4);
}

TEST(SigmaAlpha, OtherAlpha) {
  for (double a : {1.2, 1.7}) {
    const gf::GrainSpec s{1, gf::Shape::Cube, a, 1.0};
    const auto [re, im] = stable_exponent_by_quadrature(a, s.tail_constant());
    EXPECT_NEAR(-re, gf::sigma_alpha(s), 1e-4 * gf::sigma_alpha(s)) << a;
  }
}

TEST(SigmaAlpha, LinearInTailConstant) {
  const gf::GrainSpec a{1, gf::Shape::Cube, 1.5, 1.0}, b{1, gf::Shape::Cube, 1.5, 2.0};
  EXPECT_NEAR(gf::sigma_alpha(b) / gf::sigma_alpha(a), b.tail_constant() / a.tail_constant(), 1e-12);
}

TEST(SigmaAlpha, BoundedNearTwo) {
  double prev = 0.0;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    const gf::GrainSpec s{1, gf::Shape::Cube, 2 - eps, 1.0};
    const double v = gf::sigma_alpha(s) * eps;
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_LT(v, 10.0);
    if (prev > 0) EXPECT_NEAR(v, prev, 0.2 * prev + 1e-3);
    prev = v;
  }
}
