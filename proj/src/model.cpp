#include "grainfield/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>

#include <boost/random/sobol.hpp>

#include "grainfield/errors.hpp"
#include "grainfield/rng.hpp"

namespace grainfield {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRelTol1d = 1e-6;
constexpr double kRelTolDouble = 1e-4;
constexpr double kQmcRelTol = 1e-3;
constexpr int kQmcShifts = 16;
constexpr int kQmcLog2Points = 15;

double norm(const Point& z, int d) {
  return d == 1 ? std::abs(z[0]) : std::hypot(z[0], z[1]);
}

// ∫_a^∞ h(r) dr for h(r) = O(r^{-kappa}), kappa > 1, via r = a v^{-1/(kappa-1)}.
template <class F>
QuadResult integrate_tail(F&& h, double a, double kappa, std::vector<double> breaks,
                          double rel_tol, const char* what) {
  const double e = 1.0 / (kappa - 1.0);
  auto g = [&](double v) {
    if (v <= 0.0) return 0.0;
    const double r = a * std::pow(v, -e);
    return h(r) * a * e * std::pow(v, -e - 1.0);
  };
  std::vector<double> vb;
  for (double r : breaks) {
    if (r > a) vb.push_back(std::pow(a / r, kappa - 1.0));
  }
  return integrate_pieces(g, 0.0, 1.0, vb, rel_tol, 0.0, what);
}

// Least-squares line through (x, y).
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

// Linear interpolation table for a function of the folded angle in [0, π/4]
// (cube) or a constant (ball, d = 2).
class AngularTable {
 public:
  explicit AngularTable(const GrainSpec& spec) : cube_(spec.shape == Shape::Cube) {
    if (!cube_) {
      values_.push_back(angular_ell(spec, {1.0, 0.0}));
      return;
    }
    values_.resize(kNodes + 1);
    for (int i = 0; i <= kNodes; ++i) {
      const double th = 0.25 * kPi * i / kNodes;
      values_[static_cast<std::size_t>(i)] = angular_ell(spec, {std::cos(th), std::sin(th)});
    }
  }

  double operator()(double c, double s) const {
    if (!cube_) return values_[0];
    const double a = std::abs(c), b = std::abs(s);
    const double th = std::atan2(std::min(a, b), std::max(a, b));
    const double x = th / (0.25 * kPi) * kNodes;
    const int i = std::min(kNodes - 1, static_cast<int>(x));
    const double w = x - i;
    return (1.0 - w) * values_[static_cast<std::size_t>(i)] + w * values_[static_cast<std::size_t>(i) + 1];
  }

 private:
  static constexpr int kNodes = 1024;
  bool cube_;
  std::vector<double> values_;
};

// r_X on a log-radial (and, for cubes, folded-angle) grid, d = 2.
class CovarianceTable {
 public:
  CovarianceTable(const GrainSpec& spec, double rho_max)
      : cube_(spec.shape == Shape::Cube), mu_(mean_mu(spec)) {
    log_lo_ = std::log(1e-4);
    log_hi_ = std::log(std::max(rho_max, 1.0) * 1.01);
    angles_ = cube_ ? kAngles : 0;
    table_.resize(static_cast<std::size_t>((kRadial + 1) * (angles_ + 1)));
    for (int j = 0; j <= angles_; ++j) {
      const double th = angles_ == 0 ? 0.0 : 0.25 * kPi * j / angles_;
      for (int i = 0; i <= kRadial; ++i) {
        const double rho = std::exp(log_lo_ + (log_hi_ - log_lo_) * i / kRadial);
        table_[index(i, j)] =
            std::log(covariance_rX(spec, {rho * std::cos(th), rho * std::sin(th)}));
      }
    }
  }

  double operator()(double rho, double c, double s) const {
    if (rho <= 0.0) return mu_;
    double x = (std::log(rho) - log_lo_) / (log_hi_ - log_lo_) * kRadial;
    if (x < 0.0) x = 0.0;
    if (x > kRadial) throw NumericalError("covariance table queried beyond its range");
    const int i = std::min(kRadial - 1, static_cast<int>(x));
    const double wx = x - i;
    if (angles_ == 0) {
      return std::exp((1.0 - wx) * table_[index(i, 0)] + wx * table_[index(i + 1, 0)]);
    }
    const double a = std::abs(c), b = std::abs(s);
    const double y = std::atan2(std::min(a, b), std::max(a, b)) / (0.25 * kPi) * angles_;
    const int j = std::min(angles_ - 1, static_cast<int>(y));
    const double wy = y - j;
    const double v = (1.0 - wx) * (1.0 - wy) * table_[index(i, j)] +
                     wx * (1.0 - wy) * table_[index(i + 1, j)] +
                     (1.0 - wx) * wy * table_[index(i, j + 1)] +
                     wx * wy * table_[index(i + 1, j + 1)];
    return std::exp(v);
  }

 private:
  static constexpr int kRadial = 1536;
  static constexpr int kAngles = 32;
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j * (kRadial + 1) + i);
  }
  bool cube_;
  double mu_;
  double log_lo_ = 0.0, log_hi_ = 0.0;
  int angles_ = 0;
  std::vector<double> table_;
};

// Randomized QMC estimate of
//   2π p D^{4−2α} Vol(B) E[w(ρ, θ) φ(t + ρ e_θ) φ(t)],  ρ = D x^p, p = 1/(4 − 2α),
// which equals ∫ A(u) ‖u‖^{−2(α−1)} w(‖u‖, u/‖u‖) du with A the autocorrelation of φ.
template <class W>
QuadResult qmc_autocorrelation(const GrainSpec& spec, const TestFunction& phi, W&& weight) {
  const Box box = phi.support();
  const double wx = box.hi[0] - box.lo[0], wy = box.hi[1] - box.lo[1];
  const double diam = std::hypot(wx, wy);
  const double p = 1.0 / (4.0 - 2.0 * spec.alpha);
  const double scale = 2.0 * kPi * p * std::pow(diam, 4.0 - 2.0 * spec.alpha) * wx * wy;
  const std::size_t n = std::size_t{1} << kQmcLog2Points;
  Engine shift_rng = make_engine(derive_seed(0x5eedc0ffeeULL, {4}));
  std::vector<double> estimates;
  for (int rep = 0; rep < kQmcShifts; ++rep) {
    std::array<std::uint64_t, 4> shift{};
    for (auto& s : shift) s = shift_rng();
    boost::random::sobol qrng(4);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      std::array<double, 4> x{};
      for (int j = 0; j < 4; ++j) {
        const std::uint64_t bits = static_cast<std::uint64_t>(qrng()) ^ shift[static_cast<std::size_t>(j)];
        x[static_cast<std::size_t>(j)] = (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
      }
      const double th = 2.0 * kPi * x[0];
      const double rho = diam * std::pow(x[1], p);
      const double c = std::cos(th), s = std::sin(th);
      const Point t{box.lo[0] + wx * x[2], box.lo[1] + wy * x[3]};
      const double f0 = phi(t);
      if (f0 == 0.0) continue;
      const double f1 = phi(Point{t[0] + rho * c, t[1] + rho * s});
      if (f1 == 0.0) continue;
      acc += weight(rho, c, s) * f0 * f1;
    }
    estimates.push_back(scale * acc / static_cast<double>(n));
  }
  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= kQmcShifts;
  double var = 0.0;
  for (double e : estimates) var += (e - mean) * (e - mean);
  var /= (kQmcShifts - 1);
  return {mean, std::sqrt(var / kQmcShifts)};
}

// Autocorrelation A(u) = ∫ φ(t + u) φ(t) dt in d = 1.
double autocorrelation_1d(const TestFunction& phi, double u, const Box& box,
                          const std::vector<double>& breaks) {
  const double lo = box.lo[0], hi = box.hi[0] - u;
  if (!(hi > lo)) return 0.0;
  std::vector<double> b = breaks;
  for (double x : breaks) b.push_back(x - u);
  auto f = [&](double t) { return phi(t + u) * phi(t); };
  return integrate_pieces(f, lo, hi, b, 1e-10, 1e-12 * phi.sup_norm() * phi.sup_norm() * (hi - lo),
                          "autocorrelation").value;
}

// Lag values where A(u) has kinks in d = 1: differences of jump points.
std::vector<double> lag_breaks(const std::vector<double>& breaks) {
  std::vector<double> out;
  for (double a : breaks)
    for (double b : breaks)
      if (a > b) out.push_back(a - b);
  return out;
}

void require_dimension(const GrainSpec& spec, const TestFunction& phi) {
  spec.validate();
  if (phi.dimension() != spec.dimension) {
    throw ConfigError("test function dimension differs from grain dimension");
  }
}

}  // namespace

std::string to_string(Shape shape) { return shape == Shape::Ball ? "ball" : "cube"; }

Shape parse_shape(const std::string& text) {
  if (text == "ball") return Shape::Ball;
  if (text == "cube") return Shape::Cube;
  throw ConfigError("unknown grain shape '" + text + "'");
}

void GrainSpec::validate() const {
  if (dimension != 1 && dimension != 2) throw ConfigError("dimension must be 1 or 2");
  if (!(alpha > 1.0 && alpha < 2.0)) throw ConfigError("alpha must lie in (1, 2)");
  if (!(r0 > 0.0) || !std::isfinite(r0)) throw ConfigError("r0 must be positive");
}

double GrainSpec::tail_constant() const { return alpha * std::pow(r0, alpha); }

double GrainSpec::density(double r) const {
  return r < r0 ? 0.0 : tail_constant() * std::pow(r, -1.0 - alpha);
}

double GrainSpec::radius_moment(double q) const {
  if (!(q < alpha)) throw ConfigError("radius moment of order >= alpha is infinite");
  return alpha * std::pow(r0, q) / (alpha - q);
}

double GrainSpec::grain_volume() const {
  if (shape == Shape::Cube) return 1.0;
  return dimension == 1 ? 2.0 : kPi;
}

double GrainSpec::diameter() const {
  if (shape == Shape::Cube) return std::sqrt(static_cast<double>(dimension));
  return 2.0;
}

double GrainSpec::linear_scale(double r) const {
  return dimension == 1 ? r : std::sqrt(r);
}

double overlap_volume(const GrainSpec& spec, double scale, const Point& shift) {
  const double s = scale;
  if (spec.shape == Shape::Cube) {
    double v = 1.0;
    for (int i = 0; i < spec.dimension; ++i) v *= std::max(0.0, s - std::abs(shift[static_cast<std::size_t>(i)]));
    return v;
  }
  const double dist = norm(shift, spec.dimension);
  if (spec.dimension == 1) return std::max(0.0, 2.0 * s - dist);
  if (dist >= 2.0 * s) return 0.0;
  const double h = dist / (2.0 * s);
  return 2.0 * s * s * std::acos(h) - 0.5 * dist * std::sqrt(4.0 * s * s - dist * dist);
}

double mean_mu(const GrainSpec& spec) {
  spec.validate();
  return spec.grain_volume() * spec.mean_volume();
}

double covariance_rX(const GrainSpec& spec, const Point& t) {
  spec.validate();
  const int d = spec.dimension;
  // Linear scale at which the overlap becomes positive, plus kinks.
  double s_start = 0.0;
  std::vector<double> s_breaks;
  if (spec.shape == Shape::Cube) {
    for (int i = 0; i < d; ++i) {
      const double a = std::abs(t[static_cast<std::size_t>(i)]);
      s_start = std::max(s_start, a);
      s_breaks.push_back(a);
    }
  } else {
    s_start = 0.5 * norm(t, d);
  }
  const double a = std::max(spec.r0, std::pow(s_start, d));
  std::vector<double> r_breaks;
  for (double s : s_breaks) r_breaks.push_back(std::pow(s, d));
  auto h = [&](double r) { return overlap_volume(spec, spec.linear_scale(r), t) * spec.density(r); };
  return integrate_tail(h, a, spec.alpha, r_breaks, kRelTol1d, "covariance r_X").value;
}

double angular_ell(const GrainSpec& spec, const Point& z) {
  spec.validate();
  const int d = spec.dimension;
  const double nz = norm(z, d);
  if (std::abs(nz - 1.0) > 1e-9) throw ConfigError("angular_ell needs a unit vector");
  const double q = 1.0 / (d * (spec.alpha - 1.0));
  double reach = 2.0;
  std::vector<double> breaks;
  if (spec.shape == Shape::Cube) {
    double m = 0.0;
    for (int i = 0; i < d; ++i) m = std::max(m, std::abs(z[static_cast<std::size_t>(i)]));
    reach = 1.0 / m;
    for (int i = 0; i < d; ++i) {
      const double a = std::abs(z[static_cast<std::size_t>(i)]);
      if (a > 0.0) breaks.push_back(std::pow(1.0 / a, 1.0 / q));
    }
  }
  const double v_max = std::pow(reach, 1.0 / q);
  auto g = [&](double v) {
    const double s = std::pow(v, q);
    return overlap_volume(spec, 1.0, {s * z[0], s * z[1]});
  };
  const double c = spec.tail_constant() / (spec.alpha - 1.0);
  return c * integrate_pieces(g, 0.0, v_max, breaks, kRelTol1d, 0.0, "angular function").value;
}

QuadResult c_phi(const GrainSpec& spec, const TestFunction& phi) {
  require_dimension(spec, phi);
  if (phi.is_zero()) return {};
  const double alpha = spec.alpha;
  if (spec.dimension == 2) {
    const AngularTable ell(spec);
    auto weight = [&](double, double c, double s) { return ell(c, s); };
    const QuadResult r = qmc_autocorrelation(spec, phi, weight);
    if (r.error > kQmcRelTol * std::abs(r.value)) {
      throw NumericalError("c(phi): quasi-Monte Carlo error above tolerance");
    }
    return r;
  }
  const Box box = phi.support();
  const auto breaks = phi.breakpoints();
  const double width = box.hi[0] - box.lo[0];
  const double e = 2.0 - alpha;
  const double ell = angular_ell(spec, {1.0, 0.0}) + angular_ell(spec, {-1.0, 0.0});
  auto g = [&](double w) {
    return autocorrelation_1d(phi, width * std::pow(w, 1.0 / e), box, breaks);
  };
  std::vector<double> wb;
  for (double u : lag_breaks(breaks)) wb.push_back(std::pow(u / width, e));
  const double pre = ell * std::pow(width, e) / e;
  const double abs_tol = 1e-12 * phi.l1_norm() * phi.sup_norm();
  QuadResult r = integrate_pieces(g, 0.0, 1.0, wb, kRelTolDouble * 1e-2, abs_tol, "c(phi)");
  r.value *= pre;
  r.error *= pre;
  return r;
}

QuadResult c_lambda(const GrainSpec& spec, const TestFunction& phi, double lambda) {
  require_dimension(spec, phi);
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (phi.is_zero()) return {};
  const double alpha = spec.alpha;
  if (spec.dimension == 2) {
    const Box box = phi.support();
    const double diam = std::hypot(box.hi[0] - box.lo[0], box.hi[1] - box.lo[1]);
    const CovarianceTable table(spec, lambda * diam);
    const double pw = 2.0 * (alpha - 1.0);
    auto weight = [&](double rho, double c, double s) {
      return std::pow(rho, pw) * table(lambda * rho, c, s);
    };
    QuadResult r = qmc_autocorrelation(spec, phi, weight);
    if (r.error > kQmcRelTol * std::abs(r.value)) {
      throw NumericalError("c_lambda(phi): quasi-Monte Carlo error above tolerance");
    }
    const double l4 = std::pow(lambda, 4.0);
    return {r.value * l4, r.error * l4};
  }
  const Box box = phi.support();
  const auto breaks = phi.breakpoints();
  const double width = box.hi[0] - box.lo[0];
  const double e = 2.0 - alpha;
  auto g = [&](double w) {
    if (w <= 0.0) return 0.0;
    const double u = width * std::pow(w, 1.0 / e);
    const double jac = width / e * std::pow(w, (alpha - 1.0) / e);
    const double a = autocorrelation_1d(phi, u, box, breaks);
    if (a == 0.0) return 0.0;
    return a * covariance_rX(spec, {lambda * u, 0.0}) * jac;
  };
  std::vector<double> wb;
  for (double u : lag_breaks(breaks)) wb.push_back(std::pow(u / width, e));
  const double kink = spec.shape == Shape::Cube ? spec.r0 : 2.0 * spec.r0;
  if (kink / lambda < width) wb.push_back(std::pow(kink / lambda / width, e));
  const double abs_tol = 1e-12 * phi.l1_norm() * phi.sup_norm() * mean_mu(spec);
  QuadResult r = integrate_pieces(g, 0.0, 1.0, wb, kRelTolDouble * 1e-2, abs_tol, "c_lambda(phi)");
  const double pre = 2.0 * lambda * lambda;
  return {r.value * pre, r.error * pre};
}

VarianceScaling variance_scaling_check(const GrainSpec& spec, const TestFunction& phi,
                                       std::span<const double> lambdas) {
  if (lambdas.size() < 4) throw ConfigError("variance scaling check needs at least 4 lambdas");
  for (std::size_t i = 1; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > lambdas[i - 1])) throw ConfigError("lambdas must be increasing");
  }
  VarianceScaling out;
  const double target = spec.dimension * (3.0 - spec.alpha);
  std::vector<double> lx, ly;
  for (double lam : lambdas) {
    const double c = c_lambda(spec, phi, lam).value;
    out.lambdas.push_back(lam);
    out.c_lambda.push_back(c);
    if (c > 0.0) {
      lx.push_back(std::log(lam));
      ly.push_back(std::log(c));
    }
  }
  out.limit_ratio = out.c_lambda.back() / std::pow(lambdas.back(), target);
  if (lx.size() == lambdas.size()) {
    std::tie(out.slope, out.intercept) = fit_line(lx, ly);
  } else {
    out.slope = std::numeric_limits<double>::quiet_NaN();
    out.intercept = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::Gaussian: return "gaussian";
    case Regime::Stable: return "stable";
    case Regime::Intermediate: return "intermediate";
    case Regime::Unaggregated: return "unaggregated";
  }
  return "unknown";
}

ScalingRegime scaling_exponent(const GrainSpec& spec, double gamma) {
  spec.validate();
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be >= 0");
  const double d = spec.dimension, a = spec.alpha;
  const double boundary = d * (a - 1.0);
  ScalingRegime out;
  out.gamma = gamma;
  if (gamma == 0.0) {
    out.regime = Regime::Unaggregated;
    out.exponent = d / a;
  } else if (std::abs(gamma - boundary) <= 1e-12 * std::max(1.0, boundary)) {
    out.regime = Regime::Intermediate;
    out.exponent = d;
  } else if (gamma > boundary) {
    out.regime = Regime::Gaussian;
    out.exponent = 0.5 * (gamma + (3.0 - a) * d);
  } else {
    out.regime = Regime::Stable;
    out.exponent = (gamma + d) / a;
  }
  return out;
}

double sigma_alpha(const GrainSpec& spec) {
  spec.validate();
  const double a = spec.alpha;
  return -spec.tail_constant() * std::tgamma(2.0 - a) * std::cos(0.5 * kPi * a) / (a * (a - 1.0));
}

}  // namespace grainfield
