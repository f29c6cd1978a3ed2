#include "grainfield/limits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "grainfield/errors.hpp"
#include "grainfield/quadrature.hpp"

namespace grainfield {

Complex psi(double z) {
  const double re = -2.0 * std::sin(0.5 * z) * std::sin(0.5 * z);
  double im;
  if (std::abs(z) < 0.5) {
    // sin z − z = Σ_{k≥1} (−1)^k z^{2k+1}/(2k+1)!
    double term = z, sum = 0.0;
    for (int k = 1; k <= 10; ++k) {
      term *= -z * z / ((2.0 * k) * (2.0 * k + 1.0));
      sum += term;
    }
    im = sum;
  } else {
    im = std::sin(z) - z;
  }
  return {re, im};
}

std::string to_string(LawKind kind) {
  switch (kind) {
    case LawKind::GaussianB: return "gaussian";
    case LawKind::StableL: return "stable";
    case LawKind::IntermediateJ: return "intermediate";
  }
  return "unknown";
}

namespace {

LimitLaw base_law(LawKind kind, const GrainSpec& spec, const TestFunction& phi, double prefactor) {
  spec.validate();
  if (phi.dimension() != spec.dimension) throw ConfigError("test function dimension differs from the grain dimension");
  if (phi.is_zero()) throw ConfigError("test function is zero");
  if (!std::isfinite(prefactor)) throw ConfigError("prefactor must be finite");
  LimitLaw law;
  law.kind = kind;
  law.spec = spec;
  law.phi = phi;
  law.prefactor = prefactor;
  law.sigma = sigma_alpha(spec);
  law.grain_volume = spec.grain_volume();
  return law;
}

// Grain interval Ξ⁰ = (a, b] in d = 1.
std::pair<double, double> grain_interval(const GrainSpec& spec) {
  return spec.shape == Shape::Cube ? std::pair{0.0, 1.0} : std::pair{-1.0, 1.0};
}

}  // namespace

LimitLaw LimitLaw::gaussian(const GrainSpec& spec, const TestFunction& phi, double prefactor) {
  auto law = base_law(LawKind::GaussianB, spec, phi, prefactor);
  law.variance = c_phi(spec, phi).value;
  return law;
}

LimitLaw LimitLaw::gaussian_with_variance(const GrainSpec& spec, const TestFunction& phi,
                                          double variance, double prefactor) {
  if (!(variance >= 0.0)) throw ConfigError("Gaussian variance must be nonnegative");
  auto law = base_law(LawKind::GaussianB, spec, phi, prefactor);
  law.variance = variance;
  return law;
}

LimitLaw LimitLaw::stable(const GrainSpec& spec, const TestFunction& phi, double prefactor) {
  auto law = base_law(LawKind::StableL, spec, phi, prefactor);
  const auto p = phi.power_integrals(spec.alpha);
  law.abs_power = p.absolute;
  law.signed_power = p.signed_;
  return law;
}

LimitLaw LimitLaw::intermediate(const GrainSpec& spec, const TestFunction& phi, double prefactor) {
  if (spec.dimension != 1) throw ConfigError("the intermediate law is evaluated in d = 1 only");
  return base_law(LawKind::IntermediateJ, spec, phi, prefactor);
}

LimitLaw LimitLaw::with_prefactor(double c) const {
  LimitLaw out = *this;
  out.prefactor = c;
  return out;
}

Complex LimitLaw::log_cf(double theta) const {
  switch (kind) {
    case LawKind::GaussianB: return log_cf_gaussian(*this, theta);
    case LawKind::StableL: return log_cf_stable(*this, theta);
    case LawKind::IntermediateJ: return log_cf_intermediate(*this, theta);
  }
  throw ConfigError("unknown law kind");
}

Complex LimitLaw::cf(double theta) const { return std::exp(log_cf(theta)); }

Complex log_cf_gaussian(const LimitLaw& law, double theta) {
  const double s = theta * law.prefactor;
  return -0.5 * s * s * law.variance;
}

Complex log_cf_stable(const LimitLaw& law, double theta) {
  const double s = theta * law.prefactor;
  if (s == 0.0) return 0.0;
  const double a = law.spec.alpha;
  const double scale = law.sigma * std::pow(std::abs(s), a) * std::pow(law.grain_volume, a);
  const double sgn = s > 0 ? 1.0 : -1.0;
  return {-scale * law.abs_power, scale * sgn * std::tan(std::numbers::pi * a / 2) * law.signed_power};
}

namespace {

// ∫_{r_low}^∞ r^{−1−α} ∫ Ψ(s[F(u + rb) − F(u + ra)]) du dr for Ξ⁰ = (a, b], F the antiderivative of φ.
Complex grain_exponent(const GrainSpec& spec, const TestFunction& phi, double s, double r_low) {
  const double alpha = spec.alpha;
  const auto [ga, gb] = grain_interval(spec);
  const Box box = phi.support();
  const double s0 = box.lo[0], s1 = box.hi[0], len = s1 - s0;
  const auto F = [&](double y) { return phi.antiderivative(y); };
  const double total = F(s1) - F(s0);
  std::vector<double> jumps = phi.breakpoints();
  jumps.push_back(s0);
  jumps.push_back(s1);
  const double scale = s * phi.l1_norm();
  const double tol = 1e-9;
  // Beyond r* = len/(b − a) the grain can cover the whole support and the u-integral
  // splits into two edge integrals plus a full-cover plateau of length r(b − a) − len.
  const double r_star = len / (gb - ga);
  const double r_far = std::max(r_star, r_low);

  const auto inner = [&](double r, bool imag) {
    std::vector<double> breaks;
    for (double j : jumps) {
      breaks.push_back(j - r * gb);
      breaks.push_back(j - r * ga);
    }
    const auto g = [&](double u) {
      const Complex v = psi(s * (F(u + r * gb) - F(u + r * ga)));
      return imag ? v.imag() : v.real();
    };
    const double floor = 1e-14 * std::min(1.0, scale * scale) * (len + r);
    return integrate_pieces(g, s0 - r * gb, s1 - r * ga, breaks, tol, floor, "J-law inner integral").value;
  };
  // r = r* w^{1/(2−α)} absorbs the r^{1−α} singularity at the origin.
  const double q = 1.0 / (2.0 - alpha);
  const double w_low = std::pow(std::min(r_low / r_star, 1.0), 2.0 - alpha);
  const auto outer = [&](bool imag) {
    if (w_low >= 1.0) return 0.0;
    const auto h = [&](double w) {
      if (w <= 0.0) return 0.0;
      const double r = r_star * std::pow(w, q);
      return inner(r, imag) / (r * r);
    };
    const double floor = 1e-13 * std::min(1.0, scale * scale);
    return integrate(h, w_low, 1.0, tol, floor, "J-law outer integral").value * std::pow(r_star, 2.0 - alpha) / (2.0 - alpha);
  };
  const auto edges = [&](bool imag) {
    const auto g = [&](double v) {
      const Complex e = psi(s * (F(v) - F(s0))) + psi(s * (F(s1) - F(v)));
      return imag ? e.imag() : e.real();
    };
    return integrate_pieces(g, s0, s1, jumps, tol, 1e-14 * std::min(1.0, scale * scale) * len, "J-law edge integral").value;
  };
  const Complex edge(edges(false), edges(true));
  const Complex near(outer(false), outer(true));
  const Complex far = edge * std::pow(r_far, -alpha) / alpha +
                      psi(s * total) * ((gb - ga) * std::pow(r_far, 1.0 - alpha) / (alpha - 1.0) -
                                        len * std::pow(r_far, -alpha) / alpha);
  return near + far;
}

}  // namespace

Complex log_cf_intermediate(const LimitLaw& law, double theta) {
  if (law.spec.dimension != 1) throw ConfigError("the intermediate law is evaluated in d = 1 only");
  const double s = theta * law.prefactor;
  if (s == 0.0) return 0.0;
  return law.spec.tail_constant() * grain_exponent(law.spec, law.phi, s, 0.0);
}

Complex log_cf_finite(const GrainSpec& spec, const TestFunction& phi, double lambda, double intensity,
                      double exponent, double theta) {
  spec.validate();
  if (spec.dimension != 1 || phi.dimension() != 1) throw ConfigError("the finite-lambda law is evaluated in d = 1 only");
  if (!(lambda > 0.0) || !(intensity > 0.0)) throw ConfigError("lambda and intensity must be positive");
  if (theta == 0.0) return 0.0;
  const double a = spec.alpha;
  // t = λτ, u = λv, r = λρ turn the Poisson exponent into a grain exponent with a
  // lower mark cutoff r0/λ.
  const double s = theta * std::pow(lambda, 1.0 - exponent);
  return spec.tail_constant() * intensity * std::pow(lambda, 1.0 - a) *
         grain_exponent(spec, phi, s, spec.r0 / lambda);
}

Complex cf_gaussian(const LimitLaw& law, double theta) { return std::exp(log_cf_gaussian(law, theta)); }
Complex cf_stable(const LimitLaw& law, double theta) { return std::exp(log_cf_stable(law, theta)); }
Complex cf_intermediate(const LimitLaw& law, double theta) { return std::exp(log_cf_intermediate(law, theta)); }

double sample_stable(double alpha, double beta, double scale, Engine& eng) {
  if (!(alpha > 0.0 && alpha <= 2.0) || alpha == 1.0) throw ConfigError("stable index must lie in (0, 2], not 1");
  if (!(std::abs(beta) <= 1.0)) throw ConfigError("stable skewness must lie in [-1, 1]");
  const double pi = std::numbers::pi;
  const double v = pi * (uniform01(eng) - 0.5);
  const double w = -std::log(uniform01(eng));
  const double t = beta * std::tan(pi * alpha / 2);
  const double b = std::atan(t) / alpha;
  const double c = std::pow(1.0 + t * t, 1.0 / (2.0 * alpha));
  const double x = c * std::sin(alpha * (v + b)) / std::pow(std::cos(v), 1.0 / alpha) *
                   std::pow(std::cos(v - alpha * (v + b)) / w, (1.0 - alpha) / alpha);
  return scale * x;
}

std::vector<double> sample_law(const LimitLaw& law, std::size_t n, std::uint64_t seed) {
  Engine eng = make_engine(seed);
  std::vector<double> out;
  out.reserve(n);
  switch (law.kind) {
    case LawKind::GaussianB: {
      std::normal_distribution<double> z(0.0, std::sqrt(law.variance) * std::abs(law.prefactor));
      for (std::size_t i = 0; i < n; ++i) out.push_back(z(eng));
      return out;
    }
    case LawKind::StableL: {
      // Positive and negative parts of φ give independent totally skewed components.
      const double a = law.spec.alpha;
      const double pos = 0.5 * (law.abs_power + law.signed_power);
      const double neg = 0.5 * (law.abs_power - law.signed_power);
      const double unit = law.sigma * std::pow(law.grain_volume, a);
      const double sp = std::pow(unit * pos, 1.0 / a), sn = std::pow(unit * neg, 1.0 / a);
      for (std::size_t i = 0; i < n; ++i) {
        double x = sp > 0 ? sample_stable(a, 1.0, sp, eng) : 0.0;
        if (sn > 0) x -= sample_stable(a, 1.0, sn, eng);
        out.push_back(law.prefactor * x);
      }
      return out;
    }
    case LawKind::IntermediateJ: break;
  }
  throw ConfigError("no exact sampler for the intermediate law");
}

std::vector<double> theta_grid(const LimitLaw& law, int clusters, int per_cluster, double floor) {
  return theta_grid([&](double t) { return law.cf(t); }, clusters, per_cluster, floor);
}

std::vector<double> theta_grid(const std::function<Complex(double)>& cf, int clusters, int per_cluster,
                               double floor) {
  if (clusters < 1 || per_cluster < 1) throw ConfigError("theta grid needs at least one cluster and point");
  if (!(floor >= 0.05 && floor < 1.0)) throw ConfigError("theta grid floor must lie in [0.05, 1)");
  double hi = 1e-3;
  while (std::abs(cf(hi)) > floor) {
    hi *= 2.0;
    if (hi > 1e12) throw NumericalError("characteristic function does not decay");
  }
  double lo = hi / 2;
  if (std::abs(cf(lo)) <= floor) lo = 0.0;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (std::abs(cf(mid)) > floor ? lo : hi) = mid;
  }
  const double top = lo;
  std::vector<double> out;
  for (int j = 0; j < clusters; ++j) {
    for (int i = 1; i <= per_cluster; ++i) {
      const double t = top * (j + static_cast<double>(i) / per_cluster) / clusters;
      out.push_back(-t);
      out.push_back(t);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

CfDistance cf_distance(std::span<const double> samples, const LimitLaw& law,
                       std::span<const double> theta, const CfDistanceOptions& options) {
  return cf_distance(samples, [&](double t) { return law.cf(t); }, theta, options);
}

CfDistance cf_distance(std::span<const double> samples, const std::function<Complex(double)>& target_cf,
                       std::span<const double> theta, const CfDistanceOptions& options) {
  if (samples.size() < 500) throw ConfigError("CF distance needs at least 500 samples");
  if (theta.empty()) throw ConfigError("empty theta grid");
  if (options.clusters < 1 || options.bootstrap < 20) throw ConfigError("CF distance needs clusters >= 1 and >= 20 bootstrap draws");
  std::vector<double> th(theta.begin(), theta.end());
  std::sort(th.begin(), th.end());
  for (std::size_t i = 0; i < th.size(); ++i) {
    if (th[i] != -th[th.size() - 1 - i]) throw ConfigError("theta grid must be symmetric");
  }
  CfDistance out;
  out.theta = th;
  for (double t : th) {
    const Complex c = target_cf(t);
    if (std::abs(c) < 0.05) throw ConfigError("theta grid includes a point with |CF| < 0.05");
    out.target.push_back(c);
  }
  // Clusters over the sorted distinct |θ|.
  std::vector<double> mags;
  for (double t : th) mags.push_back(std::abs(t));
  std::sort(mags.begin(), mags.end());
  mags.erase(std::unique(mags.begin(), mags.end()), mags.end());
  const int nc = std::min<int>(options.clusters, static_cast<int>(mags.size()));
  std::map<double, int> cluster_of;
  for (std::size_t i = 0; i < mags.size(); ++i) {
    cluster_of[mags[i]] = static_cast<int>(i * static_cast<std::size_t>(nc) / mags.size());
  }
  const std::size_t n = samples.size(), m = th.size();
  std::vector<Complex> table(n * m);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < m; ++k) table[j * m + k] = std::polar(1.0, th[k] * samples[j]);
  const auto empirical = [&](const std::vector<std::size_t>* idx) {
    std::vector<Complex> acc(m, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t row = idx ? (*idx)[j] : j;
      for (std::size_t k = 0; k < m; ++k) acc[k] += table[row * m + k];
    }
    for (auto& v : acc) v /= static_cast<double>(n);
    return acc;
  };
  out.empirical = empirical(nullptr);
  out.cluster_distance.assign(static_cast<std::size_t>(nc), 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const double dev = std::abs(out.empirical[k] - out.target[k]);
    out.distance = std::max(out.distance, dev);
    auto& cd = out.cluster_distance[static_cast<std::size_t>(cluster_of[std::abs(th[k])])];
    cd = std::max(cd, dev);
  }
  Engine eng = make_engine(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> overall;
  std::vector<std::vector<double>> per_cluster(static_cast<std::size_t>(nc));
  std::vector<std::size_t> idx(n);
  for (int b = 0; b < options.bootstrap; ++b) {
    for (auto& i : idx) i = pick(eng);
    const auto boot = empirical(&idx);
    double all = 0.0;
    std::vector<double> cm(static_cast<std::size_t>(nc), 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const double dev = std::abs(boot[k] - out.empirical[k]);
      all = std::max(all, dev);
      auto& c = cm[static_cast<std::size_t>(cluster_of[std::abs(th[k])])];
      c = std::max(c, dev);
    }
    overall.push_back(all);
    for (int c = 0; c < nc; ++c) per_cluster[static_cast<std::size_t>(c)].push_back(cm[static_cast<std::size_t>(c)]);
  }
  const auto q = [&](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto at = static_cast<std::size_t>(std::ceil(options.level * static_cast<double>(v.size()))) - 1;
    return v[std::min(at, v.size() - 1)];
  };
  out.band = q(overall);
  for (int c = 0; c < nc; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    out.cluster_band.push_back(q(per_cluster[uc]));
    if (out.cluster_distance[uc] <= out.cluster_band[uc]) ++out.clusters_within;
  }
  return out;
}

}  // namespace grainfield
