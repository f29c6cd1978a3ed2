#include "grainfield/burgers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "grainfield/errors.hpp"
#include "grainfield/parallel.hpp"
#include "grainfield/rng.hpp"
#include "grainfield/stats.hpp"

namespace grainfield {

double heat_kernel(int dimension, double t, const Point& x, const Point& y, double kappa) {
  if (!(t > 0.0) || !(kappa > 0.0)) throw ConfigError("heat kernel needs t > 0 and kappa > 0");
  if (dimension < 1 || dimension > 2) throw ConfigError("dimension must be 1 or 2");
  double r2 = 0.0;
  for (int i = 0; i < dimension; ++i) r2 += (x[i] - y[i]) * (x[i] - y[i]);
  const double s2 = kappa * t;
  return std::pow(2.0 * std::numbers::pi * s2, -0.5 * dimension) * std::exp(-0.5 * r2 / s2);
}

Point heat_kernel_grad(int dimension, double t, const Point& x, const Point& y, double kappa) {
  const double g = heat_kernel(dimension, t, x, y, kappa);
  Point out{0.0, 0.0};
  for (int i = 0; i < dimension; ++i) out[i] = -(x[i] - y[i]) / (kappa * t) * g;
  return out;
}

void BurgersConfig::validate() const {
  spec.validate();
  if (spec.dimension != 1) throw ConfigError("the Burgers experiment runs in d = 1");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ConfigError("kappa must be positive");
  if (times.empty() || points.empty()) throw ConfigError("evaluation points are empty");
  for (double t : times)
    if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("evaluation times must be positive");
  for (double x : points)
    if (!std::isfinite(x)) throw ConfigError("evaluation points must be finite");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be >= 0");
  if (lambdas.size() < 4) throw ConfigError("slope fits need at least 4 lambda values");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] >= 1.0) || !std::isfinite(lambdas[i])) throw ConfigError("lambda values must be >= 1");
    if (i > 0 && !(lambdas[i] >= 1.5 * lambdas[i - 1])) throw ConfigError("lambda list must be geometric with ratio >= 1.5");
  }
  if (replications < 20) throw ConfigError("replications must be >= 20");
  if (!(nodes_per_unit > 0.0) || !std::isfinite(nodes_per_unit)) throw ConfigError("nodes_per_unit must be positive");
  if (!(truncation >= 8.0)) throw ConfigError("truncation multiplier must be >= 8");
}

double exponential_mean(double mu, double intensity, double gamma, double kappa) {
  if (gamma == 0.0) return std::exp(mu * std::expm1(1.0 / kappa));
  const double a = 1.0 / (kappa * std::sqrt(intensity));
  // e^a − 1 − a without cancellation.
  const double rem = a < 1e-3 ? a * a / 2 * (1 + a / 3 * (1 + a / 4)) : std::expm1(a) - a;
  return std::exp(rem * mu * intensity);
}

Potential make_potential(const FieldSample& field, double gamma, double kappa) {
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  const double mu = mean_mu(field.spec), m = field.intensity;
  Potential p;
  p.window = field.window;
  p.values.reserve(field.counts.size());
  if (gamma > 0.0) {
    const double root = std::sqrt(m), mean = mu * m;
    for (auto c : field.counts) p.values.push_back((c - mean) / root);
  } else {
    for (auto c : field.counts) p.values.push_back(c);
  }
  p.mean_g = exponential_mean(mu, m, gamma, kappa);
  return p;
}

namespace {

// h g(t, x, y/λ) and h ∂g/∂x(t, x, y/λ) on the nodes of λ(x ± c√(κt)).
struct PointWeights {
  std::size_t first = 0;
  std::vector<double> g, dg;
  double mass = 0.0;  // λ Σ h g(t, x, y/λ), the denominator at ξ ≡ 0
};

PointWeights point_weights(const Window& w, double kappa, double lambda, double t, double x, double truncation) {
  const double half = truncation * std::sqrt(kappa * t);
  const double lo = lambda * (x - half), hi = lambda * (x + half);
  if (w.lo > lo + 1e-9 * std::abs(lo) || w.hi < hi - 1e-9 * std::abs(hi)) {
    throw ConfigError("potential grid does not cover the quadrature domain");
  }
  const double h = w.spacing();
  const long i0 = std::max(0L, static_cast<long>(std::ceil((lo - w.lo) / h - 0.5)));
  const long i1 = std::min(static_cast<long>(w.n_grid) - 1, static_cast<long>(std::floor((hi - w.lo) / h - 0.5)));
  PointWeights pw;
  pw.first = static_cast<std::size_t>(i0);
  for (long i = i0; i <= i1; ++i) {
    const double y = w.node(static_cast<int>(i)) / lambda;
    pw.g.push_back(h * heat_kernel(1, t, {x, 0.0}, {y, 0.0}, kappa));
    pw.dg.push_back(h * heat_kernel_grad(1, t, {x, 0.0}, {y, 0.0}, kappa)[0]);
    pw.mass += pw.g.back();
  }
  pw.mass *= lambda;
  return pw;
}

VelocityValue velocity_from(const PointWeights& pw, const std::vector<double>& expo, double mean_g, double kappa,
                            double lambda) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < pw.g.size(); ++k) {
    const double e = expo[pw.first + k];
    num += pw.dg[k] * (e - mean_g);
    den += pw.g[k] * e;
  }
  VelocityValue out;
  out.numerator = num;
  out.denominator = lambda * den;
  if (!std::isfinite(out.numerator) || !std::isfinite(out.denominator)) throw NumericalError("Hopf-Cole sums overflow");
  if (!(out.denominator > 1e-12 * pw.mass * mean_g)) throw DegenerateSampleError("Hopf-Cole denominator is degenerate");
  out.v = -kappa * out.numerator / out.denominator;
  return out;
}

}  // namespace

VelocityValue hopf_cole_velocity(const Potential& xi, double kappa, double lambda, double t, double x,
                                 double truncation) {
  if (xi.window.dimension != 1) throw ConfigError("Hopf-Cole velocity is evaluated in d = 1");
  if (xi.values.size() != xi.window.node_count()) throw ConfigError("potential size differs from its window");
  if (!(kappa > 0.0) || !(t > 0.0) || !(lambda > 0.0)) throw ConfigError("kappa, t and lambda must be positive");
  if (!(truncation >= 8.0)) throw ConfigError("truncation multiplier must be >= 8");
  const PointWeights pw = point_weights(xi.window, kappa, lambda, t, x, truncation);
  std::vector<double> expo(xi.values.size(), 0.0);
  for (std::size_t k = 0; k < pw.g.size(); ++k) expo[pw.first + k] = std::exp(xi.values[pw.first + k] / kappa);
  return velocity_from(pw, expo, xi.mean_g, kappa, lambda);
}

double velocity_exponent(const GrainSpec& spec, double gamma) {
  const double d = spec.dimension;
  if (gamma == 0.0) return 1.0 + d - d / spec.alpha;
  return 1.0 + d + gamma / 2.0 - scaling_exponent(spec, gamma).exponent;
}

BurgersExperiment burgers_scaling_experiment(const BurgersConfig& config, int threads,
                                             const std::filesystem::path& cache_dir) {
  config.validate();
  BurgersExperiment out;
  out.config = config;
  out.regime = scaling_exponent(config.spec, config.gamma);
  out.exponent = velocity_exponent(config.spec, config.gamma);
  const double mu = mean_mu(config.spec);
  const bool aggregated = config.gamma > 0.0;
  // The linear functional is normalized as the numerator's limit.
  const double id_exponent = aggregated ? config.gamma / 2 - out.regime.exponent : -1.0 / config.spec.alpha;
  const double t_max = *std::max_element(config.times.begin(), config.times.end());
  const double x_lo = *std::min_element(config.points.begin(), config.points.end());
  const double x_hi = *std::max_element(config.points.begin(), config.points.end());
  struct Eval {
    double t, x;
  };
  std::vector<Eval> evals;
  for (double t : config.times)
    for (double x : config.points) evals.push_back({t, x});
  const std::size_t R = static_cast<std::size_t>(config.replications);

  for (std::size_t li = 0; li < config.lambdas.size(); ++li) {
    const double lambda = config.lambdas[li];
    const double m = std::pow(lambda, config.gamma);
    const double half = config.truncation * std::sqrt(config.kappa * t_max);
    Window w;
    w.lo = lambda * (x_lo - half);
    w.hi = lambda * (x_hi + half);
    w.n_grid = std::max(2, static_cast<int>(std::ceil(w.length() * config.nodes_per_unit)));
    w.validate();
    std::vector<PointWeights> weights;
    for (const auto& e : evals) weights.push_back(point_weights(w, config.kappa, lambda, e.t, e.x, config.truncation));
    const double id_norm = std::pow(lambda, id_exponent);
    std::vector<VelocitySample> rows(R * evals.size());
    std::vector<char> dropped(R, 0);
    parallel_for(R, threads, [&](std::size_t rep) {
      const std::uint64_t seed = derive_seed(config.seed, {li, rep});
      const FieldSample field = sample_field_cached(config.spec, w, m, seed, cache_dir);
      const Potential xi = make_potential(field, config.gamma, config.kappa);
      std::vector<double> expo(xi.values.size());
      for (std::size_t i = 0; i < expo.size(); ++i) expo[i] = std::exp(xi.values[i] / config.kappa);
      const double lin_mean = aggregated ? 0.0 : mu;
      for (std::size_t k = 0; k < evals.size(); ++k) {
        VelocitySample s;
        s.lambda = lambda;
        s.t = evals[k].t;
        s.x = evals[k].x;
        s.replication = static_cast<int>(rep);
        s.seed = seed;
        try {
          const auto v = velocity_from(weights[k], expo, xi.mean_g, config.kappa, lambda);
          s.v = v.v;
          s.numerator = v.numerator;
          s.denominator = v.denominator;
        } catch (const DegenerateSampleError&) {
          dropped[rep] = 1;
        }
        double lin = 0.0;
        const auto& pw = weights[k];
        for (std::size_t j = 0; j < pw.dg.size(); ++j) lin += pw.dg[j] * (xi.values[pw.first + j] - lin_mean);
        s.identity = id_norm * lin;
        rows[rep * evals.size() + k] = s;
      }
    });
    int n_dropped = 0;
    for (std::size_t rep = 0; rep < R; ++rep) {
      if (dropped[rep]) {
        ++n_dropped;
        continue;
      }
      for (std::size_t k = 0; k < evals.size(); ++k) out.samples.push_back(rows[rep * evals.size() + k]);
    }
    out.dropped.push_back(n_dropped);
  }

  Verdict& v = out.verdict;
  v.name = config.name;
  auto& det = v.details;
  det["regime"] = to_string(out.regime.regime);
  det["gamma"] = config.gamma;
  det["kappa"] = config.kappa;
  det["velocity_exponent"] = out.exponent;
  det["lambdas"] = config.lambdas;
  det["dropped"] = out.dropped;
  const double c1 = aggregated ? 1.0 : config.kappa * std::expm1(1.0 / config.kappa);
  det["target_prefactor"] = -c1;
  int total_dropped = 0;
  for (int d : out.dropped) total_dropped += d;
  const double rate = static_cast<double>(total_dropped) / static_cast<double>(R * config.lambdas.size());
  nlohmann::json points = nlohmann::json::array();
  for (const auto& e : evals) {
    std::vector<double> scale;
    std::vector<double> top, top_id;
    for (double lambda : config.lambdas) {
      std::vector<double> abs_v;
      for (const auto& s : out.samples)
        if (s.lambda == lambda && s.t == e.t && s.x == e.x) {
          abs_v.push_back(std::abs(s.v));
          if (lambda == config.lambdas.back()) {
            top.push_back(std::pow(lambda, out.exponent) * s.v);
            top_id.push_back(s.identity);
          }
        }
      scale.push_back(abs_v.empty() ? 0.0 : median(abs_v));
    }
    char label[64];
    std::snprintf(label, sizeof label, "t=%g,x=%g", e.t, e.x);
    nlohmann::json p;
    p["t"] = e.t;
    p["x"] = e.x;
    p["median_abs_v"] = scale;
    const auto fit = slope_fit(config.lambdas, scale);
    p["slope"] = fit.slope;
    p["slope_standard_error"] = fit.standard_error;
    v.checks.push_back(make_check(std::string("slope[") + label + "]", fit.slope, -out.exponent - 0.15,
                                  -out.exponent + 0.15));
    if (top.size() >= 20) {
      const double mx = mean(top_id), my = mean(top);
      double sxy = 0.0, sxx = 0.0;
      for (std::size_t i = 0; i < top.size(); ++i) {
        sxy += (top_id[i] - mx) * (top[i] - my);
        sxx += (top_id[i] - mx) * (top_id[i] - mx);
      }
      p["prefactor_estimate"] = sxy / sxx;
      v.checks.push_back(make_check(std::string("prefactor_ratio[") + label + "]", (sxy / sxx) / -c1, 0.8, 1.2, false));
      if (out.regime.regime == Regime::Gaussian) {
        const auto phi = TestFunction::heat_kernel_gradient(1, e.t, {e.x, 0.0}, config.kappa);
        const double sd = std::sqrt(c_phi(config.spec, phi).value);
        const auto ks = ks_test(top, [&](double z) { return normal_cdf(z / sd); });
        p["ks_p_value"] = ks.p_value;
        p["limit_sd"] = sd;
        v.checks.push_back(make_check(std::string("ks_p_value[") + label + "]", ks.p_value, 0.01, 1.0, false));
      }
    }
    points.push_back(p);
  }
  det["points"] = points;
  v.checks.push_back(make_check("degenerate_rate", rate, 0.0, 0.01 - 1e-15));
  return out;
}

std::string velocity_csv(const BurgersExperiment& experiment) {
  std::ostringstream out;
  out << "lambda,t,x,replication,v,numerator,denominator\r\n";
  char buf[64];
  const auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  for (const auto& s : experiment.samples) {
    out << num(s.lambda) << ',' << num(s.t) << ',' << num(s.x) << ',' << s.replication << ',' << num(s.v) << ','
        << num(s.numerator) << ',' << num(s.denominator) << "\r\n";
  }
  return out.str();
}

}  // namespace grainfield
