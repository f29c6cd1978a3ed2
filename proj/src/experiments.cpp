#include "grainfield/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "grainfield/errors.hpp"
#include "grainfield/limits.hpp"
#include "grainfield/parallel.hpp"
#include "grainfield/rng.hpp"
#include "grainfield/stats.hpp"

namespace grainfield {

void ExperimentConfig::validate(bool distributional) const {
  spec.validate();
  if (phi.dimension() != spec.dimension) throw ConfigError("test function dimension differs from the grain dimension");
  if (phi.is_zero()) throw ConfigError("test function is zero");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be >= 0");
  if (lambdas.empty()) throw ConfigError("lambda list is empty");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] >= 1.0) || !std::isfinite(lambdas[i])) throw ConfigError("lambda values must be >= 1");
    if (i > 0 && !(lambdas[i] >= 1.5 * lambdas[i - 1])) {
      throw ConfigError("lambda list must be geometric with ratio >= 1.5");
    }
  }
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (distributional && replications < 200) throw ConfigError("distributional tests need at least 200 replications");
  if (!(nodes_per_unit > 0.0) || !std::isfinite(nodes_per_unit)) throw ConfigError("nodes_per_unit must be positive");
  Subordinator::parse(subordinator);
}

Window functional_window(const TestFunction& phi, double lambda, double nodes_per_unit) {
  const Box box = phi.support();
  Window w;
  w.dimension = phi.dimension();
  w.lo = lambda * box.lo[0];
  w.hi = lambda * box.hi[0];
  if (w.dimension == 2) {
    w.lo = std::min(w.lo, lambda * box.lo[1]);
    w.hi = std::max(w.hi, lambda * box.hi[1]);
  }
  w.n_grid = std::max(2, static_cast<int>(std::ceil(w.length() * nodes_per_unit - 1e-9)));
  w.validate();
  return w;
}

namespace {

void check_coverage(const Window& window, const TestFunction& phi, double lambda) {
  const Box box = phi.support();
  const double slack = 1e-9 * std::max(1.0, window.length());
  for (int i = 0; i < window.dimension; ++i) {
    if (window.lo > lambda * box.lo[i] + slack || window.hi < lambda * box.hi[i] - slack) {
      throw ConfigError("field window does not cover the support of phi(t/lambda)");
    }
  }
}

// h^d φ(t/λ) per node, row-major.
std::vector<double> node_weights(const Window& window, const TestFunction& phi, double lambda) {
  const double h = window.spacing();
  const double cell = window.dimension == 1 ? h : h * h;
  const int n = window.n_grid;
  std::vector<double> w;
  w.reserve(window.node_count());
  if (window.dimension == 1) {
    for (int i = 0; i < n; ++i) w.push_back(cell * phi(window.node(i) / lambda));
  } else {
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix) w.push_back(cell * phi(Point{window.node(ix) / lambda, window.node(iy) / lambda}));
  }
  return w;
}

double weighted_sum(const std::vector<std::int32_t>& counts, const std::vector<double>& w,
                    const std::function<double(std::int32_t)>& transform) {
  double s = 0.0;
  if (transform) {
    for (std::size_t i = 0; i < w.size(); ++i)
      if (w[i] != 0.0) s += w[i] * transform(counts[i]);
  } else {
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * counts[i];
  }
  return s;
}

}  // namespace

double grid_phi_sum(const Window& window, const TestFunction& phi, double lambda) {
  double s = 0.0;
  for (double v : node_weights(window, phi, lambda)) s += v;
  return s;
}

FunctionalValue integrate_functional(const FieldSample& field, const TestFunction& phi, double lambda,
                                     const std::function<double(std::int32_t)>& transform) {
  const Window& win = field.window;
  if (phi.dimension() != win.dimension) throw ConfigError("test function dimension differs from the field");
  check_coverage(win, phi, lambda);
  const auto w = node_weights(win, phi, lambda);
  FunctionalValue out;
  out.value = weighted_sum(field.counts, w, transform);
  // Half resolution: even-indexed nodes with cell (2h)^d.
  const int n = win.n_grid;
  const double factor = win.dimension == 1 ? 2.0 : 4.0;
  double coarse = 0.0;
  for (int iy = 0; iy < (win.dimension == 1 ? 1 : n); iy += 2)
    for (int ix = 0; ix < n; ix += 2) {
      const std::size_t i = static_cast<std::size_t>(iy) * static_cast<std::size_t>(n) + static_cast<std::size_t>(ix);
      if (w[i] == 0.0) continue;
      coarse += factor * w[i] * (transform ? transform(field.counts[i]) : field.counts[i]);
    }
  out.error = std::abs(out.value - coarse);
  return out;
}

double poisson_expectation(const std::function<double(long)>& v, double mean) {
  const CharlierBasis basis(mean, 1);
  double s = 0.0, c = 0.0;
  for (long x = basis.x_min(); x <= basis.x_max(); ++x) {
    // Neumaier summation.
    const double term = basis.pmf(x) * v(x);
    const double t = s + term;
    c += std::abs(s) >= std::abs(term) ? (s - t) + term : (term - t) + s;
    s = t;
  }
  return s + c;
}

ReplicationSet run_replications(const ExperimentConfig& config, int threads, const std::filesystem::path& cache_dir) {
  config.validate();
  ReplicationSet set;
  set.config = config;
  set.regime = scaling_exponent(config.spec, config.gamma);
  const double mu = mean_mu(config.spec);
  const double H = set.regime.exponent;
  const Subordinator g = Subordinator::parse(config.subordinator);
  const bool sub = config.has_subordinator();
  for (std::size_t li = 0; li < config.lambdas.size(); ++li) {
    const double lambda = config.lambdas[li];
    LambdaRun run;
    run.lambda = lambda;
    run.intensity = std::pow(lambda, config.gamma);
    const double m = run.intensity, mean_count = mu * m;
    const Window window = functional_window(config.phi, lambda, config.nodes_per_unit);
    const auto w = node_weights(window, config.phi, lambda);
    double wsum = 0.0;
    for (double v : w) wsum += v;
    const double root_m = std::sqrt(m);
    const bool aggregated = config.gamma > 0.0;
    const auto transform = [&](std::int32_t x) {
      return aggregated ? g((x - mean_count) / root_m) : g(static_cast<double>(x));
    };
    const double id_norm = std::pow(lambda, -H);
    run.identity_mean = mean_count * wsum;
    if (sub) {
      const double eg = poisson_expectation([&](long x) { return transform(static_cast<std::int32_t>(x)); }, mean_count);
      run.analytic_mean = eg * wsum;
      run.normalization = aggregated ? std::pow(lambda, config.gamma / 2 - H) : id_norm;
    } else {
      run.analytic_mean = run.identity_mean;
      run.normalization = id_norm;
    }
    run.samples.resize(static_cast<std::size_t>(config.replications));
    parallel_for(run.samples.size(), threads, [&](std::size_t rep) {
      const std::uint64_t seed = derive_seed(config.seed, {li, rep});
      const FieldSample field = sample_field_cached(config.spec, window, m, seed, cache_dir);
      StatisticSample s;
      s.lambda = lambda;
      s.gamma = config.gamma;
      s.replication = static_cast<int>(rep);
      s.seed = seed;
      const double raw_id = weighted_sum(field.counts, w, {});
      s.identity_statistic = id_norm * (raw_id - run.identity_mean);
      if (sub) {
        s.raw = weighted_sum(field.counts, w, transform);
        s.statistic = run.normalization * (s.raw - run.analytic_mean);
      } else {
        s.raw = raw_id;
        s.statistic = s.identity_statistic;
      }
      run.samples[rep] = s;
    });
    set.runs.push_back(std::move(run));
  }
  return set;
}

HillEstimate hill_estimator(std::span<const double> samples, double k_frac, std::uint64_t seed, int bootstrap) {
  if (samples.size() < 500) throw ConfigError("Hill estimator needs at least 500 samples");
  if (!(k_frac > 0.01 && k_frac < 0.2)) throw ConfigError("k_frac must lie in (0.01, 0.2)");
  const std::size_t n = samples.size();
  const auto k = static_cast<std::size_t>(std::floor(k_frac * static_cast<double>(n)));
  const auto estimate = [&](std::vector<double> a, bool check_ties) {
    for (auto& v : a) v = std::abs(v);
    std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(k), a.end(), std::greater<>());
    std::sort(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(k) + 1, std::greater<>());
    const double threshold = a[k];
    std::size_t ties = 0;
    for (std::size_t i = 0; i <= k; ++i) ties += a[i] == threshold || (i > 0 && a[i] == a[i - 1]);
    if (!(threshold > 0.0) || (check_ties && ties * 10 > k + 1)) throw DegenerateSampleError("too many ties among the upper order statistics");
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += std::log(a[i] / threshold);
    return static_cast<double>(k) / s;
  };
  HillEstimate out;
  out.k = static_cast<int>(k);
  out.estimate = estimate(std::vector<double>(samples.begin(), samples.end()), true);
  Engine eng = make_engine(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> boots, resample(n);
  for (int b = 0; b < bootstrap; ++b) {
    for (auto& v : resample) v = samples[pick(eng)];
    // Resampling repeats values, so ties are not checked here.
    try {
      boots.push_back(estimate(resample, false));
    } catch (const DegenerateSampleError&) {
    }
  }
  out.standard_error = boots.size() > 1 ? std::sqrt(variance(boots)) : 0.0;
  return out;
}

SlopeFit slope_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("slope fit needs equally long x and y");
  if (x.size() < 4) throw ConfigError("slope fit needs at least 4 points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ConfigError("slope fit needs positive x and y");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double mx = mean(lx), my = mean(ly);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw ConfigError("slope fit needs distinct x values");
  SlopeFit out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - out.intercept - out.slope * lx[i];
    ssr += r * r;
  }
  out.standard_error = std::sqrt(ssr / static_cast<double>(lx.size() - 2) / sxx);
  return out;
}

Check make_check(std::string name, double value, double lower, double upper, bool gating) {
  return {std::move(name), value, lower, upper, std::isfinite(value) && value >= lower && value <= upper, gating};
}

bool Verdict::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass || !c.gating; });
}

const Check& Verdict::check(const std::string& check_name) const {
  for (const auto& c : checks)
    if (c.name == check_name) return c;
  throw ConfigError("verdict has no check '" + check_name + "'");
}

nlohmann::json Verdict::to_json() const {
  nlohmann::json j;
  j["schema"] = "grainfield-verdict-v1";
  j["name"] = name;
  j["pass"] = pass();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"name", c.name}, {"value", c.value}, {"lower", c.lower}, {"upper", c.upper},
                           {"pass", c.pass}, {"gating", c.gating}});
  }
  j["details"] = details;
  return j;
}

double limit_prefactor(const ExperimentConfig& config) {
  if (!config.has_subordinator()) return 1.0;
  const Subordinator g = Subordinator::parse(config.subordinator);
  const double mu = mean_mu(config.spec);
  if (config.gamma > 0.0) return hermite_h1(g, mu);
  // Projection coefficient Cov(G(N), N)/Var N = c_G(1; μ).
  return coeff_proj(CharlierBasis(mu, 1), g).c[1];
}

Verdict regime_report(const ReplicationSet& set) {
  const auto& config = set.config;
  config.validate(true);
  if (set.runs.empty()) throw ConfigError("no replications to report");
  const LambdaRun& run = set.runs.back();
  std::vector<double> stat, id, raw;
  for (const auto& s : run.samples) {
    stat.push_back(s.statistic);
    id.push_back(s.identity_statistic);
    raw.push_back(s.raw);
  }
  const Regime regime = set.regime.regime;
  const double pref = limit_prefactor(config);
  Verdict v;
  v.name = config.name;
  auto& det = v.details;
  det["regime"] = to_string(regime);
  det["H"] = set.regime.exponent;
  det["gamma"] = config.gamma;
  det["lambda"] = run.lambda;
  det["M"] = run.intensity;
  det["replications"] = stat.size();
  det["subordinator"] = config.subordinator;
  det["target_prefactor"] = pref;
  det["mean"] = mean(stat);
  det["variance"] = variance(stat);
  const double n = static_cast<double>(stat.size());
  const double se_raw = std::sqrt(variance(raw) / n);
  const double centering_z = se_raw > 0 ? (mean(raw) - run.analytic_mean) / se_raw : 0.0;
  v.checks.push_back(make_check("centering_z", centering_z, -4.0, 4.0, false));
  const std::uint64_t boot_seed = derive_seed(config.seed, {0xcf, set.runs.size()});
  const auto cf_check = [&](const LimitLaw& law) {
    const auto grid = theta_grid(law);
    const auto d = cf_distance(stat, law, grid, {.seed = boot_seed});
    det["cf_distance"] = d.distance;
    det["cf_band"] = d.band;
    det["cf_cluster_distance"] = d.cluster_distance;
    det["cf_cluster_band"] = d.cluster_band;
    det["cf_theta"] = d.theta;
    std::vector<double> er, ei, tr, ti;
    for (std::size_t i = 0; i < d.theta.size(); ++i) {
      er.push_back(d.empirical[i].real());
      ei.push_back(d.empirical[i].imag());
      tr.push_back(d.target[i].real());
      ti.push_back(d.target[i].imag());
    }
    det["cf_empirical_re"] = er;
    det["cf_empirical_im"] = ei;
    det["cf_target_re"] = tr;
    det["cf_target_im"] = ti;
    v.checks.push_back(make_check("cf_clusters_within", d.clusters_within, 3, 5, !config.has_subordinator()));
  };
  switch (regime) {
    case Regime::Gaussian: {
      const double c = c_phi(config.spec, config.phi).value;
      const double target_var = pref * pref * c;
      det["c_phi"] = c;
      const double sd = std::sqrt(target_var);
      const auto ks = ks_test(stat, [&](double x) { return normal_cdf(x / sd); });
      det["ks_statistic"] = ks.statistic;
      // With a subordinator the finite-M remainder makes these descriptive only.
      const bool linear = !config.has_subordinator();
      v.checks.push_back(make_check("ks_p_value", ks.p_value, 0.01, 1.0, linear));
      v.checks.push_back(make_check("variance_ratio", variance(stat) / target_var, 0.9, 1.1, linear));
      break;
    }
    case Regime::Stable:
    case Regime::Unaggregated: {
      const double a = config.spec.alpha;
      try {
        const auto hill = hill_estimator(stat, 0.05, boot_seed);
        det["hill_standard_error"] = hill.standard_error;
        det["hill_k"] = hill.k;
        v.checks.push_back(make_check("hill_index", hill.estimate, a - 0.15, a + 0.15));
      } catch (const DegenerateSampleError& e) {
        det["hill_error"] = e.what();
        v.checks.push_back(make_check("hill_index", std::nan(""), a - 0.15, a + 0.15));
      }
      cf_check(LimitLaw::stable(config.spec, config.phi, pref));
      break;
    }
    case Regime::Intermediate:
      cf_check(LimitLaw::intermediate(config.spec, config.phi, pref));
      break;
  }
  if (regime == Regime::Gaussian && set.runs.size() >= 4) {
    // Var X_{λ,M}(φ) grows as λ^{2H}.
    std::vector<double> lam, var;
    for (const auto& r : set.runs) {
      std::vector<double> x;
      for (const auto& s : r.samples) x.push_back(s.identity_statistic);
      lam.push_back(r.lambda);
      var.push_back(variance(x) * std::pow(r.lambda, 2 * set.regime.exponent));
    }
    const double slope = slope_fit(lam, var).slope;
    det["variance_slope"] = slope;
    v.checks.push_back(make_check("variance_slope", slope, 2 * set.regime.exponent - 0.1,
                                  2 * set.regime.exponent + 0.1, false));
  }
  if (!config.has_subordinator() && config.spec.dimension == 1) {
    // Exact law of the continuum statistic at this λ and M: separates the
    // distance to the limit from simulation error.
    const auto exact = [&](double t) {
      return std::exp(log_cf_finite(config.spec, config.phi, run.lambda, run.intensity, set.regime.exponent, t));
    };
    const auto d = cf_distance(stat, exact, theta_grid(exact), {.seed = boot_seed});
    det["cf_finite_distance"] = d.distance;
    det["cf_finite_band"] = d.band;
    v.checks.push_back(make_check("cf_finite_clusters_within", d.clusters_within, 3, 5, false));
  }
  if (config.has_subordinator()) {
    const double corr = correlation(stat, id);
    det["shared_seed_correlation"] = corr;
    if (config.gamma > 0.0) {
      const double ratio = std::sqrt(variance(stat) / variance(id));
      const double target = std::abs(pref);
      v.checks.push_back(make_check("sd_ratio_over_prefactor", ratio / target, 0.9, 1.1));
      v.checks.push_back(make_check("shared_seed_correlation", corr, 0.9, 1.0, regime == Regime::Gaussian));
    } else {
      // Least-squares slope of the subordinated on the linear statistic.
      const double mx = mean(id), my = mean(stat);
      double sxy = 0.0, sxx = 0.0;
      for (std::size_t i = 0; i < id.size(); ++i) {
        sxy += (id[i] - mx) * (stat[i] - my);
        sxx += (id[i] - mx) * (id[i] - mx);
      }
      det["prefactor_estimate"] = sxy / sxx;
      v.checks.push_back(make_check("prefactor_ratio", (sxy / sxx) / pref, 0.85, 1.15));
    }
  }
  return v;
}

std::string samples_csv(const ReplicationSet& set) {
  const bool sub = set.config.has_subordinator();
  std::ostringstream out;
  out << "lambda,gamma,replication,seed,statistic" << (sub ? ",identity_statistic" : "") << "\r\n";
  char buf[64];
  const auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  for (const auto& run : set.runs)
    for (const auto& s : run.samples) {
      out << num(s.lambda) << ',' << num(s.gamma) << ',' << s.replication << ',' << s.seed << ',' << num(s.statistic);
      if (sub) out << ',' << num(s.identity_statistic);
      out << "\r\n";
    }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
  if (!f) throw ConfigError("failed writing " + path.string());
}

}  // namespace grainfield
