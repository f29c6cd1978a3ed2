#include "grainfield/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/version.hpp>
#include <yaml-cpp/yaml.h>

#include "grainfield/boolean.hpp"
#include "grainfield/charlier.hpp"
#include "grainfield/errors.hpp"
#include "grainfield/hash.hpp"
#include "grainfield/stats.hpp"

namespace grainfield {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- charlier

void CharlierCheckConfig::validate() const {
  if (mu_grid.empty()) throw ConfigError("mu_grid is empty");
  for (double mu : mu_grid)
    if (!(mu > 0.0) || !std::isfinite(mu)) throw ConfigError("mu_grid values must be positive");
  if (max_order < 1 || max_order > 40) throw ConfigError("max_order must lie in [1, 40]");
  BivariatePoisson{mu1, mu2, mu3}.validate();
  if (mehler_max < 0 || mehler_order < 1) throw ConfigError("mehler ranges must be positive");
  if (!(closed_form_mu > 0.0) || closed_form_order < 1) throw ConfigError("closed-form settings must be positive");
  if (!(limit_intensity > 0.0)) throw ConfigError("limit_intensity must be positive");
}

namespace {

double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

}  // namespace

Verdict charlier_check(const CharlierCheckConfig& config, bool inject_fault) {
  config.validate();
  Verdict v;
  v.name = config.name;
  auto& det = v.details;
  const int K = config.max_order;

  // E P_k P_l = δ_kl k! μ^k, deviation in units of k! μ^k.
  double orth = 0.0;
  for (double mu : config.mu_grid) {
    const CharlierBasis basis(mu, K);
    std::vector<std::vector<double>> m(K + 1, std::vector<double>(K + 1, 0.0));
    for (long x = basis.x_min(); x <= basis.x_max(); ++x) {
      std::vector<double> p(K + 1);
      for (int k = 0; k <= K; ++k) p[k] = basis.poly(k, static_cast<double>(x));
      const double w = basis.pmf(x);
      for (int k = 0; k <= K; ++k)
        for (int l = 0; l <= K; ++l) m[k][l] += w * p[k] * p[l];
    }
    double worst = 0.0;
    for (int k = 0; k <= K; ++k) {
      const double norm = std::exp(std::lgamma(k + 1.0) + k * std::log(mu));
      for (int l = 0; l <= K; ++l) worst = std::max(worst, std::abs(m[k][l] - (k == l ? norm : 0.0)) / norm);
    }
    det["orthogonality"].push_back({{"mu", mu}, {"max_relative_deviation", worst}});
    orth = std::max(orth, worst);
  }
  v.checks.push_back(make_check("orthogonality_max_rel", orth, 0.0, 1e-8));

  const BivariatePoisson biv{config.mu1, config.mu2, config.mu3};
  double mehler = 0.0;
  for (long x = 0; x <= config.mehler_max; ++x)
    for (long y = 0; y <= config.mehler_max; ++y) {
      mehler = std::max(mehler, std::abs(mehler_pmf(biv, x, y, config.mehler_order).value -
                                         bivariate_pmf_direct(biv, x, y)));
    }
  v.checks.push_back(make_check("mehler_max_abs", mehler, 0.0, 1e-10));

  const double a = config.exp_a;
  const auto g_exp = Subordinator::exponential(a);
  const auto g_min = Subordinator::min_one();
  double proj_diff = 0.0;
  for (double mu : config.mu_grid) {
    const CharlierBasis basis(mu, K);
    for (const auto* g : {&g_exp, &g_min}) {
      auto proj = coeff_proj(basis, *g).c;
      if (inject_fault && g == &g_exp) proj[2] *= 1.0 + 1e-6;
      const auto diff = coeff_diff(basis, *g);
      for (int k = 0; k <= K; ++k) proj_diff = std::max(proj_diff, rel_diff(proj[k], diff[k]));
    }
  }
  v.checks.push_back(make_check("proj_vs_diff_max_rel", proj_diff, 0.0, 1e-9));

  const double mu = config.closed_form_mu;
  const CharlierBasis basis(mu, config.closed_form_order);
  auto ce = coeff_proj(basis, g_exp).c;
  if (inject_fault) ce[2] *= 1.0 + 1e-6;
  const auto cm = coeff_proj(basis, g_min).c;
  double exp_err = 0.0, min_err = 0.0;
  const double b = std::expm1(a);
  for (int k = 0; k <= config.closed_form_order; ++k) {
    exp_err = std::max(exp_err, rel_diff(ce[k], std::pow(b, k) * std::exp(b * mu)));
    if (k >= 1) min_err = std::max(min_err, rel_diff(cm[k], (k % 2 ? 1.0 : -1.0) * std::exp(-mu)));
  }
  v.checks.push_back(make_check("exp_closed_form_max_rel", exp_err, 0.0, 1e-9));
  v.checks.push_back(make_check("min1_closed_form_max_rel", min_err, 0.0, 1e-9));

  const auto lim = coeff_limit_check(g_exp, mu, {config.limit_intensity});
  const double h1 = a * std::exp(a * a * mu / 2);
  det["scaled_c1"] = lim.scaled_c1.back();
  det["h1_closed_form"] = h1;
  v.checks.push_back(make_check("h1_limit_distance", std::abs(lim.scaled_c1.back() - h1), 0.0, 1e-3));
  det["fault_injected"] = inject_fault;
  return v;
}

// ------------------------------------------------------------------ config

std::string to_string(RunKind kind) {
  switch (kind) {
    case RunKind::Charlier: return "charlier";
    case RunKind::Experiment: return "experiment";
    case RunKind::Boolean: return "boolean";
    case RunKind::Burgers: return "burgers";
  }
  return "unknown";
}

RunKind parse_run_kind(const std::string& text) {
  if (text == "charlier") return RunKind::Charlier;
  if (text == "experiment") return RunKind::Experiment;
  if (text == "boolean") return RunKind::Boolean;
  if (text == "burgers") return RunKind::Burgers;
  throw ConfigError("unknown run kind '" + text + "'");
}

const std::string& RunConfig::name() const {
  switch (kind) {
    case RunKind::Charlier: return charlier.name;
    case RunKind::Burgers: return burgers.name;
    default: return experiment.name;
  }
}

std::uint64_t RunConfig::seed() const {
  switch (kind) {
    case RunKind::Charlier: return charlier.seed;
    case RunKind::Burgers: return burgers.seed;
    default: return experiment.seed;
  }
}

void RunConfig::set_seed(std::uint64_t s) {
  charlier.seed = s;
  experiment.seed = s;
  burgers.seed = s;
}

void RunConfig::set_replications(int r) {
  experiment.replications = r;
  burgers.replications = r;
}

void RunConfig::validate() const {
  switch (kind) {
    case RunKind::Charlier: charlier.validate(); break;
    case RunKind::Experiment: experiment.validate(); break;
    case RunKind::Boolean:
      experiment.validate(true);
      validate_boolean_set(experiment.phi);
      if (experiment.gamma != 0.0) throw ConfigError("the Boolean experiment is unaggregated (gamma = 0)");
      break;
    case RunKind::Burgers: burgers.validate(); break;
  }
}

namespace {

const std::map<RunKind, std::vector<std::string>>& known_keys() {
  static const std::map<RunKind, std::vector<std::string>> keys{
      {RunKind::Charlier,
       {"kind", "name", "seed", "mu_grid", "max_order", "mehler", "exp_a", "closed_form_mu", "closed_form_order",
        "limit_intensity"}},
      {RunKind::Experiment,
       {"kind", "name", "seed", "output", "grain", "phi", "gamma", "lambdas", "replications", "subordinator",
        "nodes_per_unit"}},
      {RunKind::Boolean,
       {"kind", "name", "seed", "output", "grain", "set", "gamma", "lambdas", "replications", "nodes_per_unit"}},
      {RunKind::Burgers,
       {"kind", "name", "seed", "output", "grain", "kappa", "times", "points", "gamma", "lambdas", "replications",
        "nodes_per_unit", "truncation"}},
  };
  return keys;
}

int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

template <class T>
T scalar(const YAML::Node& n, const std::string& key, const char* what) {
  if (!n.IsScalar()) throw ParseError(std::string("expected ") + what, line_of(n), key);
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ParseError(std::string("expected ") + what, line_of(n), key);
  }
}

std::vector<double> number_list(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence()) throw ParseError("expected a list of numbers", line_of(n), key);
  std::vector<double> out;
  for (const auto& e : n) out.push_back(scalar<double>(e, key, "a number"));
  return out;
}

GrainSpec parse_grain(const YAML::Node& n) {
  if (!n.IsMap()) throw ParseError("expected a mapping", line_of(n), "grain");
  GrainSpec spec;
  for (const auto& kv : n) {
    const std::string key = kv.first.as<std::string>();
    const std::string full = "grain." + key;
    if (key == "dimension") {
      spec.dimension = scalar<int>(kv.second, full, "an integer");
    } else if (key == "shape") {
      try {
        spec.shape = parse_shape(scalar<std::string>(kv.second, full, "a shape"));
      } catch (const ConfigError& e) {
        throw ParseError(e.what(), line_of(kv.second), full);
      }
    } else if (key == "alpha") {
      spec.alpha = scalar<double>(kv.second, full, "a number");
    } else if (key == "r0") {
      spec.r0 = scalar<double>(kv.second, full, "a number");
    } else {
      throw ParseError("unknown key", line_of(kv.first), full);
    }
  }
  return spec;
}

}  // namespace

RunConfig parse_config(const std::string& text, RunKind default_kind) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(e.msg, e.mark.line + 1, "");
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ParseError("top level must be a mapping", line_of(root), "");

  RunConfig c;
  c.kind = default_kind;
  if (root["kind"]) {
    try {
      c.kind = parse_run_kind(scalar<std::string>(root["kind"], "kind", "a run kind"));
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), line_of(root["kind"]), "kind");
    }
  }
  if (c.kind == RunKind::Boolean) {
    c.experiment.name = "boolean";
    c.experiment.gamma = 0.0;
    c.experiment.replications = 2000;
    c.experiment.lambdas = {32.0, 64.0, 128.0, 256.0};
  }
  const auto& allowed = known_keys().at(c.kind);
  std::set<std::string> present;
  std::map<std::string, YAML::Node> nodes;
  for (const auto& kv : root) {
    if (!kv.first.IsScalar()) throw ParseError("keys must be scalars", line_of(kv.first), "");
    const std::string key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ParseError("unknown key for kind " + to_string(c.kind), line_of(kv.first), key);
    }
    if (!present.insert(key).second) throw ParseError("duplicate key", line_of(kv.first), key);
    nodes[key] = kv.second;
  }
  for (const auto& key : allowed)
    if (!present.count(key) && key != "kind") c.defaulted.push_back(key);

  const auto get = [&](const std::string& key) -> const YAML::Node* {
    const auto it = nodes.find(key);
    return it == nodes.end() ? nullptr : &it->second;
  };
  const auto num = [&](const std::string& key, double& out) {
    if (const auto* n = get(key)) out = scalar<double>(*n, key, "a number");
  };
  const auto integer = [&](const std::string& key, int& out) {
    if (const auto* n = get(key)) out = scalar<int>(*n, key, "an integer");
  };
  const auto str = [&](const std::string& key, std::string& out) {
    if (const auto* n = get(key)) out = scalar<std::string>(*n, key, "a string");
  };
  const auto list = [&](const std::string& key, std::vector<double>& out) {
    if (const auto* n = get(key)) out = number_list(*n, key);
  };
  const auto seed = [&](std::uint64_t& out) {
    if (const auto* n = get("seed")) out = scalar<std::uint64_t>(*n, "seed", "a nonnegative integer");
  };

  switch (c.kind) {
    case RunKind::Charlier: {
      auto& k = c.charlier;
      str("name", k.name);
      seed(k.seed);
      list("mu_grid", k.mu_grid);
      integer("max_order", k.max_order);
      num("exp_a", k.exp_a);
      num("closed_form_mu", k.closed_form_mu);
      integer("closed_form_order", k.closed_form_order);
      num("limit_intensity", k.limit_intensity);
      if (const auto* n = get("mehler")) {
        if (!n->IsMap()) throw ParseError("expected a mapping", line_of(*n), "mehler");
        for (const auto& kv : *n) {
          const std::string key = kv.first.as<std::string>();
          const std::string full = "mehler." + key;
          if (key == "mu1") k.mu1 = scalar<double>(kv.second, full, "a number");
          else if (key == "mu2") k.mu2 = scalar<double>(kv.second, full, "a number");
          else if (key == "mu3") k.mu3 = scalar<double>(kv.second, full, "a number");
          else if (key == "max") k.mehler_max = scalar<int>(kv.second, full, "an integer");
          else if (key == "order") k.mehler_order = scalar<int>(kv.second, full, "an integer");
          else throw ParseError("unknown key", line_of(kv.first), full);
        }
      }
      break;
    }
    case RunKind::Experiment:
    case RunKind::Boolean: {
      auto& e = c.experiment;
      str("name", e.name);
      seed(e.seed);
      str("output", e.output);
      if (const auto* n = get("grain")) e.spec = parse_grain(*n);
      const std::string fkey = c.kind == RunKind::Boolean ? "set" : "phi";
      if (const auto* n = get(fkey)) {
        try {
          e.phi = TestFunction::parse(scalar<std::string>(*n, fkey, "a test function"), e.spec.dimension);
        } catch (const ConfigError& err) {
          throw ParseError(err.what(), line_of(*n), fkey);
        }
      } else if (e.phi.dimension() != e.spec.dimension) {
        e.phi = e.spec.dimension == 1 ? TestFunction::rectangle(1, {0.0, 0.0}, {1.0, 0.0})
                                      : TestFunction::rectangle(2, {0.0, 0.0}, {1.0, 1.0});
      }
      num("gamma", e.gamma);
      list("lambdas", e.lambdas);
      integer("replications", e.replications);
      if (c.kind == RunKind::Experiment) str("subordinator", e.subordinator);
      else e.subordinator = "min1";
      num("nodes_per_unit", e.nodes_per_unit);
      break;
    }
    case RunKind::Burgers: {
      auto& b = c.burgers;
      str("name", b.name);
      seed(b.seed);
      str("output", b.output);
      if (const auto* n = get("grain")) b.spec = parse_grain(*n);
      num("kappa", b.kappa);
      list("times", b.times);
      list("points", b.points);
      num("gamma", b.gamma);
      list("lambdas", b.lambdas);
      integer("replications", b.replications);
      num("nodes_per_unit", b.nodes_per_unit);
      num("truncation", b.truncation);
      break;
    }
  }
  return c;
}

RunConfig load_config(const fs::path& path, RunKind default_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), default_kind);
}

namespace {

void emit_list(YAML::Emitter& out, const std::string& key, const std::vector<double>& v) {
  out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double x : v) out << x;
  out << YAML::EndSeq;
}

void emit_grain(YAML::Emitter& out, const GrainSpec& s) {
  out << YAML::Key << "grain" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dimension" << YAML::Value << s.dimension;
  out << YAML::Key << "shape" << YAML::Value << to_string(s.shape);
  out << YAML::Key << "alpha" << YAML::Value << s.alpha;
  out << YAML::Key << "r0" << YAML::Value << s.r0;
  out << YAML::EndMap;
}

}  // namespace

std::string serialize_config(const RunConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << to_string(c.kind);
  switch (c.kind) {
    case RunKind::Charlier: {
      const auto& k = c.charlier;
      out << YAML::Key << "name" << YAML::Value << k.name;
      out << YAML::Key << "seed" << YAML::Value << k.seed;
      emit_list(out, "mu_grid", k.mu_grid);
      out << YAML::Key << "max_order" << YAML::Value << k.max_order;
      out << YAML::Key << "mehler" << YAML::Value << YAML::BeginMap;
      out << YAML::Key << "mu1" << YAML::Value << k.mu1;
      out << YAML::Key << "mu2" << YAML::Value << k.mu2;
      out << YAML::Key << "mu3" << YAML::Value << k.mu3;
      out << YAML::Key << "max" << YAML::Value << k.mehler_max;
      out << YAML::Key << "order" << YAML::Value << k.mehler_order;
      out << YAML::EndMap;
      out << YAML::Key << "exp_a" << YAML::Value << k.exp_a;
      out << YAML::Key << "closed_form_mu" << YAML::Value << k.closed_form_mu;
      out << YAML::Key << "closed_form_order" << YAML::Value << k.closed_form_order;
      out << YAML::Key << "limit_intensity" << YAML::Value << k.limit_intensity;
      break;
    }
    case RunKind::Experiment:
    case RunKind::Boolean: {
      const auto& e = c.experiment;
      out << YAML::Key << "name" << YAML::Value << e.name;
      out << YAML::Key << "seed" << YAML::Value << e.seed;
      out << YAML::Key << "output" << YAML::Value << e.output;
      emit_grain(out, e.spec);
      out << YAML::Key << (c.kind == RunKind::Boolean ? "set" : "phi") << YAML::Value << e.phi.to_string();
      out << YAML::Key << "gamma" << YAML::Value << e.gamma;
      emit_list(out, "lambdas", e.lambdas);
      out << YAML::Key << "replications" << YAML::Value << e.replications;
      if (c.kind == RunKind::Experiment) out << YAML::Key << "subordinator" << YAML::Value << e.subordinator;
      out << YAML::Key << "nodes_per_unit" << YAML::Value << e.nodes_per_unit;
      break;
    }
    case RunKind::Burgers: {
      const auto& b = c.burgers;
      out << YAML::Key << "name" << YAML::Value << b.name;
      out << YAML::Key << "seed" << YAML::Value << b.seed;
      out << YAML::Key << "output" << YAML::Value << b.output;
      emit_grain(out, b.spec);
      out << YAML::Key << "kappa" << YAML::Value << b.kappa;
      emit_list(out, "times", b.times);
      emit_list(out, "points", b.points);
      out << YAML::Key << "gamma" << YAML::Value << b.gamma;
      emit_list(out, "lambdas", b.lambdas);
      out << YAML::Key << "replications" << YAML::Value << b.replications;
      out << YAML::Key << "nodes_per_unit" << YAML::Value << b.nodes_per_unit;
      out << YAML::Key << "truncation" << YAML::Value << b.truncation;
      break;
    }
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string config_hash(const RunConfig& config) { return sha256_hex(serialize_config(config)); }

// ----------------------------------------------------------------- presets

namespace {

const std::map<std::string, std::string>& presets() {
  static const std::map<std::string, std::string> p{
      {"thm22-gaussian",
       "kind: experiment\nname: thm22-gaussian\nseed: 1\ngrain: {dimension: 1, shape: cube, alpha: 1.5, r0: 1}\n"
       "phi: \"rectangle:0,1\"\ngamma: 1\nlambdas: [32, 64, 128, 256]\nreplications: 1000\n"
       "subordinator: identity\nnodes_per_unit: 4\n"},
      {"thm22-stable",
       "kind: experiment\nname: thm22-stable\nseed: 1\ngrain: {dimension: 1, shape: cube, alpha: 1.5, r0: 1}\n"
       "phi: \"rectangle:0,1\"\ngamma: 0.2\nlambdas: [32, 64, 128, 256]\nreplications: 2000\n"
       "subordinator: identity\nnodes_per_unit: 4\n"},
      {"thm22-boundary",
       "kind: experiment\nname: thm22-boundary\nseed: 1\ngrain: {dimension: 1, shape: cube, alpha: 1.5, r0: 1}\n"
       "phi: \"rectangle:0,1\"\ngamma: 0.5\nlambdas: [32, 64, 128, 256]\nreplications: 2000\n"
       "subordinator: identity\nnodes_per_unit: 4\n"},
      {"thm41-exponential",
       "kind: experiment\nname: thm41-exponential\nseed: 1\ngrain: {dimension: 1, shape: cube, alpha: 1.5, r0: 1}\n"
       "phi: \"rectangle:0,1\"\ngamma: 1\nlambdas: [32, 64, 128, 256]\nreplications: 1000\n"
       "subordinator: \"exp:0.5\"\nnodes_per_unit: 4\n"},
      {"cor41-boolean",
       "kind: boolean\nname: cor41-boolean\nseed: 1\ngrain: {dimension: 1, shape: cube, alpha: 1.5, r0: 1}\n"
       "set: \"rectangle:0,1\"\ngamma: 0\nlambdas: [32, 64, 128, 256]\nreplications: 2000\nnodes_per_unit: 4\n"},
      {"cor51-burgers",
       "kind: burgers\nname: cor51-burgers\nseed: 1\ngrain: {dimension: 1, shape: cube, alpha: 1.5, r0: 1}\n"
       "kappa: 1\ntimes: [0.5, 1]\npoints: [0, 0.25]\ngamma: 1\nlambdas: [16, 32, 64, 128]\n"
       "replications: 200\nnodes_per_unit: 2\ntruncation: 8\n"},
      {"cor52-burgers-gamma0",
       "kind: burgers\nname: cor52-burgers-gamma0\nseed: 1\ngrain: {dimension: 1, shape: cube, alpha: 1.5, r0: 1}\n"
       "kappa: 1\ntimes: [0.5, 1]\npoints: [0, 0.25]\ngamma: 0\nlambdas: [1024, 2048, 4096, 8192, 16384]\n"
       "replications: 200\nnodes_per_unit: 1\ntruncation: 8\n"},
  };
  return p;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : presets()) out.push_back(name);
  return out;
}

std::string preset_text(const std::string& name) {
  const auto it = presets().find(name);
  if (it == presets().end()) throw ConfigError("unknown preset '" + name + "'");
  return it->second;
}

RunConfig preset(const std::string& name) { return parse_config(preset_text(name)); }

fs::path default_out_dir() {
  const char* env = std::getenv("GRAINFIELD_OUT");
  return env && *env ? fs::path(env) : fs::path("out");
}

// ---------------------------------------------------------------- commands

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

RunKind kind_for(const std::string& command) {
  if (command == "charlier-check") return RunKind::Charlier;
  if (command == "simulate" || command == "limit-test") return RunKind::Experiment;
  if (command == "boolean") return RunKind::Boolean;
  if (command == "burgers") return RunKind::Burgers;
  throw ConfigError("unknown command '" + command + "'");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json simulate_summary(const ReplicationSet& set) {
  json s;
  s["schema"] = "grainfield-simulation-v1";
  s["name"] = set.config.name;
  s["regime"] = to_string(set.regime.regime);
  s["H"] = set.regime.exponent;
  for (const auto& run : set.runs) {
    std::vector<double> x;
    for (const auto& r : run.samples) x.push_back(r.statistic);
    s["runs"].push_back({{"lambda", run.lambda},
                         {"M", run.intensity},
                         {"analytic_mean", run.analytic_mean},
                         {"mean_statistic", mean(x)},
                         {"variance_statistic", variance(x)}});
  }
  return s;
}

}  // namespace

CommandResult run_command(const CommandOptions& options) {
  const auto t0 = Clock::now();
  const RunKind kind = kind_for(options.command);
  RunConfig config;
  if (!options.preset.empty()) {
    if (!options.config_path.empty()) throw ConfigError("give either a config file or a preset");
    config = preset(options.preset);
  } else if (!options.config_path.empty()) {
    config = load_config(options.config_path, kind);
  } else {
    config = parse_config("", kind);
  }
  if (config.kind != kind) {
    throw ConfigError("command '" + options.command + "' needs a config of kind " + to_string(kind) + ", got " +
                      to_string(config.kind));
  }
  if (options.seed) config.set_seed(*options.seed);
  if (options.replications) config.set_replications(*options.replications);
  config.validate();
  if (options.command == "limit-test") config.experiment.validate(true);
  if (options.threads < 1) throw ConfigError("threads must be >= 1");

  const fs::path out_dir = options.out_dir ? *options.out_dir : default_out_dir();
  CommandResult result;
  result.run_dir = out_dir / config.name();
  fs::create_directories(result.run_dir);
  const auto t_parse = seconds_since(t0);

  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("config.yaml", serialize_config(config));
  const auto t1 = Clock::now();
  bool pass = true;
  switch (kind) {
    case RunKind::Charlier: {
      const auto v = charlier_check(config.charlier, options.inject_fault);
      result.verdict = v.to_json();
      pass = v.pass();
      files.emplace_back("charlier.json", dump(result.verdict));
      break;
    }
    case RunKind::Experiment: {
      const auto set = run_replications(config.experiment, options.threads, options.cache_fields);
      files.emplace_back("samples.csv", samples_csv(set));
      if (options.command == "simulate") {
        files.emplace_back("summary.json", dump(simulate_summary(set)));
      } else {
        const auto v = regime_report(set);
        result.verdict = v.to_json();
        pass = v.pass();
        files.emplace_back("verdict.json", dump(result.verdict));
      }
      break;
    }
    case RunKind::Boolean: {
      const auto e = boolean_limit_experiment(config.experiment, options.threads, options.cache_fields);
      auto v = e.verdict;
      v.details["prefactor"] = v.details.value("prefactor_estimate", 0.0);
      result.verdict = v.to_json();
      pass = v.pass();
      files.emplace_back("samples.csv", samples_csv(e.set));
      files.emplace_back("verdict.json", dump(result.verdict));
      break;
    }
    case RunKind::Burgers: {
      const auto e = burgers_scaling_experiment(config.burgers, options.threads, options.cache_fields);
      result.verdict = e.verdict.to_json();
      pass = e.verdict.pass();
      files.emplace_back("velocity.csv", velocity_csv(e));
      files.emplace_back("verdict.json", dump(result.verdict));
      break;
    }
  }
  const auto t_run = seconds_since(t1);
  const auto t2 = Clock::now();

  json m;
  m["schema"] = "grainfield-manifest-v1";
  m["command"] = options.command;
  m["name"] = config.name();
  m["kind"] = to_string(config.kind);
  m["config_hash"] = config_hash(config);
  m["seed"] = config.seed();
  m["threads"] = options.threads;
  m["fault_injected"] = options.inject_fault;
  m["defaults_applied"] = config.defaulted;
  m["versions"] = {{"grainfield", kGrainfieldVersion},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                   {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000)}};
  m["pass"] = pass;
  m["outputs"] = json::array();
  for (const auto& [file, text] : files) {
    write_text(result.run_dir / file, text);
    m["outputs"].push_back({{"file", file}, {"sha256", sha256_hex(text)}, {"bytes", text.size()}});
  }
  m["timings"] = {{"total_seconds", seconds_since(t0)},
                  {"phases", {{"parse", t_parse}, {"run", t_run}, {"write", seconds_since(t2)}}}};
  write_text(result.run_dir / "manifest.json", dump(m));
  result.manifest = m;
  result.exit_code = pass ? 0 : 1;
  return result;
}

// ------------------------------------------------------------------ report

namespace {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  }
};

Csv read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  Csv csv;
  std::string line;
  const auto split = [](std::string l) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (std::getline(in, line)) csv.header = split(line);
  while (std::getline(in, line))
    if (!line.empty() && line != "\r") csv.rows.push_back(split(line));
  return csv;
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  }
}

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

json cmd_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("report directory " + dir.string() + " does not exist");
  std::vector<fs::path> runs;
  if (fs::exists(dir / "manifest.json")) {
    runs.push_back(dir);
  } else {
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory()) subdirs.push_back(e.path());
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& s : subdirs) {
      if (fs::exists(s / "manifest.json")) runs.push_back(s);
      else if (!fs::is_empty(s)) throw ConfigError("run directory " + s.string() + " has no manifest");
    }
  }

  struct Entry {
    json summary;
    fs::path path;
  };
  std::vector<Entry> entries;
  for (const auto& r : runs) {
    const json m = read_json(r / "manifest.json");
    if (m.value("schema", "") != "grainfield-manifest-v1") throw IntegrityError(r.string() + ": unknown manifest schema");
    for (const auto& o : m.at("outputs")) {
      const fs::path f = r / o.at("file").get<std::string>();
      if (!fs::exists(f)) throw IntegrityError(f.string() + ": listed output is missing");
      if (sha256_file(f) != o.at("sha256").get<std::string>()) throw IntegrityError(f.string() + ": hash mismatch");
    }
    json s;
    s["name"] = m.at("name");
    s["command"] = m.at("command");
    s["config_hash"] = m.at("config_hash");
    s["seed"] = m.at("seed");
    s["pass"] = m.at("pass");
    s["run_dir"] = fs::relative(r, dir).generic_string();
    for (const char* vf : {"verdict.json", "charlier.json"})
      if (fs::exists(r / vf)) {
        const json v = read_json(r / vf);
        for (const auto& c : v.at("checks")) s["checks"][c.at("name").get<std::string>()] = c;
      }
    entries.push_back({s, r});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    const auto ka = std::make_pair(a.summary["config_hash"].get<std::string>(), a.summary["name"].get<std::string>());
    const auto kb = std::make_pair(b.summary["config_hash"].get<std::string>(), b.summary["name"].get<std::string>());
    return ka < kb;
  });

  std::ostringstream loglog, cf, hist;
  loglog << "run,series,x,y\r\n";
  cf << "run,theta,empirical_re,empirical_im,target_re,target_im\r\n";
  hist << "run,lambda,bin_lo,bin_hi,count\r\n";
  json summary;
  summary["schema"] = "grainfield-summary-v1";
  summary["runs"] = json::array();
  for (const auto& e : entries) {
    const std::string name = e.summary["name"];
    summary["runs"].push_back(e.summary);
    if (fs::exists(e.path / "samples.csv")) {
      const Csv csv = read_csv(e.path / "samples.csv");
      const int cl = csv.column("lambda"), cs = csv.column("statistic");
      std::map<double, std::vector<double>> by_lambda;
      for (const auto& row : csv.rows) by_lambda[std::stod(row.at(cl))].push_back(std::stod(row.at(cs)));
      for (const auto& [lambda, x] : by_lambda) {
        loglog << name << ",variance_statistic," << num(lambda) << ',' << num(variance(x)) << "\r\n";
        std::vector<double> a;
        for (double v : x) a.push_back(std::abs(v));
        loglog << name << ",median_abs_statistic," << num(lambda) << ',' << num(median(a)) << "\r\n";
      }
      if (!by_lambda.empty()) {
        const auto& [lambda, x] = *by_lambda.rbegin();
        const double lo = quantile(x, 0.01), hi = quantile(x, 0.99);
        const int bins = 40;
        std::vector<long> counts(bins, 0);
        for (double v : x)
          if (v >= lo && v <= hi && hi > lo) counts[std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins))]++;
        for (int b = 0; b < bins; ++b) {
          hist << name << ',' << num(lambda) << ',' << num(lo + (hi - lo) * b / bins) << ','
               << num(lo + (hi - lo) * (b + 1) / bins) << ',' << counts[b] << "\r\n";
        }
      }
    }
    if (fs::exists(e.path / "velocity.csv")) {
      const Csv csv = read_csv(e.path / "velocity.csv");
      const int cl = csv.column("lambda"), ct = csv.column("t"), cx = csv.column("x"), cv = csv.column("v");
      std::map<std::tuple<double, double, double>, std::vector<double>> groups;
      for (const auto& row : csv.rows) {
        groups[{std::stod(row.at(ct)), std::stod(row.at(cx)), std::stod(row.at(cl))}].push_back(
            std::abs(std::stod(row.at(cv))));
      }
      for (const auto& [key, a] : groups) {
        const auto& [t, x, lambda] = key;
        loglog << name << ",median_abs_v[t=" << num(t) << ";x=" << num(x) << "]," << num(lambda) << ','
               << num(median(a)) << "\r\n";
      }
    }
    if (fs::exists(e.path / "verdict.json")) {
      const json v = read_json(e.path / "verdict.json");
      const auto& d = v.at("details");
      if (d.contains("cf_theta")) {
        for (std::size_t i = 0; i < d["cf_theta"].size(); ++i) {
          cf << name << ',' << num(d["cf_theta"][i]) << ',' << num(d["cf_empirical_re"][i]) << ','
             << num(d["cf_empirical_im"][i]) << ',' << num(d["cf_target_re"][i]) << ','
             << num(d["cf_target_im"][i]) << "\r\n";
        }
      }
    }
  }
  write_text(dir / "summary.json", dump(summary));
  write_text(dir / "plot_loglog.csv", loglog.str());
  write_text(dir / "plot_cf.csv", cf.str());
  write_text(dir / "plot_hist.csv", hist.str());
  return summary;
}

}  // namespace grainfield
