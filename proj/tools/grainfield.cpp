#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "grainfield/cli.hpp"
#include "grainfield/errors.hpp"

namespace gf = grainfield;

namespace {

// 0 pass, 1 failed verdict, 2 config or parse error, 3 integrity error, 4 numerical or other error.
template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const gf::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const gf::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const gf::IntegrityError& e) {
    std::cerr << "integrity error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

void print_checks(const nlohmann::json& verdict) {
  if (!verdict.contains("checks")) return;
  for (const auto& c : verdict["checks"]) {
    std::cout << (c.value("pass", false) ? "  ok    " : "  FAIL  ") << c.value("name", "") << " = "
              << c["value"].dump() << " in [" << c["lower"].dump() << ", " << c["upper"].dump() << "]"
              << (c.value("gating", true) ? "" : " (info)") << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grainfield: random grain model simulation and scaling-limit checks"};
  app.set_version_flag("--version", std::string(gf::kGrainfieldVersion));
  app.require_subcommand(1);

  gf::CommandOptions opts;
  std::string seed_text, out_dir, cache_dir;
  int replications = 0;

  const auto add_run = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config,--config,-c", opts.config_path, "YAML config file (defaults apply when omitted)");
    sub->add_option("--preset,-p", opts.preset, "named preset instead of a config file");
    sub->add_option("--seed", seed_text, "override the master seed");
    sub->add_option("--replications,-r", replications, "override the replication count")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir,-o", out_dir, "output root (default $GRAINFIELD_OUT or ./out)");
    sub->add_option("--threads,-j", opts.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--cache-fields", cache_dir, "directory for cached field samples");
    sub->add_flag("--inject-fault", opts.inject_fault, "perturb one coefficient (negative control)");
    return sub;
  };
  for (const auto& [name, help] : std::initializer_list<std::pair<const char*, const char*>>{
           {"charlier-check", "verify Charlier polynomial identities and coefficients"},
           {"simulate", "simulate the normalized statistic across lambda"},
           {"limit-test", "simulate and test against the limit law"},
           {"boolean", "Boolean model volume limit"},
           {"burgers", "Burgers velocity scaling"}}) {
    add_run(name, help);
  }

  std::string report_dir;
  auto* report = app.add_subcommand("report", "verify manifests and emit summary plus plot data");
  report->add_option("dir", report_dir, "run directory or output root")->required();

  std::string show;
  auto* presets = app.add_subcommand("presets", "list presets or print one as YAML");
  presets->add_option("name", show, "preset to print");

  CLI11_PARSE(app, argc, argv);
  auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();

  if (command == "presets") {
    return guarded([&] {
      if (show.empty()) {
        for (const auto& n : gf::preset_names()) std::cout << n << "\n";
      } else {
        std::cout << gf::preset_text(show);
      }
      return 0;
    });
  }
  if (command == "report") {
    return guarded([&] {
      const auto summary = gf::cmd_report(report_dir);
      std::cout << "report: " << summary["runs"].size() << " run(s) verified, summary in " << report_dir << "\n";
      return 0;
    });
  }

  return guarded([&] {
    opts.command = command;
    if (!seed_text.empty()) {
      std::size_t used = 0;
      const auto s = std::stoull(seed_text, &used);
      if (used != seed_text.size()) throw gf::ConfigError("--seed must be a nonnegative integer");
      opts.seed = s;
    }
    if (replications > 0) opts.replications = replications;
    if (!out_dir.empty()) opts.out_dir = out_dir;
    opts.cache_fields = cache_dir;
    const auto result = gf::run_command(opts);
    std::cout << command << " " << result.manifest["name"].get<std::string>() << ": "
              << (result.exit_code == 0 ? "PASS" : "FAIL") << " (" << result.run_dir.string() << ")\n";
    print_checks(result.verdict);
    return result.exit_code;
  });
}
