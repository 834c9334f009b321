// opme: command line front end for scenario runs, oracle diagnostics,
// config validation and parameter sweeps.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "opme/config.hpp"
#include "opme/experiment.hpp"
#include "opme/scenarios.hpp"

namespace {

std::vector<opme::Override> parse_sets(const std::vector<std::string>& sets) {
  std::vector<opme::Override> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw opme::ValidationError({"--set: expected key=value, got '" + s + "'"});
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

int report(const opme::ExperimentOutcome& out, const char* what) {
  for (const auto& e : out.errors) std::cerr << "error: " << e << "\n";
  std::cout << what << " -> " << out.directory.string() << " (exit " << out.exit_code << ")\n";
  return out.exit_code;
}

template <typename F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const opme::ValidationError& e) {
    for (const auto& v : e.violations()) std::cerr << "invalid: " << v << "\n";
    return opme::kExitValidation;
  } catch (const opme::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return opme::kExitValidation;
  } catch (const opme::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return opme::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return opme::kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimistic planning with minimax estimation for strategic agents"};
  app.set_version_flag("--version", std::string(opme::version_string()));
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::vector<std::string> sets;
  std::string param;

  auto* run = app.add_subcommand("run", "Run every seed of a config and write artifacts");
  run->add_option("config", config_path, "Scenario config (YAML)")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output", output_dir, "Output directory (overrides the config)");
  run->add_option("--set", sets, "Override a config key, e.g. run.episodes=50");

  auto* diag = app.add_subcommand("diagnose", "Compute the ground-truth oracles for a config");
  diag->add_option("config", config_path, "Scenario config (YAML)")->required()->check(CLI::ExistingFile);
  diag->add_option("-o,--output", output_dir, "Output directory (overrides the config)");
  diag->add_option("--set", sets, "Override a config key");

  auto* val = app.add_subcommand("validate", "Parse and check a config without running it");
  val->add_option("config", config_path, "Scenario config (YAML)")->required()->check(CLI::ExistingFile);

  auto* swp = app.add_subcommand("sweep", "Run a config once per value of one key");
  swp->add_option("config", config_path, "Scenario config (YAML)")->required()->check(CLI::ExistingFile);
  swp->add_option("--param", param, "key=v1,v2,...")->required();
  swp->add_option("-o,--output", output_dir, "Output directory (overrides the config)");

  app.add_subcommand("scenarios", "List the built-in scenario generators");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : opme::kExitValidation;
  }

  const std::optional<std::filesystem::path> out_dir =
      output_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(output_dir);

  if (app.got_subcommand("scenarios")) {
    for (const auto& name : opme::scenario_names()) std::cout << name << "\n";
    return 0;
  }
  if (app.got_subcommand("validate")) {
    const auto out = opme::validate_config(config_path);
    for (const auto& m : out.messages) (out.exit_code == 0 ? std::cout : std::cerr) << m << "\n";
    return out.exit_code;
  }
  if (app.got_subcommand("run")) {
    return guarded([&] {
      const auto cfg = opme::load_config(config_path, parse_sets(sets));
      return report(opme::run_experiment(cfg, out_dir), "run");
    });
  }
  if (app.got_subcommand("diagnose")) {
    return guarded([&] {
      const auto cfg = opme::load_config(config_path, parse_sets(sets));
      return report(opme::diagnose(cfg, out_dir), "diagnose");
    });
  }
  return guarded([&] {
    const auto [key, values] = opme::parse_sweep_param(param);
    return report(opme::sweep(config_path, key, values, out_dir), "sweep");
  });
}
