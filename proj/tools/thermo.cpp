// thermo: batch driver for thermostat flows on the 2-torus.
//
//   thermo <command> --config FILE [--out DIR] [--workers N] [--seed S] [--tol X]
//
// Commands: simulate, conjugate-scan, verify, hopf, gauge.

#include <CLI11.hpp>

#include <iostream>

#include "thermo/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Thermostat flows on the 2-torus: simulation, conjugate points, Hopf limits, gauge, identities"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  int workers = 1;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;

  for (const auto& [name, _] : thermo::commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "TOML experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--workers", workers, "worker threads")->check(CLI::Range(1, 1024))->capture_default_str();
    sub->add_option("--seed", seed, "seed for sampled nodes and random initial conditions");
    sub->add_option("--tol", tol, "integration tolerance for every command")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? thermo::kExitOk : thermo::kExitConfig;
  }

  thermo::ExperimentConfig cfg;
  try {
    cfg = thermo::load_config(config_path);
    if (seed) cfg.override_seed(*seed);
    if (tol) cfg.override_tolerance(*tol);
  } catch (const thermo::ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return thermo::kExitConfig;
  }

  thermo::RunContext ctx;
  ctx.out = out_dir;
  ctx.workers = workers;
  const std::string command = app.get_subcommands().front()->get_name();
  return thermo::run_command(command, cfg, ctx);
}
