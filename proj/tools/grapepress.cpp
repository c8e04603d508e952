#include <iostream>

#include "CLI11.hpp"

#include "grapepress/cli.hpp"

using namespace grapepress;

int main(int argc, char** argv) {
  CLI::App app{"Grape press scheduling: calibration, value tables, simulation and the session service"};
  app.set_version_flag("--version", std::string(cli::kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "base seed (overrides the config)");
  app.add_option("--out", out, "output directory (overrides the config)");

  struct Overrides {
    std::optional<std::string> totals, deliveries, model, tables, grid, static_dir, event_log, host;
    std::vector<std::string> scenarios, policies;
    std::optional<int> episodes, port;
    std::optional<unsigned> threads;
    bool timing = false;
  } o;

  auto* calibrate = app.add_subcommand("calibrate", "fit an arrival model to delivery logs");
  calibrate->add_option("--totals", o.totals, "CSV of tonnes per variety per day");
  calibrate->add_option("--deliveries", o.deliveries, "CSV of timestamped deliveries");

  auto* build = app.add_subcommand("build-tables", "compute the value table of each press type");
  build->add_option("--model", o.model, "arrival model file");
  build->add_option("--scenario", o.scenarios, "build for this scenario instead of the model itself");

  auto* simulate = app.add_subcommand("simulate", "simulate days under the chosen policies");
  simulate->add_option("--model", o.model, "reference arrival model file");
  simulate->add_option("--tables", o.tables, "directory of prebuilt tables");
  simulate->add_option("--scenario", o.scenarios, "scenario ids, e.g. vR_fR_i1");
  simulate->add_option("--policy", o.policies, "dp and/or greedy");
  simulate->add_option("--episodes", o.episodes, "episodes per scenario and policy");
  simulate->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  simulate->add_flag("--timing", o.timing, "record per-episode runtime");

  auto* evaluate = app.add_subcommand("evaluate", "paired dp/greedy comparison over a scenario grid");
  evaluate->add_option("--model", o.model, "reference arrival model file");
  evaluate->add_option("--grid", o.grid, "consistent, inconsistent or reduced");
  evaluate->add_option("--episodes", o.episodes, "episodes per cell");
  evaluate->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  evaluate->add_flag("--timing", o.timing, "record per-episode runtime");

  auto* serve = app.add_subcommand("serve", "run the session service over HTTP");
  serve->add_option("--model", o.model, "reference arrival model file");
  serve->add_option("--host", o.host, "bind address");
  serve->add_option("--port", o.port, "TCP port");
  serve->add_option("--static", o.static_dir, "directory served at /");
  serve->add_option("--event-log", o.event_log, "directory for per-session event logs");

  CLI11_PARSE(app, argc, argv);

  try {
    auto config = config_path.empty() ? cli::RunConfig{} : cli::RunConfig::load(config_path);
    if (seed) config.seed = *seed;
    if (out) config.out = *out;
    if (o.totals) config.totals_log = *o.totals;
    if (o.deliveries) config.delivery_log = *o.deliveries;
    if (o.model) config.model = *o.model;
    if (o.tables) config.tables_dir = *o.tables;
    if (o.grid) config.grid = *o.grid;
    if (o.static_dir) config.static_dir = *o.static_dir;
    if (o.event_log) config.event_log_dir = *o.event_log;
    if (o.host) config.host = *o.host;
    if (!o.scenarios.empty()) config.scenarios = o.scenarios;
    if (!o.policies.empty()) config.policies = o.policies;
    if (o.episodes) config.episodes = *o.episodes;
    if (o.port) config.port = *o.port;
    if (o.threads) config.threads = *o.threads;
    if (o.timing) config.timing = true;

    if (*calibrate) cli::cmd_calibrate(config, std::cout);
    else if (*build) cli::cmd_build_tables(config, std::cout);
    else if (*simulate) cli::cmd_simulate(config, std::cout);
    else if (*evaluate) cli::cmd_evaluate(config, std::cout);
    else if (*serve) cli::cmd_serve(config, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
