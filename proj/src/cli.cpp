#include "grapepress/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "httplib.h"

#include "grapepress/service.hpp"

namespace grapepress::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

PressType parse_press_name(const std::string& name) {
  if (name == "I") return kTypeI;
  if (name == "II") return kTypeII;
  throw ConfigError("unknown press type '" + name + "' (use \"I\", \"II\" or an object)");
}

Fleet parse_fleet(const json& j) {
  if (!j.is_array()) throw ConfigError("fleet must be a list");
  Fleet fleet;
  for (const auto& item : j) {
    if (item.is_string()) {
      fleet.push_back(parse_press_name(item.get<std::string>()));
    } else if (item.is_object()) {
      PressType type{item.at("capacity").get<int>(), item.at("processing").get<int>()};
      validate(type);
      const int count = item.value("count", 1);
      if (count < 1) throw ConfigError("fleet entry count must be positive");
      for (int i = 0; i < count; ++i) fleet.push_back(type);
    } else {
      throw ConfigError("fleet entries must be strings or objects");
    }
  }
  return fleet;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return to_hex(fnv1a(ss.str()));
}

fs::path prepare_out(const RunConfig& config) {
  fs::path out(config.out);
  fs::create_directories(out);
  return out;
}

std::ofstream open_artifact(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  return os;
}

std::string provenance(const std::string& command, const RunConfig& config, const ArrivalModel& reference) {
  std::string line = "# grapepress " + std::string(kVersion) + " " + command +
                     " seed=" + std::to_string(config.seed) + " reference_model=" + reference.hash();
  return line + "\n";
}

// Loads the prebuilt tables for `fleet` and checks they were built from `model`.
TableSet load_tables(const std::string& dir, const Fleet& fleet, const ArrivalModel& model) {
  std::vector<ValueTable> tables;
  std::vector<PressType> seen;
  for (const auto& type : fleet) {
    if (std::find(seen.begin(), seen.end(), type) != seen.end()) continue;
    seen.push_back(type);
    const auto path = fs::path(dir) / table_file_name(type);
    auto table = load_table(path.string());
    if (table.model_hash() != model.hash())
      throw ConfigError("table " + path.string() + " was built from model " + table.model_hash() +
                        " but the scenario model hashes to " + model.hash());
    tables.push_back(std::move(table));
  }
  return TableSet(std::move(tables));
}

std::vector<PressType> distinct_types(const Fleet& fleet) {
  std::vector<PressType> types;
  for (const auto& t : fleet)
    if (std::find(types.begin(), types.end(), t) == types.end()) types.push_back(t);
  return types;
}

PolicyKind parse_policy(const std::string& name) {
  if (name == "dp") return PolicyKind::kDynamicProgramming;
  if (name == "greedy") return PolicyKind::kGreedy;
  throw ConfigError("unknown policy '" + name + "' (use dp or greedy)");
}

}  // namespace

std::string table_file_name(const PressType& type) { return "table_" + type.name() + ".txt"; }

RunConfig RunConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "totals_log") c.totals_log = value.get<std::string>();
      else if (key == "delivery_log") c.delivery_log = value.get<std::string>();
      else if (key == "model") c.model = value.get<std::string>();
      else if (key == "tables_dir") c.tables_dir = value.get<std::string>();
      else if (key == "scenarios") c.scenarios = value.get<std::vector<std::string>>();
      else if (key == "policies") c.policies = value.get<std::vector<std::string>>();
      else if (key == "grid") c.grid = value.get<std::string>();
      else if (key == "episodes") c.episodes = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "fleet") c.fleet = parse_fleet(value);
      else if (key == "threads") c.threads = value.get<unsigned>();
      else if (key == "timing") c.timing = value.get<bool>();
      else if (key == "out") c.out = value.get<std::string>();
      else if (key == "host") c.host = value.get<std::string>();
      else if (key == "port") c.port = value.get<int>();
      else if (key == "static_dir") c.static_dir = value.get<std::string>();
      else if (key == "event_log_dir") c.event_log_dir = value.get<std::string>();
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    } catch (const DomainError& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

void validate(const RunConfig& c, const std::string& command) {
  auto require_file = [](const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string(what) + " is not set");
    if (!fs::is_regular_file(path)) throw ConfigError(std::string(what) + " not found: " + path);
  };
  if (c.fleet.empty()) throw ConfigError("fleet is empty");
  if (c.episodes < 1) throw ConfigError("episodes must be positive");
  if (!c.model.empty()) require_file(c.model, "model");
  if (command == "calibrate") {
    require_file(c.delivery_log, "delivery_log");
    if (!c.totals_log.empty()) require_file(c.totals_log, "totals_log");
  }
  if (command == "simulate") {
    if (c.scenarios.empty()) throw ConfigError("no scenarios selected");
    for (const auto& s : c.scenarios) ScenarioSpec::parse(s);
    if (c.policies.empty()) throw ConfigError("no policies selected");
    for (const auto& p : c.policies) parse_policy(p);
    if (!c.tables_dir.empty()) {
      if (!fs::is_directory(c.tables_dir)) throw ConfigError("tables_dir not found: " + c.tables_dir);
      if (c.scenarios.size() != 1) throw ConfigError("prebuilt tables fit exactly one scenario");
    }
  }
  if (command == "evaluate" && c.grid != "consistent" && c.grid != "inconsistent" && c.grid != "reduced")
    throw ConfigError("grid must be consistent, inconsistent or reduced");
  if (command == "serve") {
    if (c.port < 0 || c.port > 65535) throw ConfigError("port out of range");
    if (!c.static_dir.empty() && !fs::is_directory(c.static_dir))
      throw ConfigError("static_dir not found: " + c.static_dir);
  }
}

ArrivalModel reference_model(const RunConfig& config) {
  return config.model.empty() ? synthetic_reference_model() : load_model(config.model);
}

void cmd_calibrate(const RunConfig& config, std::ostream& log) {
  validate(config, "calibrate");
  const auto deliveries = load_delivery_log(config.delivery_log);
  const VarietyTotals totals = config.totals_log.empty() ? VarietyTotals{} : load_variety_totals(config.totals_log);
  const auto model = calibrate(totals, deliveries);

  const auto out = prepare_out(config) / "model.txt";
  auto os = open_artifact(out);
  os << "# grapepress " << kVersion << " calibrate deliveries=" << file_hash(config.delivery_log);
  if (!config.totals_log.empty()) os << " totals=" << file_hash(config.totals_log);
  os << "\n";
  write_model(os, model);

  log << "date,weekday,first,last,deliveries,mean_gap_min\n";
  for (const auto& d : log_diagnostics(deliveries)) {
    char gap[32] = "NA";
    if (d.mean_gap_minutes) std::snprintf(gap, sizeof gap, "%.2f", *d.mean_gap_minutes);
    log << format_date(d.day) << ',' << d.weekday << ',' << format_clock(d.first_seconds) << ','
        << format_clock(d.last_seconds) << ',' << d.deliveries << ',' << gap << '\n';
  }
  log << "model " << model.hash() << " (" << model.total_intensity() << " expected deliveries/day) -> "
      << out.string() << '\n';
}

void cmd_build_tables(const RunConfig& config, std::ostream& log) {
  validate(config, "build-tables");
  ArrivalModel model = reference_model(config);
  if (config.scenarios.size() == 1 && config.scenarios.front() != "vR_fR_i1")
    model = build_scenario(ScenarioSpec::parse(config.scenarios.front()), model);
  const auto out = prepare_out(config);
  for (const auto& type : distinct_types(config.fleet)) {
    const auto table = build_table(type, model);
    const auto path = out / table_file_name(type);
    auto os = open_artifact(path);
    os << "# grapepress " << kVersion << " build-tables model=" << model.hash() << "\n";
    write_table(os, table);
    log << "press type " << type.name() << ": V(0, empty) = " << table.lookup(0, PressState{0, 0, 0, type})
        << " -> " << path.string() << '\n';
  }
}

void cmd_simulate(const RunConfig& config, std::ostream& log) {
  validate(config, "simulate");
  const ArrivalModel reference = reference_model(config);
  std::vector<EpisodeResult> episodes;
  for (const auto& id : config.scenarios) {
    const auto spec = ScenarioSpec::parse(id);
    const auto model = build_scenario(spec, reference);
    const TableSet tables = config.tables_dir.empty() ? build_tables(distinct_types(config.fleet), model)
                                                      : load_tables(config.tables_dir, config.fleet, model);
    std::vector<EpisodeResult> cell(config.policies.size() * static_cast<std::size_t>(config.episodes));
    parallel_for(cell.size(), config.threads, [&](std::size_t k) {
      const int rep = static_cast<int>(k % static_cast<std::size_t>(config.episodes));
      EpisodeConfig ec;
      ec.policy = parse_policy(config.policies[k / static_cast<std::size_t>(config.episodes)]);
      ec.tables = &tables;
      ec.record_timing = config.timing;
      cell[k] = simulate_episode(model, config.fleet, ec, episode_seed(config.seed, rep));
      cell[k].scenario = id;
    });
    episodes.insert(episodes.end(), cell.begin(), cell.end());
  }

  const auto out = prepare_out(config);
  {
    auto os = open_artifact(out / "episodes.csv");
    os << provenance("simulate", config, reference);
    write_episode_csv(os, episodes);
  }
  {
    auto os = open_artifact(out / "strategy.csv");
    os << provenance("simulate", config, reference);
    os << "scenario_id,policy,seed,interval,press_id,truck_id,arrival,variety,tonnes\n";
    for (const auto& e : episodes)
      for (const auto& r : e.strategy)
        os << e.scenario << ',' << e.policy << ',' << e.seed << ',' << r.interval << ',' << r.press << ','
           << r.truck << ',' << r.arrival << ',' << r.variety << ',' << r.tonnes << '\n';
  }
  for (const auto& e : episodes)
    log << e.scenario << ' ' << e.policy << " seed " << e.seed << ": payoff " << e.payoff << ", losses "
        << e.losses.total() << '\n';
  log << episodes.size() << " episodes -> " << (out / "episodes.csv").string() << '\n';
}

void cmd_evaluate(const RunConfig& config, std::ostream& log) {
  validate(config, "evaluate");
  const ArrivalModel reference = reference_model(config);
  std::vector<GridCell> cells = config.grid == "consistent"     ? consistent_grid()
                                : config.grid == "inconsistent" ? inconsistent_grid()
                                                                : reduced_inconsistent_grid();
  GridOptions opts;
  opts.episodes_per_cell = config.episodes;
  opts.base_seed = config.seed;
  opts.fleet = config.fleet;
  opts.threads = config.threads;
  opts.record_timing = config.timing;
  const auto result = run_grid(cells, reference, opts);

  const auto out = prepare_out(config);
  {
    auto os = open_artifact(out / "episodes.csv");
    os << provenance("evaluate " + config.grid, config, reference);
    write_episode_csv(os, result.episodes);
  }
  {
    auto os = open_artifact(out / "cells.csv");
    os << provenance("evaluate " + config.grid, config, reference);
    write_cell_csv(os, result.cells);
  }
  int wins = 0;
  for (const auto& c : result.cells) {
    if (c.mean_difference >= 0) ++wins;
    char line[256];
    std::snprintf(line, sizeof line, "%-28s dp %9.2f  greedy %9.2f  diff %+9.2f (se %.2f)\n", c.cell.c_str(),
                  c.dp.mean_payoff, c.greedy.mean_payoff, c.mean_difference, c.se_difference);
    log << line;
  }
  char summary[160];
  std::snprintf(summary, sizeof summary, "%zu cells, dp mean %.2f, greedy mean %.2f, dp >= greedy in %d cells\n",
                result.cells.size(), result.dp_mean, result.greedy_mean, wins);
  log << summary;
}

void cmd_serve(const RunConfig& config, std::ostream& log) {
  validate(config, "serve");
  service::ServiceConfig sc;
  sc.reference = reference_model(config);
  sc.fleet = config.fleet;
  sc.event_log_dir = config.event_log_dir;
  service::SessionService svc(std::move(sc));
  httplib::Server server;
  service::register_routes(server, svc, config.static_dir);
  log << "grapepress " << kVersion << " serving on http://" << config.host << ':' << config.port << std::endl;
  if (!server.listen(config.host, config.port))
    throw ConfigError("cannot listen on " + config.host + ":" + std::to_string(config.port));
}

}  // namespace grapepress::cli
