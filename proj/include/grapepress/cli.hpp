#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "grapepress/simulator.hpp"

namespace grapepress::cli {

inline constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // calibrate
  std::string totals_log;
  std::string delivery_log;
  // reference arrival model; the built-in synthetic weekday when empty
  std::string model;
  // directory holding prebuilt value tables (simulate)
  std::string tables_dir;
  std::vector<std::string> scenarios{"vR_fR_i1"};
  std::vector<std::string> policies{"dp", "greedy"};
  std::string grid = "consistent";  // consistent | inconsistent | reduced
  int episodes = 4;
  std::uint64_t seed = 1;
  Fleet fleet = default_fleet();
  unsigned threads = 0;
  bool timing = false;
  std::string out = "out";
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  std::string event_log_dir;

  // Unknown keys are rejected. A fleet is a list of press type names ("I",
  // "II") or {"capacity", "processing", "count"} objects.
  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig load(const std::string& path);
};

// Throws ConfigError if a referenced file is missing or a field is out of range.
void validate(const RunConfig& config, const std::string& command);

ArrivalModel reference_model(const RunConfig& config);

// Each command writes its artifacts under config.out and a short report to `log`.
void cmd_calibrate(const RunConfig& config, std::ostream& log);
void cmd_build_tables(const RunConfig& config, std::ostream& log);
void cmd_simulate(const RunConfig& config, std::ostream& log);
void cmd_evaluate(const RunConfig& config, std::ostream& log);
void cmd_serve(const RunConfig& config, std::ostream& log);

std::string table_file_name(const PressType& type);

}  // namespace grapepress::cli
