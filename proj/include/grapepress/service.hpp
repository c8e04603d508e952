#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "grapepress/engine.hpp"
#include "grapepress/simulator.hpp"

namespace httplib {
class Server;
}

namespace grapepress::service {

// A rejected request. `rule` names the violated rule (e.g. "overfill").
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string rule, const std::string& message)
      : std::runtime_error(message), status_(status), rule_(std::move(rule)) {}

  int status() const { return status_; }
  const std::string& rule() const { return rule_; }
  nlohmann::json to_json() const;

 private:
  int status_;
  std::string rule_;
};

enum class Mode { kManual, kAssisted };

// One simulated day driven interval by interval by an untrusted client.
class Session {
 public:
  Session(std::string id, ScenarioSpec spec, Mode mode, std::uint64_t seed, const ArrivalModel& model,
          std::shared_ptr<const TableSet> tables, Fleet fleet, EngineOptions engine);

  const std::string& id() const { return id_; }
  int interval() const { return t_; }
  bool finished() const { return t_ >= horizon_; }
  Mode mode() const { return mode_; }

  // Press as it looks now, including what was poured in this interval.
  PressState observed(std::size_t press) const;
  const QueueState& queue() const { return queue_; }
  double payoff() const { return payoff_; }
  const LossLedger& losses() const { return losses_; }
  int cap_used() const { return cap_used_; }

  // Validates and applies one unload; throws ApiError naming the rule.
  StrategyRow assign(int press, TruckId truck, int tonnes);
  // Maximizing unload instructions for the rest of this interval.
  std::vector<StrategyRow> hint() const;
  void advance();
  EpisodeResult results() const;

  nlohmann::json state_json() const;

 private:
  std::string id_;
  ScenarioSpec spec_;
  Mode mode_;
  std::uint64_t seed_;
  std::shared_ptr<const TableSet> tables_;
  Fleet fleet_;
  EngineOptions engine_;
  DayArrivals arrivals_;
  int horizon_;

  int t_ = 0;
  std::vector<PressState> start_;
  std::vector<Control> committed_;
  QueueState queue_;
  std::set<TruckId> expired_;
  TruckId next_id_ = 1;
  int cap_used_ = 0;
  double payoff_ = 0.0;
  LossLedger losses_;
  std::vector<StrategyRow> strategy_;
  int delivered_ = 0;
  int pressed_ = 0;
  int completed_ = 0;
  // Tie-breaking stream for hints; a hint is cached until the state changes.
  mutable Rng hint_rng_;
  mutable std::optional<std::vector<StrategyRow>> hint_cache_;

  void admit_arrivals();
};

struct ServiceConfig {
  ArrivalModel reference = synthetic_reference_model();
  Fleet fleet = default_fleet();
  EngineOptions engine;
  // When set, every request that changes a session is appended as a JSON line
  // to <dir>/<session id>.jsonl.
  std::string event_log_dir;
};

// JSON-in/JSON-out session API; transport-independent.
class SessionService {
 public:
  explicit SessionService(ServiceConfig config);

  nlohmann::json create_session(const nlohmann::json& body);
  nlohmann::json get_state(const std::string& id);
  nlohmann::json post_assignment(const std::string& id, const nlohmann::json& body);
  nlohmann::json get_hint(const std::string& id);
  nlohmann::json advance(const std::string& id);
  nlohmann::json get_results(const std::string& id);

 private:
  struct Entry {
    std::mutex mutex;
    std::unique_ptr<Session> session;
  };

  std::shared_ptr<Entry> find(const std::string& id);
  std::shared_ptr<const TableSet> tables_for(const ScenarioSpec& spec, const ArrivalModel& model);
  void log_event(const std::string& id, const nlohmann::json& event);

  ServiceConfig config_;
  std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_session_ = 1;
  std::mutex tables_mutex_;
  std::map<std::string, std::shared_ptr<const TableSet>> tables_;
  std::mutex log_mutex_;
};

nlohmann::json to_json(const PressState& press, std::size_t id);
nlohmann::json to_json(const StrategyRow& row);
nlohmann::json to_json(const LossLedger& losses);
nlohmann::json to_json(const EpisodeResult& result);

// Binds the HTTP routes; serves files from `static_dir` at / when non-empty.
void register_routes(httplib::Server& server, SessionService& service, const std::string& static_dir = "");

}  // namespace grapepress::service
