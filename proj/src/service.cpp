#include "grapepress/service.hpp"

#include <filesystem>
#include <fstream>

#include "httplib.h"

namespace grapepress::service {

using nlohmann::json;

namespace {

std::string mode_name(Mode m) { return m == Mode::kManual ? "manual" : "assisted"; }

Mode parse_mode(const std::string& text) {
  if (text == "manual") return Mode::kManual;
  if (text == "assisted") return Mode::kAssisted;
  throw ApiError(400, "invalid-request", "mode must be \"manual\" or \"assisted\", got \"" + text + "\"");
}

ApiError bad_request(const std::string& message) { return ApiError(400, "invalid-request", message); }

template <class T>
T field(const json& body, const char* name) {
  if (!body.is_object() || !body.contains(name)) throw bad_request(std::string("missing field \"") + name + "\"");
  try {
    return body.at(name).get<T>();
  } catch (const json::exception&) {
    throw bad_request(std::string("field \"") + name + "\" has the wrong type");
  }
}

}  // namespace

json ApiError::to_json() const {
  return json{{"code", status_}, {"rule", rule_}, {"message", what()}};
}

json to_json(const PressState& press, std::size_t id) {
  return json{{"press_id", id},
              {"type", press.type.name()},
              {"capacity", press.type.capacity},
              {"processing", press.type.processing},
              {"variety", press.variety},
              {"load", press.load},
              {"remaining", press.remaining},
              {"blocked", press.blocked()}};
}

json to_json(const StrategyRow& row) {
  return json{{"interval", row.interval}, {"press_id", row.press},     {"truck_id", row.truck},
              {"arrival", row.arrival},   {"variety", row.variety},    {"tonnes", row.tonnes}};
}

json to_json(const LossLedger& losses) {
  return json{{"degradation", losses.degradation},       {"rejection", losses.rejection},
              {"leftover", losses.leftover},             {"total", losses.total()},
              {"degraded_tonnes", losses.degraded_tonnes}, {"rejected_tonnes", losses.rejected_tonnes},
              {"leftover_tonnes", losses.leftover_tonnes}};
}

json to_json(const EpisodeResult& r) {
  json strategy = json::array();
  for (const auto& row : r.strategy) strategy.push_back(to_json(row));
  return json{{"scenario_id", r.scenario},
              {"policy", r.policy},
              {"seed", r.seed},
              {"payoff", r.payoff},
              {"losses", to_json(r.losses)},
              {"delivered_tonnes", r.delivered_tonnes},
              {"pressed_tonnes", r.pressed_tonnes},
              {"completed_tonnes", r.completed_tonnes},
              {"unfinished_tonnes", r.unfinished_tonnes},
              {"strategy", strategy}};
}

// ---------------------------------------------------------------------------

Session::Session(std::string id, ScenarioSpec spec, Mode mode, std::uint64_t seed, const ArrivalModel& model,
                 std::shared_ptr<const TableSet> tables, Fleet fleet, EngineOptions engine)
    : id_(std::move(id)),
      spec_(std::move(spec)),
      mode_(mode),
      seed_(seed),
      tables_(std::move(tables)),
      fleet_(std::move(fleet)),
      engine_(std::move(engine)),
      arrivals_(sample_day(model, seed)),
      horizon_(model.horizon),
      hint_rng_(derive_seed(seed, 1)) {
  if (fleet_.empty()) throw ScenarioError("fleet is empty");
  if (!tables_ || tables_->horizon() != horizon_) throw ScenarioError("value tables do not match the scenario");
  for (const auto& type : fleet_) {
    start_.push_back(PressState{0, 0, 0, type});
    tables_->for_type(type);
  }
  committed_.assign(fleet_.size(), Control::none());
  admit_arrivals();
}

void Session::admit_arrivals() {
  for (const auto& type : arrivals_[static_cast<std::size_t>(t_)]) {
    queue_.add(type, next_id_++);
    delivered_ += type.load;
  }
}

PressState Session::observed(std::size_t press) const {
  const auto& start = start_.at(press);
  if (start.blocked() || committed_[press].is_none()) return start;
  return fill(start, committed_[press]);
}

StrategyRow Session::assign(int press, TruckId truck_id, int tonnes) {
  if (finished()) throw ApiError(409, "day-over", "the day has ended; no interval is open");
  if (press < 0 || static_cast<std::size_t>(press) >= start_.size())
    throw ApiError(404, "unknown-press", "no press with id " + std::to_string(press));
  const Truck* truck = queue_.find(truck_id);
  if (!truck) {
    if (expired_.count(truck_id))
      throw ApiError(409, "truck-expired", "truck " + std::to_string(truck_id) + " waited too long and was rejected");
    throw ApiError(404, "unknown-truck", "no waiting truck with id " + std::to_string(truck_id));
  }
  if (tonnes <= 0 || tonnes % kLoadStep != 0)
    throw ApiError(422, "invalid-tonnage", "tonnage must be a positive multiple of 5, got " + std::to_string(tonnes));
  if (tonnes > truck->load)
    throw ApiError(422, "invalid-tonnage", "truck " + std::to_string(truck_id) + " carries only " +
                                               std::to_string(truck->load) + " t");

  const auto p = static_cast<std::size_t>(press);
  const PressState now = observed(p);
  if (now.blocked())
    throw ApiError(409, "press-blocked", "press " + std::to_string(press) + " is processing for " +
                                             std::to_string(now.remaining) + " more interval(s)");
  if (!now.empty() && now.variety != truck->variety)
    throw ApiError(422, "variety-mismatch", "press " + std::to_string(press) + " holds variety " +
                                                std::to_string(now.variety) + "; truck carries variety " +
                                                std::to_string(truck->variety));
  if (tonnes > now.spare())
    throw ApiError(422, "overfill", "press " + std::to_string(press) + " has " + std::to_string(now.spare()) +
                                        " t spare, " + std::to_string(tonnes) + " t requested");
  if (cap_used_ + tonnes > engine_.tonnage_cap)
    throw ApiError(422, "cap-exceeded", std::to_string(engine_.tonnage_cap - cap_used_) +
                                            " t left in this interval's unloading budget, " + std::to_string(tonnes) +
                                            " t requested");

  const PressState& start = start_[p];
  Control next = committed_[p];
  next.variety = truck->variety;
  next.tonnes += tonnes;
  if (!is_feasible(start, next)) throw ApiError(422, "infeasible", "assignment is outside the admissible controls");

  StrategyRow row{t_, press, truck_id, truck->arrival, truck->variety, tonnes};
  payoff_ += grapepress::payoff(t_, start, next, engine_.prices) -
             grapepress::payoff(t_, start, committed_[p], engine_.prices);
  if (fill(start, next).blocked()) completed_ += start.type.capacity;
  committed_[p] = next;
  cap_used_ += tonnes;
  pressed_ += tonnes;
  for (auto& tr : queue_.trucks)
    if (tr.id == truck_id) tr.load -= tonnes;
  std::erase_if(queue_.trucks, [](const Truck& tr) { return tr.load == 0; });
  strategy_.push_back(row);
  hint_cache_.reset();
  return row;
}

std::vector<StrategyRow> Session::hint() const {
  if (finished()) return {};
  if (hint_cache_) return *hint_cache_;
  std::vector<PressSlot> slots;
  for (std::size_t p = 0; p < start_.size(); ++p) slots.push_back(PressSlot{start_[p], committed_[p]});
  auto decisions = fill_decisions(slots, queue_, t_, *tables_, engine_, cap_used_);
  auto realized = realize(decisions.sample(hint_rng_), queue_, t_, engine_);
  hint_cache_ = realized.rows;
  return realized.rows;
}

void Session::advance() {
  if (finished()) throw ApiError(409, "day-over", "the day has ended; no interval is open");
  for (std::size_t p = 0; p < start_.size(); ++p) start_[p] = transition(t_, start_[p], committed_[p]);
  committed_.assign(start_.size(), Control::none());
  cap_used_ = 0;
  hint_cache_.reset();

  auto aged = age_queue(queue_, horizon_, engine_.prices);
  losses_ += aged.charges;
  for (const auto& tr : aged.rejected) expired_.insert(tr.id);
  queue_ = std::move(aged.queue);
  ++t_;
  if (!finished()) admit_arrivals();
}

EpisodeResult Session::results() const {
  EpisodeResult r;
  r.scenario = spec_.id();
  r.policy = mode_name(mode_);
  r.seed = seed_;
  r.payoff = payoff_;
  r.losses = losses_;
  r.strategy = strategy_;
  r.delivered_tonnes = delivered_;
  r.pressed_tonnes = pressed_;
  r.completed_tonnes = completed_;
  for (std::size_t p = 0; p < start_.size(); ++p) {
    const auto s = observed(p);
    if (!s.blocked()) r.unfinished_tonnes += s.load;
  }
  return r;
}

json Session::state_json() const {
  json presses = json::array();
  for (std::size_t p = 0; p < start_.size(); ++p) {
    auto j = to_json(observed(p), p);
    j["committed_tonnes"] = committed_[p].tonnes;
    presses.push_back(std::move(j));
  }
  json trucks = json::array();
  for (const auto& tr : queue_.trucks) {
    const int age = queue_.age(tr);
    trucks.push_back(json{{"truck_id", tr.id},
                          {"variety", tr.variety},
                          {"original_variety", tr.original_variety},
                          {"load", tr.load},
                          {"arrival", tr.arrival},
                          {"age", age},
                          {"degraded", tr.degraded},
                          {"intervals_to_degrade", tr.degraded ? 0 : kDegradeAge - age},
                          {"intervals_to_reject", kRejectAge - age}});
  }
  return json{{"session_id", id_},
              {"scenario_id", spec_.id()},
              {"mode", mode_name(mode_)},
              {"seed", seed_},
              {"interval", t_},
              {"horizon", horizon_},
              {"finished", finished()},
              {"cap", engine_.tonnage_cap},
              {"cap_used", cap_used_},
              {"payoff", payoff_},
              {"losses", to_json(losses_)},
              {"presses", presses},
              {"queue", trucks}};
}

// ---------------------------------------------------------------------------

SessionService::SessionService(ServiceConfig config) : config_(std::move(config)) {
  config_.reference.validate();
  if (config_.fleet.empty()) throw ScenarioError("fleet is empty");
}

std::shared_ptr<const TableSet> SessionService::tables_for(const ScenarioSpec& spec, const ArrivalModel& model) {
  std::lock_guard lock(tables_mutex_);
  auto& slot = tables_[spec.id()];
  if (!slot) slot = std::make_shared<const TableSet>(build_tables(config_.fleet, model, config_.engine.prices));
  return slot;
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ApiError(404, "unknown-session", "no session with id " + id);
  return it->second;
}

void SessionService::log_event(const std::string& id, const json& event) {
  if (config_.event_log_dir.empty()) return;
  std::lock_guard lock(log_mutex_);
  std::filesystem::create_directories(config_.event_log_dir);
  std::ofstream out(std::filesystem::path(config_.event_log_dir) / (id + ".jsonl"), std::ios::app);
  out << event.dump() << '\n';
}

json SessionService::create_session(const json& body) {
  if (!body.is_object()) throw bad_request("request body must be a JSON object");
  ScenarioSpec spec;
  if (body.contains("scenario")) {
    try {
      spec = ScenarioSpec::parse(field<std::string>(body, "scenario"));
    } catch (const ScenarioError& e) {
      throw bad_request(e.what());
    }
  }
  const Mode mode = body.contains("mode") ? parse_mode(field<std::string>(body, "mode")) : Mode::kManual;
  const auto seed = field<std::uint64_t>(body, "seed");

  ArrivalModel model;
  try {
    model = build_scenario(spec, config_.reference);
  } catch (const std::exception& e) {
    throw bad_request(e.what());
  }
  auto tables = tables_for(spec, model);

  auto entry = std::make_shared<Entry>();
  std::string id;
  {
    std::unique_lock lock(sessions_mutex_);
    id = "s" + std::to_string(next_session_++);
    entry->session = std::make_unique<Session>(id, spec, mode, seed, model, tables, config_.fleet, config_.engine);
    sessions_[id] = entry;
  }
  log_event(id, json{{"event", "create"}, {"scenario", spec.id()}, {"mode", mode_name(mode)}, {"seed", seed}});
  std::lock_guard lock(entry->mutex);
  return entry->session->state_json();
}

json SessionService::get_state(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  return entry->session->state_json();
}

json SessionService::post_assignment(const std::string& id, const json& body) {
  auto entry = find(id);
  const int press = field<int>(body, "press_id");
  const auto truck = field<TruckId>(body, "truck_id");
  const int tonnes = field<int>(body, "tonnes");
  std::lock_guard lock(entry->mutex);
  auto& s = *entry->session;
  json event{{"event", "assign"}, {"interval", s.interval()}, {"press_id", press}, {"truck_id", truck},
             {"tonnes", tonnes}};
  try {
    auto row = s.assign(press, truck, tonnes);
    event["accepted"] = true;
    log_event(id, event);
    return json{{"accepted", true}, {"assignment", to_json(row)}, {"state", s.state_json()}};
  } catch (const ApiError& e) {
    event["accepted"] = false;
    event["rule"] = e.rule();
    log_event(id, event);
    throw;
  }
}

json SessionService::get_hint(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  auto& s = *entry->session;
  if (s.mode() != Mode::kAssisted)
    throw ApiError(403, "hints-disabled", "hints are only available in assisted sessions");
  json rows = json::array();
  for (const auto& row : s.hint()) rows.push_back(to_json(row));
  return json{{"interval", s.interval()}, {"assignments", rows}};
}

json SessionService::advance(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  auto& s = *entry->session;
  const int from = s.interval();
  s.advance();
  log_event(id, json{{"event", "advance"}, {"interval", from}, {"payoff", s.payoff()}, {"losses", s.losses().total()}});
  return s.state_json();
}

json SessionService::get_results(const std::string& id) {
  auto entry = find(id);
  std::lock_guard lock(entry->mutex);
  auto& s = *entry->session;
  auto j = to_json(s.results());
  j["final"] = s.finished();
  return j;
}

// ---------------------------------------------------------------------------

void register_routes(httplib::Server& server, SessionService& service, const std::string& static_dir) {
  auto respond = [](httplib::Response& res, const std::function<json()>& f, int ok_status = 200) {
    try {
      res.status = ok_status;
      res.set_content(f().dump(), "application/json");
    } catch (const ApiError& e) {
      res.status = e.status();
      res.set_content(e.to_json().dump(), "application/json");
    } catch (const json::exception& e) {
      res.status = 400;
      res.set_content(ApiError(400, "invalid-request", e.what()).to_json().dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json{{"code", 500}, {"rule", "internal"}, {"message", e.what()}}.dump(), "application/json");
    }
  };
  auto parse_body = [](const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    return json::parse(req.body);
  };

  server.Post("/sessions", [=, &service](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return service.create_session(parse_body(req)); }, 201);
  });
  server.Get(R"(/sessions/([^/]+)/state)", [=, &service](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return service.get_state(req.matches[1]); });
  });
  server.Post(R"(/sessions/([^/]+)/assignments)", [=, &service](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return service.post_assignment(req.matches[1], parse_body(req)); });
  });
  server.Get(R"(/sessions/([^/]+)/hint)", [=, &service](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return service.get_hint(req.matches[1]); });
  });
  server.Post(R"(/sessions/([^/]+)/advance)", [=, &service](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return service.advance(req.matches[1]); });
  });
  server.Get(R"(/sessions/([^/]+)/results)", [=, &service](const httplib::Request& req, httplib::Response& res) {
    respond(res, [&] { return service.get_results(req.matches[1]); });
  });
  if (!static_dir.empty() && !server.set_mount_point("/", static_dir))
    throw std::runtime_error("static directory not found: " + static_dir);
}

}  // namespace grapepress::service
