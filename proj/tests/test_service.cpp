#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <thread>

#include "httplib.h"

#include "service_fixture.hpp"

using namespace grapepress;
using namespace grapepress::service;
using nlohmann::json;
using fixture::rule_status;

namespace {

json load_schema() {
  std::ifstream in(std::string(GRAPEPRESS_SOURCE_DIR) + "/schemas/service.schema.json");
  REQUIRE(in.good());
  return json::parse(in);
}

std::string rule_of(const std::function<void()>& f) {
  std::string rule;
  rule_status(f, &rule);
  return rule;
}

// First queued truck matching the predicate, or null.
json truck_where(const json& state, const std::function<bool(const json&)>& pred) {
  for (const auto& t : state["queue"])
    if (pred(t)) return t;
  return nullptr;
}

}  // namespace

TEST_CASE("session creation") {
  SessionService svc(fixture::small_service_config());
  const auto schema = load_schema();
  const auto state = svc.create_session({{"seed", 3}});
  CHECK(fixture::missing_keys(schema, "SessionState", state).empty());
  CHECK(state["session_id"] == "s1");
  CHECK(state["scenario_id"] == "vR_fR_i1");
  CHECK(state["mode"] == "manual");
  CHECK(state["interval"] == 0);
  CHECK(state["horizon"] == kHorizon);
  CHECK(state["presses"].size() == 2);
  for (const auto& p : state["presses"]) CHECK(fixture::missing_keys(schema, "Press", p).empty());
  for (const auto& t : state["queue"]) CHECK(fixture::missing_keys(schema, "QueuedTruck", t).empty());
  CHECK(svc.create_session({{"seed", 3}})["session_id"] == "s2");
  CHECK(svc.get_state("s1") == state);

  CHECK(rule_of([&] { svc.create_session(json::object()); }) == "invalid-request");
  CHECK(rule_of([&] { svc.create_session({{"seed", "x"}}); }) == "invalid-request");
  CHECK(rule_of([&] { svc.create_session({{"seed", 1}, {"mode", "auto"}}); }) == "invalid-request");
  CHECK(rule_of([&] { svc.create_session({{"seed", 1}, {"scenario", "v9_fR_i1"}}); }) == "invalid-request");
  CHECK(rule_status([&] { svc.get_state("nope"); }) == 404);
  CHECK(rule_of([&] { svc.advance("nope"); }) == "unknown-session");
}

TEST_CASE("every rejection class, and rejections change nothing") {
  SessionService svc(fixture::small_service_config());
  // A 15 t truck and a truck of another variety carrying at least 10 t.
  const auto id = fixture::find_session(svc, "manual", [](const json& s) {
    const auto heavy = truck_where(s, [](const json& t) { return t["load"] == 15; });
    return !heavy.is_null() && !truck_where(s, [&](const json& t) {
                                  return t["variety"] != heavy["variety"] && t["load"] >= 10;
                                }).is_null();
  });
  auto state = svc.get_state(id);
  const auto heavy = truck_where(state, [](const json& t) { return t["load"] == 15; });
  const int v = heavy["variety"];
  const auto other = truck_where(state, [&](const json& t) { return t["variety"] != v && t["load"] >= 10; });
  const int heavy_id = heavy["truck_id"];
  const int other_id = other["truck_id"];

  auto rejected = [&](const json& body, const std::string& rule, int status) {
    const auto before = svc.get_state(id);
    std::string got;
    CHECK(rule_status([&] { svc.post_assignment(id, body); }, &got) == status);
    CHECK(got == rule);
    CHECK(svc.get_state(id) == before);
  };
  auto body = [](int press, int truck, int tonnes) {
    return json{{"press_id", press}, {"truck_id", truck}, {"tonnes", tonnes}};
  };

  rejected(body(7, heavy_id, 5), "unknown-press", 404);
  rejected(body(-1, heavy_id, 5), "unknown-press", 404);
  rejected(body(0, 9999, 5), "unknown-truck", 404);
  rejected(body(0, heavy_id, 7), "invalid-tonnage", 422);
  rejected(body(0, heavy_id, 0), "invalid-tonnage", 422);
  rejected(body(0, heavy_id, 20), "invalid-tonnage", 422);
  rejected(body(0, heavy_id, 15), "overfill", 422);
  rejected(json{{"press_id", 0}}, "invalid-request", 400);

  // 5 t into press 0 fixes its variety
  auto ok = svc.post_assignment(id, body(0, heavy_id, 5));
  CHECK(ok["accepted"] == true);
  CHECK(ok["assignment"]["tonnes"] == 5);
  CHECK(ok["state"]["presses"][0]["load"] == 5);
  CHECK(ok["state"]["cap_used"] == 5);
  rejected(body(0, other_id, 5), "variety-mismatch", 422);
  rejected(body(0, heavy_id, 10), "overfill", 422);

  // completing press 0 pays price x capacity
  const double before = svc.get_state(id)["payoff"];
  ok = svc.post_assignment(id, body(0, heavy_id, 5));
  CHECK(ok["state"]["payoff"].get<double>() - before == doctest::Approx(Prices{}(v) * 10));
  CHECK(ok["state"]["presses"][0]["blocked"] == true);
  rejected(body(0, heavy_id, 5), "press-blocked", 409);

  // 10 t used of a 15 t budget
  rejected(body(1, other_id, 10), "cap-exceeded", 422);

  // Let the rest of the queue age out, then refer to an expired truck.
  for (int i = 0; i < kRejectAge; ++i) svc.advance(id);
  CHECK(svc.get_state(id)["losses"]["rejection"].get<double>() > 0.0);
  rejected(body(1, other_id, 5), "truck-expired", 409);

  while (!svc.get_state(id)["finished"].get<bool>()) svc.advance(id);
  rejected(body(1, other_id, 5), "day-over", 409);
  CHECK(rule_status([&] { svc.advance(id); }) == 409);
  const auto results = svc.get_results(id);
  CHECK(results["final"] == true);
  CHECK(fixture::missing_keys(load_schema(), "Results", results).empty());
}

TEST_CASE("hints") {
  SessionService svc(fixture::small_service_config());
  const auto manual = svc.create_session({{"seed", 1}})["session_id"].get<std::string>();
  std::string rule;
  CHECK(rule_status([&] { svc.get_hint(manual); }, &rule) == 403);
  CHECK(rule == "hints-disabled");

  const auto id = svc.create_session({{"seed", 1}, {"mode", "assisted"}})["session_id"].get<std::string>();
  const auto schema = load_schema();
  const auto hint = svc.get_hint(id);
  CHECK(fixture::missing_keys(schema, "HintResponse", hint).empty());
  CHECK(svc.get_hint(id) == hint);
}

TEST_CASE("following every hint reproduces the DP policy") {
  auto config = fixture::small_service_config();
  const auto tables = build_tables(config.fleet, config.reference);
  for (std::uint64_t seed : {1, 2, 3}) {
    SessionService svc(config);
    const auto id = svc.create_session({{"seed", seed}, {"mode", "assisted"}})["session_id"].get<std::string>();
    while (!svc.get_state(id)["finished"].get<bool>()) {
      const auto hint = svc.get_hint(id);
      for (const auto& row : hint["assignments"]) {
        const auto r = svc.post_assignment(id, row);
        CHECK(r["accepted"] == true);
      }
      svc.advance(id);
    }
    const auto results = svc.get_results(id);

    EpisodeConfig ec;
    ec.tables = &tables;
    ec.engine = config.engine;
    const auto dp = simulate_episode(config.reference, config.fleet, ec, seed);
    CHECK(results["payoff"].get<double>() == doctest::Approx(dp.payoff));
    CHECK(results["losses"]["total"].get<double>() == doctest::Approx(dp.losses.total()));
    CHECK(results["strategy"].size() == dp.strategy.size());
    CHECK(results["delivered_tonnes"] == dp.delivered_tonnes);
  }
}

TEST_CASE("replaying the same requests gives the same day") {
  const auto dir = std::filesystem::temp_directory_path() / "grapepress_test_events";
  std::filesystem::remove_all(dir);
  auto run = [&](bool log) {
    auto config = fixture::small_service_config();
    if (log) config.event_log_dir = dir.string();
    SessionService svc(config);
    const auto id = svc.create_session({{"seed", 11}})["session_id"].get<std::string>();
    std::vector<json> states;
    while (!svc.get_state(id)["finished"].get<bool>()) {
      const auto s = svc.get_state(id);
      // a fixed client: the oldest truck into the first press that accepts it
      for (const auto& tr : s["queue"])
        for (int p = 0; p < 2; ++p)
          if (rule_status([&] {
                svc.post_assignment(id, {{"press_id", p}, {"truck_id", tr["truck_id"]}, {"tonnes", 5}});
              }) == 0)
            break;
      states.push_back(svc.advance(id));
    }
    states.push_back(svc.get_results(id));
    return states;
  };
  const auto a = run(true);
  const auto b = run(false);
  CHECK(a == b);
  std::ifstream log(dir / "s1.jsonl");
  REQUIRE(log.good());
  std::string line;
  int lines = 0;
  std::getline(log, line);
  CHECK(json::parse(line)["event"] == "create");
  ++lines;
  while (std::getline(log, line)) {
    const auto e = json::parse(line);
    CHECK(e.contains("event"));
    ++lines;
  }
  CHECK(lines > kHorizon);
  std::filesystem::remove_all(dir);
}

TEST_CASE("HTTP routes") {
  SessionService svc(fixture::small_service_config());
  httplib::Server server;
  register_routes(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/sessions", R"({"seed": 4, "mode": "assisted"})", "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const auto id = json::parse(created->body)["session_id"].get<std::string>();

  auto state = client.Get("/sessions/" + id + "/state");
  REQUIRE(state);
  CHECK(state->status == 200);
  CHECK(json::parse(state->body)["interval"] == 0);

  auto hint = client.Get("/sessions/" + id + "/hint");
  REQUIRE(hint);
  CHECK(hint->status == 200);

  auto bad = client.Post("/sessions/" + id + "/assignments", R"({"press_id": 5, "truck_id": 1, "tonnes": 5})",
                         "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 404);
  const auto err = json::parse(bad->body);
  CHECK(err["rule"] == "unknown-press");
  CHECK(err["code"] == 404);
  CHECK(fixture::missing_keys(load_schema(), "Error", err).empty());

  auto garbage = client.Post("/sessions", "{not json", "application/json");
  REQUIRE(garbage);
  CHECK(garbage->status == 400);

  auto advanced = client.Post("/sessions/" + id + "/advance", "", "application/json");
  REQUIRE(advanced);
  CHECK(json::parse(advanced->body)["interval"] == 1);

  auto results = client.Get("/sessions/" + id + "/results");
  REQUIRE(results);
  CHECK(json::parse(results->body)["final"] == false);

  auto missing = client.Get("/sessions/zzz/state");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  server.stop();
  th.join();
}

TEST_CASE("concurrent sessions") {
  SessionService svc(fixture::small_service_config());
  std::vector<std::thread> workers;
  std::vector<double> payoffs(4);
  for (int w = 0; w < 4; ++w)
    workers.emplace_back([&, w] {
      const auto id = svc.create_session({{"seed", 21}, {"mode", "assisted"}})["session_id"].get<std::string>();
      while (!svc.get_state(id)["finished"].get<bool>()) {
        const auto hint = svc.get_hint(id);
        for (const auto& row : hint["assignments"]) svc.post_assignment(id, row);
        svc.advance(id);
      }
      payoffs[w] = svc.get_results(id)["payoff"];
    });
  for (auto& t : workers) t.join();
  for (double p : payoffs) CHECK(p == payoffs[0]);
}
