#pragma once

#include <functional>
#include <set>
#include <string>

#include "json.hpp"

#include "grapepress/service.hpp"

namespace fixture {

// A busy day on two small presses so that every rule can be provoked early.
inline grapepress::service::ServiceConfig small_service_config() {
  using namespace grapepress;
  service::ServiceConfig c;
  c.reference.lambda.assign(kHorizon, 2.5);
  c.reference.lambda[kHorizon - 2] = 0.0;
  c.reference.lambda[kHorizon - 1] = 0.0;
  c.reference.p_variety = {0.5, 0.5, 0.0, 0.0};
  c.reference.p_weight = {0.4, 0.3, 0.3, 0.0, 0.0};
  c.fleet = {PressType{10, 2}, PressType{10, 2}};
  c.engine.tonnage_cap = 15;
  return c;
}

// Creates sessions with increasing seeds until `accept` holds for the
// opening state; returns the session id.
inline std::string find_session(grapepress::service::SessionService& svc, const std::string& mode,
                                const std::function<bool(const nlohmann::json&)>& accept) {
  for (int seed = 1; seed < 500; ++seed) {
    auto state = svc.create_session({{"mode", mode}, {"seed", seed}});
    if (accept(state)) return state["session_id"];
  }
  throw std::runtime_error("no suitable seed");
}

inline int rule_status(const std::function<void()>& f, std::string* rule = nullptr) {
  try {
    f();
  } catch (const grapepress::service::ApiError& e) {
    if (rule) *rule = e.rule();
    return e.status();
  }
  return 0;
}

// Required keys of a schema definition that are missing from `doc`.
inline std::set<std::string> missing_keys(const nlohmann::json& schema, const std::string& def,
                                          const nlohmann::json& doc) {
  std::set<std::string> missing;
  for (const auto& key : schema["$defs"][def]["required"])
    if (!doc.contains(key.get<std::string>())) missing.insert(key.get<std::string>());
  return missing;
}

}  // namespace fixture
