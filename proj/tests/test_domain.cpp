#include "doctest.h"

#include <algorithm>
#include <set>

#include "grapepress/domain.hpp"

using namespace grapepress;

TEST_CASE("empty Type I press admits no-fill plus every variety and load") {
  const auto controls = gamma(5, PressState{0, 0, 0, kTypeI});
  CHECK(controls.size() == 21);
  CHECK(std::count(controls.begin(), controls.end(), Control::none()) == 1);
  std::set<Control> distinct(controls.begin(), controls.end());
  CHECK(distinct.size() == 21);
  for (int v = 1; v <= 4; ++v)
    for (int l = 5; l <= 25; l += 5) CHECK(distinct.count(Control{v, l}) == 1);
}

TEST_CASE("blocked press admits only no-fill") {
  const auto controls = gamma(5, PressState{3, 25, 2, kTypeI});
  REQUIRE(controls.size() == 1);
  CHECK(controls[0].is_none());
}

TEST_CASE("partial press admits its own variety up to the spare space") {
  const auto controls = gamma(5, PressState{2, 15, 0, kTypeI});
  std::set<Control> got(controls.begin(), controls.end());
  CHECK(got == std::set<Control>{Control::none(), {2, 5}, {2, 10}});
}

TEST_CASE("empty Type II press admits loads up to its capacity") {
  const auto controls = gamma(0, PressState{0, 0, 0, kTypeII});
  CHECK(controls.size() == 1 + 4 * 10);
}

TEST_CASE("transition") {
  SUBCASE("filling an empty press") {
    CHECK(transition(7, {0, 0, 0, kTypeI}, {2, 10}) == PressState{2, 10, 0, kTypeI});
  }
  SUBCASE("no-fill leaves an idle press unchanged") {
    CHECK(transition(7, {3, 20, 0, kTypeI}, Control::none()) == PressState{3, 20, 0, kTypeI});
  }
  SUBCASE("reaching capacity starts processing and pays") {
    const PressState before{1, 20, 0, kTypeI};
    CHECK(transition(7, before, {1, 5}) == PressState{1, 25, 4, kTypeI});
    CHECK(payoff(7, before, {1, 5}) == doctest::Approx(25.0));
  }
  SUBCASE("last processing interval empties the press") {
    CHECK(transition(9, {2, 50, 1, kTypeII}, Control::none()) == PressState{0, 0, 0, kTypeII});
  }
  SUBCASE("processing counts down") {
    CHECK(transition(0, {4, 50, 8, kTypeII}, Control::none()) == PressState{4, 50, 7, kTypeII});
  }
  SUBCASE("a blocked press rejects a fill") {
    CHECK_THROWS_AS(transition(0, {4, 50, 3, kTypeII}, Control{4, 5}), DomainError);
  }
  SUBCASE("infeasible controls are rejected") {
    CHECK_THROWS_AS(transition(0, {2, 15, 0, kTypeI}, Control{3, 5}), DomainError);
    CHECK_THROWS_AS(transition(0, {2, 15, 0, kTypeI}, Control{2, 15}), DomainError);
    CHECK_THROWS_AS(transition(0, {0, 0, 0, kTypeI}, Control{1, 7}), DomainError);
  }
}

TEST_CASE("payoff") {
  CHECK(payoff(0, {3, 20, 0, kTypeI}, {3, 5}) == doctest::Approx(75.0));
  CHECK(payoff(0, {0, 0, 0, kTypeI}, {3, 25}) == doctest::Approx(75.0));
  CHECK(payoff(0, {4, 45, 0, kTypeII}, {4, 5}) == doctest::Approx(200.0));
  CHECK(payoff(0, {4, 10, 0, kTypeII}, {4, 5}) == 0.0);
  CHECK(payoff(0, {4, 10, 0, kTypeII}, Control::none()) == 0.0);
  CHECK(payoff(0, {4, 50, 2, kTypeII}, Control::none()) == 0.0);
  Prices custom{{2.0, 5.0, 7.0, 11.0}};
  CHECK(payoff(0, {2, 20, 0, kTypeI}, {2, 5}, custom) == doctest::Approx(125.0));
}

TEST_CASE("truck types are numbered variety-major") {
  CHECK(type_index({1, 5}) == 1);
  CHECK(type_index({1, 25}) == 5);
  CHECK(type_index({2, 5}) == 6);
  CHECK(type_index({4, 25}) == 20);
  for (int i = 1; i <= kNumTruckTypes; ++i) CHECK(type_index(truck_type(i)) == i);
  CHECK_THROWS(truck_type(0));
  CHECK_THROWS(truck_type(21));
}

TEST_CASE("load classes round up to 5 t") {
  CHECK(load_class(17.3) == 20);
  CHECK(load_class(20.0) == 20);
  CHECK(load_class(0.4) == 5);
  CHECK(load_class(5.0) == 5);
  CHECK(load_class(5.01) == 10);
  CHECK(load_class(25.0) == 25);
  CHECK_THROWS_AS(load_class(25.5), DomainError);
  CHECK_THROWS_AS(load_class(0.0), DomainError);
  CHECK_THROWS_AS(load_class(-3.0), DomainError);
}

TEST_CASE("state validation") {
  CHECK(is_valid({0, 0, 0, kTypeI}));
  CHECK(is_valid({2, 15, 0, kTypeI}));
  CHECK(is_valid({2, 25, 4, kTypeI}));
  CHECK_FALSE(is_valid({2, 25, 5, kTypeI}));   // longer than TP
  CHECK_FALSE(is_valid({2, 15, 1, kTypeI}));   // processing while not full
  CHECK_FALSE(is_valid({0, 5, 0, kTypeI}));    // load without variety
  CHECK_FALSE(is_valid({2, 0, 0, kTypeI}));    // variety without load
  CHECK_FALSE(is_valid({5, 10, 0, kTypeI}));   // unknown variety
  CHECK_FALSE(is_valid({1, 12, 0, kTypeI}));   // not a 5 t multiple
  CHECK_FALSE(is_valid({1, 30, 0, kTypeI}));   // over capacity
  CHECK_THROWS_AS(validate(PressState{1, 30, 0, kTypeI}), DomainError);
  CHECK_THROWS_AS(validate(PressType{12, 2}), DomainError);
  CHECK_THROWS_AS(validate(PressType{25, 0}), DomainError);
}

TEST_CASE("transition keeps every reachable state valid") {
  for (const PressType type : {kTypeI, kTypeII, PressType{10, 1}}) {
    std::set<std::tuple<int, int, int>> seen;
    std::vector<PressState> frontier{{0, 0, 0, type}};
    while (!frontier.empty()) {
      const auto s = frontier.back();
      frontier.pop_back();
      if (!seen.insert({s.variety, s.load, s.remaining}).second) continue;
      REQUIRE(is_valid(s));
      for (const auto& c : gamma(0, s)) {
        REQUIRE(is_feasible(s, c));
        frontier.push_back(transition(0, s, c));
      }
    }
    // empty + partials + processing states
    const std::size_t steps = static_cast<std::size_t>(type.steps());
    CHECK(seen.size() == 1 + 4 * (steps - 1) + 4 * static_cast<std::size_t>(type.processing));
  }
}

TEST_CASE("prices") {
  Prices p;
  CHECK(p(1) == 1.0);
  CHECK(p(4) == 4.0);
  CHECK(p(0) == 0.0);
  CHECK(p.scaled(2.5)(3) == doctest::Approx(7.5));
}
