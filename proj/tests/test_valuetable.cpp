#include "doctest.h"

#include <random>
#include <sstream>

#include "grapepress/simulator.hpp"
#include "grapepress/valuetable.hpp"
#include "oracles.hpp"

using namespace grapepress;

TEST_CASE("state space numbering") {
  const StateSpace one(kTypeI);
  CHECK(one.size() == 1 + 4 * 4 + 4 * 4);
  const StateSpace two(kTypeII);
  CHECK(two.size() == 1 + 4 * 9 + 4 * 8);
  for (std::size_t i = 0; i < two.size(); ++i) {
    const auto s = two.state(i);
    CHECK(is_valid(s));
    CHECK(two.index(s) == i);
  }
  CHECK_FALSE(one.contains(PressState{2, 25, 0, kTypeI}));
  CHECK_THROWS_AS(one.index(PressState{2, 25, 0, kTypeI}), TableError);
  CHECK_THROWS_AS(one.index(PressState{0, 0, 0, kTypeII}), TableError);
}

TEST_CASE("expected maximum of independently available options") {
  const std::vector<RandomOption> two{{10.0, 0.5}, {4.0, 0.5}};
  CHECK(expected_max(0.0, two) == doctest::Approx(6.0));
  CHECK(expected_max_enumerated(0.0, two) == doctest::Approx(6.0));
  CHECK(oracle::expected_max_brute(0.0, {10.0, 4.0}, {0.5, 0.5}) == doctest::Approx(6.0));

  CHECK(expected_max(3.5, std::vector<RandomOption>{{9.0, 0.0}, {1.0, 0.0}}) == 3.5);
  CHECK(expected_max(3.5, std::vector<RandomOption>{}) == 3.5);
  // options below the fallback never matter
  CHECK(expected_max(5.0, std::vector<RandomOption>{{1.0, 0.9}, {2.0, 0.3}}) == doctest::Approx(5.0));
  // a certain option dominates everything below it
  CHECK(expected_max(0.0, std::vector<RandomOption>{{8.0, 1.0}, {7.0, 0.4}, {9.0, 0.5}}) == doctest::Approx(8.5));
}

TEST_CASE("ranking and enumeration agree on random option sets") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> size(0, 10);
  for (int rep = 0; rep < 200; ++rep) {
    const int k = size(rng);
    std::vector<RandomOption> opts;
    std::vector<double> q, pi;
    for (int i = 0; i < k; ++i) {
      // repeated values exercise ties
      const double v = std::floor(unit(rng) * 6.0) * 10.0;
      const double p = unit(rng) < 0.2 ? (unit(rng) < 0.5 ? 0.0 : 1.0) : unit(rng);
      opts.push_back({v, p});
      q.push_back(v);
      pi.push_back(p);
    }
    const double q0 = unit(rng) * 30.0;
    const double brute = oracle::expected_max_brute(q0, q, pi);
    CHECK(expected_max(q0, opts) == doctest::Approx(brute).epsilon(1e-12));
    CHECK(expected_max_enumerated(q0, opts) == doctest::Approx(brute).epsilon(1e-12));
  }
}

TEST_CASE("toy table equals exhaustive expectimax") {
  std::mt19937_64 rng(2024);
  // T=6, one variety, loads {5, 10}, C=10, TP=1
  auto inst = oracle::make_toy(rng, 6, 10, 1, 1, 10);
  const auto table = build_table(inst.problem);
  const auto& space = table.space();
  for (int t = 0; t <= 6; ++t) {
    for (std::size_t i = 0; i < space.size(); ++i) {
      const auto s = space.state(i);
      const double expect = s.blocked() ? inst.oracle.value_processing(t, s.variety, s.load, s.remaining)
                                        : inst.oracle.value(t, s.variety, s.load, false, 0);
      CHECK(table.at(t, i) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("blocked states only count down") {
  std::mt19937_64 rng(5);
  auto inst = oracle::make_toy(rng, 8, 15, 3, 2, 10);
  const auto table = build_table(inst.problem);
  for (int t = 0; t < 8; ++t) {
    const PressState busy{2, 15, 2, inst.problem.press};
    CHECK(table.lookup(t, busy) == table.lookup(t + 1, PressState{2, 15, 1, inst.problem.press}));
  }
}

TEST_CASE("no arrivals means zero value everywhere") {
  ArrivalModel m;
  for (PressType type : {kTypeI, kTypeII}) {
    const auto table = build_table(type, m);
    for (int t = 0; t <= kHorizon; ++t)
      for (std::size_t s = 0; s < table.space().size(); ++s) CHECK(table.at(t, s) == 0.0);
  }
}

TEST_CASE("lookup agrees with a recomputed Bellman step and the boundary row is zero") {
  const auto model = synthetic_reference_model();
  const auto problem = make_problem(kTypeI, model);
  const auto table = build_table(problem);
  for (std::size_t s = 0; s < table.space().size(); ++s) CHECK(table.at(kHorizon, s) == 0.0);
  for (int t : {0, 5, 17, 31, 33})
    for (std::size_t s = 0; s < table.space().size(); ++s) {
      const auto st = table.space().state(s);
      CHECK(table.lookup(t, st) == doctest::Approx(bellman_step(problem, t, st, table)).epsilon(1e-14));
    }
  // nothing can arrive in the last two intervals
  CHECK(table.lookup(32, PressState{}) == 0.0);
  CHECK(table.lookup(33, PressState{4, 20, 0, kTypeI}) == 0.0);
}

TEST_CASE("model hash is checked on lookup") {
  const auto model = synthetic_reference_model();
  const auto table = build_table(kTypeI, model);
  CHECK(table.model_hash() == model.hash());
  CHECK_NOTHROW(table.lookup(0, PressState{}, model.hash()));
  CHECK_THROWS_AS(table.lookup(0, PressState{}, "0123456789abcdef"), TableError);
  CHECK_THROWS_AS(table.check_model("deadbeef"), TableError);
  CHECK_THROWS_AS(table.lookup(kHorizon + 1, PressState{}), TableError);
}

TEST_CASE("table documents round-trip exactly") {
  const auto model = synthetic_reference_model();
  const auto table = build_table(kTypeII, model, Prices{{1.5, 2.0, 3.25, 4.0}});
  std::stringstream ss;
  write_table(ss, table);
  const auto back = read_table(ss);
  CHECK(back == table);

  std::string text = ss.str();
  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_table(truncated), TableError);
}

TEST_CASE("values grow with remaining time and scale with prices") {
  const auto model = synthetic_reference_model();
  const auto base = build_table(kTypeI, model);
  const auto doubled = build_table(kTypeI, model, Prices{}.scaled(2.0));
  for (std::size_t s = 0; s < base.space().size(); ++s) {
    for (int t = 0; t < kHorizon; ++t) {
      CHECK(base.at(t, s) >= base.at(t + 1, s) - 1e-9);
      CHECK(doubled.at(t, s) == doctest::Approx(2.0 * base.at(t, s)).epsilon(1e-12));
    }
  }
}

TEST_CASE("Type I and Type II reference values") {
  const auto model = synthetic_reference_model();
  const auto one = build_table(kTypeI, model);
  const auto two = build_table(kTypeII, model);
  // A single press cannot earn more than the best price on every cycle it
  // could possibly run.
  const int cycles_one = (kHorizon - 2 + 4) / 5 + 1;
  CHECK(one.lookup(0, PressState{0, 0, 0, kTypeI}) > 0.0);
  CHECK(one.lookup(0, PressState{0, 0, 0, kTypeI}) <= 4.0 * 25 * cycles_one);
  // same tonnes per interval of processing, so the two presses earn alike
  CHECK(two.lookup(0, PressState{0, 0, 0, kTypeII}) == doctest::Approx(one.lookup(0, PressState{0, 0, 0, kTypeI})).epsilon(0.1));
}
