#pragma once

// Reference computations used only by the tests. The expectation and toy
// press oracles follow the model definitions directly and share no code with
// the library. The joint-allocation oracle reuses the single-press rules
// (payoff, transition, table lookup) and only replaces the search.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <tuple>
#include <vector>

#include "grapepress/domain.hpp"
#include "grapepress/engine.hpp"
#include "grapepress/valuetable.hpp"

namespace oracle {

// E[max(q0, q_i : i present)] by summing over every presence pattern.
inline double expected_max_brute(double q0, const std::vector<double>& q, const std::vector<double>& pi) {
  const std::size_t k = q.size();
  double total = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    double prob = 1.0;
    double best = q0;
    for (std::size_t i = 0; i < k; ++i) {
      if (mask >> i & 1) {
        prob *= pi[i];
        best = std::max(best, q[i]);
      } else {
        prob *= 1.0 - pi[i];
      }
    }
    total += prob * best;
  }
  return total;
}

// A single press with the press state written as (variety, load, start) where
// start is the absolute interval at which processing began (0 = not started).
// The press is busy during intervals start .. start + TP - 1 and empty again
// at start + TP.
struct ToyPress {
  int capacity = 10;
  int processing = 1;
  int horizon = 6;
  std::vector<double> price{0, 1, 2, 3, 4};  // price[v], index 0 unused
  std::vector<std::pair<int, int>> types;     // (variety, load)
  std::vector<std::vector<double>> presence;  // [t][i]

  // Expected optimal revenue from interval t (0-based) onward. `started`
  // distinguishes "processing since `start`" from a press that is not
  // processing, so that `start` may be any integer.
  double value(int t, int v, int l, bool started, int start) const {
    if (t >= horizon) return 0.0;
    if (started) {
      if (t >= start + processing) return value(t, 0, 0, false, 0);
      return value(t + 1, v, l, true, start);
    }
    const auto key = std::make_tuple(t, v, l);
    if (auto it = memo.find(key); it != memo.end()) return it->second;

    const std::size_t n = types.size();
    double expectation = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
      double prob = 1.0;
      for (std::size_t i = 0; i < n; ++i) prob *= (mask >> i & 1) ? presence[t][i] : 1.0 - presence[t][i];
      if (prob == 0.0) continue;
      double best = value(t + 1, v, l, false, 0);  // no fill
      for (std::size_t i = 0; i < n; ++i) {
        if (!(mask >> i & 1)) continue;
        const auto [tv, tl] = types[i];
        if (l > 0 && tv != v) continue;
        if (l + tl > capacity) continue;
        double option = 0.0;
        if (l + tl == capacity)
          option = price[tv] * capacity + value(t + 1, tv, capacity, true, t + 1);
        else
          option = value(t + 1, tv, l + tl, false, 0);
        best = std::max(best, option);
      }
      expectation += prob * best;
    }
    memo[key] = expectation;
    return expectation;
  }

  // Value of a press that has `remaining` busy intervals left at interval t.
  double value_processing(int t, int v, int l, int remaining) const {
    return value(t, v, l, true, t + remaining - processing);
  }

  mutable std::map<std::tuple<int, int, int>, double> memo;
};

// A random small instance described twice: once for the library and once for
// the oracle. Truck types are drawn from `varieties` x {5, ..., max_load}.
struct ToyInstance {
  grapepress::TableProblem problem;
  ToyPress oracle;
};

template <class Rng>
ToyInstance make_toy(Rng& rng, int horizon, int capacity, int processing, int varieties, int max_load) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ToyInstance inst;
  auto& pr = inst.problem;
  pr.press = grapepress::PressType{capacity, processing};
  pr.horizon = horizon;
  pr.model_hash = "toy";
  for (int v = 1; v <= varieties; ++v)
    for (int l = grapepress::kLoadStep; l <= max_load; l += grapepress::kLoadStep) pr.types.push_back({v, l});
  pr.presence.assign(static_cast<std::size_t>(horizon), std::vector<double>(pr.types.size(), 0.0));
  for (auto& row : pr.presence)
    for (auto& p : row) p = unit(rng) < 0.15 ? 0.0 : unit(rng);

  auto& o = inst.oracle;
  o.capacity = capacity;
  o.processing = processing;
  o.horizon = horizon;
  for (const auto& t : pr.types) o.types.emplace_back(t.variety, t.load);
  o.presence = pr.presence;
  return inst;
}

// All best joint fills by trying every combination of per-press extras.
struct JointResult {
  double best = -std::numeric_limits<double>::infinity();
  int count = 0;
};

inline double imminent(const grapepress::Truck& tr, int age, const grapepress::Prices& prices) {
  if (tr.load <= 0) return 0.0;
  if (age + 1 >= grapepress::kRejectAge) return prices(1) * tr.load;
  if (age + 1 == grapepress::kDegradeAge && !tr.degraded) return (prices(tr.variety) - prices(1)) * tr.load;
  return 0.0;
}

// Aggregate mode: each press takes some tonnes of one variety; tonnes are drawn
// oldest-first within a variety.
inline JointResult joint_brute(const std::vector<grapepress::PressSlot>& presses, const grapepress::QueueState& queue,
                               int t, const grapepress::TableSet& tables, int cap, const grapepress::Prices& prices = {}) {
  using namespace grapepress;
  JointResult result;
  std::vector<Control> choice(presses.size(), Control::none());

  auto score = [&]() {
    int total = 0;
    std::map<int, int> take;
    for (const auto& c : choice) {
      total += c.tonnes;
      if (!c.is_none()) take[c.variety] += c.tonnes;
    }
    if (total > cap) return -std::numeric_limits<double>::infinity();
    for (const auto& [v, tonnes] : take)
      if (tonnes > queue.tonnes(v)) return -std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (std::size_t p = 0; p < presses.size(); ++p) {
      const auto& slot = presses[p];
      Control sum = slot.committed;
      if (!choice[p].is_none()) sum = Control{choice[p].variety, slot.committed.tonnes + choice[p].tonnes};
      s += payoff(t, slot.start, sum, prices) +
           tables.for_type(slot.start.type).lookup(t + 1, transition(t, slot.start, sum));
    }
    auto sorted = queue.trucks;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Truck& a, const Truck& b) { return std::tie(a.arrival, a.id) < std::tie(b.arrival, b.id); });
    for (auto& tr : sorted) {
      int& left = take[tr.variety];
      const int used = std::min(left, tr.load);
      left -= used;
      tr.load -= used;
      s -= imminent(tr, t - tr.arrival, prices);
    }
    return s;
  };

  std::function<void(std::size_t)> rec = [&](std::size_t p) {
    if (p == presses.size()) {
      const double s = score();
      if (std::isinf(s)) return;
      if (result.count == 0 || s > result.best + 1e-9 * std::max(1.0, std::abs(result.best))) {
        result.best = s;
        result.count = 1;
      } else if (s >= result.best - 1e-9 * std::max(1.0, std::abs(result.best))) {
        ++result.count;
      }
      return;
    }
    const auto& slot = presses[p];
    choice[p] = Control::none();
    rec(p + 1);
    if (slot.start.blocked()) return;
    const PressState now = slot.committed.is_none() ? slot.start : fill(slot.start, slot.committed);
    if (now.blocked()) return;
    for (int v = 1; v <= grapepress::kNumVarieties; ++v) {
      if (!now.empty() && now.variety != v) continue;
      for (int l = grapepress::kLoadStep; l <= now.spare(); l += grapepress::kLoadStep) {
        choice[p] = Control{v, l};
        rec(p + 1);
      }
    }
    choice[p] = Control::none();
  };
  rec(0);
  return result;
}

}  // namespace oracle
