#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "grapepress/arrivals.hpp"
#include "grapepress/domain.hpp"
#include "grapepress/valuetable.hpp"

namespace grapepress {

// Queue ages (in intervals) at which a delivery degrades to variety 1 and at
// which it is discarded.
inline constexpr int kDegradeAge = 4;
inline constexpr int kRejectAge = 8;
// Tonnes that can be moved into presses during one interval.
inline constexpr int kIntervalCap = 75;

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Trucks waiting to unload, ordered by (arrival, id).
struct QueueState {
  std::vector<Truck> trucks;
  int current_t = 0;

  int age(const Truck& truck) const { return current_t - truck.arrival; }
  int tonnes() const;
  int tonnes(int variety) const;
  bool empty() const { return trucks.empty(); }
  const Truck* find(TruckId id) const;

  // Appends a new delivery arriving at current_t; returns its id.
  TruckId add(const TruckType& type, TruckId id);
  void sort();
  // Throws EngineError if an aged-out or mis-degraded truck is present.
  void validate() const;
};

// Cumulative losses in revenue units plus the tonnage behind them.
struct LossLedger {
  double degradation = 0.0;
  double rejection = 0.0;
  double leftover = 0.0;
  int degraded_tonnes = 0;
  int rejected_tonnes = 0;
  int leftover_tonnes = 0;

  double total() const { return degradation + rejection + leftover; }
  LossLedger& operator+=(const LossLedger& other);
  friend bool operator==(const LossLedger&, const LossLedger&) = default;
};

struct AgingResult {
  QueueState queue;
  LossLedger charges;
  std::vector<Truck> degraded;
  std::vector<Truck> rejected;
};

// Advances the queue clock by one interval. Trucks reaching age 4 degrade to
// variety 1 at a cost of (Price(v) - Price(1)) per tonne; trucks reaching age
// 8 are discarded at Price(1) per tonne. When the clock reaches the horizon
// every remaining truck is charged its full value as leftover.
AgingResult age_queue(const QueueState& queue, int horizon = kHorizon, const Prices& prices = {});

// Degradation and rejection that would be charged at the next aging if
// `queue_after` were left as is at interval t.
double loss(const QueueState& queue_after, int t, const Prices& prices = {});

// Value tables for every press type in a fleet, built from one model.
class TableSet {
 public:
  TableSet() = default;
  explicit TableSet(std::vector<ValueTable> tables);

  const ValueTable& for_type(PressType type) const;
  const std::string& model_hash() const { return model_hash_; }
  int horizon() const { return horizon_; }
  const std::vector<ValueTable>& tables() const { return tables_; }

 private:
  std::vector<ValueTable> tables_;
  std::string model_hash_;
  int horizon_ = 0;
};

TableSet build_tables(std::span<const PressType> types, const ArrivalModel& model, const Prices& prices = {});

struct EngineOptions {
  int tonnage_cap = kIntervalCap;
  // Each press takes at most one whole truck per interval (no splitting or
  // combining). Matches the single-truck choice the value tables assume.
  bool whole_trucks = false;
  Prices prices;
};

// A press at the start of an interval plus what has already been poured into
// it during this interval.
struct PressSlot {
  PressState start;
  Control committed;
};

struct FillDecision {
  std::vector<Control> controls;  // extra fill per press
  double score = 0.0;

  bool all_none() const;
  int tonnes() const;
};

// All score-maximizing joint fills for one interval. Held as a memoized
// search so that the (possibly large) tie set can be counted, listed or
// sampled uniformly without materializing it.
class DecisionSet {
 public:
  double best_score() const;
  // Number of maximizing decisions.
  double count() const;
  bool only_none() const;
  std::vector<FillDecision> enumerate(std::size_t limit = std::numeric_limits<std::size_t>::max()) const;
  FillDecision sample(Rng& rng) const;
  // Score of an arbitrary joint decision; throws if it is infeasible.
  double rescore(std::span<const Control> controls) const;

  struct Impl;

 private:
  friend DecisionSet fill_decisions(std::span<const PressSlot>, const QueueState&, int, const TableSet&,
                                    const EngineOptions&, int);
  std::shared_ptr<Impl> impl_;
};

// Enumerates joint per-press fills that respect gamma, the per-variety tonnage
// in the queue and the interval cap; scores each as revenue plus
// continuation value minus imminent queue losses; returns the maximizers.
DecisionSet fill_decisions(std::span<const PressSlot> presses, const QueueState& queue, int t, const TableSet& tables,
                           const EngineOptions& options = {}, int cap_used = 0);
DecisionSet fill_decisions(std::span<const PressState> presses, const QueueState& queue, int t,
                           const TableSet& tables, const EngineOptions& options = {});

struct StrategyRow {
  int interval = 0;
  int press = 0;
  TruckId truck = 0;
  int arrival = 0;
  int variety = 0;
  int tonnes = 0;

  friend bool operator==(const StrategyRow&, const StrategyRow&) = default;
};

struct Realization {
  std::vector<StrategyRow> rows;
  QueueState queue;
};

// Consumes trucks oldest-first to deliver each press's fill, splitting and
// combining loads in 5 t steps (or matching whole trucks in whole-truck mode).
Realization realize(const FillDecision& decision, const QueueState& queue, int t, const EngineOptions& options = {});

struct ModelRun {
  std::vector<StrategyRow> rows;
  QueueState queue;
  std::vector<PressState> presses;  // after fill and one interval of processing
  double payoff = 0.0;
  FillDecision decision;
};

ModelRun run_model(std::span<const PressState> presses, const QueueState& queue, int t, const TableSet& tables,
                   Rng& rng, const EngineOptions& options = {});

void write_strategy(std::ostream& os, std::span<const StrategyRow> rows, bool header = true);

}  // namespace grapepress
