#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "grapepress/arrivals.hpp"
#include "grapepress/domain.hpp"

namespace grapepress {

class TableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense numbering of the reachable states of one press type:
// empty, idle partial fills (v, 5..C-5), and processing (v, C, 1..TP).
class StateSpace {
 public:
  explicit StateSpace(PressType type);

  std::size_t size() const { return size_; }
  // Throws TableError for states the press type cannot reach.
  std::size_t index(const PressState& state) const;
  bool contains(const PressState& state) const noexcept;
  PressState state(std::size_t index) const;
  PressType type() const { return type_; }

  friend bool operator==(const StateSpace&, const StateSpace&) = default;

 private:
  PressType type_;
  std::size_t partial_per_variety_;
  std::size_t size_;
};

// One isolated press under random truck arrivals. presence[t][i] is the
// probability that at least one truck of types[i] arrives in interval t.
struct TableProblem {
  PressType press = kTypeI;
  int horizon = kHorizon;
  Prices prices;
  std::vector<TruckType> types;
  std::vector<std::vector<double>> presence;
  std::string model_hash;

  void validate() const;
};

TableProblem make_problem(PressType press, const ArrivalModel& model, const Prices& prices = {});

// V*(t, x): maximal expected revenue from intervals t..T-1 for a press in
// state x at the start of interval t. Row T is the post-horizon boundary and
// is identically zero.
class ValueTable {
 public:
  ValueTable(PressType press, int horizon, Prices prices, std::string model_hash);

  PressType press_type() const { return space_.type(); }
  int horizon() const { return horizon_; }
  const Prices& prices() const { return prices_; }
  const std::string& model_hash() const { return model_hash_; }
  const StateSpace& space() const { return space_; }

  double lookup(int t, const PressState& state) const;
  // Same, but first verifies the table was built from `model_hash`.
  double lookup(int t, const PressState& state, const std::string& model_hash) const;
  void check_model(const std::string& model_hash) const;

  double at(int t, std::size_t state_index) const { return values_[offset(t) + state_index]; }
  void set(int t, std::size_t state_index, double value) { values_[offset(t) + state_index] = value; }

  friend bool operator==(const ValueTable&, const ValueTable&) = default;

 private:
  std::size_t offset(int t) const;

  StateSpace space_;
  int horizon_;
  Prices prices_;
  std::string model_hash_;
  std::vector<double> values_;
};

// A control option that is available with some probability independently of
// the others.
struct RandomOption {
  double value = 0.0;
  double probability = 0.0;
};

// E[max(q0, value_i over available options)] with independent availability,
// by sorting options and telescoping the probabilities.
double expected_max(double fallback, std::span<const RandomOption> options);
// Same quantity by summing over all 2^k availability patterns. k <= 24.
double expected_max_enumerated(double fallback, std::span<const RandomOption> options);

enum class Expectation { kRanking, kEnumerate };

// Expected value of interval t from `state`, using row t+1 of `table`.
double bellman_step(const TableProblem& problem, int t, const PressState& state, const ValueTable& table,
                    Expectation mode = Expectation::kRanking);

// The one-step options of `state` at interval t against row t+1: the value of
// the no-fill control and every truck-type-shaped fill with its presence
// probability.
struct StepOptions {
  double fallback = 0.0;
  std::vector<RandomOption> options;
  std::vector<TruckType> types;
};
StepOptions step_options(const TableProblem& problem, int t, const PressState& state, const ValueTable& table);

ValueTable build_table(const TableProblem& problem, Expectation mode = Expectation::kRanking);
ValueTable build_table(PressType press, const ArrivalModel& model, const Prices& prices = {});

// Text artifact: header lines then one row per (t, state).
void write_table(std::ostream& os, const ValueTable& table);
ValueTable read_table(std::istream& is);
void save_table(const std::string& path, const ValueTable& table);
ValueTable load_table(const std::string& path);

}  // namespace grapepress
