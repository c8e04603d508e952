#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace grapepress {

// Tonnes are always integral multiples of kLoadStep.
inline constexpr int kLoadStep = 5;
inline constexpr int kNumVarieties = 4;
inline constexpr int kNumLoadClasses = 5;
inline constexpr int kNumTruckTypes = kNumVarieties * kNumLoadClasses;
inline constexpr int kMaxTruckLoad = kLoadStep * kNumLoadClasses;
inline constexpr int kHorizon = 34;

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A press model: capacity in tonnes and processing duration in intervals.
struct PressType {
  int capacity = 25;
  int processing = 4;

  friend constexpr bool operator==(const PressType&, const PressType&) = default;
  friend constexpr auto operator<=>(const PressType&, const PressType&) = default;

  // Number of 5 t steps that fit in the press.
  constexpr int steps() const { return capacity / kLoadStep; }
  std::string name() const;
};

inline constexpr PressType kTypeI{25, 4};
inline constexpr PressType kTypeII{50, 8};

// Throws DomainError unless capacity is a positive multiple of 5 (at least
// 10 t so a partial state exists) and processing >= 1.
void validate(const PressType& type);

// State of one press. variety 0 means empty; remaining > 0 means the press
// is processing and cannot take grapes.
struct PressState {
  int variety = 0;
  int load = 0;
  int remaining = 0;
  PressType type = kTypeI;

  friend constexpr bool operator==(const PressState&, const PressState&) = default;

  constexpr bool empty() const { return variety == 0; }
  constexpr bool blocked() const { return remaining > 0; }
  constexpr int spare() const { return type.capacity - load; }
};

// Throws DomainError naming the violated invariant.
void validate(const PressState& state);
bool is_valid(const PressState& state) noexcept;

// (variety, load class) of a delivery. Types are numbered 1..20 in
// variety-major order: index = (variety - 1) * 5 + load / 5.
struct TruckType {
  int variety = 1;
  int load = 5;

  friend constexpr bool operator==(const TruckType&, const TruckType&) = default;
  friend constexpr auto operator<=>(const TruckType&, const TruckType&) = default;
};

constexpr int type_index(const TruckType& t) {
  return (t.variety - 1) * kNumLoadClasses + t.load / kLoadStep;
}
TruckType truck_type(int index);
const std::array<TruckType, kNumTruckTypes>& all_truck_types();

// Load class of a raw weight: (0,5] -> 5, (5,10] -> 10, ...
int load_class(double tonnes);

using TruckId = std::uint64_t;

struct Truck {
  TruckId id = 0;
  int variety = 1;
  int load = 5;  // tonnes still on the truck
  int arrival = 0;
  bool degraded = false;
  int original_variety = 1;

  friend bool operator==(const Truck&, const Truck&) = default;
};

// Either the symbolic no-fill control or (variety, tonnes) poured into one
// press during one interval.
struct Control {
  int variety = 0;
  int tonnes = 0;

  static constexpr Control none() { return {}; }
  constexpr bool is_none() const { return tonnes == 0; }

  friend constexpr bool operator==(const Control&, const Control&) = default;
  friend constexpr auto operator<=>(const Control&, const Control&) = default;
};

// Unit price per tonne by variety; default is the variety id itself.
struct Prices {
  std::array<double, kNumVarieties> per_tonne{1.0, 2.0, 3.0, 4.0};

  double operator()(int variety) const;
  Prices scaled(double factor) const;
  friend bool operator==(const Prices&, const Prices&) = default;
};

// Feasible controls for one press. Amounts are per press, any multiple of 5
// up to the spare capacity; matching them to concrete trucks happens in the
// engine.
std::vector<Control> gamma(int t, const PressState& state);
bool is_feasible(const PressState& state, const Control& control) noexcept;

// Fill without advancing the clock. Reaching capacity from idle starts
// processing with remaining = processing time.
PressState fill(const PressState& state, const Control& control);

// One interval of processing: remaining drops by one and the press empties
// when it reaches zero. Idle presses are unchanged.
PressState tick(const PressState& state);

// Apply control then advance one interval. A blocked press only ticks; a
// press that starts processing in this interval keeps remaining = TP.
PressState transition(int t, const PressState& state, const Control& control);

// Revenue earned when the control starts a processing cycle, else 0.
double payoff(int t, const PressState& prev, const Control& control,
              const Prices& prices = {});

std::string to_string(const PressState& state);
std::string to_string(const Control& control);

}  // namespace grapepress
