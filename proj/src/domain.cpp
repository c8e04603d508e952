#include "grapepress/domain.hpp"

#include <cmath>
#include <sstream>

namespace grapepress {

std::string PressType::name() const {
  if (*this == kTypeI) return "I";
  if (*this == kTypeII) return "II";
  return "C" + std::to_string(capacity) + "TP" + std::to_string(processing);
}

void validate(const PressType& type) {
  if (type.capacity < 2 * kLoadStep || type.capacity % kLoadStep != 0)
    throw DomainError("press capacity must be a multiple of 5 t and at least 10 t");
  if (type.processing < 1) throw DomainError("press processing time must be positive");
}

void validate(const PressState& s) {
  validate(s.type);
  if (s.variety < 0 || s.variety > kNumVarieties) throw DomainError("press variety out of range");
  if (s.load < 0 || s.load > s.type.capacity || s.load % kLoadStep != 0)
    throw DomainError("press load must be a multiple of 5 within capacity");
  if ((s.variety == 0) != (s.load == 0)) throw DomainError("press variety and load disagree on emptiness");
  if (s.remaining < 0 || s.remaining > s.type.processing) throw DomainError("press remaining time out of range");
  if (s.remaining > 0 && s.load != s.type.capacity) throw DomainError("only a full press can be processing");
}

bool is_valid(const PressState& state) noexcept {
  try {
    validate(state);
    return true;
  } catch (const DomainError&) {
    return false;
  }
}

TruckType truck_type(int index) {
  if (index < 1 || index > kNumTruckTypes) throw DomainError("truck type index out of range");
  return {(index - 1) / kNumLoadClasses + 1, ((index - 1) % kNumLoadClasses + 1) * kLoadStep};
}

const std::array<TruckType, kNumTruckTypes>& all_truck_types() {
  static const auto types = [] {
    std::array<TruckType, kNumTruckTypes> out{};
    for (int i = 1; i <= kNumTruckTypes; ++i) out[i - 1] = truck_type(i);
    return out;
  }();
  return types;
}

int load_class(double tonnes) {
  if (!(tonnes > 0.0)) throw DomainError("load must be positive");
  // Small slack so that 10.000000001 read from a CSV still maps to 10.
  const int cls = static_cast<int>(std::ceil(tonnes / kLoadStep - 1e-9)) * kLoadStep;
  if (cls > kMaxTruckLoad) throw DomainError("load exceeds the largest load class (25 t)");
  return cls;
}

double Prices::operator()(int variety) const {
  if (variety < 1 || variety > kNumVarieties) return 0.0;
  return per_tonne[variety - 1];
}

Prices Prices::scaled(double factor) const {
  Prices out = *this;
  for (auto& p : out.per_tonne) p *= factor;
  return out;
}

std::vector<Control> gamma(int /*t*/, const PressState& state) {
  std::vector<Control> out{Control::none()};
  if (state.blocked()) return out;
  if (state.empty()) {
    for (int v = 1; v <= kNumVarieties; ++v)
      for (int l = kLoadStep; l <= state.type.capacity; l += kLoadStep) out.push_back({v, l});
  } else {
    for (int l = kLoadStep; l <= state.spare(); l += kLoadStep) out.push_back({state.variety, l});
  }
  return out;
}

bool is_feasible(const PressState& state, const Control& c) noexcept {
  if (c.is_none()) return c.variety == 0 || (c.variety >= 1 && c.variety <= kNumVarieties);
  if (state.blocked()) return false;
  if (c.tonnes < 0 || c.tonnes % kLoadStep != 0) return false;
  if (c.variety < 1 || c.variety > kNumVarieties) return false;
  if (!state.empty() && c.variety != state.variety) return false;
  return c.tonnes <= state.spare();
}

PressState fill(const PressState& state, const Control& c) {
  if (!is_feasible(state, c)) throw DomainError("infeasible control " + to_string(c) + " for press " + to_string(state));
  if (c.is_none()) return state;
  PressState next = state;
  next.variety = c.variety;
  next.load += c.tonnes;
  if (next.load == next.type.capacity) next.remaining = next.type.processing;
  return next;
}

PressState tick(const PressState& state) {
  if (!state.blocked()) return state;
  PressState next = state;
  if (--next.remaining == 0) {
    next.variety = 0;
    next.load = 0;
  }
  return next;
}

PressState transition(int /*t*/, const PressState& state, const Control& c) {
  if (state.blocked()) {
    if (!c.is_none()) throw DomainError("press is processing and admits only the no-fill control");
    return tick(state);
  }
  return fill(state, c);
}

double payoff(int /*t*/, const PressState& prev, const Control& c, const Prices& prices) {
  if (c.is_none() || prev.blocked()) return 0.0;
  if (prev.load + c.tonnes != prev.type.capacity) return 0.0;
  return prices(c.variety) * prev.type.capacity;
}

std::string to_string(const PressState& s) {
  std::ostringstream os;
  os << "(v=" << s.variety << ",l=" << s.load << ",r=" << s.remaining << ",C=" << s.type.capacity << ")";
  return os.str();
}

std::string to_string(const Control& c) {
  if (c.is_none()) return "none";
  return "(" + std::to_string(c.variety) + "," + std::to_string(c.tonnes) + ")";
}

}  // namespace grapepress
