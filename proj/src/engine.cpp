#include "grapepress/engine.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_map>

namespace grapepress {

namespace {

double imminent_loss(const Truck& truck, int age, const Prices& prices) {
  if (truck.load <= 0) return 0.0;
  const int next_age = age + 1;
  if (next_age >= kRejectAge) return prices(1) * truck.load;
  if (next_age == kDegradeAge && !truck.degraded) return (prices(truck.variety) - prices(1)) * truck.load;
  return 0.0;
}

bool ties(double value, double best) {
  return value >= best - 1e-9 * std::max(1.0, std::abs(best));
}

}  // namespace

// ---------------------------------------------------------------------------
// Queue

int QueueState::tonnes() const {
  int sum = 0;
  for (const auto& t : trucks) sum += t.load;
  return sum;
}

int QueueState::tonnes(int variety) const {
  int sum = 0;
  for (const auto& t : trucks)
    if (t.variety == variety) sum += t.load;
  return sum;
}

const Truck* QueueState::find(TruckId id) const {
  for (const auto& t : trucks)
    if (t.id == id) return &t;
  return nullptr;
}

TruckId QueueState::add(const TruckType& type, TruckId id) {
  trucks.push_back(Truck{id, type.variety, type.load, current_t, false, type.variety});
  return id;
}

void QueueState::sort() {
  std::stable_sort(trucks.begin(), trucks.end(),
                   [](const Truck& a, const Truck& b) { return a.arrival != b.arrival ? a.arrival < b.arrival : a.id < b.id; });
}

void QueueState::validate() const {
  for (const auto& t : trucks) {
    if (age(t) >= kRejectAge) throw EngineError("truck " + std::to_string(t.id) + " is past the rejection age");
    if (age(t) < 0) throw EngineError("truck " + std::to_string(t.id) + " arrives in the future");
    if (age(t) >= kDegradeAge && (!t.degraded || t.variety != 1))
      throw EngineError("truck " + std::to_string(t.id) + " should have degraded");
    if (t.degraded && t.variety != 1) throw EngineError("degraded truck must carry variety 1");
    if (t.load <= 0 || t.load > kMaxTruckLoad || t.load % kLoadStep != 0)
      throw EngineError("truck " + std::to_string(t.id) + " has an invalid remaining load");
  }
}

LossLedger& LossLedger::operator+=(const LossLedger& o) {
  degradation += o.degradation;
  rejection += o.rejection;
  leftover += o.leftover;
  degraded_tonnes += o.degraded_tonnes;
  rejected_tonnes += o.rejected_tonnes;
  leftover_tonnes += o.leftover_tonnes;
  return *this;
}

AgingResult age_queue(const QueueState& queue, int horizon, const Prices& prices) {
  AgingResult out;
  out.queue.current_t = queue.current_t + 1;
  for (Truck truck : queue.trucks) {
    const int age = out.queue.current_t - truck.arrival;
    if (age >= kRejectAge) {
      out.charges.rejection += prices(1) * truck.load;
      out.charges.rejected_tonnes += truck.load;
      out.rejected.push_back(truck);
      continue;
    }
    if (age >= kDegradeAge && !truck.degraded) {
      out.charges.degradation += (prices(truck.variety) - prices(1)) * truck.load;
      out.charges.degraded_tonnes += truck.load;
      truck.variety = 1;
      truck.degraded = true;
      out.degraded.push_back(truck);
    }
    out.queue.trucks.push_back(truck);
  }
  if (out.queue.current_t >= horizon) {
    for (const auto& truck : out.queue.trucks) {
      out.charges.leftover += prices(truck.variety) * truck.load;
      out.charges.leftover_tonnes += truck.load;
    }
    out.queue.trucks.clear();
  }
  return out;
}

double loss(const QueueState& queue_after, int t, const Prices& prices) {
  double sum = 0.0;
  for (const auto& truck : queue_after.trucks) sum += imminent_loss(truck, t - truck.arrival, prices);
  return sum;
}

// ---------------------------------------------------------------------------
// Tables

TableSet::TableSet(std::vector<ValueTable> tables) : tables_(std::move(tables)) {
  if (tables_.empty()) throw EngineError("table set is empty");
  model_hash_ = tables_.front().model_hash();
  horizon_ = tables_.front().horizon();
  for (const auto& t : tables_) {
    if (t.model_hash() != model_hash_)
      throw TableError("value tables disagree on model hash: " + model_hash_ + " vs " + t.model_hash());
    if (t.horizon() != horizon_) throw TableError("value tables disagree on horizon");
  }
}

const ValueTable& TableSet::for_type(PressType type) const {
  for (const auto& t : tables_)
    if (t.press_type() == type) return t;
  throw TableError("no value table for press type " + type.name());
}

TableSet build_tables(std::span<const PressType> types, const ArrivalModel& model, const Prices& prices) {
  std::vector<PressType> distinct;
  for (const auto& t : types)
    if (std::find(distinct.begin(), distinct.end(), t) == distinct.end()) distinct.push_back(t);
  std::vector<ValueTable> tables;
  for (const auto& t : distinct) tables.push_back(build_table(t, model, prices));
  return TableSet(std::move(tables));
}

// ---------------------------------------------------------------------------
// Decision search

bool FillDecision::all_none() const {
  return std::all_of(controls.begin(), controls.end(), [](const Control& c) { return c.is_none(); });
}

int FillDecision::tonnes() const {
  int sum = 0;
  for (const auto& c : controls) sum += c.tonnes;
  return sum;
}

struct DecisionSet::Impl {
  struct Option {
    Control extra;
    int resource = -1;
    int units = 0;
    double term = 0.0;
  };
  struct Node {
    double value = 0.0;
    double count = 0.0;
  };

  std::vector<std::vector<Option>> options;  // per press
  std::vector<int> available;                // units per resource
  std::vector<int> tonnes_per_unit;          // per resource
  std::vector<std::vector<double>> loss_by_units;
  int cap_tonnes = 0;
  int bits = 8;
  std::vector<std::unordered_map<std::uint64_t, Node>> memo;
  Node root;

  int units(std::uint64_t usage, int r) const {
    return static_cast<int>((usage >> (r * bits)) & ((std::uint64_t{1} << bits) - 1));
  }

  int used_tonnes(std::uint64_t usage) const {
    int sum = 0;
    for (std::size_t r = 0; r < available.size(); ++r) sum += units(usage, static_cast<int>(r)) * tonnes_per_unit[r];
    return sum;
  }

  // Usage after taking option o, or nullopt-like sentinel when infeasible.
  bool take(std::uint64_t usage, const Option& o, std::uint64_t& next) const {
    if (o.resource < 0) {
      next = usage;
      return true;
    }
    const int have = units(usage, o.resource);
    if (have + o.units > available[o.resource]) return false;
    if (have + o.units >= (1 << bits)) return false;
    if (used_tonnes(usage) + o.extra.tonnes > cap_tonnes) return false;
    next = usage + (static_cast<std::uint64_t>(o.units) << (o.resource * bits));
    return true;
  }

  double leaf_value(std::uint64_t usage) const {
    double l = 0.0;
    for (std::size_t r = 0; r < available.size(); ++r) l += loss_by_units[r][units(usage, static_cast<int>(r))];
    return -l;
  }

  const Node& solve(std::size_t press, std::uint64_t usage) {
    auto& level = memo[press];
    if (auto it = level.find(usage); it != level.end()) return it->second;
    Node node;
    if (press == options.size()) {
      node = {leaf_value(usage), 1.0};
    } else {
      node.value = -std::numeric_limits<double>::infinity();
      std::vector<std::pair<double, double>> scored;
      for (const auto& o : options[press]) {
        std::uint64_t next = 0;
        if (!take(usage, o, next)) continue;
        const Node& child = solve(press + 1, next);
        scored.emplace_back(o.term + child.value, child.count);
        node.value = std::max(node.value, o.term + child.value);
      }
      for (const auto& [v, c] : scored)
        if (ties(v, node.value)) node.count += c;
    }
    return memo[press].emplace(usage, node).first->second;
  }

  const Node& node(std::size_t press, std::uint64_t usage) const { return memo[press].at(usage); }

  template <typename Visit>
  void for_each_tied(std::size_t press, std::uint64_t usage, Visit&& visit) const {
    const double best = node(press, usage).value;
    for (const auto& o : options[press]) {
      std::uint64_t next = 0;
      if (!take(usage, o, next)) continue;
      const auto& child = node(press + 1, next);
      if (ties(o.term + child.value, best)) visit(o, next, child);
    }
  }

  void enumerate(std::size_t press, std::uint64_t usage, std::vector<Control>& prefix,
                 std::vector<FillDecision>& out, std::size_t limit) const {
    if (out.size() >= limit) return;
    if (press == options.size()) {
      out.push_back({prefix, root.value});
      return;
    }
    for_each_tied(press, usage, [&](const Option& o, std::uint64_t next, const Node&) {
      prefix.push_back(o.extra);
      enumerate(press + 1, next, prefix, out, limit);
      prefix.pop_back();
    });
  }
};

double DecisionSet::best_score() const { return impl_->root.value; }
double DecisionSet::count() const { return impl_->root.count; }

bool DecisionSet::only_none() const {
  const auto first = enumerate(2);
  return first.size() == 1 && first.front().all_none();
}

std::vector<FillDecision> DecisionSet::enumerate(std::size_t limit) const {
  std::vector<FillDecision> out;
  std::vector<Control> prefix;
  impl_->enumerate(0, 0, prefix, out, limit);
  return out;
}

FillDecision DecisionSet::sample(Rng& rng) const {
  FillDecision out;
  out.score = impl_->root.value;
  std::uint64_t usage = 0;
  for (std::size_t p = 0; p < impl_->options.size(); ++p) {
    std::vector<std::pair<const Impl::Option*, std::uint64_t>> tied;
    std::vector<double> weights;
    impl_->for_each_tied(p, usage, [&](const Impl::Option& o, std::uint64_t next, const Impl::Node& child) {
      tied.emplace_back(&o, next);
      weights.push_back(child.count);
    });
    std::size_t pick = 0;
    if (tied.size() > 1) pick = std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng);
    out.controls.push_back(tied[pick].first->extra);
    usage = tied[pick].second;
  }
  return out;
}

double DecisionSet::rescore(std::span<const Control> controls) const {
  if (controls.size() != impl_->options.size()) throw EngineError("decision has the wrong number of presses");
  std::uint64_t usage = 0;
  double score = 0.0;
  for (std::size_t p = 0; p < controls.size(); ++p) {
    const auto& opts = impl_->options[p];
    const auto it = std::find_if(opts.begin(), opts.end(), [&](const auto& o) { return o.extra == controls[p]; });
    if (it == opts.end()) throw EngineError("control " + to_string(controls[p]) + " infeasible for press " + std::to_string(p));
    std::uint64_t next = 0;
    if (!impl_->take(usage, *it, next)) throw EngineError("decision exceeds queue availability or the interval cap");
    usage = next;
    score += it->term;
  }
  return score + impl_->leaf_value(usage);
}

DecisionSet fill_decisions(std::span<const PressSlot> presses, const QueueState& queue, int t, const TableSet& tables,
                           const EngineOptions& opts, int cap_used) {
  auto impl = std::make_shared<DecisionSet::Impl>();
  const Prices& prices = opts.prices;

  // Resources: tonnage per variety in 5 t units, or whole trucks per type.
  std::vector<std::vector<const Truck*>> by_resource;
  if (opts.whole_trucks) {
    if (presses.size() > 7) throw EngineError("whole-truck mode supports at most 7 presses");
    impl->bits = 3;
    by_resource.resize(kNumTruckTypes);
    for (const auto& tr : queue.trucks) by_resource[type_index({tr.variety, tr.load}) - 1].push_back(&tr);
    for (int r = 0; r < kNumTruckTypes; ++r) {
      impl->available.push_back(static_cast<int>(by_resource[r].size()));
      impl->tonnes_per_unit.push_back(truck_type(r + 1).load);
    }
  } else {
    impl->bits = 8;
    by_resource.resize(kNumVarieties);
    for (const auto& tr : queue.trucks) by_resource[tr.variety - 1].push_back(&tr);
    for (int v = 1; v <= kNumVarieties; ++v) {
      impl->available.push_back(std::min(queue.tonnes(v) / kLoadStep, 255));
      impl->tonnes_per_unit.push_back(kLoadStep);
    }
  }
  impl->cap_tonnes = std::max(0, opts.tonnage_cap - cap_used);

  // Loss of what remains of each resource after consuming u units oldest-first.
  for (std::size_t r = 0; r < by_resource.size(); ++r) {
    auto trucks = by_resource[r];
    std::stable_sort(trucks.begin(), trucks.end(), [](const Truck* a, const Truck* b) {
      return a->arrival != b->arrival ? a->arrival < b->arrival : a->id < b->id;
    });
    std::vector<double> table;
    for (int u = 0; u <= impl->available[r]; ++u) {
      double l = 0.0;
      if (opts.whole_trucks) {
        for (std::size_t k = static_cast<std::size_t>(u); k < trucks.size(); ++k)
          l += imminent_loss(*trucks[k], t - trucks[k]->arrival, prices);
      } else {
        int to_take = u * kLoadStep;
        for (const Truck* tr : trucks) {
          Truck rest = *tr;
          const int used = std::min(to_take, rest.load);
          rest.load -= used;
          to_take -= used;
          l += imminent_loss(rest, t - rest.arrival, prices);
        }
      }
      table.push_back(l);
    }
    impl->loss_by_units.push_back(std::move(table));
  }

  for (const auto& slot : presses) {
    const ValueTable& table = tables.for_type(slot.start.type);
    std::vector<DecisionSet::Impl::Option> opts_for_press;
    auto term = [&](const Control& total) {
      return payoff(t, slot.start, total, prices) + table.lookup(t + 1, transition(t, slot.start, total));
    };
    opts_for_press.push_back({Control::none(), -1, 0, term(slot.committed)});
    const PressState observed = slot.start.blocked() ? slot.start : fill(slot.start, slot.committed);
    if (!observed.blocked()) {
      for (const auto& c : gamma(t, observed)) {
        if (c.is_none()) continue;
        int resource = -1;
        int units = 0;
        if (opts.whole_trucks) {
          if (c.tonnes > kMaxTruckLoad) continue;
          resource = type_index({c.variety, c.tonnes}) - 1;
          units = 1;
        } else {
          resource = c.variety - 1;
          units = c.tonnes / kLoadStep;
        }
        if (units > impl->available[resource] || c.tonnes > impl->cap_tonnes) continue;
        const Control total{c.variety, slot.committed.tonnes + c.tonnes};
        opts_for_press.push_back({c, resource, units, term(total)});
      }
    }
    impl->options.push_back(std::move(opts_for_press));
  }

  impl->memo.resize(presses.size() + 1);
  impl->root = impl->solve(0, 0);
  DecisionSet set;
  set.impl_ = std::move(impl);
  return set;
}

DecisionSet fill_decisions(std::span<const PressState> presses, const QueueState& queue, int t,
                           const TableSet& tables, const EngineOptions& options) {
  std::vector<PressSlot> slots;
  for (const auto& p : presses) slots.push_back({p, Control::none()});
  return fill_decisions(slots, queue, t, tables, options, 0);
}

// ---------------------------------------------------------------------------
// Realization

Realization realize(const FillDecision& decision, const QueueState& queue, int t, const EngineOptions& options) {
  Realization out;
  out.queue = queue;
  out.queue.sort();
  for (std::size_t p = 0; p < decision.controls.size(); ++p) {
    const Control& c = decision.controls[p];
    if (c.is_none()) continue;
    int need = c.tonnes;
    for (auto& truck : out.queue.trucks) {
      if (need == 0) break;
      if (truck.variety != c.variety || truck.load == 0) continue;
      if (options.whole_trucks && truck.load != c.tonnes) continue;
      const int used = std::min(need, truck.load);
      out.rows.push_back({t, static_cast<int>(p), truck.id, truck.arrival, truck.variety, used});
      truck.load -= used;
      need -= used;
    }
    if (need != 0) throw EngineError("queue cannot supply fill " + to_string(c) + " for press " + std::to_string(p));
  }
  std::erase_if(out.queue.trucks, [](const Truck& tr) { return tr.load == 0; });
  return out;
}

ModelRun run_model(std::span<const PressState> presses, const QueueState& queue, int t, const TableSet& tables,
                   Rng& rng, const EngineOptions& options) {
  const auto set = fill_decisions(presses, queue, t, tables, options);
  ModelRun run;
  run.decision = set.sample(rng);
  if (run.decision.all_none()) {
    run.queue = queue;
  } else {
    auto realized = realize(run.decision, queue, t, options);
    run.rows = std::move(realized.rows);
    run.queue = std::move(realized.queue);
  }
  for (std::size_t p = 0; p < presses.size(); ++p) {
    run.payoff += payoff(t, presses[p], run.decision.controls[p], options.prices);
    run.presses.push_back(transition(t, presses[p], run.decision.controls[p]));
  }
  return run;
}

void write_strategy(std::ostream& os, std::span<const StrategyRow> rows, bool header) {
  if (header) os << "interval,press_id,truck_id,arrival,variety,tonnes\n";
  for (const auto& r : rows)
    os << r.interval << ',' << r.press << ',' << r.truck << ',' << r.arrival << ',' << r.variety << ',' << r.tonnes << '\n';
}

}  // namespace grapepress
