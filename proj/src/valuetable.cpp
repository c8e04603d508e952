#include "grapepress/valuetable.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace grapepress {

StateSpace::StateSpace(PressType type) : type_(type) {
  validate(type);
  partial_per_variety_ = static_cast<std::size_t>(type.steps() - 1);
  size_ = 1 + kNumVarieties * partial_per_variety_ + kNumVarieties * static_cast<std::size_t>(type.processing);
}

bool StateSpace::contains(const PressState& s) const noexcept {
  if (s.type != type_ || !is_valid(s)) return false;
  // A full press is always processing.
  return !(s.load == type_.capacity && s.remaining == 0);
}

std::size_t StateSpace::index(const PressState& s) const {
  if (!contains(s)) throw TableError("state " + to_string(s) + " is not in the state space of press type " + type_.name());
  if (s.empty()) return 0;
  const auto v = static_cast<std::size_t>(s.variety - 1);
  if (!s.blocked()) return 1 + v * partial_per_variety_ + static_cast<std::size_t>(s.load / kLoadStep - 1);
  return 1 + kNumVarieties * partial_per_variety_ + v * static_cast<std::size_t>(type_.processing) +
         static_cast<std::size_t>(s.remaining - 1);
}

PressState StateSpace::state(std::size_t idx) const {
  if (idx >= size_) throw TableError("state index out of range");
  PressState s;
  s.type = type_;
  if (idx == 0) return s;
  idx -= 1;
  if (idx < kNumVarieties * partial_per_variety_) {
    s.variety = static_cast<int>(idx / partial_per_variety_) + 1;
    s.load = static_cast<int>(idx % partial_per_variety_ + 1) * kLoadStep;
    return s;
  }
  idx -= kNumVarieties * partial_per_variety_;
  const auto tp = static_cast<std::size_t>(type_.processing);
  s.variety = static_cast<int>(idx / tp) + 1;
  s.load = type_.capacity;
  s.remaining = static_cast<int>(idx % tp) + 1;
  return s;
}

void TableProblem::validate() const {
  grapepress::validate(press);
  if (horizon < 1) throw TableError("horizon must be positive");
  if (static_cast<int>(presence.size()) != horizon) throw TableError("presence needs one row per interval");
  for (const auto& row : presence) {
    if (row.size() != types.size()) throw TableError("presence row width must match the number of truck types");
    for (double p : row)
      if (!(p >= 0.0 && p <= 1.0)) throw TableError("presence probabilities must lie in [0, 1]");
  }
  for (const auto& type : types)
    if (type.variety < 1 || type.variety > kNumVarieties || type.load <= 0 || type.load % kLoadStep != 0)
      throw TableError("invalid truck type in table problem");
}

TableProblem make_problem(PressType press, const ArrivalModel& model, const Prices& prices) {
  model.validate();
  TableProblem p;
  p.press = press;
  p.horizon = model.horizon;
  p.prices = prices;
  p.model_hash = model.hash();
  p.types.assign(all_truck_types().begin(), all_truck_types().end());
  p.presence.assign(static_cast<std::size_t>(model.horizon), std::vector<double>(p.types.size(), 0.0));
  for (int t = 0; t < model.horizon; ++t)
    for (std::size_t i = 0; i < p.types.size(); ++i)
      p.presence[t][i] = model.presence_probability(t, type_index(p.types[i]));
  return p;
}

ValueTable::ValueTable(PressType press, int horizon, Prices prices, std::string model_hash)
    : space_(press), horizon_(horizon), prices_(prices), model_hash_(std::move(model_hash)) {
  if (horizon < 1) throw TableError("horizon must be positive");
  values_.assign(static_cast<std::size_t>(horizon + 1) * space_.size(), 0.0);
}

std::size_t ValueTable::offset(int t) const {
  if (t < 0 || t > horizon_) throw TableError("interval " + std::to_string(t) + " outside table horizon");
  return static_cast<std::size_t>(t) * space_.size();
}

double ValueTable::lookup(int t, const PressState& state) const {
  return values_[offset(t) + space_.index(state)];
}

double ValueTable::lookup(int t, const PressState& state, const std::string& model_hash) const {
  check_model(model_hash);
  return lookup(t, state);
}

void ValueTable::check_model(const std::string& model_hash) const {
  if (model_hash != model_hash_)
    throw TableError("value table for press type " + press_type().name() + " was built from model " + model_hash_ +
                     ", expected " + model_hash);
}

double expected_max(double fallback, std::span<const RandomOption> options) {
  std::vector<RandomOption> better;
  better.reserve(options.size());
  for (const auto& o : options)
    if (o.value > fallback && o.probability > 0.0) better.push_back(o);
  std::sort(better.begin(), better.end(), [](const auto& a, const auto& b) { return a.value > b.value; });
  double none_so_far = 1.0;
  double result = 0.0;
  for (const auto& o : better) {
    result += o.value * o.probability * none_so_far;
    none_so_far *= 1.0 - o.probability;
  }
  return result + fallback * none_so_far;
}

double expected_max_enumerated(double fallback, std::span<const RandomOption> options) {
  const std::size_t k = options.size();
  if (k > 24) throw TableError("direct enumeration limited to 24 options");
  double result = 0.0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    double prob = 1.0;
    double best = fallback;
    for (std::size_t j = 0; j < k; ++j) {
      if (mask >> j & 1) {
        prob *= options[j].probability;
        best = std::max(best, options[j].value);
      } else {
        prob *= 1.0 - options[j].probability;
      }
    }
    result += prob * best;
  }
  return result;
}

StepOptions step_options(const TableProblem& problem, int t, const PressState& state, const ValueTable& table) {
  StepOptions out;
  out.fallback = table.lookup(t + 1, transition(t, state, Control::none()));
  if (state.blocked()) return out;
  for (std::size_t i = 0; i < problem.types.size(); ++i) {
    const double prob = problem.presence[t][i];
    const Control c{problem.types[i].variety, problem.types[i].load};
    if (prob <= 0.0 || !is_feasible(state, c)) continue;
    const double q = payoff(t, state, c, problem.prices) + table.lookup(t + 1, transition(t, state, c));
    out.options.push_back({q, prob});
    out.types.push_back(problem.types[i]);
  }
  return out;
}

double bellman_step(const TableProblem& problem, int t, const PressState& state, const ValueTable& table,
                    Expectation mode) {
  if (t < 0 || t >= problem.horizon) throw TableError("bellman step interval out of range");
  const auto step = step_options(problem, t, state, table);
  return mode == Expectation::kRanking ? expected_max(step.fallback, step.options)
                                       : expected_max_enumerated(step.fallback, step.options);
}

ValueTable build_table(const TableProblem& problem, Expectation mode) {
  problem.validate();
  ValueTable table(problem.press, problem.horizon, problem.prices, problem.model_hash);
  const auto& space = table.space();
  // Row T stays zero; each slice depends only on the one after it.
  for (int t = problem.horizon - 1; t >= 0; --t)
    for (std::size_t s = 0; s < space.size(); ++s)
      table.set(t, s, bellman_step(problem, t, space.state(s), table, mode));
  return table;
}

ValueTable build_table(PressType press, const ArrivalModel& model, const Prices& prices) {
  return build_table(make_problem(press, model, prices));
}

// ---------------------------------------------------------------------------

void write_table(std::ostream& os, const ValueTable& table) {
  const auto& space = table.space();
  os << "# press value table\n";
  os << "press_type = " << table.press_type().name() << "\n";
  os << "capacity = " << table.press_type().capacity << "\n";
  os << "processing = " << table.press_type().processing << "\n";
  os << "T = " << table.horizon() << "\n";
  os << "model_hash = " << table.model_hash() << "\n";
  os << "prices =";
  char buf[64];
  for (double p : table.prices().per_tonne) {
    std::snprintf(buf, sizeof buf, " %.17g", p);
    os << buf;
  }
  os << "\n";
  os << "rows = t variety load remaining value\n";
  for (int t = 0; t <= table.horizon(); ++t) {
    for (std::size_t s = 0; s < space.size(); ++s) {
      const auto st = space.state(s);
      std::snprintf(buf, sizeof buf, "%.17g", table.at(t, s));
      os << t << ' ' << st.variety << ' ' << st.load << ' ' << st.remaining << ' ' << buf << "\n";
    }
  }
}

ValueTable read_table(std::istream& is) {
  std::map<std::string, std::string> header;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw TableError("malformed table header line: " + line);
    auto key = line.substr(0, eq);
    auto value = line.substr(eq + 1);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    while (!value.empty() && value.front() == ' ') value.erase(value.begin());
    if (key == "rows") break;
    header[key] = value;
  }
  for (const char* key : {"capacity", "processing", "T", "model_hash", "prices"})
    if (!header.count(key)) throw TableError(std::string("table header is missing '") + key + "'");

  const PressType type{std::stoi(header["capacity"]), std::stoi(header["processing"])};
  Prices prices;
  {
    std::istringstream ps(header["prices"]);
    for (auto& p : prices.per_tonne)
      if (!(ps >> p)) throw TableError("table header has a malformed price vector");
  }
  ValueTable table(type, std::stoi(header["T"]), prices, header["model_hash"]);
  const auto& space = table.space();
  std::vector<bool> seen(static_cast<std::size_t>(table.horizon() + 1) * space.size(), false);
  int t = 0;
  PressState s;
  s.type = type;
  double value = 0.0;
  while (is >> t >> s.variety >> s.load >> s.remaining >> value) {
    const auto idx = space.index(s);
    table.set(t, idx, value);
    seen.at(static_cast<std::size_t>(t) * space.size() + idx) = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) throw TableError("value table file is incomplete");
  return table;
}

void save_table(const std::string& path, const ValueTable& table) {
  std::ofstream os(path);
  if (!os) throw TableError("cannot write " + path);
  write_table(os, table);
}

ValueTable load_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw TableError("cannot read " + path);
  return read_table(is);
}

}  // namespace grapepress
