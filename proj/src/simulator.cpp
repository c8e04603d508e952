#include "grapepress/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

namespace grapepress {

namespace {

std::string format_g(double v, const char* fmt = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

const VarietyProfile& find_profile(const std::string& name) {
  for (const auto& p : variety_profiles())
    if (p.name == name) return p;
  throw ScenarioError("unknown variety profile '" + name + "'");
}

// Aggregates per-truck rows into one control per press.
std::vector<Control> controls_from_rows(std::span<const StrategyRow> rows, std::size_t presses) {
  std::vector<Control> controls(presses);
  for (const auto& r : rows) {
    auto& c = controls.at(static_cast<std::size_t>(r.press));
    if (!c.is_none() && c.variety != r.variety) throw EngineError("rows mix varieties within one press");
    c.variety = r.variety;
    c.tonnes += r.tonnes;
  }
  return controls;
}

}  // namespace

const std::vector<VarietyProfile>& variety_profiles() {
  static const std::vector<VarietyProfile> rows{
      {"v1", {0.7, 0.1, 0.1, 0.1}},    {"v12", {0.4, 0.4, 0.1, 0.1}}, {"v123", {0.3, 0.3, 0.3, 0.1}},
      {"v124", {0.3, 0.3, 0.1, 0.3}},  {"v13", {0.4, 0.1, 0.4, 0.1}}, {"v134", {0.3, 0.1, 0.3, 0.3}},
      {"v14", {0.4, 0.1, 0.1, 0.4}},   {"v2", {0.1, 0.7, 0.1, 0.1}},  {"v23", {0.1, 0.4, 0.4, 0.1}},
      {"v234", {0.1, 0.3, 0.3, 0.3}},  {"v24", {0.1, 0.4, 0.1, 0.4}}, {"v3", {0.1, 0.1, 0.7, 0.1}},
      {"v34", {0.1, 0.1, 0.4, 0.4}},   {"v4", {0.1, 0.1, 0.1, 0.7}},  {"vU", {0.25, 0.25, 0.25, 0.25}},
      {"vR", {0.06, 0.0, 0.2, 0.74}},
  };
  return rows;
}

std::string to_string(FrequencyShape shape) {
  switch (shape) {
    case FrequencyShape::kTwoPeaks: return "fP2";
    case FrequencyShape::kFourPeaks: return "fP4";
    case FrequencyShape::kUniform: return "fU";
    case FrequencyShape::kReal: return "fR";
  }
  return "f?";
}

FrequencyShape parse_frequency(const std::string& text) {
  if (text == "fP2") return FrequencyShape::kTwoPeaks;
  if (text == "fP4") return FrequencyShape::kFourPeaks;
  if (text == "fU") return FrequencyShape::kUniform;
  if (text == "fR") return FrequencyShape::kReal;
  throw ScenarioError("unknown frequency shape '" + text + "'");
}

std::string ScenarioSpec::id() const {
  return variety + "_" + to_string(frequency) + "_i" + format_g(intensity, "%g");
}

ScenarioSpec ScenarioSpec::parse(const std::string& id) {
  std::vector<std::string> parts;
  std::stringstream ss(id);
  for (std::string part; std::getline(ss, part, '_');) parts.push_back(part);
  if (parts.size() != 3 || parts[2].size() < 2 || parts[2][0] != 'i')
    throw ScenarioError("scenario id must look like v?_f?_i?, got '" + id + "'");
  ScenarioSpec spec;
  spec.variety = parts[0];
  find_profile(spec.variety);
  spec.frequency = parse_frequency(parts[1]);
  try {
    std::size_t used = 0;
    spec.intensity = std::stod(parts[2].substr(1), &used);
    if (used != parts[2].size() - 1) throw std::invalid_argument(id);
  } catch (const std::exception&) {
    throw ScenarioError("bad intensity in scenario id '" + id + "'");
  }
  if (!(spec.intensity >= 0.0)) throw ScenarioError("intensity must be nonnegative");
  return spec;
}

ArrivalModel build_scenario(const ScenarioSpec& spec, const ArrivalModel& reference, const PeakShapes& peaks) {
  reference.validate();
  if (!(spec.intensity >= 0.0)) throw ScenarioError("intensity must be nonnegative");
  ArrivalModel m = reference;
  if (spec.variety != "vR") m.p_variety = find_profile(spec.variety).p;

  const int window = reference.horizon - 2;
  const double total = std::accumulate(reference.lambda.begin(), reference.lambda.begin() + window, 0.0);
  auto peaked = [&](const std::vector<double>& centers) {
    std::vector<double> lambda(static_cast<std::size_t>(reference.horizon), 0.0);
    for (double q : centers) {
      const double x = q * window;
      std::vector<double> bump(static_cast<std::size_t>(window), 0.0);
      for (int k = 0; k < window; ++k) bump[k] = std::max(0.0, peaks.span / 2.0 - std::abs(k + 0.5 - x));
      const double mass = std::accumulate(bump.begin(), bump.end(), 0.0);
      if (mass <= 0.0) throw ScenarioError("peak lies outside the delivery window");
      for (int k = 0; k < window; ++k) lambda[k] += bump[k] / mass * total / static_cast<double>(centers.size());
    }
    return lambda;
  };
  switch (spec.frequency) {
    case FrequencyShape::kReal: break;
    case FrequencyShape::kUniform:
      std::fill(m.lambda.begin(), m.lambda.end(), 0.0);
      std::fill(m.lambda.begin(), m.lambda.begin() + window, total / window);
      break;
    case FrequencyShape::kTwoPeaks: m.lambda = peaked(peaks.two_peaks); break;
    case FrequencyShape::kFourPeaks: m.lambda = peaked(peaks.four_peaks); break;
  }
  for (auto& l : m.lambda) l *= spec.intensity;
  m.validate();
  return m;
}

ArrivalModel synthetic_reference_model() {
  ArrivalModel m;
  m.lambda = {3.0, 4.5, 5.0, 2.0, 4.5, 5.5, 5.5, 2.0, 3.0, 4.5, 5.5, 6.0, 5.5, 5.0, 5.0, 4.5, 5.0,
              5.5, 5.5, 5.5, 5.0, 4.5, 4.5, 1.5, 3.5, 5.0, 5.0, 4.0, 3.5, 3.5, 3.0, 2.5, 0.0, 0.0};
  m.p_variety = {0.06, 0.0, 0.2, 0.74};
  m.p_weight = {0.80, 0.14, 0.04, 0.015, 0.005};
  m.validate();
  return m;
}

Fleet default_fleet() { return {kTypeI, kTypeI, kTypeI, kTypeI, kTypeII, kTypeII}; }

std::vector<StrategyRow> baseline_greedy(std::span<const PressState> presses, const QueueState& queue, int t,
                                         int tonnage_cap) {
  std::vector<StrategyRow> rows;
  std::vector<PressState> view(presses.begin(), presses.end());
  QueueState q = queue;
  q.sort();
  int cap_left = tonnage_cap;
  for (const auto& truck : q.trucks) {
    int left = truck.load;
    while (left > 0 && cap_left >= kLoadStep) {
      int target = -1;
      for (std::size_t p = 0; p < view.size() && target < 0; ++p)
        if (!view[p].blocked() && !view[p].empty() && view[p].variety == truck.variety) target = static_cast<int>(p);
      for (std::size_t p = 0; p < view.size() && target < 0; ++p)
        if (view[p].empty()) target = static_cast<int>(p);
      if (target < 0) break;
      auto& press = view[target];
      const int amount = std::min({left, press.spare(), cap_left}) / kLoadStep * kLoadStep;
      if (amount <= 0) break;
      press = fill(press, {truck.variety, amount});
      rows.push_back({t, target, truck.id, truck.arrival, truck.variety, amount});
      left -= amount;
      cap_left -= amount;
    }
    if (cap_left < kLoadStep) break;
  }
  return rows;
}

std::string to_string(PolicyKind policy) {
  return policy == PolicyKind::kDynamicProgramming ? "dp" : "greedy";
}

DayArrivals sample_day(const ArrivalModel& model, std::uint64_t seed) {
  const ArrivalSampler sampler(model);
  Rng rng(derive_seed(seed, 0));
  DayArrivals day(static_cast<std::size_t>(model.horizon));
  for (int t = 0; t < model.horizon; ++t) sampler.sample_into(t, rng, day[t]);
  return day;
}

EpisodeResult simulate_day(const DayArrivals& arrivals, const Fleet& fleet, const EpisodeConfig& config,
                           std::uint64_t seed, const IntervalObserver& observer) {
  if (fleet.empty()) throw ScenarioError("fleet is empty");
  const auto started = std::chrono::steady_clock::now();
  const int horizon = static_cast<int>(arrivals.size());
  const Prices& prices = config.engine.prices;
  if (config.policy == PolicyKind::kDynamicProgramming) {
    if (!config.tables) throw ScenarioError("the DP policy needs value tables");
    if (config.tables->horizon() != horizon) throw ScenarioError("value table horizon does not match the day length");
  }

  EpisodeResult result;
  result.policy = to_string(config.policy);
  result.seed = seed;
  std::vector<PressState> presses;
  for (const auto& type : fleet) presses.push_back(PressState{0, 0, 0, type});
  QueueState queue;
  TruckId next_id = 1;
  Rng tie_rng(derive_seed(seed, 1));

  for (int t = 0; t < horizon; ++t) {
    if (t > 0) {
      auto aged = age_queue(queue, horizon, prices);
      result.losses += aged.charges;
      queue = std::move(aged.queue);
    }
    for (const auto& type : arrivals[t]) {
      queue.add(type, next_id++);
      result.delivered_tonnes += type.load;
    }

    IntervalRecord rec;
    rec.t = t;
    rec.before = presses;
    if (observer) rec.queue = queue;

    std::vector<Control> controls;
    if (config.policy == PolicyKind::kDynamicProgramming) {
      auto run = run_model(presses, queue, t, *config.tables, tie_rng, config.engine);
      rec.rows = std::move(run.rows);
      queue = std::move(run.queue);
      controls = std::move(run.decision.controls);
    } else {
      rec.rows = baseline_greedy(presses, queue, t, config.engine.tonnage_cap);
      controls = controls_from_rows(rec.rows, presses.size());
      for (const auto& row : rec.rows)
        for (auto& truck : queue.trucks)
          if (truck.id == row.truck) truck.load -= row.tonnes;
      std::erase_if(queue.trucks, [](const Truck& tr) { return tr.load == 0; });
    }

    for (std::size_t p = 0; p < presses.size(); ++p) {
      const double earned = payoff(t, presses[p], controls[p], prices);
      if (!presses[p].blocked() && fill(presses[p], controls[p]).blocked()) result.completed_tonnes += presses[p].type.capacity;
      rec.payoff += earned;
      presses[p] = transition(t, presses[p], controls[p]);
    }
    for (const auto& row : rec.rows) result.pressed_tonnes += row.tonnes;
    result.payoff += rec.payoff;
    rec.after = presses;
    result.strategy.insert(result.strategy.end(), rec.rows.begin(), rec.rows.end());
    if (observer) observer(rec);

    if (config.discard_unassigned) {
      result.discarded_tonnes += queue.tonnes();
      queue.trucks.clear();
    }
  }
  auto aged = age_queue(queue, horizon, prices);
  result.losses += aged.charges;
  for (const auto& p : presses)
    if (!p.blocked()) result.unfinished_tonnes += p.load;
  if (config.record_timing)
    result.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return result;
}

EpisodeResult simulate_episode(const ArrivalModel& model, const Fleet& fleet, const EpisodeConfig& config,
                               std::uint64_t seed, const IntervalObserver& observer) {
  return simulate_day(sample_day(model, seed), fleet, config, seed, observer);
}

// ---------------------------------------------------------------------------

std::string GridCell::id() const {
  return consistent() ? actual.id() : actual.id() + "_exp_" + expected.id();
}

std::vector<GridCell> consistent_grid() {
  std::vector<GridCell> cells;
  auto add = [&](ScenarioSpec s) { cells.push_back({s, s}); };
  for (const auto& p : variety_profiles()) add({p.name, FrequencyShape::kReal, 1.0});
  for (auto f : {FrequencyShape::kTwoPeaks, FrequencyShape::kFourPeaks, FrequencyShape::kUniform})
    add({"vR", f, 1.0});
  for (double i : {0.5, 1.5}) add({"vR", FrequencyShape::kReal, i});
  return cells;
}

std::vector<GridCell> inconsistent_grid() {
  std::vector<GridCell> cells;
  for (const auto& a : variety_profiles())
    for (const auto& e : variety_profiles())
      if (a.name != e.name) cells.push_back({{a.name, FrequencyShape::kReal, 1.0}, {e.name, FrequencyShape::kReal, 1.0}});
  const FrequencyShape shapes[] = {FrequencyShape::kTwoPeaks, FrequencyShape::kFourPeaks, FrequencyShape::kUniform,
                                   FrequencyShape::kReal};
  for (auto a : shapes)
    for (auto e : shapes)
      if (a != e) cells.push_back({{"vR", a, 1.0}, {"vR", e, 1.0}});
  for (double a : {0.5, 1.0, 1.5})
    for (double e : {0.5, 1.0, 1.5})
      if (a != e) cells.push_back({{"vR", FrequencyShape::kReal, a}, {"vR", FrequencyShape::kReal, e}});
  return cells;
}

std::vector<GridCell> reduced_inconsistent_grid() {
  std::vector<GridCell> cells;
  for (const auto& c : inconsistent_grid()) {
    const bool variety_cell = c.actual.variety != c.expected.variety;
    if (!variety_cell || c.actual.variety == "vR") cells.push_back(c);
  }
  return cells;
}

std::uint64_t episode_seed(std::uint64_t base_seed, int replicate) {
  return derive_seed(base_seed, static_cast<std::uint64_t>(replicate) + 1000);
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& f) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

GridResult run_grid(const std::vector<GridCell>& cells, const ArrivalModel& reference, const GridOptions& options) {
  if (options.episodes_per_cell < 1) throw ScenarioError("episodes per cell must be positive");
  std::map<std::string, ArrivalModel> models;
  std::map<std::string, TableSet> tables;
  for (const auto& c : cells) {
    for (const auto* s : {&c.actual, &c.expected})
      if (!models.count(s->id())) models.emplace(s->id(), build_scenario(*s, reference));
    if (!tables.count(c.expected.id()))
      tables.emplace(c.expected.id(), build_tables(options.fleet, models.at(c.expected.id())));
  }

  const auto reps = static_cast<std::size_t>(options.episodes_per_cell);
  GridResult out;
  out.episodes.resize(cells.size() * reps * 2);
  parallel_for(cells.size() * reps, options.threads, [&](std::size_t job) {
    const auto& cell = cells[job / reps];
    const int rep = static_cast<int>(job % reps);
    const auto seed = episode_seed(options.base_seed, rep);
    const auto day = sample_day(models.at(cell.actual.id()), seed);
    EpisodeConfig dp{PolicyKind::kDynamicProgramming, &tables.at(cell.expected.id()), {}, false, options.record_timing};
    EpisodeConfig greedy{PolicyKind::kGreedy, nullptr, {}, false, options.record_timing};
    auto a = simulate_day(day, options.fleet, dp, seed);
    auto b = simulate_day(day, options.fleet, greedy, seed);
    a.scenario = b.scenario = cell.id();
    out.episodes[job * 2] = std::move(a);
    out.episodes[job * 2 + 1] = std::move(b);
  });

  double dp_sum = 0.0, greedy_sum = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellSummary s;
    s.cell = cells[c].id();
    s.actual = cells[c].actual.id();
    s.expected = cells[c].expected.id();
    s.episodes = options.episodes_per_cell;
    std::vector<double> diffs;
    auto accumulate = [&](PolicySummary& ps, const EpisodeResult& e) {
      ps.mean_payoff += e.payoff / reps;
      ps.mean_degradation += e.losses.degradation / reps;
      ps.mean_rejection += e.losses.rejection / reps;
      ps.mean_leftover += e.losses.leftover / reps;
    };
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& dp = out.episodes[(c * reps + r) * 2];
      const auto& gr = out.episodes[(c * reps + r) * 2 + 1];
      accumulate(s.dp, dp);
      accumulate(s.greedy, gr);
      diffs.push_back(dp.payoff - gr.payoff);
    }
    s.mean_difference = std::accumulate(diffs.begin(), diffs.end(), 0.0) / reps;
    if (reps > 1) {
      double ss = 0.0;
      for (double d : diffs) ss += (d - s.mean_difference) * (d - s.mean_difference);
      s.se_difference = std::sqrt(ss / (reps - 1) / reps);
    }
    s.advantage_pct = s.greedy.mean_payoff > 0.0 ? 100.0 * s.mean_difference / s.greedy.mean_payoff : 0.0;
    dp_sum += s.dp.mean_payoff;
    greedy_sum += s.greedy.mean_payoff;
    out.cells.push_back(s);
  }
  if (!cells.empty()) {
    out.dp_mean = dp_sum / static_cast<double>(cells.size());
    out.greedy_mean = greedy_sum / static_cast<double>(cells.size());
  }
  return out;
}

void write_episode_csv(std::ostream& os, const std::vector<EpisodeResult>& episodes) {
  os << "scenario_id,policy,seed,payoff,degradation_loss,rejection_loss,leftover_loss,runtime_ms\n";
  for (const auto& e : episodes) {
    os << e.scenario << ',' << e.policy << ',' << e.seed << ',' << format_g(e.payoff) << ','
       << format_g(e.losses.degradation) << ',' << format_g(e.losses.rejection) << ',' << format_g(e.losses.leftover)
       << ',' << (e.runtime_ms ? format_g(*e.runtime_ms, "%.3f") : std::string("NA")) << '\n';
  }
}

void write_cell_csv(std::ostream& os, const std::vector<CellSummary>& cells) {
  os << "cell_id,actual,expected,episodes,dp_payoff,greedy_payoff,mean_difference,se_difference,advantage_pct,"
        "dp_degradation,dp_rejection,dp_leftover,greedy_degradation,greedy_rejection,greedy_leftover\n";
  for (const auto& c : cells) {
    os << c.cell << ',' << c.actual << ',' << c.expected << ',' << c.episodes << ',' << format_g(c.dp.mean_payoff)
       << ',' << format_g(c.greedy.mean_payoff) << ',' << format_g(c.mean_difference) << ','
       << format_g(c.se_difference) << ',' << format_g(c.advantage_pct, "%.4f") << ','
       << format_g(c.dp.mean_degradation) << ',' << format_g(c.dp.mean_rejection) << ','
       << format_g(c.dp.mean_leftover) << ',' << format_g(c.greedy.mean_degradation) << ','
       << format_g(c.greedy.mean_rejection) << ',' << format_g(c.greedy.mean_leftover) << '\n';
  }
}

}  // namespace grapepress
