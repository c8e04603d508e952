#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "grapepress/arrivals.hpp"
#include "grapepress/engine.hpp"

namespace grapepress {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct VarietyProfile {
  std::string name;
  std::array<double, kNumVarieties> p;
};

// The sixteen variety-dominance rows (v1 ... vU, vR). The vR row holds the
// observed reference shares.
const std::vector<VarietyProfile>& variety_profiles();

enum class FrequencyShape { kTwoPeaks, kFourPeaks, kUniform, kReal };

std::string to_string(FrequencyShape shape);
FrequencyShape parse_frequency(const std::string& text);

struct ScenarioSpec {
  std::string variety = "vR";
  FrequencyShape frequency = FrequencyShape::kReal;
  double intensity = 1.0;

  // e.g. "v12_fP4_i1.5"
  std::string id() const;
  static ScenarioSpec parse(const std::string& id);
  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

// Placement of the triangular delivery peaks, as fractions of the delivery
// window, and their width in intervals.
struct PeakShapes {
  std::vector<double> two_peaks{1.0 / 3.0, 2.0 / 3.0};
  std::vector<double> four_peaks{0.2, 0.4, 0.6, 0.8};
  double span = 6.0;
};

// Rebuilds `reference` for the scenario: the variety row replaces p_variety
// (vR keeps the reference shares), the shape replaces lambda while
// preserving total expected deliveries, then lambda is scaled by intensity.
ArrivalModel build_scenario(const ScenarioSpec& spec, const ArrivalModel& reference, const PeakShapes& peaks = {});

// Stand-in for the calibrated weekday: about 138 deliveries averaging 6.4 t,
// with dips near 10:00, 12:00 and 20:00.
ArrivalModel synthetic_reference_model();

using Fleet = std::vector<PressType>;
Fleet default_fleet();  // 4 x Type I, 2 x Type II

// FIFO heuristic: the oldest truck goes to the first compatible idle press
// (same-variety partial fill first, then empty), topped up in 5 t steps
// within capacity and the interval cap, until nothing more fits.
std::vector<StrategyRow> baseline_greedy(std::span<const PressState> presses, const QueueState& queue, int t,
                                         int tonnage_cap = kIntervalCap);

enum class PolicyKind { kDynamicProgramming, kGreedy };
std::string to_string(PolicyKind policy);

struct EpisodeConfig {
  PolicyKind policy = PolicyKind::kDynamicProgramming;
  const TableSet* tables = nullptr;
  EngineOptions engine;
  // Drop whatever is left in the queue after each decision instead of
  // carrying it over (the isolated-press setting the tables assume).
  bool discard_unassigned = false;
  bool record_timing = false;
};

using DayArrivals = std::vector<std::vector<TruckType>>;
DayArrivals sample_day(const ArrivalModel& model, std::uint64_t seed);

struct IntervalRecord {
  int t = 0;
  std::vector<PressState> before;
  QueueState queue;  // after arrivals, before the decision
  std::vector<StrategyRow> rows;
  std::vector<PressState> after;
  double payoff = 0.0;
};
using IntervalObserver = std::function<void(const IntervalRecord&)>;

struct EpisodeResult {
  std::string scenario;
  std::string policy;
  std::uint64_t seed = 0;
  double payoff = 0.0;
  LossLedger losses;
  std::vector<StrategyRow> strategy;
  int delivered_tonnes = 0;
  int pressed_tonnes = 0;     // moved into presses
  int completed_tonnes = 0;   // in presses that started a cycle
  int unfinished_tonnes = 0;  // in idle presses at day end
  int discarded_tonnes = 0;   // dropped in discard mode
  std::optional<double> runtime_ms;
};

EpisodeResult simulate_day(const DayArrivals& arrivals, const Fleet& fleet, const EpisodeConfig& config,
                           std::uint64_t seed, const IntervalObserver& observer = {});
EpisodeResult simulate_episode(const ArrivalModel& model, const Fleet& fleet, const EpisodeConfig& config,
                               std::uint64_t seed, const IntervalObserver& observer = {});

// One evaluation cell: queues drawn from `actual`, DP tables built from
// `expected`.
struct GridCell {
  ScenarioSpec actual;
  ScenarioSpec expected;

  bool consistent() const { return actual == expected; }
  std::string id() const;
};

std::vector<GridCell> consistent_grid();    // 21 one-factor scenarios
std::vector<GridCell> inconsistent_grid();  // 258 mismatched pairs
// Every frequency and intensity mismatch plus the variety mismatches against
// the reference row.
std::vector<GridCell> reduced_inconsistent_grid();

struct GridOptions {
  int episodes_per_cell = 4;
  std::uint64_t base_seed = 1;
  Fleet fleet = default_fleet();
  unsigned threads = 0;  // 0 = hardware concurrency
  bool record_timing = false;
};

struct PolicySummary {
  double mean_payoff = 0.0;
  double mean_degradation = 0.0;
  double mean_rejection = 0.0;
  double mean_leftover = 0.0;
};

struct CellSummary {
  std::string cell;
  std::string actual;
  std::string expected;
  int episodes = 0;
  PolicySummary dp;
  PolicySummary greedy;
  double mean_difference = 0.0;  // dp - greedy, paired
  double se_difference = 0.0;
  double advantage_pct = 0.0;
};

struct GridResult {
  std::vector<EpisodeResult> episodes;
  std::vector<CellSummary> cells;
  double dp_mean = 0.0;
  double greedy_mean = 0.0;
};

std::uint64_t episode_seed(std::uint64_t base_seed, int replicate);

GridResult run_grid(const std::vector<GridCell>& cells, const ArrivalModel& reference, const GridOptions& options);

void write_episode_csv(std::ostream& os, const std::vector<EpisodeResult>& episodes);
void write_cell_csv(std::ostream& os, const std::vector<CellSummary>& cells);

// Runs f(0..n-1) on a small pool of threads.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& f);

}  // namespace grapepress
