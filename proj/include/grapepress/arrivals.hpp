#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "grapepress/domain.hpp"

namespace grapepress {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

class ArrivalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Delivery model for one day: Poisson counts per interval with intensity
// lambda[t], each delivery drawing its type from the product of the variety
// and weight marginals.
struct ArrivalModel {
  int horizon = kHorizon;
  std::vector<double> lambda = std::vector<double>(kHorizon, 0.0);
  std::array<double, kNumVarieties> p_variety{0.25, 0.25, 0.25, 0.25};
  std::array<double, kNumLoadClasses> p_weight{0.2, 0.2, 0.2, 0.2, 0.2};

  // Throws ArrivalError if probabilities do not sum to one, any entry is
  // negative, or deliveries are scheduled in the last two intervals.
  void validate() const;

  double type_probability(int type_index) const;
  double type_probability(const TruckType& type) const;
  // P(at least one truck of the type arrives in interval t) = 1 - exp(-lambda_t p_i).
  double presence_probability(int t, int type_index) const;
  double total_intensity() const;

  // Canonical text form (without hash line) and its FNV-1a digest as hex.
  std::string canonical_text() const;
  std::string hash() const;

  friend bool operator==(const ArrivalModel&, const ArrivalModel&) = default;
};

double presence_probability(double lambda, double p);

void write_model(std::ostream& os, const ArrivalModel& model);
// Parses a model document; throws if the embedded hash does not match.
ArrivalModel read_model(std::istream& is);
void save_model(const std::string& path, const ArrivalModel& model);
ArrivalModel load_model(const std::string& path);

std::uint64_t fnv1a(std::string_view data);
std::string to_hex(std::uint64_t value);

// Delivery types for one interval: D ~ Poisson(lambda_t), then D i.i.d. types.
std::vector<TruckType> sample_interval_arrivals(const ArrivalModel& model, int t, Rng& rng);

// Caches the type distribution for repeated draws from one model.
class ArrivalSampler {
 public:
  explicit ArrivalSampler(const ArrivalModel& model);

  std::vector<TruckType> sample(int t, Rng& rng) const;
  // Appends to `out` instead of allocating.
  void sample_into(int t, Rng& rng, std::vector<TruckType>& out) const;

 private:
  std::vector<double> lambda_;
  std::vector<TruckType> types_;
  mutable std::discrete_distribution<int> type_dist_;
};

std::vector<TruckType> sample_interval_arrivals(const ArrivalModel& model, int t, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Historical logs

struct Timestamp {
  std::chrono::year_month_day date;
  int seconds = 0;  // since local midnight

  friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

Timestamp parse_timestamp(const std::string& text);

// The operating window runs 08:30 to 01:30 the next morning.
inline constexpr int kWindowStartSeconds = 8 * 3600 + 30 * 60;
inline constexpr int kIntervalSeconds = 30 * 60;

struct OperatingTime {
  std::chrono::year_month_day day;  // calendar date the operating day began
  int offset_seconds = 0;           // seconds since 08:30 of that day
};

// Throws ArrivalError for timestamps between 01:30 and 08:30.
OperatingTime to_operating_time(const Timestamp& ts);

struct Delivery {
  Timestamp timestamp;
  double load = 0.0;
  std::optional<int> variety;
};

struct DeliveryLog {
  std::vector<Delivery> rows;
};

struct VarietyTotal {
  std::string date;
  int variety = 1;
  double tonnes = 0.0;
};

struct VarietyTotals {
  std::vector<VarietyTotal> rows;
};

// CSV readers: header row required.
//   variety totals: date,variety,total_tonnes
//   deliveries:     timestamp,load_tonnes[,variety]
VarietyTotals read_variety_totals(std::istream& is);
DeliveryLog read_delivery_log(std::istream& is);
VarietyTotals load_variety_totals(const std::string& path);
DeliveryLog load_delivery_log(const std::string& path);

// Estimates the model. p_variety comes from tonnage shares in `totals`
// (falling back to the delivery log when totals are empty and every delivery
// carries a variety), p_weight from load-class frequencies, lambda from the
// per-interval mean count across operating days.
// Deliveries logged after 00:30 count toward the last delivery interval so
// that the final two intervals stay free of arrivals.
ArrivalModel calibrate(const VarietyTotals& totals, const DeliveryLog& deliveries);

struct DayDiagnostics {
  std::chrono::year_month_day day;
  std::string weekday;
  int first_seconds = 0;  // local clock time of day, seconds
  int last_seconds = 0;
  std::size_t deliveries = 0;
  std::optional<double> mean_gap_minutes;
};

std::vector<DayDiagnostics> log_diagnostics(const DeliveryLog& deliveries);

std::string format_clock(int seconds);
std::string format_date(const std::chrono::year_month_day& d);

}  // namespace grapepress
