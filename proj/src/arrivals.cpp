#include "grapepress/arrivals.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace grapepress {

namespace {

constexpr double kProbTolerance = 1e-9;

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ArrivalError("cannot parse " + what + " from '" + s + "'");
  }
}

int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ArrivalError("cannot parse " + what + " from '" + s + "'");
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename Range>
std::string join_doubles(const Range& values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += ' ';
    out += format_double(v);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& key) {
  std::istringstream is(text);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) out.push_back(parse_double(tok, key));
  return out;
}

// Reads header + rows, skipping blank lines and '#' comments.
std::vector<std::vector<std::string>> read_csv(std::istream& is, std::vector<std::string>& header) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto fields = split_csv(line);
    if (!have_header) {
      header = std::move(fields);
      have_header = true;
    } else {
      rows.push_back(std::move(fields));
    }
  }
  if (!have_header) throw ArrivalError("CSV input has no header row");
  return rows;
}

int column(const std::vector<std::string>& header, const std::string& name, bool required = true) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    if (required) throw ArrivalError("CSV header is missing column '" + name + "'");
    return -1;
  }
  return static_cast<int>(it - header.begin());
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_seed(mix_seed(base) ^ (stream * 0xd1b54a32d192ed03ULL + 1));
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

double presence_probability(double lambda, double p) {
  return -std::expm1(-lambda * p);
}

void ArrivalModel::validate() const {
  if (horizon < 3) throw ArrivalError("horizon must be at least 3 intervals");
  if (static_cast<int>(lambda.size()) != horizon) throw ArrivalError("lambda must have one entry per interval");
  for (double l : lambda)
    if (!(l >= 0.0) || !std::isfinite(l)) throw ArrivalError("lambda entries must be finite and nonnegative");
  if (lambda[horizon - 1] != 0.0 || lambda[horizon - 2] != 0.0)
    throw ArrivalError("deliveries must stop two intervals before the horizon");
  auto check = [](const auto& probs, const char* what) {
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw ArrivalError(std::string(what) + " has a negative entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbTolerance) throw ArrivalError(std::string(what) + " does not sum to 1");
  };
  check(p_variety, "p_variety");
  check(p_weight, "p_weight");
}

double ArrivalModel::type_probability(const TruckType& type) const {
  return p_variety.at(type.variety - 1) * p_weight.at(type.load / kLoadStep - 1);
}

double ArrivalModel::type_probability(int type_index) const {
  return type_probability(truck_type(type_index));
}

double ArrivalModel::presence_probability(int t, int type_index) const {
  return grapepress::presence_probability(lambda.at(t), type_probability(type_index));
}

double ArrivalModel::total_intensity() const {
  return std::accumulate(lambda.begin(), lambda.end(), 0.0);
}

std::string ArrivalModel::canonical_text() const {
  std::string out = "# grape delivery model\n";
  out += "T = " + std::to_string(horizon) + "\n";
  out += "lambda = " + join_doubles(lambda) + "\n";
  out += "p_variety = " + join_doubles(p_variety) + "\n";
  out += "p_weight = " + join_doubles(p_weight) + "\n";
  return out;
}

std::string ArrivalModel::hash() const { return to_hex(fnv1a(canonical_text())); }

void write_model(std::ostream& os, const ArrivalModel& model) {
  os << model.canonical_text() << "hash = " << model.hash() << "\n";
}

ArrivalModel read_model(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ArrivalError("malformed model line: " + t);
    kv[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
  }
  for (const char* key : {"T", "lambda", "p_variety", "p_weight"})
    if (!kv.count(key)) throw ArrivalError(std::string("model document is missing '") + key + "'");

  ArrivalModel m;
  m.horizon = parse_int(kv["T"], "T");
  m.lambda = parse_doubles(kv["lambda"], "lambda");
  const auto pv = parse_doubles(kv["p_variety"], "p_variety");
  const auto pw = parse_doubles(kv["p_weight"], "p_weight");
  if (pv.size() != m.p_variety.size()) throw ArrivalError("p_variety must have 4 entries");
  if (pw.size() != m.p_weight.size()) throw ArrivalError("p_weight must have 5 entries");
  std::copy(pv.begin(), pv.end(), m.p_variety.begin());
  std::copy(pw.begin(), pw.end(), m.p_weight.begin());
  m.validate();
  if (kv.count("hash") && kv["hash"] != m.hash())
    throw ArrivalError("model hash mismatch: file says " + kv["hash"] + ", content hashes to " + m.hash());
  return m;
}

void save_model(const std::string& path, const ArrivalModel& model) {
  std::ofstream os(path);
  if (!os) throw ArrivalError("cannot write " + path);
  write_model(os, model);
}

ArrivalModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ArrivalError("cannot read " + path);
  return read_model(is);
}

ArrivalSampler::ArrivalSampler(const ArrivalModel& model) : lambda_(model.lambda) {
  model.validate();
  std::vector<double> weights;
  for (const auto& type : all_truck_types()) {
    types_.push_back(type);
    weights.push_back(model.type_probability(type));
  }
  type_dist_ = std::discrete_distribution<int>(weights.begin(), weights.end());
}

void ArrivalSampler::sample_into(int t, Rng& rng, std::vector<TruckType>& out) const {
  const double lambda = lambda_.at(t);
  if (lambda <= 0.0) return;
  std::poisson_distribution<int> count_dist(lambda);
  const int n = count_dist(rng);
  for (int k = 0; k < n; ++k) out.push_back(types_[type_dist_(rng)]);
}

std::vector<TruckType> ArrivalSampler::sample(int t, Rng& rng) const {
  std::vector<TruckType> out;
  sample_into(t, rng, out);
  return out;
}

std::vector<TruckType> sample_interval_arrivals(const ArrivalModel& model, int t, Rng& rng) {
  return ArrivalSampler(model).sample(t, rng);
}

std::vector<TruckType> sample_interval_arrivals(const ArrivalModel& model, int t, std::uint64_t seed) {
  Rng rng(seed);
  return sample_interval_arrivals(model, t, rng);
}

// ---------------------------------------------------------------------------

Timestamp parse_timestamp(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  const int n = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &s);
  if (n < 6 || (sep != 'T' && sep != ' ')) throw ArrivalError("cannot parse ISO-8601 timestamp '" + text + "'");
  const std::chrono::year_month_day date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                         std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59)
    throw ArrivalError("timestamp out of range '" + text + "'");
  return {date, h * 3600 + mi * 60 + s};
}

OperatingTime to_operating_time(const Timestamp& ts) {
  constexpr int kWindowEndSeconds = 1 * 3600 + 30 * 60;
  constexpr int kDay = 24 * 3600;
  if (ts.seconds >= kWindowStartSeconds) return {ts.date, ts.seconds - kWindowStartSeconds};
  if (ts.seconds < kWindowEndSeconds) {
    const auto prev = std::chrono::year_month_day{std::chrono::sys_days{ts.date} - std::chrono::days{1}};
    return {prev, ts.seconds + kDay - kWindowStartSeconds};
  }
  throw ArrivalError("delivery at " + format_clock(ts.seconds) + " is outside the 08:30-01:30 operating window");
}

VarietyTotals read_variety_totals(std::istream& is) {
  std::vector<std::string> header;
  const auto rows = read_csv(is, header);
  const int c_date = column(header, "date");
  const int c_var = column(header, "variety");
  const int c_tonnes = column(header, "total_tonnes");
  VarietyTotals out;
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != static_cast<int>(header.size())) throw ArrivalError("ragged CSV row in variety totals");
    VarietyTotal row{r[c_date], parse_int(r[c_var], "variety"), parse_double(r[c_tonnes], "total_tonnes")};
    if (row.variety < 1 || row.variety > kNumVarieties) throw ArrivalError("variety must be in 1..4");
    if (row.tonnes < 0.0) throw ArrivalError("variety totals must be nonnegative");
    out.rows.push_back(std::move(row));
  }
  return out;
}

DeliveryLog read_delivery_log(std::istream& is) {
  std::vector<std::string> header;
  const auto rows = read_csv(is, header);
  const int c_ts = column(header, "timestamp");
  const int c_load = column(header, "load_tonnes");
  const int c_var = column(header, "variety", false);
  DeliveryLog out;
  for (const auto& r : rows) {
    if (r.size() < header.size() - (c_var >= 0 ? 1 : 0)) throw ArrivalError("ragged CSV row in delivery log");
    Delivery d{parse_timestamp(r[c_ts]), parse_double(r[c_load], "load_tonnes"), std::nullopt};
    if (c_var >= 0 && c_var < static_cast<int>(r.size()) && !r[c_var].empty()) {
      d.variety = parse_int(r[c_var], "variety");
      if (*d.variety < 1 || *d.variety > kNumVarieties) throw ArrivalError("variety must be in 1..4");
    }
    out.rows.push_back(d);
  }
  return out;
}

VarietyTotals load_variety_totals(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ArrivalError("cannot read " + path);
  return read_variety_totals(is);
}

DeliveryLog load_delivery_log(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ArrivalError("cannot read " + path);
  return read_delivery_log(is);
}

ArrivalModel calibrate(const VarietyTotals& totals, const DeliveryLog& deliveries) {
  if (deliveries.rows.empty()) throw ArrivalError("delivery log is empty");

  ArrivalModel m;
  std::array<double, kNumVarieties> tonnage{};
  if (!totals.rows.empty()) {
    for (const auto& r : totals.rows) tonnage[r.variety - 1] += r.tonnes;
  } else {
    for (const auto& d : deliveries.rows) {
      if (!d.variety) throw ArrivalError("variety totals are empty and the delivery log carries no variety column");
      tonnage[*d.variety - 1] += d.load;
    }
  }
  const double total_tonnage = std::accumulate(tonnage.begin(), tonnage.end(), 0.0);
  if (!(total_tonnage > 0.0)) throw ArrivalError("variety totals sum to zero");
  for (int v = 0; v < kNumVarieties; ++v) m.p_variety[v] = tonnage[v] / total_tonnage;

  std::array<double, kNumLoadClasses> class_counts{};
  std::set<std::chrono::sys_days> days;
  std::vector<double> bin_counts(kHorizon, 0.0);
  const int last_delivery_bin = kHorizon - 3;
  for (const auto& d : deliveries.rows) {
    if (!(d.load > 0.0)) throw ArrivalError("delivery loads must be positive");
    class_counts[load_class(d.load) / kLoadStep - 1] += 1.0;
    const auto op = to_operating_time(d.timestamp);
    days.insert(std::chrono::sys_days{op.day});
    const int bin = std::min(op.offset_seconds / kIntervalSeconds, last_delivery_bin);
    bin_counts[bin] += 1.0;
  }
  const double n = static_cast<double>(deliveries.rows.size());
  for (int c = 0; c < kNumLoadClasses; ++c) m.p_weight[c] = class_counts[c] / n;
  for (int t = 0; t < kHorizon; ++t) m.lambda[t] = bin_counts[t] / static_cast<double>(days.size());
  m.validate();
  return m;
}

std::vector<DayDiagnostics> log_diagnostics(const DeliveryLog& deliveries) {
  if (deliveries.rows.empty()) throw ArrivalError("delivery log is empty");
  std::map<std::chrono::sys_days, std::vector<int>> by_day;
  for (const auto& d : deliveries.rows) {
    const auto op = to_operating_time(d.timestamp);
    by_day[std::chrono::sys_days{op.day}].push_back(op.offset_seconds);
  }
  static const char* kNames[] = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
  std::vector<DayDiagnostics> out;
  for (auto& [day, offsets] : by_day) {
    std::sort(offsets.begin(), offsets.end());
    DayDiagnostics diag;
    diag.day = std::chrono::year_month_day{day};
    diag.weekday = kNames[std::chrono::weekday{day}.c_encoding()];
    diag.first_seconds = (offsets.front() + kWindowStartSeconds) % (24 * 3600);
    diag.last_seconds = (offsets.back() + kWindowStartSeconds) % (24 * 3600);
    diag.deliveries = offsets.size();
    if (offsets.size() > 1)
      diag.mean_gap_minutes = (offsets.back() - offsets.front()) / 60.0 / static_cast<double>(offsets.size() - 1);
    out.push_back(diag);
  }
  return out;
}

std::string format_clock(int seconds) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d:%02d", seconds / 3600, (seconds / 60) % 60);
  return buf;
}

std::string format_date(const std::chrono::year_month_day& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

}  // namespace grapepress
