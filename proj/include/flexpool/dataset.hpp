#pragma once
// Training-corpus assembly: controlled/uncontrolled simulation runs,
// penetration-scenario sampling, lag/mean feature engineering with a frozen
// schema, chronological train/test split and columnar persistence.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "flexpool/common.hpp"
#include "flexpool/fleet.hpp"
#include "flexpool/signals.hpp"
#include "flexpool/synth.hpp"

namespace flexpool {

// ---------------------------------------------------------------------------
// Simulation traces

enum class Policy { None, Random };

struct SimulationTrace {
    int n_days = 0;
    std::vector<std::vector<double>> power;  // [building][step], W
    std::vector<ForceOffSignal> signals;     // one per day; all-zero under Policy::None

    std::size_t n_steps() const { return static_cast<std::size_t>(n_days) * kStepsPerDay; }
};

// Simulate the whole fleet over the weather horizon. Under Policy::Random each
// day broadcasts one signal drawn uniformly from signal_set to every device;
// under Policy::None all signals are zero. DHW draw schedules depend on seed
// but not on the policy, so paired runs differ only by the control.
SimulationTrace run_policy_year(const Fleet& fleet, const WeatherSeries& weather, Policy policy,
                                const std::vector<ForceOffSignal>& signal_set, std::uint64_t seed,
                                int n_threads = 0);

// Per-step 0/1 series of the broadcast force-off signal.
std::vector<double> signal_series(const SimulationTrace& trace);

// Aggregate electrical power of a member subset, kW.
std::vector<double> aggregate_power(const SimulationTrace& trace, const std::vector<int>& members);

// ---------------------------------------------------------------------------
// Penetration scenarios

enum class SamplingScheme { RandomLinear, Grid };

struct PenetrationScenario {
    std::vector<int> members;
    MetadataFeatures meta;
    std::vector<double> y_ctrl;    // kW, filled by attach_aggregates
    std::vector<double> y_unctrl;  // kW
};

// RandomLinear: total member count grows linearly with the scenario index,
// members drawn irrespective of device kind. Grid: HP and EH counts co-vary on
// a cartesian grid (HP level constant along each row of the grid).
std::vector<PenetrationScenario> sample_penetrations(const Fleet& fleet, SamplingScheme scheme,
                                                     int n_scenarios, std::uint64_t seed);

void attach_aggregates(PenetrationScenario& sc, const SimulationTrace& ctrl,
                       const SimulationTrace& unctrl);

// ---------------------------------------------------------------------------
// Feature schema (frozen): 612 columns.
//   [0,192)    s_shift_{-95..96}        signal at t+95 .. t-96
//   [192,288)  s_mean3h_{1..96}         3 h backward mean of s ending at t+l
//   [288,384)  s_mean6h_{1..96}         6 h backward mean of s ending at t+l
//   [384,389)  yf_shift_{0..4}          aggregate power at t .. t-4
//   [389,414)  yf_hmean_{-168..-144}    hourly means one week back
//   [414,439)  yf_hmean_{-24..0}        hourly means over the past day
//   [439,518)  T_ext block: 5 shifts, 50 past hourly means, 24 future hourly means
//   [518,597)  ghi block: same layout as T_ext
//   [597,609)  metadata (MetadataFeatures order)
//   [609,612)  hour, day-of-week, minute-of-day
// Only the s-block [0,384) may reference times after the anchor t (the signal
// is known day-ahead by construction); weather futures are forecasts.
const std::vector<std::string>& feature_schema();
constexpr int kNumFeatures = 612;
constexpr int kNumSignalFeatures = 384;  // s-derived columns are the first block
std::uint64_t names_hash(const std::vector<std::string>& names);
std::uint64_t schema_hash();  // names_hash(feature_schema())

// Anchors need a week of history and a day of future: t in [675, n-97].
// (The deepest lag is the hourly mean ending at hour -168: steps t-675..t-672.)
constexpr long kMinHistorySteps = 675;

struct FeatureContext {
    std::vector<double> s;      // per-step 0/1 signal
    std::vector<double> y;      // aggregate power, kW
    std::vector<double> T_ext;  // degC
    std::vector<double> ghi;    // W/m2
    std::vector<double> meta;   // 12 metadata features
    Calendar cal;

    void finalize();  // builds prefix sums; call after filling the series

    // prefix sums (internal, exposed for the optimizer's fast signal scans)
    std::vector<double> s_ps, y_ps, T_ps, g_ps;
};

// The 612-vector at anchor t. Requires finalize()d context and an eligible t.
std::vector<double> make_features(const FeatureContext& ctx, long t);

// Overwrite only the s-derived block [0,384) in x, reading the signal series
// from ctx (used by the optimizer when scanning candidate signals).
void refresh_signal_features(const FeatureContext& ctx, long t, std::vector<double>& x);

struct FeatureRow {
    long t = 0;                    // anchor step
    int scenario_id = 0;
    std::vector<double> x;         // kNumFeatures
    std::array<double, 96> y{};    // aggregate power at t+1 .. t+96, kW
};

// Sample rows at random eligible anchors of the scenario's trace-year.
// k_fraction in (0,100]; max_rows = 0 means no cap. Deterministic per seed.
std::vector<FeatureRow> build_rows(const PenetrationScenario& sc, const std::vector<double>& s_series,
                                   const WeatherSeries& weather, bool controlled, double k_fraction,
                                   std::uint64_t seed, int scenario_id, std::size_t max_rows = 0);

// Chronological split on the anchor's day: train days [0, cutoff_day), test
// days [cutoff_day, ...).
void split_train_test(const std::vector<FeatureRow>& rows, int cutoff_day,
                      std::vector<FeatureRow>& train, std::vector<FeatureRow>& test);

// ---------------------------------------------------------------------------
// Columnar dataset (feature-major) for the tree learner

struct Dataset {
    std::vector<std::string> feature_names;     // F
    std::vector<std::vector<double>> x;         // [F][n]
    std::vector<std::vector<double>> y;         // [96][n]
    std::vector<long> t_anchor;                 // [n]
    std::vector<int> scenario_id;               // [n]

    std::size_t n_rows() const { return t_anchor.size(); }
    std::size_t n_features() const { return x.size(); }
    std::vector<double> row(std::size_t i) const;
};

Dataset stack_rows(const std::vector<FeatureRow>& rows);

// Row subset (indices into [0, n_rows)), preserving order and schema.
Dataset filter_rows(const Dataset& ds, const std::vector<std::size_t>& keep);

// Binary columnar file + JSON schema sidecar (<path>.schema.json); bit-exact.
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

// Binary trace file (per-building power matrix + per-day signals); bit-exact.
void save_trace(const std::string& path, const SimulationTrace& trace);
SimulationTrace load_trace(const std::string& path);

}  // namespace flexpool
