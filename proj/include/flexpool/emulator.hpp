#pragma once
// Closed-loop horizon runs: day-ahead planning against metamodel forecasts,
// execution in one of three modes, monthly-peak bookkeeping, open-loop error
// tracking, CO2 accounting and KPI deltas against an uncontrolled baseline.

#include <cstdint>
#include <string>
#include <vector>

#include "flexpool/fleet.hpp"
#include "flexpool/forecaster.hpp"
#include "flexpool/optimizer.hpp"
#include "flexpool/signals.hpp"
#include "flexpool/synth.hpp"

namespace flexpool {

enum class RunMode {
    Simulated,  // metamodel plans, physics executes, costs from realized load
    Forecast,   // physics executes, costs accounted from day-ahead predictions
    Emulated    // metamodel plans and executes; physics is never invoked
};

std::string run_mode_name(RunMode mode);

// ---------------------------------------------------------------------------
// Small reusable pieces

// Normalized daily prediction error (y - y_hat) / y with the denominator
// floored at 1% of the day's mean power.
struct OpenLoopError {
    std::vector<double> ne;  // 96 entries
    double mean = 0;         // mean of |ne|
};

OpenLoopError open_loop_error(const std::vector<double>& y_day, const std::vector<double>& y_hat_day);

// sum_t C_t * y_t * gamma / 1e6  [tons], series aligned per step.
double co2_tons(const std::vector<double>& y_kw, const std::vector<double>& carbon_g_per_kwh);

// Monthly peak bookkeeping: non-decreasing within a month, reset at month
// boundaries; closed months are appended to `months`.
struct MonthPeak {
    int month = 0;  // 0-based calendar month index (can exceed 11 across years)
    double y_max_kw = 0;
    double cost_chf = 0;
};

struct MonthlyPeakLedger {
    int month = -1;
    double y_max_kw = 0;

    // Observe one executed day; closes the previous month when `month` moves.
    void observe(int month_idx, double day_peak_kw, double p_peak, std::vector<MonthPeak>& months);
    void close(double p_peak, std::vector<MonthPeak>& months);
};

// Calendar month of an absolute day index (day 0 = January 1st), wrapping
// across years (result month = year*12 + month_in_year of a non-leap year).
int month_of_day(int day);

// Controlled subset: round(fraction * n) buildings drawn uniformly without
// replacement, returned sorted; deterministic in the seed.
std::vector<int> sample_controlled(const Fleet& fleet, double fraction, std::uint64_t seed);

// Metamodel rebound curve at anchor t: prediction under `s` minus prediction
// under the zeroed day-ahead signal (the past signal history is untouched).
std::vector<double> rebound_profile(const TreeEnsembleModel& model, FeatureContext& ctx, long t,
                                    const ForceOffSignal& s);

// Uncontrolled physics trace over the first warmup_days of the weather
// horizon: [building][step] electrical W. Used to bootstrap EMULATED runs;
// SIMULATED/FORECAST runs recompute the identical trace internally (they
// need the plant states it leaves behind).
std::vector<std::vector<double>> warmup_trace(const Fleet& fleet, const WeatherSeries& weather,
                                              int warmup_days, std::uint64_t seed, int n_threads = 0);

// Per-building energy signatures from an uncontrolled trace (power_w is
// [building][step], W): each HP building's daily kWh regressed on day-mean
// weather. EH buildings get the zero signature — their load is DHW only, so
// the space-heating comfort gate does not constrain them.
std::vector<EnergySignature> fit_fleet_signatures(const Fleet& fleet,
                                                  const std::vector<std::vector<double>>& power_w,
                                                  const WeatherSeries& weather);

// ---------------------------------------------------------------------------
// Horizon run

struct EmulationInputs {
    RunMode mode = RunMode::Simulated;
    const Fleet* fleet = nullptr;

    // Exogenous series covering (warmup_days + horizon_days) * 96 steps.
    WeatherSeries weather;
    std::vector<double> spot;       // CHF/kWh
    std::vector<double> carbon;     // gCO2/kWh
    std::vector<double> base_load;  // kW, inflexible DSO load

    double p_peak = 0.0;  // CHF/kW per monthly peak
    Calendar cal;         // day-of-week reference for features
    int warmup_days = 8;  // >= 8 (feature history) — day 0 of the horizon is day warmup_days
    int horizon_days = 0;
    double ctrl_fraction = 0.66;
    std::uint64_t seed = 0;

    const TreeEnsembleModel* flex_model = nullptr;   // global flexible-pool metamodel
    const TreeEnsembleModel* total_model = nullptr;  // 96-model total-load forecaster

    std::vector<ForceOffSignal> signal_set;          // must contain the zero signal
    std::vector<EnergySignature> signatures_by_building;  // HP comfort; indexed by building

    // EMULATED only: uncontrolled per-building W trace for the warmup days
    // (from warmup_trace); SIMULATED/FORECAST ignore it.
    std::vector<std::vector<double>> warmup_power;

    int n_threads = 0;

    void validate() const;
};

struct DayRecord {
    int day = 0;                          // absolute day index (warmup included)
    std::vector<ForceOffSignal> signals;  // per group, in group order
    std::vector<double> y_hat_total;      // planned total profile, kW
    double plan_cost = 0;                 // predicted day-ahead cost of the plan
    double plan_cost_no_control = 0;      // predicted cost with all-zero signals
    double plan_spot_cost = 0;            // spot part of the plan cost
    double realized_spot_cost = 0;        // executed profile at spot prices
    double open_loop_mean = 0;            // mean of the day's normalized error
    double peak_kw = 0;                   // executed daily peak
    int hp_budget_steps = 96;             // comfort gate output for the day
};

struct KpiReport {
    RunMode mode = RunMode::Simulated;
    int horizon_days = 0;
    std::vector<std::string> group_names;  // optimization order
    std::vector<int> ctrl_members;

    double energy_cost_chf = 0;
    double peak_cost_chf = 0;
    double total_cost_chf = 0;
    double co2_tons = 0;

    double baseline_energy_cost_chf = 0;
    double baseline_peak_cost_chf = 0;
    double baseline_total_cost_chf = 0;
    double baseline_co2_tons = 0;

    double delta_energy_cost_chf = 0;  // optimized minus baseline
    double delta_peak_cost_chf = 0;
    double delta_total_cost_chf = 0;
    double delta_co2_tons = 0;

    std::vector<DayRecord> days;
    std::vector<MonthPeak> months;           // optimized run
    std::vector<MonthPeak> baseline_months;
    std::vector<double> open_loop_daily_means;

    std::vector<double> total_exec;      // executed total, kW per horizon step
    std::vector<double> total_baseline;  // uncontrolled baseline, kW

    // Comfort probe over controlled HP buildings (physics modes only).
    long comfort_steps_total = 0;
    long comfort_steps_ok = 0;

    long physics_steps = 0;  // building_step calls made by this run
};

KpiReport run_horizon(const EmulationInputs& in);

// JSON rendering of the report (stable key order via nlohmann).
std::string kpi_report_json(const KpiReport& report);

}  // namespace flexpool
