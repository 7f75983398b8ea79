#pragma once
// Run configuration: one JSON file drives every CLI stage. Seeds are
// mandatory (no wall-clock entropy); all stage randomness derives from the
// single root seed. Exogenous series come from the configured CSV files when
// present and are synthesized deterministically otherwise.

#include <cstdint>
#include <string>
#include <vector>

#include "flexpool/fleet.hpp"
#include "flexpool/forecaster.hpp"
#include "flexpool/signals.hpp"
#include "flexpool/synth.hpp"

namespace flexpool {

struct PathsConfig {
    std::string weather_csv;    // "index,T_ext,ghi" with a header line
    std::string spot_csv;       // "index,value"
    std::string carbon_csv;     // "index,value"
    std::string base_load_csv;  // "index,value"
    std::string out_dir = ".";
};

struct RunConfig {
    std::uint64_t seed = 0;  // required key in the file
    PathsConfig paths;
    FleetSpec fleet;          // fleet.seed defaults to a root-derived stream
    SignalConstraints signals;

    std::string sampling = "grid";        // "grid" | "random-linear"
    std::string model_variant = "plain";  // "plain" | "energy-aware"

    // training corpus
    int train_days = 120;
    int n_scenarios = 16;
    double k_fraction = 2.0;  // % of eligible anchors sampled per scenario run
    std::size_t max_rows_per_scenario = 400;
    int cutoff_day = 96;  // chronological train/test split day
    double base_load_mean_kw = 50.0;

    BoostParams boost;  // boost.seed defaults to a root-derived stream

    // tariff + closed loop
    double p_peak = 12.0;  // CHF/kW monthly peak price
    int warmup_days = 8;
    int horizon_days = 60;
    double ctrl_fraction = 0.66;
    std::size_t signal_subsample = 2000;

    int n_threads = 0;  // 0 = hardware concurrency; CLI --threads overrides

    void validate() const;
};

// Strict at the top level (unknown keys are rejected); nested objects fall
// back to defaults for absent keys. The "seed" key is mandatory.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

// Canonical rendering of every effective value; parse_config round-trips it.
std::string config_json(const RunConfig& c);

struct ExogenousSeries {
    WeatherSeries weather;
    std::vector<double> spot;       // CHF/kWh
    std::vector<double> carbon;     // gCO2/kWh
    std::vector<double> base_load;  // kW
};

// Series covering n_days. CSV-backed columns must cover the horizon; the
// synthetic fallback derives its seed from the root seed and `stage`, so
// distinct pipeline stages (training year vs emulation run) get independent
// weather/price realizations.
ExogenousSeries load_series(const RunConfig& c, int n_days, const std::string& stage);

}  // namespace flexpool
