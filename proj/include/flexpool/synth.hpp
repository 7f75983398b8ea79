#pragma once
// Seeded synthetic input series: weather, spot prices, carbon intensity,
// inflexible base load and per-building DHW tapping schedules. All series are
// 15-minute resolution over n_days and fully determined by (n_days, seed).

#include <cstdint>
#include <vector>

#include "flexpool/common.hpp"
#include "flexpool/physics.hpp"

namespace flexpool {

struct WeatherSeries {
    std::vector<double> T_ext;  // degC
    std::vector<double> ghi;    // W/m2

    std::size_t n_steps() const { return T_ext.size(); }
    WeatherStep at(std::size_t t) const { return {T_ext.at(t), ghi.at(t)}; }
};

// Annual + diurnal temperature cycles with AR(1) weather noise; irradiance
// from a clear-sky arc modulated by seasonal amplitude and daily cloudiness.
WeatherSeries synth_weather(int n_days, std::uint64_t seed);

// Day-ahead spot prices, CHF/kWh: morning/evening peaks, weekend and seasonal
// modulation, AR(1) noise. Strictly positive.
std::vector<double> synth_spot_prices(int n_days, std::uint64_t seed);

// Grid carbon intensity, gCO2/kWh: seasonal + diurnal cycles, noisy, >= 20.
std::vector<double> synth_carbon_intensity(int n_days, std::uint64_t seed);

// Inflexible DSO base load, kW, normalized so the series mean equals
// mean_kw exactly; bounded away from zero.
std::vector<double> synth_base_load(int n_days, double mean_kw, std::uint64_t seed);

// Per-building DHW draw schedule, kg/s per step. Tapping events cluster in
// morning/midday/evening windows; daily drawn mass scales with occupancy.
std::vector<double> synth_dhw_draws(int n_days, int occupants, std::uint64_t seed);

}  // namespace flexpool
