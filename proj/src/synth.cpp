#include "flexpool/synth.hpp"

#include <algorithm>
#include <cmath>

namespace flexpool {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double hour_of(int step_in_day) { return step_in_day / 4.0; }

double bump(double h, double center, double width) {
    const double z = (h - center) / width;
    return std::exp(-z * z);
}

}  // namespace

WeatherSeries synth_weather(int n_days, std::uint64_t seed) {
    if (n_days <= 0) throw std::invalid_argument("synth_weather: n_days must be positive");
    Rng rng(derive_seed(seed, "synth/weather"));
    WeatherSeries w;
    const std::size_t n = static_cast<std::size_t>(n_days) * kStepsPerDay;
    w.T_ext.resize(n);
    w.ghi.resize(n);

    double ar = 0.0;         // AR(1) temperature anomaly
    double cloud_ar = 0.5;   // slow AR over days
    double cloud_day = 0.7;
    for (std::size_t t = 0; t < n; ++t) {
        const int day = static_cast<int>(t / kStepsPerDay);
        const int sid = static_cast<int>(t % kStepsPerDay);
        const double h = hour_of(sid);
        if (sid == 0) {
            cloud_ar = 0.6 * cloud_ar + 0.4 * rng.uniform();
            cloud_day = 0.25 + 0.75 * cloud_ar;
        }
        ar = 0.97 * ar + 0.4 * rng.normal();

        const double annual = 10.0 - 9.0 * std::cos(kTwoPi * day / 365.0);
        const double diurnal = -3.0 * std::cos(kTwoPi * (h - 2.0) / 24.0);
        w.T_ext[t] = annual + diurnal + ar;

        const double seasonal_peak = 600.0 - 350.0 * std::cos(kTwoPi * day / 365.0);
        const double arc = (h > 6.0 && h < 20.0) ? std::sin(M_PI * (h - 6.0) / 14.0) : 0.0;
        const double flicker = 1.0 + 0.05 * rng.normal();
        w.ghi[t] = std::max(0.0, seasonal_peak * arc * cloud_day * flicker);
    }
    return w;
}

std::vector<double> synth_spot_prices(int n_days, std::uint64_t seed) {
    if (n_days <= 0) throw std::invalid_argument("synth_spot_prices: n_days must be positive");
    Rng rng(derive_seed(seed, "synth/prices"));
    Calendar cal;
    std::vector<double> p(static_cast<std::size_t>(n_days) * kStepsPerDay);
    double ar = 0.0;
    for (std::size_t t = 0; t < p.size(); ++t) {
        const int day = static_cast<int>(t / kStepsPerDay);
        const double h = hour_of(static_cast<int>(t % kStepsPerDay));
        const bool weekend = cal.dow(day) == 0 || cal.dow(day) == 6;
        ar = 0.9 * ar + 0.004 * rng.normal();
        const double seasonal = 0.015 * std::cos(kTwoPi * day / 365.0);  // dearer in winter
        double v = 0.08 + 0.035 * bump(h, 8.0, 2.0) + 0.045 * bump(h, 19.0, 2.5) -
                   0.02 * bump(h, 3.0, 3.0) + seasonal + (weekend ? -0.008 : 0.0) + ar;
        p[t] = std::max(0.01, v);
    }
    return p;
}

std::vector<double> synth_carbon_intensity(int n_days, std::uint64_t seed) {
    if (n_days <= 0) throw std::invalid_argument("synth_carbon_intensity: n_days must be positive");
    Rng rng(derive_seed(seed, "synth/carbon"));
    std::vector<double> c(static_cast<std::size_t>(n_days) * kStepsPerDay);
    double ar = 0.0;
    for (std::size_t t = 0; t < c.size(); ++t) {
        const int day = static_cast<int>(t / kStepsPerDay);
        const double h = hour_of(static_cast<int>(t % kStepsPerDay));
        ar = 0.95 * ar + 2.5 * rng.normal();
        const double v = 90.0 + 40.0 * std::cos(kTwoPi * day / 365.0) +
                         15.0 * std::sin(kTwoPi * (h - 16.0) / 24.0) + ar;
        c[t] = std::max(20.0, v);
    }
    return c;
}

std::vector<double> synth_base_load(int n_days, double mean_kw, std::uint64_t seed) {
    if (n_days <= 0) throw std::invalid_argument("synth_base_load: n_days must be positive");
    if (mean_kw <= 0) throw std::invalid_argument("synth_base_load: mean_kw must be positive");
    Rng rng(derive_seed(seed, "synth/base_load"));
    Calendar cal;
    std::vector<double> y(static_cast<std::size_t>(n_days) * kStepsPerDay);
    double ar = 0.0;
    double sum = 0.0;
    for (std::size_t t = 0; t < y.size(); ++t) {
        const int day = static_cast<int>(t / kStepsPerDay);
        const double h = hour_of(static_cast<int>(t % kStepsPerDay));
        const bool weekend = cal.dow(day) == 0 || cal.dow(day) == 6;
        ar = 0.95 * ar + 0.008 * rng.normal();
        const double shape = 0.62 + 0.28 * bump(h, 8.5, 3.0) + 0.38 * bump(h, 19.0, 3.5) -
                             0.12 * bump(h, 3.5, 2.5);
        const double seasonal = 1.0 + 0.18 * std::cos(kTwoPi * day / 365.0);
        double v = shape * seasonal * (weekend ? 0.93 : 1.0) * (1.0 + ar);
        y[t] = std::max(0.15, v);
        sum += y[t];
    }
    const double scale = mean_kw * static_cast<double>(y.size()) / sum;
    for (double& v : y) v *= scale;
    return y;
}

std::vector<double> synth_dhw_draws(int n_days, int occupants, std::uint64_t seed) {
    if (n_days <= 0) throw std::invalid_argument("synth_dhw_draws: n_days must be positive");
    if (occupants < 1) throw std::invalid_argument("synth_dhw_draws: occupants must be >= 1");
    Rng rng(derive_seed(seed, "synth/dhw"));
    std::vector<double> draws(static_cast<std::size_t>(n_days) * kStepsPerDay, 0.0);

    // tapping-time weights over the day: morning, midday, evening clusters
    std::vector<double> cdf(kStepsPerDay);
    double acc = 0;
    for (int s = 0; s < kStepsPerDay; ++s) {
        const double h = hour_of(s);
        double wgt = 0.0;
        if (h >= 5.0 && h < 23.0)
            wgt = 1.0 * bump(h, 7.5, 1.5) + 0.35 * bump(h, 12.5, 2.0) + 0.8 * bump(h, 20.0, 2.0) + 0.03;
        acc += wgt;
        cdf[s] = acc;
    }
    for (double& v : cdf) v /= acc;

    for (int day = 0; day < n_days; ++day) {
        const double total_kg = occupants * (30.0 + rng.uniform(0.0, 20.0));  // per day
        const int n_events = static_cast<int>(rng.uniform_int(2, 3 + occupants));
        const double per_event = total_kg / n_events;
        for (int e = 0; e < n_events; ++e) {
            const double u = rng.uniform();
            const int s = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            draws[static_cast<std::size_t>(day) * kStepsPerDay + s] += per_event / kStepSeconds;
        }
    }
    return draws;
}

}  // namespace flexpool
