#include <doctest.h>

#include <cmath>

#include "flexpool/synth.hpp"

using namespace flexpool;

namespace {

double slice_mean(const std::vector<double>& v, std::size_t a, std::size_t b) {
    double s = 0;
    for (std::size_t i = a; i < b; ++i) s += v[i];
    return s / static_cast<double>(b - a);
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("all generators are deterministic in the seed") {
    const auto wa = synth_weather(30, 5), wb = synth_weather(30, 5), wc = synth_weather(30, 6);
    CHECK(wa.T_ext == wb.T_ext);
    CHECK(wa.ghi == wb.ghi);
    CHECK(wa.T_ext != wc.T_ext);

    CHECK(synth_spot_prices(30, 5) == synth_spot_prices(30, 5));
    CHECK(synth_spot_prices(30, 5) != synth_spot_prices(30, 6));
    CHECK(synth_carbon_intensity(30, 5) == synth_carbon_intensity(30, 5));
    CHECK(synth_base_load(30, 100.0, 5) == synth_base_load(30, 100.0, 5));
    CHECK(synth_dhw_draws(30, 3, 5) == synth_dhw_draws(30, 3, 5));
    CHECK(synth_dhw_draws(30, 3, 5) != synth_dhw_draws(30, 3, 6));
}

TEST_CASE("weather has the right shape") {
    const auto w = synth_weather(365, 1);
    REQUIRE(w.n_steps() == 365u * kStepsPerDay);
    double t_min = 1e9, t_max = -1e9;
    for (double x : w.T_ext) {
        t_min = std::min(t_min, x);
        t_max = std::max(t_max, x);
        CHECK(std::isfinite(x));
    }
    CHECK(t_min > -25.0);
    CHECK(t_max < 45.0);
    // winter (Jan) colder than summer (Jul)
    const double jan = slice_mean(w.T_ext, 0, 31u * kStepsPerDay);
    const double jul = slice_mean(w.T_ext, 181u * kStepsPerDay, 212u * kStepsPerDay);
    CHECK(jan + 8.0 < jul);

    // irradiance: nonnegative, dark at night, sunnier in summer
    double jan_ghi = 0, jul_ghi = 0;
    for (std::size_t t = 0; t < w.n_steps(); ++t) {
        CHECK(w.ghi[t] >= 0.0);
        const int sid = static_cast<int>(t % kStepsPerDay);
        const double h = sid / 4.0;
        if (h < 6.0 || h >= 20.0) CHECK(w.ghi[t] == 0.0);
        if (t < 31u * kStepsPerDay) jan_ghi += w.ghi[t];
        if (t >= 181u * kStepsPerDay && t < 212u * kStepsPerDay) jul_ghi += w.ghi[t];
    }
    CHECK(jan_ghi * 2.0 < jul_ghi);
}

TEST_CASE("prices are positive with evening peaks") {
    const auto p = synth_spot_prices(140, 2);
    REQUIRE(p.size() == 140u * kStepsPerDay);
    double night = 0, evening = 0;
    int n_night = 0, n_evening = 0;
    for (std::size_t t = 0; t < p.size(); ++t) {
        CHECK(p[t] > 0.0);
        const double h = (t % kStepsPerDay) / 4.0;
        if (h >= 2.0 && h < 4.0) {
            night += p[t];
            ++n_night;
        }
        if (h >= 18.0 && h < 20.0) {
            evening += p[t];
            ++n_evening;
        }
    }
    CHECK(evening / n_evening > night / n_night);
}

TEST_CASE("carbon intensity is positive and seasonal") {
    const auto c = synth_carbon_intensity(365, 3);
    REQUIRE(c.size() == 365u * kStepsPerDay);
    for (double x : c) CHECK(x >= 20.0);
    const double jan = slice_mean(c, 0, 31u * kStepsPerDay);
    const double jul = slice_mean(c, 181u * kStepsPerDay, 212u * kStepsPerDay);
    CHECK(jan > jul);
}

TEST_CASE("base load hits the requested mean exactly and stays positive") {
    const auto y = synth_base_load(120, 250.0, 4);
    REQUIRE(y.size() == 120u * kStepsPerDay);
    double s = 0, y_min = 1e18;
    for (double x : y) {
        s += x;
        y_min = std::min(y_min, x);
    }
    CHECK(s / y.size() == doctest::Approx(250.0).epsilon(1e-12));
    CHECK(y_min > 0.0);
}

TEST_CASE("dhw draws: daily mass scales with occupancy, events in waking hours") {
    for (int occ : {1, 3, 5}) {
        const auto d = synth_dhw_draws(60, occ, 9);
        REQUIRE(d.size() == 60u * kStepsPerDay);
        double total = 0;
        for (std::size_t t = 0; t < d.size(); ++t) {
            CHECK(d[t] >= 0.0);
            const double h = (t % kStepsPerDay) / 4.0;
            if (d[t] > 0) {
                CHECK(h >= 5.0);
                CHECK(h < 23.0);
            }
            total += d[t] * kStepSeconds;
        }
        const double per_day = total / 60.0;
        CHECK(per_day >= 30.0 * occ - 1e-9);
        CHECK(per_day <= 50.0 * occ + 1e-9);
    }
}

TEST_CASE("generators reject invalid arguments") {
    CHECK_THROWS(synth_weather(0, 1));
    CHECK_THROWS(synth_base_load(10, -5.0, 1));
    CHECK_THROWS(synth_dhw_draws(10, 0, 1));
}

}  // TEST_SUITE
