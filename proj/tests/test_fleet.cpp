#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "flexpool/fleet.hpp"

using namespace flexpool;

namespace {

FleetSpec small_spec(std::uint64_t seed = 42) {
    FleetSpec s;
    s.n_hp_buildings = 40;
    s.n_eh_buildings = 25;
    s.seed = seed;
    return s;
}

}  // namespace

TEST_SUITE("fleet") {

TEST_CASE("synthesis is bit-reproducible for a fixed seed") {
    const Fleet a = synthesize(small_spec());
    const Fleet b = synthesize(small_spec());
    REQUIRE(a.size() == b.size());
    bool identical = true;
    for (std::size_t i = 0; i < a.size(); ++i) {
        identical = identical && a.meta[i].R == b.meta[i].R && a.meta[i].C == b.meta[i].C &&
                    a.meta[i].q_nom_el == b.meta[i].q_nom_el &&
                    a.meta[i].occupants == b.meta[i].occupants &&
                    a.plants[i].serp.L == b.plants[i].serp.L &&
                    a.plants[i].dhw_tank.C_layer == b.plants[i].dhw_tank.C_layer;
    }
    CHECK(identical);

    const Fleet c = synthesize(small_spec(43));
    bool any_diff = false;
    for (std::size_t i = 0; i < std::min(a.size(), c.size()); ++i)
        any_diff = any_diff || a.meta[i].q_nom_el != c.meta[i].q_nom_el;
    CHECK(any_diff);
}

TEST_CASE("zero buildings gives an empty fleet") {
    FleetSpec s;
    s.n_hp_buildings = 0;
    s.n_eh_buildings = 0;
    CHECK(synthesize(s).size() == 0);
}

TEST_CASE("EH sizing stays inside the parameter bounds") {
    const Fleet f = synthesize(small_spec());
    int n_eh = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f.meta[i].kind != DeviceKind::EH) continue;
        ++n_eh;
        const auto& m = f.meta[i];
        CHECK(m.occupants >= 1);
        CHECK(m.occupants <= 5);
        CHECK(m.q_nom_el >= 1000.0 * m.occupants);
        CHECK(m.q_nom_el <= 2000.0 * m.occupants);
        CHECK(m.q_nom_el == m.q_nom_th);  // resistive heater, COP 1
        // tank volume via layer capacity: V = N * C_layer / (rho * cp)
        const auto& t = f.plants[i].dhw_tank;
        const double vol = t.N * t.C_layer / (kWaterDensity * kCpWater);
        CHECK(vol >= 0.08 * m.occupants - 1e-9);
        CHECK(vol <= 0.12 * m.occupants + 1e-9);
    }
    CHECK(n_eh == 25);
}

TEST_CASE("HP sizing follows the design rule and the floor delivers it") {
    const Fleet f = synthesize(small_spec());
    int n_hp = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f.meta[i].kind != DeviceKind::HP) continue;
        ++n_hp;
        const auto& m = f.meta[i];
        const double q_design = 24.0 / m.R;
        CHECK(m.q_nom_th ==
              doctest::Approx(std::max(q_design + m.q_dhw, 2000.0)).epsilon(1e-12));
        CHECK(m.q_nom_el == doctest::Approx(m.q_nom_th / 3.0).epsilon(1e-12));
        // the sized serpentine reproduces the design load at design conditions
        const auto r = serpentine_step(35.0, 20.0, f.plants[i].serp);
        CHECK(std::abs(r.Q_up - q_design) / q_design < 0.01);
        // envelope parameters trace back to the intensity/area draws
        CHECK(m.R >= 9.5e-4);
        CHECK(m.R <= 1.03e-2);
        CHECK(m.C >= 1e6 * 120.0);
        CHECK(m.C <= 5e6 * 320.0);
    }
    CHECK(n_hp == 40);
}

TEST_CASE("full-scale fleet reproduces the regional nominal capacities") {
    FleetSpec s;
    s.n_hp_buildings = 2670;
    s.n_eh_buildings = 1750;
    s.seed = 7;
    const Fleet f = synthesize(s);
    double p_hp = 0, p_eh = 0;
    for (const auto& m : f.meta)
        (m.kind == DeviceKind::HP ? p_hp : p_eh) += m.q_nom_el;
    CHECK(std::abs(p_hp - 12.5e6) / 12.5e6 < 0.20);
    CHECK(std::abs(p_eh - 7.7e6) / 7.7e6 < 0.20);
}

TEST_CASE("fleet_summary: single building and HP-only subsets") {
    const Fleet f = synthesize(small_spec());
    // find one HP index
    int hp_idx = -1;
    std::vector<int> hp_all;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f.meta[i].kind == DeviceKind::HP) {
            if (hp_idx < 0) hp_idx = static_cast<int>(i);
            hp_all.push_back(static_cast<int>(i));
        }
    REQUIRE(hp_idx >= 0);

    const MetadataFeatures one = fleet_summary(f, {hp_idx});
    CHECK(one.p_nom_sum == f.meta[hp_idx].q_nom_el);
    CHECK(one.p_nom_q10 == f.meta[hp_idx].q_nom_el);
    CHECK(one.p_nom_q90 == f.meta[hp_idx].q_nom_el);
    CHECK(one.r_mean == f.meta[hp_idx].R);
    CHECK(one.r_q10 == f.meta[hp_idx].R);
    CHECK(one.c_q90 == f.meta[hp_idx].C);
    CHECK(one.n_hp == 1);
    CHECK(one.n_eh == 0);
    CHECK(one.ratio == 1.0);  // 1 / (0 + 1)

    const MetadataFeatures hps = fleet_summary(f, hp_all);
    CHECK(hps.n_hp == doctest::Approx(static_cast<double>(hp_all.size())));
    CHECK(hps.n_eh == 0);
    CHECK(hps.ratio == doctest::Approx(static_cast<double>(hp_all.size())));

    // the empty pool is a valid scenario (grid sampling's zero corner)
    const MetadataFeatures none = fleet_summary(f, {});
    CHECK(none.p_nom_sum == 0.0);
    CHECK(none.n_hp == 0.0);
    CHECK(none.n_eh == 0.0);
    CHECK(none.ratio == 0.0);
    CHECK(none.r_mean == 0.0);
    CHECK(none.c_q90 == 0.0);

    CHECK_THROWS(fleet_summary(f, {static_cast<int>(f.size())}));
}

TEST_CASE("fleet_summary quantiles match a sorted-array oracle") {
    FleetSpec s = small_spec(11);
    s.n_hp_buildings = 70;
    s.n_eh_buildings = 60;
    const Fleet f = synthesize(s);

    // random 100-building subset
    Rng rng(55);
    std::vector<int> subset;
    for (int i = 0; i < 100; ++i)
        subset.push_back(static_cast<int>(rng.uniform_int(0, static_cast<int>(f.size()) - 1)));

    const MetadataFeatures m = fleet_summary(f, subset);

    auto oracle_q = [](std::vector<double> v, double q) {
        std::sort(v.begin(), v.end());
        const double h = (static_cast<double>(v.size()) - 1.0) * q;
        const std::size_t lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
        return v[lo] + (v[hi] - v[lo]) * (h - lo);
    };
    std::vector<double> p, r, c;
    double p_sum = 0, r_sum = 0, c_sum = 0;
    double hp = 0, eh = 0;
    for (int i : subset) {
        p.push_back(f.meta[i].q_nom_el);
        r.push_back(f.meta[i].R);
        c.push_back(f.meta[i].C);
        p_sum += f.meta[i].q_nom_el;
        r_sum += f.meta[i].R;
        c_sum += f.meta[i].C;
        (f.meta[i].kind == DeviceKind::HP ? hp : eh) += 1;
    }
    CHECK(m.p_nom_sum == doctest::Approx(p_sum).epsilon(1e-12));
    CHECK(m.p_nom_q10 == oracle_q(p, 0.10));
    CHECK(m.p_nom_q90 == oracle_q(p, 0.90));
    CHECK(m.r_mean == doctest::Approx(r_sum / subset.size()).epsilon(1e-12));
    CHECK(m.r_q10 == oracle_q(r, 0.10));
    CHECK(m.r_q90 == oracle_q(r, 0.90));
    CHECK(m.c_mean == doctest::Approx(c_sum / subset.size()).epsilon(1e-12));
    CHECK(m.c_q10 == oracle_q(c, 0.10));
    CHECK(m.c_q90 == oracle_q(c, 0.90));
    CHECK(m.n_hp == hp);
    CHECK(m.n_eh == eh);
    CHECK(m.ratio == doctest::Approx(hp / (eh + 1.0)).epsilon(1e-12));

    // names/vector stay in sync
    CHECK(MetadataFeatures::names().size() == 12);
    CHECK(m.as_vector().size() == 12);
    CHECK(m.as_vector()[0] == m.p_nom_sum);
    CHECK(m.as_vector()[5] == m.ratio);
}

TEST_CASE("invalid specs are rejected") {
    FleetSpec s = small_spec();
    s.n_hp_buildings = -1;
    CHECK_THROWS(synthesize(s));
    s = small_spec();
    s.area_m2 = {320.0, 120.0};
    CHECK_THROWS(synthesize(s));
    s = small_spec();
    s.heat_intensity_kwh_m2 = {-5.0, 10.0};
    CHECK_THROWS(synthesize(s));
    s = small_spec();
    s.cop_ref = 0.0;
    CHECK_THROWS(synthesize(s));
}

TEST_CASE("synthesized plants are simulate-ready") {
    const Fleet f0 = synthesize(small_spec(3));
    Fleet f = f0;
    const WeatherStep w{-2.0, 50.0};
    for (std::size_t i = 0; i < f.size(); ++i) {
        for (int step = 0; step < 8; ++step) {
            const auto r = building_step(f.plants[i], w, step == 4 ? 0.02 : 0.0, false, kStepSeconds);
            CHECK(std::isfinite(r.P_el));
            CHECK(r.P_el >= 0.0);
            if (f.meta[i].kind == DeviceKind::EH)
                CHECK((r.P_el == 0.0 || r.P_el == f.meta[i].q_nom_el));
            else  // electrical draw is thermal power over COP, capped by cop_min
                CHECK(r.P_el <= f.meta[i].q_nom_th / 1.5 + 1e-9);
        }
    }
}

}  // TEST_SUITE
