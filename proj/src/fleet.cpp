#include "flexpool/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "serde.hpp"

namespace flexpool {

namespace {

void check_bounds(const UniformBounds& b, const char* what, bool positive) {
    if (!(b.lo <= b.hi)) throw std::invalid_argument(std::string("FleetSpec: unordered bounds for ") + what);
    if (positive && b.lo <= 0)
        throw std::invalid_argument(std::string("FleetSpec: bounds must be positive for ") + what);
}

// Average envelope resistance calibrated so e [kWh/m2/yr] over the area is
// delivered across a mean indoor-outdoor difference of 7 K: R = 7 * 8760 h /
// (annual heat in Wh).
double resistance_from_intensity(double e_kwh_m2, double area_m2) {
    return 7.0 * 8760.0 / (1000.0 * e_kwh_m2 * area_m2);
}

struct Draws {
    int occupants;
    double area, e, c_mj, r_v, vol_pp;
};

Draws draw_building(Rng& rng, const FleetSpec& s) {
    Draws d;
    d.occupants = static_cast<int>(rng.uniform_int(static_cast<std::int64_t>(s.occupants.lo),
                                                   static_cast<std::int64_t>(s.occupants.hi)));
    d.area = rng.uniform(s.area_m2.lo, s.area_m2.hi);
    d.e = rng.loguniform(s.heat_intensity_kwh_m2.lo, s.heat_intensity_kwh_m2.hi);
    d.c_mj = rng.uniform(s.capacity_mj_m2k.lo, s.capacity_mj_m2k.hi);
    d.r_v = rng.uniform(s.dhw_power_per_person.lo, s.dhw_power_per_person.hi);
    d.vol_pp = rng.uniform(s.dhw_volume_per_person.lo, s.dhw_volume_per_person.hi);
    return d;
}

Tank make_dhw_tank(double volume_m3) {
    // loss coefficient grows with size: 1.5 W/K at 0.3 m3
    return make_tank(volume_m3, 10, 55.0, 5.0 * volume_m3, 150.0);
}

}  // namespace

void FleetSpec::validate() const {
    if (n_hp_buildings < 0 || n_eh_buildings < 0)
        throw std::invalid_argument("FleetSpec: building counts must be nonnegative");
    check_bounds(area_m2, "area_m2", true);
    check_bounds(heat_intensity_kwh_m2, "heat_intensity_kwh_m2", true);
    check_bounds(capacity_mj_m2k, "capacity_mj_m2k", true);
    check_bounds(occupants, "occupants", true);
    check_bounds(dhw_power_per_person, "dhw_power_per_person", true);
    check_bounds(dhw_volume_per_person, "dhw_volume_per_person", true);
    if (cop_ref <= 0) throw std::invalid_argument("FleetSpec: cop_ref must be positive");
    if (dT_ref <= 0) throw std::invalid_argument("FleetSpec: dT_ref must be positive");
}

Fleet synthesize(const FleetSpec& spec) {
    spec.validate();
    Fleet fleet;
    fleet.plants.reserve(spec.n_hp_buildings + spec.n_eh_buildings);
    fleet.meta.reserve(spec.n_hp_buildings + spec.n_eh_buildings);

    for (int i = 0; i < spec.n_hp_buildings; ++i) {
        Rng rng(derive_seed(spec.seed, "fleet/hp/" + std::to_string(i)));
        const Draws d = draw_building(rng, spec);

        PlantMeta m;
        m.kind = DeviceKind::HP;
        m.R = resistance_from_intensity(d.e, d.area);
        m.C = d.c_mj * 1e6 * d.area;
        m.q_dhw = d.r_v * 1000.0 * d.occupants;
        m.q_nom_th = std::max(spec.dT_ref / m.R + m.q_dhw, 2000.0);
        m.q_nom_el = m.q_nom_th / spec.cop_ref;
        m.occupants = d.occupants;
        m.area_m2 = d.area;

        BuildingPlant p;
        p.kind = DeviceKind::HP;
        p.env.R = m.R;
        p.env.C = m.C;
        p.serp = size_serpentine(m.R, Serpentine{});
        const double v_buf = std::clamp(0.06 * m.q_nom_th / 1000.0, 0.3, 1.5);
        p.buffer_tank = make_tank(v_buf, 10, 30.0, 4.0 * v_buf, 150.0);
        p.dhw_tank = make_dhw_tank(d.vol_pp * d.occupants);
        p.q_nom_th = m.q_nom_th;
        p.q_nom_el = m.q_nom_el;
        p.occupants = d.occupants;
        p.area_m2 = d.area;
        p.validate();

        fleet.plants.push_back(std::move(p));
        fleet.meta.push_back(m);
    }

    for (int i = 0; i < spec.n_eh_buildings; ++i) {
        Rng rng(derive_seed(spec.seed, "fleet/eh/" + std::to_string(i)));
        const Draws d = draw_building(rng, spec);

        PlantMeta m;
        m.kind = DeviceKind::EH;
        m.R = resistance_from_intensity(d.e, d.area);
        m.C = d.c_mj * 1e6 * d.area;
        m.q_dhw = d.r_v * 1000.0 * d.occupants;
        m.q_nom_th = m.q_dhw;  // resistive: thermal = electrical
        m.q_nom_el = m.q_dhw;
        m.occupants = d.occupants;
        m.area_m2 = d.area;

        BuildingPlant p;
        p.kind = DeviceKind::EH;
        p.env.R = m.R;  // recorded for metadata; EH space heat is non-electric
        p.env.C = m.C;
        p.dhw_tank = make_dhw_tank(d.vol_pp * d.occupants);
        p.q_nom_th = m.q_nom_th;
        p.q_nom_el = m.q_nom_el;
        p.occupants = d.occupants;
        p.area_m2 = d.area;
        p.validate();

        fleet.plants.push_back(std::move(p));
        fleet.meta.push_back(m);
    }
    return fleet;
}

const std::vector<std::string>& MetadataFeatures::names() {
    static const std::vector<std::string> n = {
        "meta_p_nom_sum", "meta_p_nom_q10", "meta_p_nom_q90", "meta_n_hp",   "meta_n_eh",   "meta_ratio",
        "meta_r_mean",    "meta_r_q10",     "meta_r_q90",     "meta_c_mean", "meta_c_q10",  "meta_c_q90"};
    return n;
}

std::vector<double> MetadataFeatures::as_vector() const {
    return {p_nom_sum, p_nom_q10, p_nom_q90, n_hp, n_eh, ratio, r_mean, r_q10, r_q90, c_mean, c_q10, c_q90};
}

MetadataFeatures fleet_summary(const Fleet& fleet, const std::vector<int>& subset) {
    if (subset.empty()) return {};  // zero-member pool: all-zero metadata
    std::vector<double> p, r, c;
    p.reserve(subset.size());
    r.reserve(subset.size());
    c.reserve(subset.size());
    MetadataFeatures m;
    for (int i : subset) {
        if (i < 0 || static_cast<std::size_t>(i) >= fleet.size())
            throw std::out_of_range("fleet_summary: subset index out of range");
        p.push_back(fleet.meta[i].q_nom_el);
        r.push_back(fleet.meta[i].R);
        c.push_back(fleet.meta[i].C);
        (fleet.meta[i].kind == DeviceKind::HP ? m.n_hp : m.n_eh) += 1.0;
    }
    for (double x : p) m.p_nom_sum += x;
    m.p_nom_q10 = quantile(p, 0.10);
    m.p_nom_q90 = quantile(p, 0.90);
    m.ratio = m.n_hp / (m.n_eh + 1.0);
    m.r_mean = mean(r);
    m.r_q10 = quantile(r, 0.10);
    m.r_q90 = quantile(r, 0.90);
    m.c_mean = mean(c);
    m.c_q10 = quantile(c, 0.10);
    m.c_q90 = quantile(c, 0.90);
    return m;
}

void save_fleet_json(const std::string& path, const Fleet& fleet, const FleetSpec& spec) {
    nlohmann::json j;
    j["format"] = "flexpool-fleet";
    j["version"] = 1;
    j["spec"] = serde::spec_to_json(spec);
    nlohmann::json buildings = nlohmann::json::array();
    for (const auto& m : fleet.meta) {
        nlohmann::json b;
        b["kind"] = m.kind == DeviceKind::HP ? "hp" : "eh";
        b["R"] = m.R;
        b["C"] = m.C;
        b["q_nom_el"] = m.q_nom_el;
        b["q_nom_th"] = m.q_nom_th;
        b["q_dhw"] = m.q_dhw;
        b["occupants"] = m.occupants;
        b["area_m2"] = m.area_m2;
        buildings.push_back(std::move(b));
    }
    j["buildings"] = std::move(buildings);

    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("save_fleet_json: cannot open " + path);
    f << j.dump(2) << "\n";
}

LoadedFleet load_fleet_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_fleet_json: cannot open " + path);
    const nlohmann::json j = nlohmann::json::parse(f);
    if (j.value("format", "") != "flexpool-fleet" || j.value("version", 0) != 1)
        throw std::runtime_error("load_fleet_json: unrecognized fleet file");

    LoadedFleet out;
    out.spec = serde::spec_from_json(j.at("spec"));
    out.fleet = synthesize(out.spec);

    const auto& buildings = j.at("buildings");
    if (buildings.size() != out.fleet.size())
        throw std::runtime_error("load_fleet_json: building count does not match the spec");
    for (std::size_t b = 0; b < out.fleet.size(); ++b) {
        const auto& rec = buildings[b];
        const auto& m = out.fleet.meta[b];
        const bool same = rec.at("kind") == (m.kind == DeviceKind::HP ? "hp" : "eh") &&
                          rec.at("R").get<double>() == m.R && rec.at("C").get<double>() == m.C &&
                          rec.at("q_nom_el").get<double>() == m.q_nom_el &&
                          rec.at("occupants").get<int>() == m.occupants;
        if (!same)
            throw std::runtime_error("load_fleet_json: stored metadata diverges from the spec synthesis");
    }
    return out;
}

}  // namespace flexpool
