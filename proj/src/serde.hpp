#pragma once
// Internal JSON (de)serialization helpers shared by the persistence layers.
// Tolerant parsing: absent keys keep the default-constructed value, so config
// files only spell out what they override.

#include <json.hpp>

#include "flexpool/fleet.hpp"
#include "flexpool/signals.hpp"

namespace flexpool::serde {

inline nlohmann::json bounds_to_json(const UniformBounds& b) {
    return nlohmann::json{{"lo", b.lo}, {"hi", b.hi}};
}

inline UniformBounds bounds_from_json(const nlohmann::json& j, const UniformBounds& dflt) {
    if (j.is_null()) return dflt;
    return {j.value("lo", dflt.lo), j.value("hi", dflt.hi)};
}

inline nlohmann::json spec_to_json(const FleetSpec& s) {
    nlohmann::json j;
    j["n_hp_buildings"] = s.n_hp_buildings;
    j["n_eh_buildings"] = s.n_eh_buildings;
    j["area_m2"] = bounds_to_json(s.area_m2);
    j["heat_intensity_kwh_m2"] = bounds_to_json(s.heat_intensity_kwh_m2);
    j["capacity_mj_m2k"] = bounds_to_json(s.capacity_mj_m2k);
    j["occupants"] = bounds_to_json(s.occupants);
    j["dhw_power_per_person"] = bounds_to_json(s.dhw_power_per_person);
    j["dhw_volume_per_person"] = bounds_to_json(s.dhw_volume_per_person);
    j["cop_ref"] = s.cop_ref;
    j["dT_ref"] = s.dT_ref;
    j["seed"] = s.seed;
    return j;
}

inline FleetSpec spec_from_json(const nlohmann::json& j) {
    FleetSpec s;
    s.n_hp_buildings = j.value("n_hp_buildings", s.n_hp_buildings);
    s.n_eh_buildings = j.value("n_eh_buildings", s.n_eh_buildings);
    s.area_m2 = bounds_from_json(j.value("area_m2", nlohmann::json()), s.area_m2);
    s.heat_intensity_kwh_m2 =
        bounds_from_json(j.value("heat_intensity_kwh_m2", nlohmann::json()), s.heat_intensity_kwh_m2);
    s.capacity_mj_m2k = bounds_from_json(j.value("capacity_mj_m2k", nlohmann::json()), s.capacity_mj_m2k);
    s.occupants = bounds_from_json(j.value("occupants", nlohmann::json()), s.occupants);
    s.dhw_power_per_person =
        bounds_from_json(j.value("dhw_power_per_person", nlohmann::json()), s.dhw_power_per_person);
    s.dhw_volume_per_person =
        bounds_from_json(j.value("dhw_volume_per_person", nlohmann::json()), s.dhw_volume_per_person);
    s.cop_ref = j.value("cop_ref", s.cop_ref);
    s.dT_ref = j.value("dT_ref", s.dT_ref);
    s.seed = j.value("seed", s.seed);
    return s;
}

inline nlohmann::json constraints_to_json(const SignalConstraints& c) {
    nlohmann::json j;
    j["horizon_steps"] = c.horizon_steps;
    j["max_off_steps"] = c.max_off_steps;
    j["min_constant_steps"] = c.min_constant_steps;
    j["max_switches"] = c.max_switches;
    j["max_on_steps"] = c.max_on_steps;
    j["nightly_uncontrolled_steps"] = c.nightly_uncontrolled_steps;
    return j;
}

inline SignalConstraints constraints_from_json(const nlohmann::json& j) {
    SignalConstraints c;
    c.horizon_steps = j.value("horizon_steps", c.horizon_steps);
    c.max_off_steps = j.value("max_off_steps", c.max_off_steps);
    c.min_constant_steps = j.value("min_constant_steps", c.min_constant_steps);
    c.max_switches = j.value("max_switches", c.max_switches);
    c.max_on_steps = j.value("max_on_steps", c.max_on_steps);
    c.nightly_uncontrolled_steps = j.value("nightly_uncontrolled_steps", c.nightly_uncontrolled_steps);
    return c;
}

}  // namespace flexpool::serde
