#pragma once
// Fleet synthesis: build a population of simulate-ready BuildingPlants from
// statistical metadata distributions, and summarize sub-fleets into the
// aggregate metadata features used by the metamodel.

#include <cstdint>
#include <string>
#include <vector>

#include "flexpool/common.hpp"
#include "flexpool/physics.hpp"

namespace flexpool {

struct UniformBounds {
    double lo = 0;
    double hi = 0;
};

struct FleetSpec {
    int n_hp_buildings = 0;
    int n_eh_buildings = 0;

    UniformBounds area_m2{120.0, 320.0};
    UniformBounds heat_intensity_kwh_m2{50.0, 200.0};  // log-uniform, kWh/m2/yr
    UniformBounds capacity_mj_m2k{1.0, 5.0};           // MJ/(m2 K)
    UniformBounds occupants{1, 5};                     // integer uniform, inclusive
    UniformBounds dhw_power_per_person{1.0, 2.0};      // kW/person (EH nominal; HP DHW share)
    UniformBounds dhw_volume_per_person{0.08, 0.12};   // m3/person

    double cop_ref = 3.0;  // thermal -> electrical nominal conversion for HPs
    double dT_ref = 24.0;  // design temperature difference, K
    std::uint64_t seed = 0;

    void validate() const;
};

struct PlantMeta {
    DeviceKind kind = DeviceKind::HP;
    double R = 0;         // envelope thermal resistance, K/W
    double C = 0;         // envelope thermal capacity, J/K
    double q_nom_el = 0;  // nominal electrical power, W
    double q_nom_th = 0;  // nominal thermal power, W
    double q_dhw = 0;     // DHW share of the thermal sizing, W
    int occupants = 0;
    double area_m2 = 0;
};

struct Fleet {
    std::vector<BuildingPlant> plants;
    std::vector<PlantMeta> meta;

    std::size_t size() const { return plants.size(); }
};

// Deterministic synthesis: each building draws from its own seed stream so
// the HP population is independent of the EH count and vice versa.
Fleet synthesize(const FleetSpec& spec);

// Aggregate features of a sub-fleet (tab. "metadata"): 12 values.
struct MetadataFeatures {
    double p_nom_sum = 0, p_nom_q10 = 0, p_nom_q90 = 0;
    double n_hp = 0, n_eh = 0, ratio = 0;  // ratio = n_hp / (n_eh + 1)
    double r_mean = 0, r_q10 = 0, r_q90 = 0;
    double c_mean = 0, c_q10 = 0, c_q90 = 0;

    static const std::vector<std::string>& names();
    std::vector<double> as_vector() const;
};

MetadataFeatures fleet_summary(const Fleet& fleet, const std::vector<int>& subset);

// JSON persistence for inspection and pipeline hand-off. The file stores the
// FleetSpec plus every building's PlantMeta; loading re-synthesizes the fleet
// from the embedded spec (synthesis is deterministic) and cross-checks the
// stored metadata, so a stale or hand-edited file fails loudly.
struct LoadedFleet {
    Fleet fleet;
    FleetSpec spec;
};

void save_fleet_json(const std::string& path, const Fleet& fleet, const FleetSpec& spec);
LoadedFleet load_fleet_json(const std::string& path);

}  // namespace flexpool
