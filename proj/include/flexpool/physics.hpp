#pragma once
// White-box 15-minute thermal simulation of one building: RC envelope,
// stratified water tank(s), serpentine floor heating, HP/EH devices and their
// hysteresis control chain.
//
// Sign conventions: temperatures in degC, powers in W, energies in J, thermal
// capacities in J/K, resistances in K/W (per-length serpentine resistances in
// m*K/W). Layer index 1 = tank bottom, following the stratified-tank
// convention; public Tank fields use 1-based indices.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "flexpool/common.hpp"

namespace flexpool {

constexpr double kCpWater = 4186.0;       // J/(kg K)
constexpr double kWaterDensity = 1000.0;  // kg/m3

// ---------------------------------------------------------------------------
// Envelope

struct Envelope {
    double R = 5e-3;        // K/W
    double C = 4e8;         // J/K
    double T_z = 20.0;      // zone temperature, degC
    double T_min_hy = 20.0; // heating setpoint
    double T_max_hy = 24.0; // cooling setpoint
    double delta_T_hy = 1.0;

    void validate() const {
        if (R <= 0 || C <= 0) throw std::invalid_argument("Envelope: R and C must be positive");
        if (!(T_min_hy < T_max_hy)) throw std::invalid_argument("Envelope: T_min_hy must be < T_max_hy");
    }
};

// ---------------------------------------------------------------------------
// Control primitives (Appendix A.1)

// -1 cooling, +1 heating, 0 idle, from the 7-day moving average of T_ext.
int working_mode(double T_ma, double T_min_ma, double T_max_ma);

// Heating hysteresis: 1 if T < T_set - dT/2, or (T < T_set + dT/2 and prev).
int hysteresis_heat(double T, double T_set, double dT, int prev);

// Cooling-mode tank logic on the two sensor temperatures; returns -1/0/prev.
int hysteresis_cool_tank(double T_up, double T_low, double T_min_c, double T_max_c, double dT, int prev);

struct ValveCurve {
    double T_ext_lo = -4.0;
    double T_ext_hi = 20.0;
    double T_sup_hi = 35.0;  // supply setpoint at T_ext_lo
    double T_sup_lo = 25.0;  // supply setpoint at T_ext_hi
};

// Linear supply-temperature curve of the 3-way valve, clamped at endpoints.
double valve_supply_temp(double T_ext, const ValveCurve& curve);

struct CopParams {
    double eta_carnot = 0.45;
    double cop_min = 1.5;
    double cop_max = 6.0;
};

double cop_hp(double T_sup, double T_ext, const CopParams& p);

// ---------------------------------------------------------------------------
// Serpentine floor heating (Appendix A.2)

struct Serpentine {
    double L = 100.0;     // pipe length, m
    double m_dot = 0.1;   // loop mass flow, kg/s
    double w = 0.02;      // tube diameter, m
    double h_in = 1500.0; // pipe-internal film coefficient, W/(m2 K)
    double h_u_eq = 5.0;  // floor-to-air combined coefficient, W/(m2 K)
    double R_u = 1.0;     // m K / W
    double R_g = 0.7;     // m K / W
    double T_g = 10.0;    // ground temperature, degC

    double R_down() const { return 1.0 / (h_in * w) + 1.0 / (h_u_eq * w) + R_u; }
    double R_up() const { return 1.0 / (h_in * w) + R_g; }
    double rho_star() const {
        const double ru = R_up(), rd = R_down();
        return (ru + rd) / (ru * rd);
    }
    double T_asymptotic(double T_z) const {
        return (R_down() * T_z + R_up() * T_g) / (R_down() + R_up());
    }
    void validate() const {
        if (L <= 0 || m_dot <= 0 || w <= 0 || h_in <= 0 || h_u_eq <= 0 || R_u <= 0 || R_g <= 0)
            throw std::invalid_argument("Serpentine: all geometry/transfer parameters must be positive");
    }
};

struct SerpentineResult {
    double T_L;   // outlet water temperature, degC
    double Q_up;  // heating power delivered to the zone, W
};

// Analytic steady-state solution of the pipe temperature profile.
SerpentineResult serpentine_step(double T_0, double T_z, const Serpentine& serp);

// Size (L, m_dot) so Q_up at design conditions (T_0 = design supply, T_z =
// 20 degC) matches Q_nom = dT_ref / R; penalized pull of m_dot toward
// 0.1 kg/s, relative tolerance 1e-6. Throws if no L in [1, 1e4] m brings
// Q_up within 50% of Q_nom.
Serpentine size_serpentine(double R_envelope, const Serpentine& serp_template,
                           double T_supply_design = 35.0, double T_z_design = 20.0,
                           double dT_ref = 24.0);

// ---------------------------------------------------------------------------
// Stratified tank (Appendix A.3)

struct Tank {
    int N = 10;
    std::vector<double> T;          // layer temperatures, [0] = layer 1 = bottom
    double C_layer = 125580.0;      // J/K per layer (30 kg of water)
    double u_amb = 0.15;            // W/K per layer, ambient loss and conduction coefficient
    double k_buo = 150.0;           // W/K buoyancy coefficient
    std::vector<int> heated_layers = {2, 3, 4};  // 1-based set I
    int sensor_up = 8;              // 1-based
    int sensor_low = 3;

    double T_up() const { return T.at(sensor_up - 1); }
    double T_low() const { return T.at(sensor_low - 1); }
    double stored_energy() const {
        double e = 0;
        for (double Ti : T) e += C_layer * Ti;
        return e;
    }
    void validate() const;
};

Tank make_tank(double volume_m3, int N, double T_init, double ua_total, double k_buo);

// Integrated fluxes over one tank_step call (joules), for energy accounting.
struct TankFlux {
    double heat_in = 0;    // integral of Q_h dt
    double loss = 0;       // integral of sum_i u_amb (T_amb - T_i) dt (negative when losing)
    double enthalpy = 0;   // integral of cp*m_dot*(T_inlet - T_topdraw) dt
};

// Explicit-Euler update with CFL-style sub-stepping. m_dot_draw enters the
// bottom layer at T_inlet and leaves from the top layer. Q_h_total is split
// evenly across heated_layers.
TankFlux tank_step(Tank& tank, double m_dot_draw, double T_inlet, double Q_h_total,
                   double T_amb, double dt);

// ---------------------------------------------------------------------------
// Building plant

enum class DeviceKind : std::uint8_t { HP, EH };

// Causal moving average over the trailing 7 days of 15-minute samples.
class MovingAverage {
public:
    explicit MovingAverage(std::size_t window = 7 * kStepsPerDay) : window_(window) {}
    void push(double x) {
        if (buf_.size() < window_) {
            buf_.push_back(x);
            sum_ += x;
        } else {
            sum_ += x - buf_[pos_];
            buf_[pos_] = x;
            pos_ = (pos_ + 1) % window_;
        }
    }
    double value() const { return buf_.empty() ? 0.0 : sum_ / static_cast<double>(buf_.size()); }
    bool empty() const { return buf_.empty(); }

private:
    std::size_t window_;
    std::vector<double> buf_;
    std::size_t pos_ = 0;
    double sum_ = 0;
};

struct ComfortThresholds {
    double T_min_ma = 14.0;  // heating below this 7-day average
    double T_max_ma = 18.0;  // cooling above this
};

struct BuildingPlant {
    DeviceKind kind = DeviceKind::HP;

    // envelope + heat distribution (HP configuration only; EH buildings heat
    // with non-electric fuels and model only DHW)
    Envelope env;
    Serpentine serp;
    Tank buffer_tank;

    Tank dhw_tank;

    double q_nom_th = 8000.0;   // HP: nominal thermal power W; EH: electrical = thermal (COP 1)
    double q_nom_el = 2666.0;   // nominal electrical power W
    CopParams cop;
    ValveCurve valve;
    ComfortThresholds thresholds;

    double T_set_dhw = 55.0;
    double dT_dhw = 5.0;
    double dT_buffer = 5.0;
    double T_cond_margin = 2.0;  // condenser temperature above the served setpoint
    double T_amb_tank = 20.0;    // room around the tanks
    double T_cold_water = 12.0;

    // metadata used by the fleet summary / features
    int occupants = 3;
    double area_m2 = 200.0;

    // controller state
    MovingAverage t_ma;
    int wm = 0;
    int s_hy_space = 0;
    int s_hy_dhw = 0;
    int s_hy_buffer = 0;

    void validate() const;
};

struct WeatherStep {
    double T_ext;  // degC
    double ghi;    // W/m2
};

struct StepResult {
    double P_el = 0;    // electrical power drawn this step, W
    double Q_up = 0;    // heat delivered to the zone, W (HP config)
    double T_z = 0;     // zone temperature after the step
};

// Advance one plant by dt seconds (900 at top level). force_off blocks the
// compressor/resistor (device electrical power is exactly zero) but leaves
// circulation pumps and envelope dynamics running.
StepResult building_step(BuildingPlant& plant, const WeatherStep& weather, double dhw_draw_kg_s,
                         bool force_off, double dt);

}  // namespace flexpool
