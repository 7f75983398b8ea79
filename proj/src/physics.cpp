#include "flexpool/physics.hpp"

#include <algorithm>
#include <cmath>

namespace flexpool {

int working_mode(double T_ma, double T_min_ma, double T_max_ma) {
    if (!(T_min_ma < T_max_ma)) throw std::invalid_argument("working_mode: T_min_ma must be < T_max_ma");
    if (T_ma > T_max_ma) return -1;
    if (T_ma < T_min_ma) return 1;
    return 0;
}

int hysteresis_heat(double T, double T_set, double dT, int prev) {
    if (dT <= 0) throw std::invalid_argument("hysteresis_heat: dT must be positive");
    if (T < T_set - dT / 2) return 1;
    if (T < T_set + dT / 2 && prev == 1) return 1;
    return 0;
}

int hysteresis_cool_tank(double T_up, double T_low, double T_min_c, double T_max_c, double dT, int prev) {
    if (!(T_min_c < T_max_c)) throw std::invalid_argument("hysteresis_cool_tank: T_min_c must be < T_max_c");
    if (dT <= 0) throw std::invalid_argument("hysteresis_cool_tank: dT must be positive");
    if (T_up > T_max_c + dT / 2 || T_low > T_max_c + dT / 2) return -1;
    if (T_low < T_min_c || T_up < T_max_c - dT / 2) return 0;
    return prev;
}

double valve_supply_temp(double T_ext, const ValveCurve& curve) {
    if (!(curve.T_ext_lo < curve.T_ext_hi))
        throw std::invalid_argument("valve_supply_temp: T_ext_lo must be < T_ext_hi");
    const double x = std::clamp((T_ext - curve.T_ext_lo) / (curve.T_ext_hi - curve.T_ext_lo), 0.0, 1.0);
    return curve.T_sup_hi + x * (curve.T_sup_lo - curve.T_sup_hi);
}

double cop_hp(double T_sup, double T_ext, const CopParams& p) {
    const double lift = T_sup - T_ext;
    if (lift <= 0) return p.cop_max;  // free heat; clamp
    const double cop = p.eta_carnot * (T_sup + 273.15) / lift;
    return std::clamp(cop, p.cop_min, p.cop_max);
}

// ---------------------------------------------------------------------------
// Serpentine

SerpentineResult serpentine_step(double T_0, double T_z, const Serpentine& serp) {
    if (serp.m_dot <= 0) throw std::invalid_argument("serpentine_step: m_dot must be positive");
    const double Ta = serp.T_asymptotic(T_z);
    const double mc = serp.m_dot * kCpWater;
    const double T_L = Ta + (T_0 - Ta) * std::exp(-serp.L * serp.rho_star() / mc);
    const double Q_up = ((Ta - T_z) * serp.L - (T_L - T_0) * mc / serp.rho_star()) / serp.R_up();
    return {T_L, Q_up};
}

namespace {

// golden-section maximization of f over [a, b] (f unimodal)
template <typename F>
double golden_max(F f, double a, double b, double rel_tol) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - phi * (b - a);
    double x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while ((b - a) > rel_tol * std::max(1.0, std::abs(b))) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

Serpentine size_serpentine(double R_envelope, const Serpentine& serp_template,
                           double T_supply_design, double T_z_design, double dT_ref) {
    if (R_envelope <= 0) throw std::invalid_argument("size_serpentine: envelope R must be positive");
    const double Q_nom = dT_ref / R_envelope;
    constexpr double kLMin = 1.0, kLMax = 1e4;
    constexpr double kMdotRef = 0.1, kMdotMax = 2.0;
    constexpr double kRelTol = 1e-6;

    Serpentine s = serp_template;
    auto q_at = [&](double L, double m) {
        Serpentine t = s;
        t.L = L;
        t.m_dot = m;
        return serpentine_step(T_supply_design, T_z_design, t).Q_up;
    };
    // Q_up(L) rises from ~0, peaks, then declines (the ground acts as a sink
    // for very long pipes). A mass flow is feasible when the peak clears the
    // target with a small safety margin keeping the solution on the rising
    // branch, where bisection for Q_up(L) = Q_nom is well posed.
    auto peak_L = [&](double m) { return golden_max([&](double L) { return q_at(L, m); }, kLMin, kLMax, kRelTol); };
    auto feasible = [&](double m) { return q_at(peak_L(m), m) >= 1.02 * Q_nom; };

    double m = kMdotRef;  // the penalty term anchors the flow at the reference value
    if (!feasible(m)) {
        // grow the flow until feasible, then bisect back toward the smallest
        // feasible flow — that is the penalty-optimal choice above 0.1 kg/s
        double lo = m, hi = m;
        bool found = false;
        while (hi < kMdotMax) {
            lo = hi;
            hi = std::min(hi * 1.6, kMdotMax);
            if (feasible(hi)) {
                found = true;
                break;
            }
        }
        if (!found) {
            // final hard check mandated by the contract: reject when no L
            // brings Q_up within 50% of Q_nom even at the flow cap
            const double best = q_at(peak_L(kMdotMax), kMdotMax);
            if (std::abs(best - Q_nom) > 0.5 * Q_nom)
                throw std::runtime_error("size_serpentine: demand unreachable within pipe-length bounds");
            hi = kMdotMax;
        } else {
            while ((hi - lo) > 1e-3 * hi) {
                const double mid = 0.5 * (lo + hi);
                if (feasible(mid))
                    hi = mid;
                else
                    lo = mid;
            }
        }
        m = hi;
    }
    // bisect the rising branch for Q_up(L) = Q_nom
    double L_hi = peak_L(m);
    double L_lo = kLMin;
    if (q_at(L_lo, m) > Q_nom) {
        // degenerate: even one metre over-delivers; accept the boundary
        s.L = kLMin;
        s.m_dot = m;
        return s;
    }
    while ((L_hi - L_lo) > kRelTol * L_hi) {
        const double mid = 0.5 * (L_lo + L_hi);
        if (q_at(mid, m) < Q_nom)
            L_lo = mid;
        else
            L_hi = mid;
    }
    s.L = 0.5 * (L_lo + L_hi);
    s.m_dot = m;
    const double got = q_at(s.L, s.m_dot);
    if (std::abs(got - Q_nom) > 0.5 * Q_nom)
        throw std::runtime_error("size_serpentine: no pipe length brings Q_up within 50% of Q_nom");
    return s;
}

// ---------------------------------------------------------------------------
// Tank

void Tank::validate() const {
    if (N < 2) throw std::invalid_argument("Tank: need at least 2 layers");
    if (static_cast<int>(T.size()) != N) throw std::invalid_argument("Tank: layer vector size mismatch");
    if (C_layer <= 0) throw std::invalid_argument("Tank: C_layer must be positive");
    if (u_amb < 0 || k_buo < 0) throw std::invalid_argument("Tank: coefficients must be nonnegative");
    if (heated_layers.empty()) throw std::invalid_argument("Tank: heated layer set must not be empty");
    for (int li : heated_layers)
        if (li < 1 || li > N) throw std::invalid_argument("Tank: heated layer index out of range");
    if (sensor_up < 1 || sensor_up > N || sensor_low < 1 || sensor_low > N)
        throw std::invalid_argument("Tank: sensor index out of range");
}

Tank make_tank(double volume_m3, int N, double T_init, double ua_total, double k_buo) {
    if (volume_m3 <= 0) throw std::invalid_argument("make_tank: volume must be positive");
    if (N < 2) throw std::invalid_argument("make_tank: need at least 2 layers");
    Tank t;
    t.N = N;
    t.T.assign(N, T_init);
    t.C_layer = volume_m3 * kWaterDensity * kCpWater / N;
    t.u_amb = ua_total / N;
    t.k_buo = k_buo;
    t.sensor_up = std::max(2, static_cast<int>(std::lround(0.8 * N)));
    t.sensor_low = std::max(1, static_cast<int>(std::lround(0.3 * N)));
    t.heated_layers.clear();
    for (int li = 2; li <= std::min(N, 4); ++li) t.heated_layers.push_back(li);
    if (t.heated_layers.empty()) t.heated_layers.push_back(1);
    t.validate();
    return t;
}

TankFlux tank_step(Tank& tank, double m_dot_draw, double T_inlet, double Q_h_total,
                   double T_amb, double dt) {
    if (dt < 0) throw std::invalid_argument("tank_step: dt must be nonnegative");
    if (m_dot_draw < 0) throw std::invalid_argument("tank_step: draw must be nonnegative");
    const int N = tank.N;
    // sub-stepping: the spec's enthalpy CFL plus the analogous bound for the
    // exchange terms, so the explicit update stays stable for any parameters
    const double coupling = kCpWater * m_dot_draw + 2.0 * tank.k_buo * N + 3.0 * tank.u_amb;
    const int n_sub = std::max(1, static_cast<int>(std::ceil(dt * coupling / (0.5 * tank.C_layer))));
    const double h = dt / n_sub;

    TankFlux flux;
    const double q_per_layer = Q_h_total / static_cast<double>(tank.heated_layers.size());
    std::vector<double> power(N);
    for (int sub = 0; sub < n_sub; ++sub) {
        std::fill(power.begin(), power.end(), 0.0);
        if (m_dot_draw > 0) {
            for (int i = 0; i < N; ++i) {
                const double T_prev = (i == 0) ? T_inlet : tank.T[i - 1];
                power[i] += kCpWater * m_dot_draw * (T_prev - tank.T[i]);
            }
            flux.enthalpy += kCpWater * m_dot_draw * (T_inlet - tank.T[N - 1]) * h;
        }
        for (int i = 0; i < N; ++i) {
            if (i + 1 < N) power[i] += tank.u_amb * (tank.T[i + 1] - tank.T[i]);  // Q_cond^u
            if (i > 0) power[i] += tank.u_amb * (tank.T[i - 1] - tank.T[i]);      // Q_cond^d
            const double loss = tank.u_amb * (T_amb - tank.T[i]);
            power[i] += loss;
            flux.loss += loss * h;
        }
        // buoyancy: conservative exchange lifting heat from a hotter lower
        // layer to the colder one above it, magnitude k*N*max(dT, 0)
        for (int i = 0; i + 1 < N; ++i) {
            const double q = tank.k_buo * N * std::max(tank.T[i] - tank.T[i + 1], 0.0);
            power[i] -= q;
            power[i + 1] += q;
        }
        for (int li : tank.heated_layers) power[li - 1] += q_per_layer;
        flux.heat_in += Q_h_total * h;
        for (int i = 0; i < N; ++i) tank.T[i] += h * power[i] / tank.C_layer;
    }
    return flux;
}

// ---------------------------------------------------------------------------
// Building plant

void BuildingPlant::validate() const {
    if (q_nom_th <= 0 || q_nom_el <= 0) throw std::invalid_argument("BuildingPlant: nominal powers must be positive");
    dhw_tank.validate();
    if (kind == DeviceKind::HP) {
        env.validate();
        serp.validate();
        buffer_tank.validate();
    }
}

StepResult building_step(BuildingPlant& p, const WeatherStep& weather, double dhw_draw_kg_s,
                         bool force_off, double dt) {
    if (dt <= 0) throw std::invalid_argument("building_step: dt must be positive");
    if (dhw_draw_kg_s < 0) throw std::invalid_argument("building_step: draw must be nonnegative");

    p.t_ma.push(weather.T_ext);
    p.wm = working_mode(p.t_ma.value(), p.thresholds.T_min_ma, p.thresholds.T_max_ma);

    StepResult out;
    // DHW hysteresis runs year-round on the upper sensor
    p.s_hy_dhw = hysteresis_heat(p.dhw_tank.T_up(), p.T_set_dhw, p.dT_dhw, p.s_hy_dhw);

    if (p.kind == DeviceKind::EH) {
        const bool on = p.s_hy_dhw == 1 && !force_off;
        tank_step(p.dhw_tank, dhw_draw_kg_s, p.T_cold_water, on ? p.q_nom_th : 0.0, p.T_amb_tank, dt);
        out.P_el = on ? p.q_nom_el : 0.0;
        out.T_z = p.env.T_z;
        return out;
    }

    // HP configuration: space control is gated by the working mode
    const double T_sup_set = valve_supply_temp(weather.T_ext, p.valve);
    if (p.wm == 1) {
        p.s_hy_space = hysteresis_heat(p.env.T_z, p.env.T_min_hy, p.env.delta_T_hy, p.s_hy_space);
        // hold the buffer band fully above the valve target so the supply
        // setpoint is always available to the distribution loop
        p.s_hy_buffer = hysteresis_heat(p.buffer_tank.T_up(), T_sup_set + p.dT_buffer / 2, p.dT_buffer,
                                        p.s_hy_buffer);
    } else {
        p.s_hy_space = 0;
        p.s_hy_buffer = 0;
    }

    // device dispatch: DHW tank always served with priority
    double q_dhw = 0, q_buf = 0;
    if (!force_off) {
        if (p.s_hy_dhw == 1)
            q_dhw = p.q_nom_th;
        else if (p.s_hy_buffer == 1)
            q_buf = p.q_nom_th;
    }
    if (q_dhw > 0)
        out.P_el = q_dhw / cop_hp(p.T_set_dhw + p.T_cond_margin, weather.T_ext, p.cop);
    else if (q_buf > 0)
        out.P_el = q_buf / cop_hp(T_sup_set + p.dT_buffer / 2 + p.T_cond_margin, weather.T_ext, p.cop);

    tank_step(p.dhw_tank, dhw_draw_kg_s, p.T_cold_water, q_dhw, p.T_amb_tank, dt);

    // space loop: the circulation pump runs on the zone hysteresis and is not
    // blocked by force-off; only the compressor is
    double Q_up = 0;
    if (p.s_hy_space == 1) {
        const double T_top = p.buffer_tank.T.back();
        const double T_0 = std::min(T_top, T_sup_set);
        const auto r = serpentine_step(T_0, p.env.T_z, p.serp);
        Q_up = r.Q_up;
        // 3-way valve: only the fraction actually drawn from the tank loops
        // through it; the rest recirculates at the return temperature
        double x = 1.0;
        if (T_top - r.T_L > 1e-9) x = std::clamp((T_0 - r.T_L) / (T_top - r.T_L), 0.0, 1.0);
        tank_step(p.buffer_tank, x * p.serp.m_dot, r.T_L, q_buf, p.T_amb_tank, dt);
    } else {
        tank_step(p.buffer_tank, 0.0, 0.0, q_buf, p.T_amb_tank, dt);
    }

    // envelope: C dT_z/dt = (T_ext - T_z)/R + Q_up
    const int n_sub = 4;
    const double h = dt / n_sub;
    for (int i = 0; i < n_sub; ++i)
        p.env.T_z += h * ((weather.T_ext - p.env.T_z) / p.env.R + Q_up) / p.env.C;

    out.Q_up = Q_up;
    out.T_z = p.env.T_z;
    return out;
}

}  // namespace flexpool
