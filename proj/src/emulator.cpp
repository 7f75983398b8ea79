#include "flexpool/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "flexpool/dataset.hpp"
#include "flexpool/physics.hpp"

namespace flexpool {

namespace {

constexpr int kH = kStepsPerDay;

std::vector<double> slice_day(const std::vector<double>& v, long off) {
    return {v.begin() + off, v.begin() + off + kH};
}

double day_max(const std::vector<double>& day) { return *std::max_element(day.begin(), day.end()); }

// gamma * sum_k p[off+k] * y[k] over one day
double day_spot_cost(const std::vector<double>& y_day, const std::vector<double>& p, long off) {
    double e = 0;
    for (int k = 0; k < kH; ++k) e += p[static_cast<std::size_t>(off + k)] * y_day[static_cast<std::size_t>(k)];
    return kGamma * e;
}

double day_mean(const std::vector<double>& v, long off) {
    double s = 0;
    for (int k = 0; k < kH; ++k) s += v[static_cast<std::size_t>(off + k)];
    return s / kH;
}

std::string signal_bits(const ForceOffSignal& s) {
    std::string out(kH, '0');
    for (int i = 0; i < kH; ++i)
        if (s.bit(i)) out[static_cast<std::size_t>(i)] = '1';
    return out;
}

struct PoolCtx {
    std::string name;
    std::vector<int> members;
    FeatureContext ctx;
};

FeatureContext make_pool_ctx(const Fleet& fleet, const std::vector<int>& members,
                             const EmulationInputs& in, long total_steps) {
    FeatureContext ctx;
    ctx.s.assign(static_cast<std::size_t>(total_steps), 0.0);
    ctx.y.assign(static_cast<std::size_t>(total_steps), 0.0);
    ctx.T_ext.assign(in.weather.T_ext.begin(), in.weather.T_ext.begin() + total_steps);
    ctx.ghi.assign(in.weather.ghi.begin(), in.weather.ghi.begin() + total_steps);
    ctx.meta = fleet_summary(fleet, members).as_vector();
    ctx.cal = in.cal;
    return ctx;
}

}  // namespace

std::string run_mode_name(RunMode mode) {
    switch (mode) {
        case RunMode::Simulated: return "simulated";
        case RunMode::Forecast: return "forecast";
        case RunMode::Emulated: return "emulated";
    }
    throw std::logic_error("run_mode_name: unknown mode");
}

OpenLoopError open_loop_error(const std::vector<double>& y_day, const std::vector<double>& y_hat_day) {
    if (y_day.size() != static_cast<std::size_t>(kH) || y_hat_day.size() != static_cast<std::size_t>(kH))
        throw std::invalid_argument("open_loop_error: series must hold one day (96 steps)");
    const double mean_load = std::accumulate(y_day.begin(), y_day.end(), 0.0) / kH;
    const double floor = 0.01 * mean_load;
    if (!(floor > 0.0)) throw std::domain_error("open_loop_error: day carries no load");

    OpenLoopError out;
    out.ne.resize(static_cast<std::size_t>(kH));
    double acc = 0;
    for (int k = 0; k < kH; ++k) {
        const auto i = static_cast<std::size_t>(k);
        out.ne[i] = (y_day[i] - y_hat_day[i]) / std::max(y_day[i], floor);
        acc += std::abs(out.ne[i]);
    }
    out.mean = acc / kH;
    return out;
}

double co2_tons(const std::vector<double>& y_kw, const std::vector<double>& carbon_g_per_kwh) {
    if (y_kw.size() != carbon_g_per_kwh.size())
        throw std::invalid_argument("co2_tons: series must be aligned");
    double g = 0;
    for (std::size_t t = 0; t < y_kw.size(); ++t) g += carbon_g_per_kwh[t] * y_kw[t] * kGamma;
    return g / 1e6;
}

int month_of_day(int day) {
    if (day < 0) throw std::invalid_argument("month_of_day: negative day");
    const int year = day / 365;
    int rem = day % 365;
    for (int m = 0; m < 12; ++m) {
        if (rem < Calendar::month_days[m]) return year * 12 + m;
        rem -= Calendar::month_days[m];
    }
    throw std::logic_error("month_of_day: calendar walk overran");
}

void MonthlyPeakLedger::observe(int month_idx, double day_peak_kw, double p_peak,
                                std::vector<MonthPeak>& months) {
    if (month == month_idx) {
        y_max_kw = std::max(y_max_kw, day_peak_kw);
        return;
    }
    close(p_peak, months);
    month = month_idx;
    y_max_kw = day_peak_kw;
}

void MonthlyPeakLedger::close(double p_peak, std::vector<MonthPeak>& months) {
    if (month < 0) return;
    months.push_back({month, y_max_kw, p_peak * y_max_kw});
    month = -1;
    y_max_kw = 0;
}

std::vector<int> sample_controlled(const Fleet& fleet, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw std::invalid_argument("sample_controlled: fraction outside [0, 1]");
    const auto n = static_cast<int>(fleet.size());
    const auto k = static_cast<int>(std::lround(fraction * n));
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (int i = 0; i < k; ++i) std::swap(idx[static_cast<std::size_t>(i)],
                                          idx[static_cast<std::size_t>(rng.uniform_int(i, n - 1))]);
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<double> rebound_profile(const TreeEnsembleModel& model, FeatureContext& ctx, long t,
                                    const ForceOffSignal& s) {
    const ForceOffSignal zero{};
    const auto with_s = predict_with_override(model, ctx, t, &s);
    const auto with_0 = predict_with_override(model, ctx, t, &zero);
    std::vector<double> out(with_s.size());
    for (std::size_t h = 0; h < out.size(); ++h) out[h] = with_s[h] - with_0[h];
    return out;
}

std::vector<std::vector<double>> warmup_trace(const Fleet& fleet, const WeatherSeries& weather,
                                              int warmup_days, std::uint64_t seed, int n_threads) {
    if (warmup_days < 1) throw std::invalid_argument("warmup_trace: warmup_days must be positive");
    const auto steps = static_cast<std::size_t>(warmup_days) * kH;
    if (weather.n_steps() < steps) throw std::invalid_argument("warmup_trace: weather too short");

    std::vector<std::vector<double>> out(fleet.size(), std::vector<double>(steps, 0.0));
    parallel_for(
        fleet.size(),
        [&](std::size_t b) {
            BuildingPlant plant = fleet.plants[b];
            const auto draws = synth_dhw_draws(warmup_days, plant.occupants,
                                               derive_seed(seed, "dhw/" + std::to_string(b)));
            for (std::size_t t = 0; t < steps; ++t)
                out[b][t] = building_step(plant, weather.at(t), draws[t], false, kStepSeconds).P_el;
        },
        n_threads);
    return out;
}

std::vector<EnergySignature> fit_fleet_signatures(const Fleet& fleet,
                                                  const std::vector<std::vector<double>>& power_w,
                                                  const WeatherSeries& weather) {
    if (power_w.size() != fleet.size())
        throw std::invalid_argument("fit_fleet_signatures: one power series per building expected");
    if (power_w.empty() || power_w[0].size() % kH != 0)
        throw std::invalid_argument("fit_fleet_signatures: power series must cover whole days");
    const auto n_days = static_cast<int>(power_w[0].size() / kH);
    if (weather.n_steps() < static_cast<std::size_t>(n_days) * kH)
        throw std::invalid_argument("fit_fleet_signatures: weather shorter than the trace");

    std::vector<double> t_d(static_cast<std::size_t>(n_days)), i_d(static_cast<std::size_t>(n_days));
    for (int d = 0; d < n_days; ++d) {
        t_d[static_cast<std::size_t>(d)] = day_mean(weather.T_ext, static_cast<long>(d) * kH);
        i_d[static_cast<std::size_t>(d)] = day_mean(weather.ghi, static_cast<long>(d) * kH);
    }

    std::vector<EnergySignature> out(fleet.size());
    for (std::size_t b = 0; b < fleet.size(); ++b) {
        if (fleet.meta[b].kind != DeviceKind::HP) continue;
        if (power_w[b].size() != power_w[0].size())
            throw std::invalid_argument("fit_fleet_signatures: ragged power matrix");
        std::vector<double> e_kwh(static_cast<std::size_t>(n_days), 0.0);
        for (int d = 0; d < n_days; ++d) {
            double acc = 0;
            for (int k = 0; k < kH; ++k)
                acc += power_w[b][static_cast<std::size_t>(d * kH + k)];
            e_kwh[static_cast<std::size_t>(d)] = acc / 1000.0 * kGamma;
        }
        out[b] = fit_energy_signature(e_kwh, t_d, i_d);
    }
    return out;
}

void EmulationInputs::validate() const {
    if (fleet == nullptr || fleet->size() == 0)
        throw std::invalid_argument("emulation: fleet is required");
    if (warmup_days < 8)
        throw std::invalid_argument("emulation: warmup_days must cover the feature history (>= 8)");
    if (horizon_days < 1) throw std::invalid_argument("emulation: horizon_days must be positive");
    if (!(ctrl_fraction >= 0.0 && ctrl_fraction <= 1.0))
        throw std::invalid_argument("emulation: ctrl_fraction outside [0, 1]");
    if (flex_model == nullptr || total_model == nullptr)
        throw std::invalid_argument("emulation: both metamodels are required");
    if (p_peak < 0) throw std::invalid_argument("emulation: p_peak must be non-negative");

    const auto need = static_cast<std::size_t>(warmup_days + horizon_days) * kH;
    if (weather.n_steps() < need || spot.size() < need || carbon.size() < need ||
        base_load.size() < need)
        throw std::invalid_argument("emulation: exogenous series shorter than the run");

    const bool has_zero =
        std::any_of(signal_set.begin(), signal_set.end(),
                    [](const ForceOffSignal& s) { return s == ForceOffSignal{}; });
    if (signal_set.empty() || !has_zero)
        throw std::invalid_argument("emulation: signal set must contain the zero signal");
    if (!signatures_by_building.empty() && signatures_by_building.size() != fleet->size())
        throw std::invalid_argument("emulation: one energy signature per building expected");

    if (mode == RunMode::Emulated) {
        if (warmup_power.size() != fleet->size())
            throw std::invalid_argument("emulation: EMULATED runs need a warmup power trace");
        for (const auto& row : warmup_power)
            if (row.size() < static_cast<std::size_t>(warmup_days) * kH)
                throw std::invalid_argument("emulation: warmup trace shorter than warmup_days");
    }
}

KpiReport run_horizon(const EmulationInputs& in) {
    in.validate();
    const Fleet& fleet = *in.fleet;
    const auto n_b = static_cast<int>(fleet.size());
    const int total_days = in.warmup_days + in.horizon_days;
    const long total_steps = static_cast<long>(total_days) * kH;
    const long warm_steps = static_cast<long>(in.warmup_days) * kH;
    const bool physics = in.mode != RunMode::Emulated;

    KpiReport rep;
    rep.mode = in.mode;
    rep.horizon_days = in.horizon_days;
    rep.ctrl_members = sample_controlled(fleet, in.ctrl_fraction, derive_seed(in.seed, "ctrl"));

    std::vector<char> is_ctrl(static_cast<std::size_t>(n_b), 0);
    for (int b : rep.ctrl_members) is_ctrl[static_cast<std::size_t>(b)] = 1;
    std::vector<int> eh_m, hp_m, un_m;
    for (int b = 0; b < n_b; ++b) {
        const auto bi = static_cast<std::size_t>(b);
        if (!is_ctrl[bi]) {
            un_m.push_back(b);
            continue;
        }
        (fleet.meta[bi].kind == DeviceKind::EH ? eh_m : hp_m).push_back(b);
    }

    std::vector<PoolCtx> groups;  // optimization order: EH first, then HP
    if (!eh_m.empty()) groups.push_back({"eh", eh_m, make_pool_ctx(fleet, eh_m, in, total_steps)});
    if (!hp_m.empty()) groups.push_back({"hp", hp_m, make_pool_ctx(fleet, hp_m, in, total_steps)});
    for (const auto& g : groups) rep.group_names.push_back(g.name);

    std::vector<int> grp_of(static_cast<std::size_t>(n_b), -1);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (int b : groups[g].members) grp_of[static_cast<std::size_t>(b)] = static_cast<int>(g);

    std::vector<int> all_m(static_cast<std::size_t>(n_b));
    std::iota(all_m.begin(), all_m.end(), 0);
    FeatureContext tot_ctx = make_pool_ctx(fleet, all_m, in, total_steps);

    std::optional<PoolCtx> un_pool;
    if (!physics && !un_m.empty()) un_pool.emplace(PoolCtx{"un", un_m, make_pool_ctx(fleet, un_m, in, total_steps)});

    // DHW schedules and live plant states (physics modes only).
    std::vector<std::vector<double>> draws;
    std::vector<BuildingPlant> plants;
    if (physics) {
        draws.resize(static_cast<std::size_t>(n_b));
        for (int b = 0; b < n_b; ++b)
            draws[static_cast<std::size_t>(b)] =
                synth_dhw_draws(total_days, fleet.plants[static_cast<std::size_t>(b)].occupants,
                                derive_seed(in.seed, "dhw/" + std::to_string(b)));
        plants = fleet.plants;
    }

    // ---- warmup: uncontrolled per-building trace (W) over the first days
    std::vector<std::vector<double>> wp;
    if (physics) {
        wp.assign(static_cast<std::size_t>(n_b), std::vector<double>(static_cast<std::size_t>(warm_steps), 0.0));
        for (int b = 0; b < n_b; ++b) {
            const auto bi = static_cast<std::size_t>(b);
            for (long t = 0; t < warm_steps; ++t) {
                wp[bi][static_cast<std::size_t>(t)] =
                    building_step(plants[bi], in.weather.at(static_cast<std::size_t>(t)),
                                  draws[bi][static_cast<std::size_t>(t)], false, kStepSeconds)
                        .P_el;
                ++rep.physics_steps;
            }
        }
    } else {
        wp = in.warmup_power;
    }

    const auto fill_warmup = [&](FeatureContext& ctx, const std::vector<int>& members) {
        for (long t = 0; t < warm_steps; ++t) {
            double acc = 0;
            for (int b : members) acc += wp[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)];
            ctx.y[static_cast<std::size_t>(t)] = acc / 1000.0;
        }
    };
    for (auto& g : groups) fill_warmup(g.ctx, g.members);
    if (un_pool) fill_warmup(un_pool->ctx, un_pool->members);
    fill_warmup(tot_ctx, all_m);
    for (long t = 0; t < warm_steps; ++t)
        tot_ctx.y[static_cast<std::size_t>(t)] += in.base_load[static_cast<std::size_t>(t)];

    // ---- uncontrolled baseline over the horizon
    rep.total_baseline.assign(static_cast<std::size_t>(in.horizon_days) * kH, 0.0);
    if (physics) {
        auto bplants = plants;  // clone of the post-warmup states
        for (int d = in.warmup_days; d < total_days; ++d) {
            const long off = static_cast<long>(d) * kH;
            const long hoff = static_cast<long>(d - in.warmup_days) * kH;
            for (int k = 0; k < kH; ++k)
                rep.total_baseline[static_cast<std::size_t>(hoff + k)] =
                    in.base_load[static_cast<std::size_t>(off + k)];
            for (int b = 0; b < n_b; ++b) {
                const auto bi = static_cast<std::size_t>(b);
                for (int k = 0; k < kH; ++k) {
                    const auto t = static_cast<std::size_t>(off + k);
                    rep.total_baseline[static_cast<std::size_t>(hoff + k)] +=
                        building_step(bplants[bi], in.weather.at(t), draws[bi][t], false, kStepSeconds)
                            .P_el /
                        1000.0;
                    ++rep.physics_steps;
                }
            }
        }
    } else {
        // Recurrent zero-signal metamodel on private copies of the pools.
        std::vector<FeatureContext> bctx;
        for (const auto& g : groups) bctx.push_back(g.ctx);
        if (un_pool) bctx.push_back(un_pool->ctx);
        for (int d = in.warmup_days; d < total_days; ++d) {
            const long off = static_cast<long>(d) * kH;
            const long hoff = static_cast<long>(d - in.warmup_days) * kH;
            const long t0 = off - 1;
            for (int k = 0; k < kH; ++k)
                rep.total_baseline[static_cast<std::size_t>(hoff + k)] =
                    in.base_load[static_cast<std::size_t>(off + k)];
            for (auto& c : bctx) {
                c.finalize();
                const auto pred = in.flex_model->predict_row(make_features(c, t0));
                for (int k = 0; k < kH; ++k) {
                    rep.total_baseline[static_cast<std::size_t>(hoff + k)] += pred[static_cast<std::size_t>(k)];
                    c.y[static_cast<std::size_t>(off + k)] = pred[static_cast<std::size_t>(k)];
                }
            }
        }
    }

    MonthlyPeakLedger base_ledger;
    for (int d = in.warmup_days; d < total_days; ++d) {
        const long off = static_cast<long>(d) * kH;
        const auto day = slice_day(rep.total_baseline, static_cast<long>(d - in.warmup_days) * kH);
        rep.baseline_energy_cost_chf += day_spot_cost(day, in.spot, off);
        rep.baseline_co2_tons += co2_tons(day, slice_day(in.carbon, off));
        base_ledger.observe(month_of_day(d), day_max(day), in.p_peak, rep.baseline_months);
    }
    base_ledger.close(in.p_peak, rep.baseline_months);

    // ---- closed loop over the horizon
    rep.total_exec.assign(static_cast<std::size_t>(in.horizon_days) * kH, 0.0);
    MonthlyPeakLedger opt_ledger;

    for (int d = in.warmup_days; d < total_days; ++d) {
        const long off = static_cast<long>(d) * kH;
        const long hoff = static_cast<long>(d - in.warmup_days) * kH;
        const long t0 = off - 1;
        const int m = month_of_day(d);

        // Day-ahead total forecast.
        tot_ctx.finalize();
        const auto y_tot_hat = in.total_model->predict_row(make_features(tot_ctx, t0));

        Tariff tariff;
        tariff.p_spot = slice_day(in.spot, off);
        tariff.p_peak = in.p_peak;
        tariff.y_max_month = (opt_ledger.month == m) ? opt_ledger.y_max_kw : 0.0;

        // Comfort gate for the HP group.
        int budget = kH;
        if (!hp_m.empty()) {
            const double T_d = day_mean(in.weather.T_ext, off);
            const double I_d = day_mean(in.weather.ghi, off);
            std::vector<EnergySignature> sigs;
            std::vector<double> p_noms;
            for (int b : hp_m) {
                const auto bi = static_cast<std::size_t>(b);
                sigs.push_back(in.signatures_by_building.empty() ? EnergySignature{}
                                                                 : in.signatures_by_building[bi]);
                p_noms.push_back(fleet.meta[bi].q_nom_el / 1000.0);
            }
            budget = comfort_budget(sigs, p_noms, T_d, I_d);
        }

        DayPlan plan;
        if (groups.empty()) {
            plan.y_hat_total = y_tot_hat;
            double spot = 0;
            for (int k = 0; k < kH; ++k)
                spot += tariff.p_spot[static_cast<std::size_t>(k)] * y_tot_hat[static_cast<std::size_t>(k)];
            plan.spot_cost = kGamma * spot;
            plan.peak_cost = tariff.p_peak * std::max(0.0, day_max(y_tot_hat) - tariff.y_max_month);
            plan.cost = day_ahead_cost(y_tot_hat, tariff);
            plan.cost_no_control = plan.cost;
        } else {
            std::vector<Group> ogs;
            std::vector<std::vector<ForceOffSignal>> sets;
            for (std::size_t g = 0; g < groups.size(); ++g) {
                groups[g].ctx.finalize();
                Group og;
                og.id = static_cast<int>(g);
                og.name = groups[g].name;
                og.members = groups[g].members;
                FeatureContext* pc = &groups[g].ctx;
                const TreeEnsembleModel* model = in.flex_model;
                og.predict = [model, pc, t0](const ForceOffSignal& s) {
                    return predict_with_override(*model, *pc, t0, &s);
                };
                ogs.push_back(std::move(og));
                sets.push_back(groups[g].name == "hp" ? filter_by_off_budget(in.signal_set, budget)
                                                      : in.signal_set);
            }
            // The predict closures mutate the shared contexts in place, so the
            // candidate scan must stay single-threaded.
            plan = optimize_sequential(ogs, sets, y_tot_hat, tariff, 1);
        }

        // Execute the day.
        std::vector<double> exec(kH, 0.0);
        std::vector<std::vector<double>> gexec(groups.size(), std::vector<double>(kH, 0.0));
        for (int k = 0; k < kH; ++k) exec[static_cast<std::size_t>(k)] = in.base_load[static_cast<std::size_t>(off + k)];
        if (physics) {
            for (int b = 0; b < n_b; ++b) {
                const auto bi = static_cast<std::size_t>(b);
                const int g = grp_of[bi];
                const ForceOffSignal* sig = g >= 0 ? &plan.signals[static_cast<std::size_t>(g)] : nullptr;
                const bool probe = g >= 0 && fleet.meta[bi].kind == DeviceKind::HP;
                const auto& env = fleet.plants[bi].env;
                const double t_floor = env.T_min_hy - env.delta_T_hy / 2.0 - 1.0;
                for (int k = 0; k < kH; ++k) {
                    const auto t = static_cast<std::size_t>(off + k);
                    const bool force_off = sig != nullptr && sig->bit(k);
                    const auto r = building_step(plants[bi], in.weather.at(t), draws[bi][t],
                                                 force_off, kStepSeconds);
                    ++rep.physics_steps;
                    const double kw = r.P_el / 1000.0;
                    exec[static_cast<std::size_t>(k)] += kw;
                    if (g >= 0) gexec[static_cast<std::size_t>(g)][static_cast<std::size_t>(k)] += kw;
                    if (probe) {
                        ++rep.comfort_steps_total;
                        if (r.T_z >= t_floor) ++rep.comfort_steps_ok;
                    }
                }
            }
        } else {
            for (std::size_t g = 0; g < groups.size(); ++g) {
                gexec[g] = predict_with_override(*in.flex_model, groups[g].ctx, t0,
                                                 &plan.signals[g]);
                for (int k = 0; k < kH; ++k) exec[static_cast<std::size_t>(k)] += gexec[g][static_cast<std::size_t>(k)];
            }
            if (un_pool) {
                un_pool->ctx.finalize();
                const auto pred = in.flex_model->predict_row(make_features(un_pool->ctx, t0));
                for (int k = 0; k < kH; ++k) {
                    exec[static_cast<std::size_t>(k)] += pred[static_cast<std::size_t>(k)];
                    un_pool->ctx.y[static_cast<std::size_t>(off + k)] = pred[static_cast<std::size_t>(k)];
                }
            }
        }

        // Feed the executed day back into the contexts.
        for (std::size_t g = 0; g < groups.size(); ++g) {
            auto& c = groups[g].ctx;
            const auto& s = plan.signals[g];
            for (int k = 0; k < kH; ++k) {
                c.s[static_cast<std::size_t>(off + k)] = s.bit(k) ? 1.0 : 0.0;
                c.y[static_cast<std::size_t>(off + k)] = gexec[g][static_cast<std::size_t>(k)];
            }
        }
        for (int k = 0; k < kH; ++k) {
            tot_ctx.y[static_cast<std::size_t>(off + k)] = exec[static_cast<std::size_t>(k)];
            rep.total_exec[static_cast<std::size_t>(hoff + k)] = exec[static_cast<std::size_t>(k)];
        }

        // Accounting.
        const double realized_spot = day_spot_cost(exec, in.spot, off);
        const auto ole = open_loop_error(exec, plan.y_hat_total);
        opt_ledger.observe(m, day_max(exec), in.p_peak, rep.months);
        rep.energy_cost_chf += (in.mode == RunMode::Forecast) ? plan.spot_cost : realized_spot;
        rep.co2_tons += co2_tons(exec, slice_day(in.carbon, off));
        rep.open_loop_daily_means.push_back(ole.mean);

        DayRecord dr;
        dr.day = d;
        dr.signals = plan.signals;
        dr.y_hat_total = plan.y_hat_total;
        dr.plan_cost = plan.cost;
        dr.plan_cost_no_control = plan.cost_no_control;
        dr.plan_spot_cost = plan.spot_cost;
        dr.realized_spot_cost = realized_spot;
        dr.open_loop_mean = ole.mean;
        dr.peak_kw = day_max(exec);
        dr.hp_budget_steps = budget;
        rep.days.push_back(std::move(dr));
    }
    opt_ledger.close(in.p_peak, rep.months);

    for (const auto& mp : rep.months) rep.peak_cost_chf += mp.cost_chf;
    for (const auto& mp : rep.baseline_months) rep.baseline_peak_cost_chf += mp.cost_chf;
    rep.total_cost_chf = rep.energy_cost_chf + rep.peak_cost_chf;
    rep.baseline_total_cost_chf = rep.baseline_energy_cost_chf + rep.baseline_peak_cost_chf;
    rep.delta_energy_cost_chf = rep.energy_cost_chf - rep.baseline_energy_cost_chf;
    rep.delta_peak_cost_chf = rep.peak_cost_chf - rep.baseline_peak_cost_chf;
    rep.delta_total_cost_chf = rep.total_cost_chf - rep.baseline_total_cost_chf;
    rep.delta_co2_tons = rep.co2_tons - rep.baseline_co2_tons;
    return rep;
}

std::string kpi_report_json(const KpiReport& r) {
    nlohmann::json j;
    j["mode"] = run_mode_name(r.mode);
    j["horizon_days"] = r.horizon_days;
    j["group_names"] = r.group_names;
    j["ctrl_members"] = r.ctrl_members;

    j["energy_cost_chf"] = r.energy_cost_chf;
    j["peak_cost_chf"] = r.peak_cost_chf;
    j["total_cost_chf"] = r.total_cost_chf;
    j["co2_tons"] = r.co2_tons;
    j["baseline_energy_cost_chf"] = r.baseline_energy_cost_chf;
    j["baseline_peak_cost_chf"] = r.baseline_peak_cost_chf;
    j["baseline_total_cost_chf"] = r.baseline_total_cost_chf;
    j["baseline_co2_tons"] = r.baseline_co2_tons;
    j["delta_energy_cost_chf"] = r.delta_energy_cost_chf;
    j["delta_peak_cost_chf"] = r.delta_peak_cost_chf;
    j["delta_total_cost_chf"] = r.delta_total_cost_chf;
    j["delta_co2_tons"] = r.delta_co2_tons;

    auto months_json = [](const std::vector<MonthPeak>& months) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& mp : months)
            arr.push_back({{"month", mp.month}, {"y_max_kw", mp.y_max_kw}, {"cost_chf", mp.cost_chf}});
        return arr;
    };
    j["months"] = months_json(r.months);
    j["baseline_months"] = months_json(r.baseline_months);

    nlohmann::json days = nlohmann::json::array();
    for (const auto& d : r.days) {
        nlohmann::json dj;
        dj["day"] = d.day;
        nlohmann::json sigs = nlohmann::json::array();
        for (const auto& s : d.signals) sigs.push_back(signal_bits(s));
        dj["signals"] = std::move(sigs);
        dj["plan_cost"] = d.plan_cost;
        dj["plan_cost_no_control"] = d.plan_cost_no_control;
        dj["plan_spot_cost"] = d.plan_spot_cost;
        dj["realized_spot_cost"] = d.realized_spot_cost;
        dj["open_loop_mean"] = d.open_loop_mean;
        dj["peak_kw"] = d.peak_kw;
        dj["hp_budget_steps"] = d.hp_budget_steps;
        days.push_back(std::move(dj));
    }
    j["days"] = std::move(days);

    j["open_loop_daily_means"] = r.open_loop_daily_means;
    j["total_exec"] = r.total_exec;
    j["total_baseline"] = r.total_baseline;
    j["comfort_steps_total"] = r.comfort_steps_total;
    j["comfort_steps_ok"] = r.comfort_steps_ok;
    j["physics_steps"] = r.physics_steps;
    return j.dump(2);
}

}  // namespace flexpool
