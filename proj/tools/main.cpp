// flexpool command-line front end: wires config, persistence and the pipeline
// stages (fleet synthesis -> simulation -> dataset -> training -> day-ahead
// optimization -> closed-loop emulation -> reporting).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flexpool/config.hpp"
#include "flexpool/dataset.hpp"
#include "flexpool/emulator.hpp"
#include "flexpool/fleet.hpp"
#include "flexpool/forecaster.hpp"
#include "flexpool/optimizer.hpp"
#include "flexpool/signals.hpp"
#include "flexpool/synth.hpp"

namespace {

using namespace flexpool;

int g_threads = -1;  // --threads override; -1 keeps the config value

RunConfig config_for(const std::string& path) {
    RunConfig c = load_config(path);
    if (g_threads >= 0) c.n_threads = g_threads;
    return c;
}

std::vector<int> all_members(const Fleet& fleet) {
    std::vector<int> m(fleet.size());
    std::iota(m.begin(), m.end(), 0);
    return m;
}

std::string bits_of(const ForceOffSignal& s) {
    std::string out(kStepsPerDay, '0');
    for (int i = 0; i < kStepsPerDay; ++i)
        if (s.bit(i)) out[static_cast<std::size_t>(i)] = '1';
    return out;
}

// A flex model file may be a plain ensemble or an energy-aware bundle; the
// closed loop always runs on the (plain) first stage.
TreeEnsembleModel load_flex_model(const std::string& path) {
    try {
        return load_model_json(path);
    } catch (const std::exception&) {
        return load_energy_aware_json(path).stage1;
    }
}

std::vector<ForceOffSignal> admissible_signal_set(const RunConfig& cfg) {
    return subsample_signals(enumerate_signals(cfg.signals), cfg.signal_subsample);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path);
    f << text;
    if (!text.empty() && text.back() != '\n') f << "\n";
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& cfg_path, const std::string& out) {
    const auto cfg = config_for(cfg_path);
    const Fleet fleet = synthesize(cfg.fleet);
    save_fleet_json(out, fleet, cfg.fleet);
    const auto meta = fleet_summary(fleet, all_members(fleet));
    std::cout << "fleet: " << fleet.size() << " buildings (" << meta.n_hp << " hp, " << meta.n_eh
              << " eh), nominal " << meta.p_nom_sum / 1000.0 << " kW -> " << out << "\n";
    return 0;
}

int cmd_simulate(const std::string& cfg_path, const std::string& fleet_path,
                 const std::string& policy_name, const std::string& signals_path,
                 const std::string& out) {
    const auto cfg = config_for(cfg_path);
    const auto lf = load_fleet_json(fleet_path);
    const auto series = load_series(cfg, cfg.train_days, "train");

    Policy policy;
    if (policy_name == "none")
        policy = Policy::None;
    else if (policy_name == "random")
        policy = Policy::Random;
    else
        throw std::invalid_argument("simulate: --policy must be 'none' or 'random'");

    std::vector<ForceOffSignal> sigs;
    if (policy == Policy::Random)
        sigs = signals_path.empty() ? admissible_signal_set(cfg) : load_signals(signals_path);

    const auto trace = run_policy_year(lf.fleet, series.weather, policy, sigs,
                                       derive_seed(cfg.seed, "policy-year"), cfg.n_threads);
    save_trace(out, trace);

    const auto agg = aggregate_power(trace, all_members(lf.fleet));
    const double mean_kw = std::accumulate(agg.begin(), agg.end(), 0.0) / static_cast<double>(agg.size());
    std::cout << "trace: " << trace.n_days << " days, " << lf.fleet.size() << " buildings, mean "
              << mean_kw << " kW -> " << out << "\n";
    return 0;
}

int cmd_gen_scenarios(const std::string& cfg_path, const std::string& constraints_path,
                      const std::string& out) {
    SignalConstraints constraints;
    if (!constraints_path.empty()) {
        std::ifstream f(constraints_path);
        if (!f) throw std::runtime_error("cannot open constraints " + constraints_path);
        std::ostringstream buf;
        buf << f.rdbuf();
        const auto j = nlohmann::json::parse(buf.str());
        constraints.horizon_steps = j.value("horizon_steps", constraints.horizon_steps);
        constraints.max_off_steps = j.value("max_off_steps", constraints.max_off_steps);
        constraints.min_constant_steps = j.value("min_constant_steps", constraints.min_constant_steps);
        constraints.max_switches = j.value("max_switches", constraints.max_switches);
        constraints.max_on_steps = j.value("max_on_steps", constraints.max_on_steps);
        constraints.nightly_uncontrolled_steps =
            j.value("nightly_uncontrolled_steps", constraints.nightly_uncontrolled_steps);
    } else if (!cfg_path.empty()) {
        constraints = config_for(cfg_path).signals;
    }
    constraints.validate();

    std::cout << count_signals(constraints) << "\n";
    if (!out.empty()) {
        const auto sigs = enumerate_signals(constraints);
        save_signals(out, sigs);
        std::cerr << "wrote " << sigs.size() << " signals -> " << out << "\n";
    }
    return 0;
}

int cmd_build_dataset(const std::string& cfg_path, const std::string& fleet_path,
                      const std::string& ctrl_path, const std::string& unctrl_path,
                      const std::string& target, const std::string& out) {
    const auto cfg = config_for(cfg_path);
    const auto lf = load_fleet_json(fleet_path);
    const auto unctrl = load_trace(unctrl_path);
    const auto series = load_series(cfg, cfg.train_days, "train");
    if (unctrl.power.size() != lf.fleet.size())
        throw std::runtime_error("build-dataset: uncontrolled trace does not match the fleet");

    std::vector<FeatureRow> rows;
    if (target == "total") {
        PenetrationScenario sc;
        sc.members = all_members(lf.fleet);
        sc.meta = fleet_summary(lf.fleet, sc.members);
        sc.y_unctrl = aggregate_power(unctrl, sc.members);
        for (std::size_t t = 0; t < sc.y_unctrl.size(); ++t) sc.y_unctrl[t] += series.base_load[t];
        // single scenario: sample every eligible anchor, capped by the row budget
        rows = build_rows(sc, signal_series(unctrl), series.weather, false, 100.0,
                          derive_seed(cfg.seed, "rows/total"), 0, cfg.max_rows_per_scenario);
    } else if (target == "flex") {
        if (ctrl_path.empty())
            throw std::invalid_argument("build-dataset: --ctrl-trace is required for --target flex");
        const auto ctrl = load_trace(ctrl_path);
        if (ctrl.power.size() != lf.fleet.size())
            throw std::runtime_error("build-dataset: controlled trace does not match the fleet");
        const auto scheme = cfg.sampling == "grid" ? SamplingScheme::Grid : SamplingScheme::RandomLinear;
        auto scenarios = sample_penetrations(lf.fleet, scheme, cfg.n_scenarios,
                                             derive_seed(cfg.seed, "pen"));
        const auto s_ctrl = signal_series(ctrl);
        const auto s_zero = signal_series(unctrl);
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
            attach_aggregates(scenarios[i], ctrl, unctrl);
            const int sid = static_cast<int>(i);
            const auto tag = std::to_string(i);
            auto rc = build_rows(scenarios[i], s_ctrl, series.weather, true, cfg.k_fraction,
                                 derive_seed(cfg.seed, "rows/" + tag + "/c"), sid,
                                 cfg.max_rows_per_scenario);
            auto ru = build_rows(scenarios[i], s_zero, series.weather, false, cfg.k_fraction,
                                 derive_seed(cfg.seed, "rows/" + tag + "/u"), sid,
                                 cfg.max_rows_per_scenario);
            rows.insert(rows.end(), rc.begin(), rc.end());
            rows.insert(rows.end(), ru.begin(), ru.end());
        }
    } else {
        throw std::invalid_argument("build-dataset: --target must be 'flex' or 'total'");
    }

    const Dataset ds = stack_rows(rows);
    save_dataset(out, ds);
    std::cout << "dataset: " << ds.n_rows() << " rows x " << ds.n_features() << " features -> " << out
              << "\n";
    return 0;
}

int cmd_train(const std::string& cfg_path, const std::string& ds_path, const std::string& variant_flag,
              const std::string& out) {
    const auto cfg = config_for(cfg_path);
    const auto ds = load_dataset(ds_path);
    const std::string variant = variant_flag.empty() ? cfg.model_variant : variant_flag;
    if (variant != "plain" && variant != "energy-aware")
        throw std::invalid_argument("train: --variant must be 'plain' or 'energy-aware'");

    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
        (ds.t_anchor[i] / kStepsPerDay < cfg.cutoff_day ? train_idx : test_idx).push_back(i);
    if (train_idx.empty() || test_idx.empty())
        throw std::runtime_error("train: chronological split left an empty train or test set");
    const Dataset train_ds = filter_rows(ds, train_idx);
    const Dataset test_ds = filter_rows(ds, test_idx);

    double score = 0;
    if (variant == "plain") {
        const auto model = fit_model(train_ds, cfg.boost, cfg.n_threads);
        save_model_json(out, model);
        const auto preds = predict_dataset(model, test_ds, cfg.n_threads);  // [row][step]
        std::vector<double> col(test_ds.n_rows());
        for (int h = 0; h < 96; ++h) {
            for (std::size_t i = 0; i < test_ds.n_rows(); ++i)
                col[i] = preds[i][static_cast<std::size_t>(h)];
            score += nmae(test_ds.y[static_cast<std::size_t>(h)], col);
        }
        score /= 96.0;
    } else {
        const auto bundle = fit_energy_aware(train_ds, cfg.boost, cfg.n_threads);
        save_energy_aware_json(out, bundle);
        double abs_err = 0, abs_y = 0;
        for (std::size_t i = 0; i < test_ds.n_rows(); ++i) {
            const auto pred = predict_energy_aware(bundle, test_ds.row(i));
            for (int h = 0; h < 96; ++h) {
                abs_err += std::abs(test_ds.y[static_cast<std::size_t>(h)][i] - pred[static_cast<std::size_t>(h)]);
                abs_y += std::abs(test_ds.y[static_cast<std::size_t>(h)][i]);
            }
        }
        score = abs_err / abs_y;
    }
    std::cout << "model: " << variant << ", train rows " << train_ds.n_rows() << ", test rows "
              << test_ds.n_rows() << ", test nMAE " << score << " -> " << out << "\n";
    return 0;
}

EmulationInputs make_emulation_inputs(const RunConfig& cfg, const Fleet& fleet,
                                      const TreeEnsembleModel& flex, const TreeEnsembleModel& total,
                                      RunMode mode, int horizon_days, const std::string& trace_path,
                                      ExogenousSeries& series_storage,
                                      std::vector<ForceOffSignal>& signal_storage) {
    series_storage = load_series(cfg, cfg.warmup_days + horizon_days, "run");
    signal_storage = admissible_signal_set(cfg);

    EmulationInputs in;
    in.mode = mode;
    in.fleet = &fleet;
    in.weather = series_storage.weather;
    in.spot = series_storage.spot;
    in.carbon = series_storage.carbon;
    in.base_load = series_storage.base_load;
    in.p_peak = cfg.p_peak;
    in.warmup_days = cfg.warmup_days;
    in.horizon_days = horizon_days;
    in.ctrl_fraction = cfg.ctrl_fraction;
    in.seed = derive_seed(cfg.seed, "emulate");
    in.flex_model = &flex;
    in.total_model = &total;
    in.signal_set = signal_storage;
    in.n_threads = cfg.n_threads;

    if (trace_path.empty()) {
        in.signatures_by_building.assign(fleet.size(), EnergySignature{});
    } else {
        const auto trace = load_trace(trace_path);
        const auto train_series = load_series(cfg, trace.n_days, "train");
        in.signatures_by_building = fit_fleet_signatures(fleet, trace.power, train_series.weather);
    }
    if (mode == RunMode::Emulated)
        in.warmup_power = warmup_trace(fleet, in.weather, in.warmup_days, in.seed, cfg.n_threads);
    return in;
}

int cmd_optimize(const std::string& cfg_path, const std::string& fleet_path,
                 const std::string& flex_path, const std::string& total_path,
                 const std::string& trace_path, int date, const std::string& out) {
    const auto cfg = config_for(cfg_path);
    const auto lf = load_fleet_json(fleet_path);
    const auto flex = load_flex_model(flex_path);
    const auto total = load_model_json(total_path);
    if (date < cfg.warmup_days)
        throw std::invalid_argument("optimize: --date must be >= warmup_days (" +
                                    std::to_string(cfg.warmup_days) + ")");

    ExogenousSeries series;
    std::vector<ForceOffSignal> sigs;
    const auto in = make_emulation_inputs(cfg, lf.fleet, flex, total, RunMode::Forecast,
                                          date - cfg.warmup_days + 1, trace_path, series, sigs);
    const auto rep = run_horizon(in);
    const DayRecord& dr = rep.days.back();

    nlohmann::json j;
    j["day"] = dr.day;
    j["groups"] = rep.group_names;
    nlohmann::json sig_arr = nlohmann::json::array();
    for (const auto& s : dr.signals) sig_arr.push_back(bits_of(s));
    j["signals"] = std::move(sig_arr);
    j["y_hat_total"] = dr.y_hat_total;
    j["plan_cost"] = dr.plan_cost;
    j["plan_spot_cost"] = dr.plan_spot_cost;
    j["plan_cost_no_control"] = dr.plan_cost_no_control;
    j["hp_budget_steps"] = dr.hp_budget_steps;
    write_text(out, j.dump(2));

    std::cout << "plan day " << dr.day << ": cost " << dr.plan_cost << " (no-control "
              << dr.plan_cost_no_control << ") -> " << out << "\n";
    return 0;
}

int cmd_emulate(const std::string& cfg_path, const std::string& fleet_path,
                const std::string& flex_path, const std::string& total_path,
                const std::string& trace_path, const std::string& mode_name, int days,
                const std::string& out) {
    const auto cfg = config_for(cfg_path);
    const auto lf = load_fleet_json(fleet_path);
    const auto flex = load_flex_model(flex_path);
    const auto total = load_model_json(total_path);

    RunMode mode;
    if (mode_name == "simulated")
        mode = RunMode::Simulated;
    else if (mode_name == "forecast")
        mode = RunMode::Forecast;
    else if (mode_name == "emulated")
        mode = RunMode::Emulated;
    else
        throw std::invalid_argument("emulate: --mode must be simulated, forecast or emulated");

    const int horizon = days > 0 ? days : cfg.horizon_days;
    ExogenousSeries series;
    std::vector<ForceOffSignal> sigs;
    const auto in = make_emulation_inputs(cfg, lf.fleet, flex, total, mode, horizon, trace_path,
                                          series, sigs);
    const auto rep = run_horizon(in);
    write_text(out, kpi_report_json(rep));

    std::ofstream csv(out + ".timeseries.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot open " + out + ".timeseries.csv");
    csv << "step,total_exec_kw,total_baseline_kw\n";
    for (std::size_t t = 0; t < rep.total_exec.size(); ++t)
        csv << t << "," << rep.total_exec[t] << "," << rep.total_baseline[t] << "\n";

    std::cout << "emulate[" << run_mode_name(mode) << "] " << horizon << " days: total "
              << rep.total_cost_chf << " CHF (baseline " << rep.baseline_total_cost_chf
              << "), delta " << rep.delta_total_cost_chf << ", co2 " << rep.co2_tons << " t -> "
              << out << "\n";
    return 0;
}

int cmd_report(const std::string& kpi_path) {
    std::ifstream f(kpi_path);
    if (!f) throw std::runtime_error("cannot open " + kpi_path);
    const auto j = nlohmann::json::parse(f);

    std::printf("run: mode=%s horizon=%d days, groups=[", j.at("mode").get<std::string>().c_str(),
                j.at("horizon_days").get<int>());
    const auto groups = j.at("group_names");
    for (std::size_t i = 0; i < groups.size(); ++i)
        std::printf("%s%s", i ? ", " : "", groups[i].get<std::string>().c_str());
    std::printf("]\n\n");

    std::printf("%-12s %14s %14s %14s\n", "cost [CHF]", "optimized", "baseline", "delta");
    const auto row = [&](const char* label, const char* a, const char* b, const char* d) {
        std::printf("%-12s %14.2f %14.2f %14.2f\n", label, j.at(a).get<double>(),
                    j.at(b).get<double>(), j.at(d).get<double>());
    };
    row("energy", "energy_cost_chf", "baseline_energy_cost_chf", "delta_energy_cost_chf");
    row("peak", "peak_cost_chf", "baseline_peak_cost_chf", "delta_peak_cost_chf");
    row("total", "total_cost_chf", "baseline_total_cost_chf", "delta_total_cost_chf");
    std::printf("%-12s %14.4f %14.4f %14.4f\n", "co2 [t]", j.at("co2_tons").get<double>(),
                j.at("baseline_co2_tons").get<double>(), j.at("delta_co2_tons").get<double>());

    std::printf("\nmonthly peaks (optimized):\n");
    for (const auto& mp : j.at("months"))
        std::printf("  month %2d: %10.2f kW  %10.2f CHF\n", mp.at("month").get<int>(),
                    mp.at("y_max_kw").get<double>(), mp.at("cost_chf").get<double>());

    const auto& ole = j.at("open_loop_daily_means");
    double mean_ole = 0;
    for (const auto& v : ole) mean_ole += v.get<double>();
    if (!ole.empty()) mean_ole /= static_cast<double>(ole.size());
    std::printf("\nopen-loop error (mean of daily means): %.4f\n", mean_ole);

    const auto total = j.at("comfort_steps_total").get<long long>();
    const auto ok = j.at("comfort_steps_ok").get<long long>();
    if (total > 0)
        std::printf("comfort: %.3f%% of controlled HP timesteps within bounds\n",
                    100.0 * static_cast<double>(ok) / static_cast<double>(total));
    std::printf("physics steps: %lld\n", j.at("physics_steps").get<long long>());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flexpool: flexibility quantification for heat-pump and water-heater pools"};
    app.require_subcommand(1);
    app.add_option("--threads", g_threads, "worker threads (0 = hardware concurrency)");

    std::string cfg, fleet_path, out, policy = "none", signals_path, constraints_path;
    std::string ctrl_path, unctrl_path, target = "flex", variant, ds_path;
    std::string flex_path, total_path, trace_path, mode_name = "simulated", kpi_path;
    int date = 8, days = 0;

    auto* synth = app.add_subcommand("synth", "synthesize a building fleet from the config");
    synth->add_option("--config", cfg, "run config JSON")->required()->check(CLI::ExistingFile);
    synth->add_option("--out", out, "fleet JSON output")->required();

    auto* simulate = app.add_subcommand("simulate", "simulate the fleet over the training horizon");
    simulate->add_option("--config", cfg)->required()->check(CLI::ExistingFile);
    simulate->add_option("--fleet", fleet_path)->required()->check(CLI::ExistingFile);
    simulate->add_option("--policy", policy, "none | random");
    simulate->add_option("--signals", signals_path, "signal file for the random policy")
        ->check(CLI::ExistingFile);
    simulate->add_option("--out", out, "trace output")->required();

    auto* gen = app.add_subcommand("gen-scenarios", "count (and export) admissible daily signals");
    gen->add_option("--config", cfg)->check(CLI::ExistingFile);
    gen->add_option("--constraints", constraints_path, "constraints JSON overriding the config")
        ->check(CLI::ExistingFile);
    gen->add_option("--out", out, "signal file output (optional)");

    auto* build = app.add_subcommand("build-dataset", "assemble the training corpus");
    build->add_option("--config", cfg)->required()->check(CLI::ExistingFile);
    build->add_option("--fleet", fleet_path)->required()->check(CLI::ExistingFile);
    build->add_option("--ctrl-trace", ctrl_path)->check(CLI::ExistingFile);
    build->add_option("--unctrl-trace", unctrl_path)->required()->check(CLI::ExistingFile);
    build->add_option("--target", target, "flex | total");
    build->add_option("--out", out, "dataset output")->required();

    auto* train = app.add_subcommand("train", "fit the 96-model metamodel");
    train->add_option("--config", cfg)->required()->check(CLI::ExistingFile);
    train->add_option("--dataset", ds_path)->required()->check(CLI::ExistingFile);
    train->add_option("--variant", variant, "plain | energy-aware (default: config)");
    train->add_option("--out", out, "model JSON output")->required();

    auto* opt = app.add_subcommand("optimize", "emit the day-ahead plan for one day");
    opt->add_option("--config", cfg)->required()->check(CLI::ExistingFile);
    opt->add_option("--fleet", fleet_path)->required()->check(CLI::ExistingFile);
    opt->add_option("--flex-model", flex_path)->required()->check(CLI::ExistingFile);
    opt->add_option("--total-model", total_path)->required()->check(CLI::ExistingFile);
    opt->add_option("--trace", trace_path, "uncontrolled trace for comfort signatures")
        ->check(CLI::ExistingFile);
    opt->add_option("--date", date, "absolute day index (>= warmup_days)")->required();
    opt->add_option("--out", out, "plan JSON output")->required();

    auto* emu = app.add_subcommand("emulate", "closed-loop horizon run");
    emu->add_option("--config", cfg)->required()->check(CLI::ExistingFile);
    emu->add_option("--fleet", fleet_path)->required()->check(CLI::ExistingFile);
    emu->add_option("--flex-model", flex_path)->required()->check(CLI::ExistingFile);
    emu->add_option("--total-model", total_path)->required()->check(CLI::ExistingFile);
    emu->add_option("--trace", trace_path, "uncontrolled trace for comfort signatures")
        ->check(CLI::ExistingFile);
    emu->add_option("--mode", mode_name, "simulated | forecast | emulated");
    emu->add_option("--days", days, "horizon override (default: config horizon_days)");
    emu->add_option("--out", out, "KPI JSON output")->required();

    auto* rep = app.add_subcommand("report", "print the KPI tables of a finished run");
    rep->add_option("--kpi", kpi_path, "KPI JSON from emulate")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (argc <= 1) std::cerr << app.help();
        return app.exit(e);  // help -> 0, missing subcommand / bad flag -> nonzero
    }

    try {
        if (synth->parsed()) return cmd_synth(cfg, out);
        if (simulate->parsed()) return cmd_simulate(cfg, fleet_path, policy, signals_path, out);
        if (gen->parsed()) return cmd_gen_scenarios(cfg, constraints_path, out);
        if (build->parsed()) return cmd_build_dataset(cfg, fleet_path, ctrl_path, unctrl_path, target, out);
        if (train->parsed()) return cmd_train(cfg, ds_path, variant, out);
        if (opt->parsed()) return cmd_optimize(cfg, fleet_path, flex_path, total_path, trace_path, date, out);
        if (emu->parsed()) return cmd_emulate(cfg, fleet_path, flex_path, total_path, trace_path, mode_name, days, out);
        if (rep->parsed()) return cmd_report(kpi_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << app.help();
    return 1;
}
