#include "flexpool/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace flexpool {

// ---------------------------------------------------------------------------
// Simulation

SimulationTrace run_policy_year(const Fleet& fleet, const WeatherSeries& weather, Policy policy,
                                const std::vector<ForceOffSignal>& signal_set, std::uint64_t seed,
                                int n_threads) {
    if (fleet.size() == 0) throw std::invalid_argument("run_policy_year: empty fleet");
    if (weather.n_steps() == 0 || weather.n_steps() % kStepsPerDay != 0)
        throw std::invalid_argument("run_policy_year: weather length must be a positive multiple of 96");

    SimulationTrace trace;
    trace.n_days = static_cast<int>(weather.n_steps() / kStepsPerDay);
    trace.signals.assign(trace.n_days, ForceOffSignal{});
    if (policy == Policy::Random) {
        if (signal_set.empty()) throw std::invalid_argument("run_policy_year: random policy needs a signal set");
        Rng rng(derive_seed(seed, "policy"));
        for (int d = 0; d < trace.n_days; ++d)
            trace.signals[d] = signal_set[static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(signal_set.size()) - 1))];
    }

    trace.power.assign(fleet.size(), {});
    parallel_for(
        fleet.size(),
        [&](std::size_t b) {
            BuildingPlant plant = fleet.plants[b];  // fresh copy: initial state
            const auto draws = synth_dhw_draws(trace.n_days, plant.occupants,
                                               derive_seed(seed, "dhw/" + std::to_string(b)));
            auto& out = trace.power[b];
            out.resize(weather.n_steps());
            for (std::size_t t = 0; t < weather.n_steps(); ++t) {
                const int d = static_cast<int>(t / kStepsPerDay);
                const int sid = static_cast<int>(t % kStepsPerDay);
                const bool off = trace.signals[d].bit(sid);
                out[t] = building_step(plant, weather.at(t), draws[t], off, kStepSeconds).P_el;
            }
        },
        n_threads);
    return trace;
}

std::vector<double> signal_series(const SimulationTrace& trace) {
    std::vector<double> s(trace.n_steps());
    for (std::size_t t = 0; t < s.size(); ++t)
        s[t] = trace.signals[t / kStepsPerDay].bit(static_cast<int>(t % kStepsPerDay)) ? 1.0 : 0.0;
    return s;
}

std::vector<double> aggregate_power(const SimulationTrace& trace, const std::vector<int>& members) {
    std::vector<double> y(trace.n_steps(), 0.0);
    for (int b : members) {
        if (b < 0 || static_cast<std::size_t>(b) >= trace.power.size())
            throw std::out_of_range("aggregate_power: member index out of range");
        const auto& p = trace.power[b];
        for (std::size_t t = 0; t < y.size(); ++t) y[t] += p[t];
    }
    for (double& v : y) v /= 1000.0;  // W -> kW
    return y;
}

// ---------------------------------------------------------------------------
// Penetration scenarios

namespace {

std::vector<int> shuffled_prefix(std::vector<int> pool, std::size_t count, Rng& rng) {
    for (std::size_t i = pool.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(pool[i - 1], pool[j]);
    }
    pool.resize(std::min(count, pool.size()));
    return pool;
}

}  // namespace

std::vector<PenetrationScenario> sample_penetrations(const Fleet& fleet, SamplingScheme scheme,
                                                     int n_scenarios, std::uint64_t seed) {
    if (n_scenarios < 1) throw std::invalid_argument("sample_penetrations: n_scenarios must be >= 1");
    if (fleet.size() == 0) throw std::invalid_argument("sample_penetrations: empty fleet");

    std::vector<int> hp_pool, eh_pool, all_pool;
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        all_pool.push_back(static_cast<int>(i));
        (fleet.meta[i].kind == DeviceKind::HP ? hp_pool : eh_pool).push_back(static_cast<int>(i));
    }

    std::vector<PenetrationScenario> out;
    if (scheme == SamplingScheme::RandomLinear) {
        for (int i = 1; i <= n_scenarios; ++i) {
            Rng rng(derive_seed(seed, "pen/linear/" + std::to_string(i)));
            const auto count = static_cast<std::size_t>(std::max<long>(
                1, std::lround(static_cast<double>(fleet.size()) * i / n_scenarios)));
            PenetrationScenario sc;
            sc.members = shuffled_prefix(all_pool, count, rng);
            std::sort(sc.members.begin(), sc.members.end());
            sc.meta = fleet_summary(fleet, sc.members);
            out.push_back(std::move(sc));
        }
    } else {
        // Axis levels span 0..1 inclusive, so the grid carries single-kind
        // pools (and one empty pool anchoring the model at zero).
        const int g = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_scenarios))));
        const auto level = [g](int i) { return g > 1 ? static_cast<double>(i) / (g - 1) : 1.0; };
        for (int r = 0; r < g && static_cast<int>(out.size()) < n_scenarios; ++r) {
            for (int c = 0; c < g && static_cast<int>(out.size()) < n_scenarios; ++c) {
                Rng rng(derive_seed(seed, "pen/grid/" + std::to_string(r) + "/" + std::to_string(c)));
                const auto n_hp = static_cast<std::size_t>(
                    std::lround(static_cast<double>(hp_pool.size()) * level(r)));
                const auto n_eh = static_cast<std::size_t>(
                    std::lround(static_cast<double>(eh_pool.size()) * level(c)));
                PenetrationScenario sc;
                sc.members = shuffled_prefix(hp_pool, n_hp, rng);
                const auto ehs = shuffled_prefix(eh_pool, n_eh, rng);
                sc.members.insert(sc.members.end(), ehs.begin(), ehs.end());
                std::sort(sc.members.begin(), sc.members.end());
                sc.meta = fleet_summary(fleet, sc.members);
                out.push_back(std::move(sc));
            }
        }
    }
    return out;
}

void attach_aggregates(PenetrationScenario& sc, const SimulationTrace& ctrl,
                       const SimulationTrace& unctrl) {
    if (ctrl.n_steps() != unctrl.n_steps())
        throw std::invalid_argument("attach_aggregates: trace lengths differ");
    sc.y_ctrl = aggregate_power(ctrl, sc.members);
    sc.y_unctrl = aggregate_power(unctrl, sc.members);
}

// ---------------------------------------------------------------------------
// Feature schema

namespace {

std::vector<std::string> build_schema() {
    std::vector<std::string> names;
    names.reserve(kNumFeatures);
    for (int l = -95; l <= 96; ++l) names.push_back("s_shift_" + std::to_string(l));
    for (int l = 1; l <= 96; ++l) names.push_back("s_mean3h_" + std::to_string(l));
    for (int l = 1; l <= 96; ++l) names.push_back("s_mean6h_" + std::to_string(l));
    for (int k = 0; k <= 4; ++k) names.push_back("yf_shift_" + std::to_string(k));
    for (int l = -168; l <= -144; ++l) names.push_back("yf_hmean_" + std::to_string(l));
    for (int l = -24; l <= 0; ++l) names.push_back("yf_hmean_" + std::to_string(l));
    for (const std::string& base : {std::string("T_ext"), std::string("ghi")}) {
        for (int k = 0; k <= 4; ++k) names.push_back(base + "_shift_" + std::to_string(k));
        for (int l = -168; l <= -144; ++l) names.push_back(base + "_hmean_" + std::to_string(l));
        for (int l = -24; l <= 0; ++l) names.push_back(base + "_hmean_" + std::to_string(l));
        for (int l = 1; l <= 24; ++l) names.push_back(base + "_hmean_" + std::to_string(l));
    }
    for (const auto& m : MetadataFeatures::names()) names.push_back(m);
    names.push_back("time_hour");
    names.push_back("time_dow");
    names.push_back("time_minuteofday");
    if (static_cast<int>(names.size()) != kNumFeatures)
        throw std::logic_error("feature schema size mismatch");
    return names;
}

// inclusive-window mean from a prefix-sum array
double ps_mean(const std::vector<double>& ps, long a, long b) {
    return (ps[static_cast<std::size_t>(b) + 1] - ps[static_cast<std::size_t>(a)]) /
           static_cast<double>(b - a + 1);
}

void prefix(const std::vector<double>& v, std::vector<double>& ps) {
    ps.assign(v.size() + 1, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) ps[i + 1] = ps[i] + v[i];
}

}  // namespace

const std::vector<std::string>& feature_schema() {
    static const std::vector<std::string> names = build_schema();
    return names;
}

std::uint64_t names_hash(const std::vector<std::string>& names) {
    std::string joined;
    for (const auto& n : names) joined += n + "\n";
    return fnv1a(joined);
}

std::uint64_t schema_hash() {
    static const std::uint64_t h = names_hash(feature_schema());
    return h;
}

void FeatureContext::finalize() {
    const std::size_t n = s.size();
    if (y.size() != n || T_ext.size() != n || ghi.size() != n)
        throw std::invalid_argument("FeatureContext: series lengths differ");
    if (meta.size() != MetadataFeatures::names().size())
        throw std::invalid_argument("FeatureContext: metadata must have 12 entries");
    prefix(s, s_ps);
    prefix(y, y_ps);
    prefix(T_ext, T_ps);
    prefix(ghi, g_ps);
}

std::vector<double> make_features(const FeatureContext& ctx, long t) {
    const long n = static_cast<long>(ctx.s.size());
    if (t < kMinHistorySteps || t + 96 > n - 1)
        throw std::out_of_range("make_features: anchor outside the eligible range");
    if (ctx.s_ps.size() != ctx.s.size() + 1)
        throw std::logic_error("make_features: context not finalized");

    std::vector<double> x;
    x.reserve(kNumFeatures);
    for (int l = -95; l <= 96; ++l) x.push_back(ctx.s[static_cast<std::size_t>(t - l)]);
    for (int l = 1; l <= 96; ++l) x.push_back(ps_mean(ctx.s_ps, t + l - 11, t + l));
    for (int l = 1; l <= 96; ++l) x.push_back(ps_mean(ctx.s_ps, t + l - 23, t + l));

    for (int k = 0; k <= 4; ++k) x.push_back(ctx.y[static_cast<std::size_t>(t - k)]);
    for (int l = -168; l <= -144; ++l) x.push_back(ps_mean(ctx.y_ps, t + 4 * l - 3, t + 4 * l));
    for (int l = -24; l <= 0; ++l) x.push_back(ps_mean(ctx.y_ps, t + 4 * l - 3, t + 4 * l));

    for (const auto* series : {&ctx.T_ext, &ctx.ghi}) {
        const auto& ps = series == &ctx.T_ext ? ctx.T_ps : ctx.g_ps;
        for (int k = 0; k <= 4; ++k) x.push_back((*series)[static_cast<std::size_t>(t - k)]);
        for (int l = -168; l <= -144; ++l) x.push_back(ps_mean(ps, t + 4 * l - 3, t + 4 * l));
        for (int l = -24; l <= 0; ++l) x.push_back(ps_mean(ps, t + 4 * l - 3, t + 4 * l));
        for (int l = 1; l <= 24; ++l) x.push_back(ps_mean(ps, t + 4 * l - 3, t + 4 * l));
    }

    x.insert(x.end(), ctx.meta.begin(), ctx.meta.end());
    x.push_back(static_cast<double>((t % kStepsPerDay) / kStepsPerHour));
    x.push_back(static_cast<double>(ctx.cal.dow(static_cast<int>(t / kStepsPerDay))));
    x.push_back(static_cast<double>((t % kStepsPerDay) * 15));
    return x;
}

void refresh_signal_features(const FeatureContext& ctx, long t, std::vector<double>& x) {
    if (static_cast<int>(x.size()) != kNumFeatures)
        throw std::invalid_argument("refresh_signal_features: wrong vector size");
    int j = 0;
    for (int l = -95; l <= 96; ++l) x[j++] = ctx.s[static_cast<std::size_t>(t - l)];
    // local prefix over the span the mean windows can touch: [t-23, t+96]
    const long base = t - 23;
    double lp[121];
    lp[0] = 0.0;
    for (int i = 0; i < 120; ++i) lp[i + 1] = lp[i] + ctx.s[static_cast<std::size_t>(base + i)];
    auto lmean = [&](long a, long b) {
        return (lp[b - base + 1] - lp[a - base]) / static_cast<double>(b - a + 1);
    };
    for (int l = 1; l <= 96; ++l) x[j++] = lmean(t + l - 11, t + l);
    for (int l = 1; l <= 96; ++l) x[j++] = lmean(t + l - 23, t + l);
}

// ---------------------------------------------------------------------------
// Row building and splitting

std::vector<FeatureRow> build_rows(const PenetrationScenario& sc, const std::vector<double>& s_series,
                                   const WeatherSeries& weather, bool controlled, double k_fraction,
                                   std::uint64_t seed, int scenario_id, std::size_t max_rows) {
    if (k_fraction <= 0.0 || k_fraction > 100.0)
        throw std::invalid_argument("build_rows: k_fraction must be in (0, 100]");
    const auto& y = controlled ? sc.y_ctrl : sc.y_unctrl;
    if (y.empty()) throw std::invalid_argument("build_rows: scenario aggregates not attached");
    if (y.size() != s_series.size() || y.size() != weather.n_steps())
        throw std::invalid_argument("build_rows: series lengths differ");

    FeatureContext ctx;
    ctx.s = s_series;
    ctx.y = y;
    ctx.T_ext = weather.T_ext;
    ctx.ghi = weather.ghi;
    ctx.meta = sc.meta.as_vector();
    ctx.finalize();

    const long n = static_cast<long>(y.size());
    std::vector<long> anchors;
    for (long t = kMinHistorySteps; t + 96 <= n - 1; ++t) anchors.push_back(t);
    if (anchors.empty()) throw std::invalid_argument("build_rows: trace too short for any eligible anchor");

    Rng rng(derive_seed(seed, "rows/" + std::to_string(scenario_id) + (controlled ? "/c" : "/u")));
    for (std::size_t i = anchors.size(); i > 1; --i) {
        const std::size_t j2 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
        std::swap(anchors[i - 1], anchors[j2]);
    }
    std::size_t n_take = static_cast<std::size_t>(
        std::floor(k_fraction / 100.0 * static_cast<double>(anchors.size())));
    n_take = std::max<std::size_t>(1, n_take);
    if (max_rows > 0) n_take = std::min(n_take, max_rows);
    anchors.resize(std::min(n_take, anchors.size()));
    std::sort(anchors.begin(), anchors.end());

    std::vector<FeatureRow> rows;
    rows.reserve(anchors.size());
    for (long t : anchors) {
        FeatureRow r;
        r.t = t;
        r.scenario_id = scenario_id;
        r.x = make_features(ctx, t);
        for (int h = 1; h <= 96; ++h) r.y[h - 1] = y[static_cast<std::size_t>(t + h)];
        rows.push_back(std::move(r));
    }
    return rows;
}

void split_train_test(const std::vector<FeatureRow>& rows, int cutoff_day,
                      std::vector<FeatureRow>& train, std::vector<FeatureRow>& test) {
    train.clear();
    test.clear();
    for (const auto& r : rows)
        (r.t / kStepsPerDay < cutoff_day ? train : test).push_back(r);
}

// ---------------------------------------------------------------------------
// Columnar dataset

std::vector<double> Dataset::row(std::size_t i) const {
    std::vector<double> v(n_features());
    for (std::size_t f = 0; f < n_features(); ++f) v[f] = x[f][i];
    return v;
}

Dataset stack_rows(const std::vector<FeatureRow>& rows) {
    Dataset ds;
    ds.feature_names = feature_schema();
    ds.x.assign(kNumFeatures, {});
    ds.y.assign(96, {});
    for (auto& c : ds.x) c.reserve(rows.size());
    for (auto& c : ds.y) c.reserve(rows.size());
    for (const auto& r : rows) {
        if (static_cast<int>(r.x.size()) != kNumFeatures)
            throw std::invalid_argument("stack_rows: row with wrong feature count");
        for (int f = 0; f < kNumFeatures; ++f) ds.x[f].push_back(r.x[f]);
        for (int h = 0; h < 96; ++h) ds.y[h].push_back(r.y[h]);
        ds.t_anchor.push_back(r.t);
        ds.scenario_id.push_back(r.scenario_id);
    }
    return ds;
}

Dataset filter_rows(const Dataset& ds, const std::vector<std::size_t>& keep) {
    Dataset out;
    out.feature_names = ds.feature_names;
    out.x.assign(ds.x.size(), {});
    out.y.assign(ds.y.size(), {});
    for (std::size_t i : keep)
        if (i >= ds.n_rows()) throw std::out_of_range("filter_rows: index beyond dataset");
    for (std::size_t f = 0; f < ds.x.size(); ++f) {
        out.x[f].reserve(keep.size());
        for (std::size_t i : keep) out.x[f].push_back(ds.x[f][i]);
    }
    for (std::size_t h = 0; h < ds.y.size(); ++h) {
        out.y[h].reserve(keep.size());
        for (std::size_t i : keep) out.y[h].push_back(ds.y[h][i]);
    }
    out.t_anchor.reserve(keep.size());
    out.scenario_id.reserve(keep.size());
    for (std::size_t i : keep) {
        out.t_anchor.push_back(ds.t_anchor[i]);
        out.scenario_id.push_back(ds.scenario_id[i]);
    }
    return out;
}

namespace {

constexpr char kMagic[8] = {'F', 'P', 'D', 'S', '0', '0', '0', '1'};

template <typename T>
void write_raw(std::ofstream& f, const T* p, std::size_t count) {
    f.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count * sizeof(T)));
}

template <typename T>
void read_raw(std::ifstream& f, T* p, std::size_t count) {
    f.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count * sizeof(T)));
    if (!f) throw std::runtime_error("dataset file truncated");
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_dataset: cannot open " + path);
    f.write(kMagic, sizeof(kMagic));
    const std::uint64_t n = ds.n_rows(), nf = ds.n_features(), nt = ds.y.size();
    write_raw(f, &n, 1);
    write_raw(f, &nf, 1);
    write_raw(f, &nt, 1);
    for (const auto& c : ds.x) write_raw(f, c.data(), c.size());
    for (const auto& c : ds.y) write_raw(f, c.data(), c.size());
    write_raw(f, ds.t_anchor.data(), ds.t_anchor.size());
    write_raw(f, ds.scenario_id.data(), ds.scenario_id.size());
    if (!f) throw std::runtime_error("save_dataset: write failed");
    f.close();

    nlohmann::json side;
    side["n_rows"] = n;
    side["n_features"] = nf;
    side["n_targets"] = nt;
    side["feature_names"] = ds.feature_names;
    side["schema_hash"] = names_hash(ds.feature_names);
    std::ofstream sf(path + ".schema.json", std::ios::trunc);
    if (!sf) throw std::runtime_error("save_dataset: cannot open schema sidecar");
    sf << side.dump(2) << "\n";
}

Dataset load_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_dataset: cannot open " + path);
    char magic[8];
    read_raw(f, magic, 8);
    if (!std::equal(magic, magic + 8, kMagic)) throw std::runtime_error("load_dataset: bad magic");
    std::uint64_t n = 0, nf = 0, nt = 0;
    read_raw(f, &n, 1);
    read_raw(f, &nf, 1);
    read_raw(f, &nt, 1);

    Dataset ds;
    ds.x.assign(nf, std::vector<double>(n));
    ds.y.assign(nt, std::vector<double>(n));
    ds.t_anchor.resize(n);
    ds.scenario_id.resize(n);
    for (auto& c : ds.x) read_raw(f, c.data(), c.size());
    for (auto& c : ds.y) read_raw(f, c.data(), c.size());
    read_raw(f, ds.t_anchor.data(), n);
    read_raw(f, ds.scenario_id.data(), n);

    std::ifstream sf(path + ".schema.json");
    if (!sf) throw std::runtime_error("load_dataset: missing schema sidecar");
    nlohmann::json side = nlohmann::json::parse(sf);
    ds.feature_names = side.at("feature_names").get<std::vector<std::string>>();
    if (ds.feature_names.size() != nf) throw std::runtime_error("load_dataset: schema/feature mismatch");
    return ds;
}

namespace {
constexpr char kTraceMagic[8] = {'F', 'P', 'T', 'R', '0', '0', '0', '1'};
}

void save_trace(const std::string& path, const SimulationTrace& trace) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_trace: cannot open " + path);
    f.write(kTraceMagic, sizeof(kTraceMagic));
    const std::uint64_t n_days = static_cast<std::uint64_t>(trace.n_days);
    const std::uint64_t n_b = trace.power.size();
    const std::uint64_t n_steps = trace.n_steps();
    write_raw(f, &n_days, 1);
    write_raw(f, &n_b, 1);
    write_raw(f, &n_steps, 1);
    for (const auto& row : trace.power) {
        if (row.size() != n_steps) throw std::invalid_argument("save_trace: ragged power matrix");
        write_raw(f, row.data(), row.size());
    }
    if (trace.signals.size() != n_days) throw std::invalid_argument("save_trace: one signal per day expected");
    for (const auto& s : trace.signals) {
        write_raw(f, s.words, 2);
        write_raw(f, &s.n_off_steps, 1);
        write_raw(f, &s.n_switches, 1);
    }
    if (!f) throw std::runtime_error("save_trace: write failed");
}

SimulationTrace load_trace(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_trace: cannot open " + path);
    char magic[8];
    read_raw(f, magic, 8);
    if (!std::equal(magic, magic + 8, kTraceMagic)) throw std::runtime_error("load_trace: bad magic");
    std::uint64_t n_days = 0, n_b = 0, n_steps = 0;
    read_raw(f, &n_days, 1);
    read_raw(f, &n_b, 1);
    read_raw(f, &n_steps, 1);
    if (n_steps != n_days * kStepsPerDay) throw std::runtime_error("load_trace: inconsistent header");

    SimulationTrace trace;
    trace.n_days = static_cast<int>(n_days);
    trace.power.assign(n_b, std::vector<double>(n_steps));
    for (auto& row : trace.power) read_raw(f, row.data(), row.size());
    trace.signals.resize(n_days);
    for (auto& s : trace.signals) {
        read_raw(f, s.words, 2);
        read_raw(f, &s.n_off_steps, 1);
        read_raw(f, &s.n_switches, 1);
    }
    return trace;
}

}  // namespace flexpool
