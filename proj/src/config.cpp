#include "flexpool/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "serde.hpp"

namespace flexpool {

namespace {

nlohmann::json boost_to_json(const BoostParams& p) {
    nlohmann::json j;
    j["learning_rate"] = p.learning_rate;
    j["n_trees"] = p.n_trees;
    j["max_depth"] = p.tree.max_depth;
    j["min_samples_leaf"] = p.tree.min_samples_leaf;
    j["histogram"] = p.tree.histogram;
    j["n_bins"] = p.tree.n_bins;
    j["colsample"] = p.colsample;
    j["seed"] = p.seed;
    return j;
}

BoostParams boost_from_json(const nlohmann::json& j) {
    BoostParams p;
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.n_trees = j.value("n_trees", p.n_trees);
    p.tree.max_depth = j.value("max_depth", p.tree.max_depth);
    p.tree.min_samples_leaf = j.value("min_samples_leaf", p.tree.min_samples_leaf);
    p.tree.histogram = j.value("histogram", p.tree.histogram);
    p.tree.n_bins = j.value("n_bins", p.tree.n_bins);
    p.colsample = j.value("colsample", p.colsample);
    p.seed = j.value("seed", p.seed);
    return p;
}

PathsConfig paths_from_json(const nlohmann::json& j) {
    PathsConfig p;
    p.weather_csv = j.value("weather_csv", p.weather_csv);
    p.spot_csv = j.value("spot_csv", p.spot_csv);
    p.carbon_csv = j.value("carbon_csv", p.carbon_csv);
    p.base_load_csv = j.value("base_load_csv", p.base_load_csv);
    p.out_dir = j.value("out_dir", p.out_dir);
    return p;
}

// CSV with a header line; returns the requested number of value columns
// (column 0 is an index/timestamp and is skipped).
std::vector<std::vector<double>> read_csv_columns(const std::string& path, std::size_t n_cols) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open CSV " + path);
    std::vector<std::vector<double>> cols(n_cols);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty CSV " + path);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        if (!std::getline(ls, cell, ',')) throw std::runtime_error("malformed CSV row in " + path);
        for (std::size_t c = 0; c < n_cols; ++c) {
            if (!std::getline(ls, cell, ',')) throw std::runtime_error("missing column in " + path);
            cols[c].push_back(std::stod(cell));
        }
    }
    return cols;
}

}  // namespace

void RunConfig::validate() const {
    fleet.validate();
    signals.validate();
    boost.validate();
    if (sampling != "grid" && sampling != "random-linear")
        throw std::invalid_argument("config: sampling must be 'grid' or 'random-linear'");
    if (model_variant != "plain" && model_variant != "energy-aware")
        throw std::invalid_argument("config: model_variant must be 'plain' or 'energy-aware'");
    if (train_days < 10) throw std::invalid_argument("config: train_days must be >= 10");
    if (n_scenarios < 1) throw std::invalid_argument("config: n_scenarios must be >= 1");
    if (!(k_fraction > 0.0 && k_fraction <= 100.0))
        throw std::invalid_argument("config: k_fraction must be in (0, 100]");
    if (cutoff_day < 8 || cutoff_day >= train_days)
        throw std::invalid_argument("config: cutoff_day must satisfy 8 <= cutoff_day < train_days");
    if (base_load_mean_kw <= 0) throw std::invalid_argument("config: base_load_mean_kw must be positive");
    if (p_peak < 0) throw std::invalid_argument("config: p_peak must be non-negative");
    if (warmup_days < 8) throw std::invalid_argument("config: warmup_days must be >= 8");
    if (horizon_days < 1) throw std::invalid_argument("config: horizon_days must be >= 1");
    if (!(ctrl_fraction >= 0.0 && ctrl_fraction <= 1.0))
        throw std::invalid_argument("config: ctrl_fraction must be in [0, 1]");
    if (signal_subsample < 1) throw std::invalid_argument("config: signal_subsample must be >= 1");
    if (n_threads < 0) throw std::invalid_argument("config: n_threads must be >= 0");
}

RunConfig parse_config(const std::string& json_text) {
    const nlohmann::json j = nlohmann::json::parse(json_text);
    if (!j.is_object()) throw std::invalid_argument("config: top level must be a JSON object");
    static const std::set<std::string> known = {
        "seed",         "paths",          "fleet",
        "signals",      "sampling",       "model_variant",
        "train_days",   "n_scenarios",    "k_fraction",
        "max_rows_per_scenario",          "cutoff_day",
        "base_load_mean_kw",              "boost",
        "p_peak",       "warmup_days",    "horizon_days",
        "ctrl_fraction", "signal_subsample", "n_threads"};
    for (const auto& [key, value] : j.items())
        if (known.find(key) == known.end())
            throw std::invalid_argument("config: unknown key '" + key + "'");
    if (!j.contains("seed"))
        throw std::invalid_argument("config: 'seed' is mandatory (runs must be reproducible)");

    RunConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("paths")) c.paths = paths_from_json(j.at("paths"));
    if (j.contains("fleet")) c.fleet = serde::spec_from_json(j.at("fleet"));
    if (j.contains("signals")) c.signals = serde::constraints_from_json(j.at("signals"));
    c.sampling = j.value("sampling", c.sampling);
    c.model_variant = j.value("model_variant", c.model_variant);
    c.train_days = j.value("train_days", c.train_days);
    c.n_scenarios = j.value("n_scenarios", c.n_scenarios);
    c.k_fraction = j.value("k_fraction", c.k_fraction);
    c.max_rows_per_scenario = j.value("max_rows_per_scenario", c.max_rows_per_scenario);
    c.cutoff_day = j.value("cutoff_day", c.cutoff_day);
    c.base_load_mean_kw = j.value("base_load_mean_kw", c.base_load_mean_kw);
    if (j.contains("boost")) c.boost = boost_from_json(j.at("boost"));
    c.p_peak = j.value("p_peak", c.p_peak);
    c.warmup_days = j.value("warmup_days", c.warmup_days);
    c.horizon_days = j.value("horizon_days", c.horizon_days);
    c.ctrl_fraction = j.value("ctrl_fraction", c.ctrl_fraction);
    c.signal_subsample = j.value("signal_subsample", c.signal_subsample);
    c.n_threads = j.value("n_threads", c.n_threads);

    // Stage seeds default to root-derived streams so one root seed pins the
    // whole pipeline.
    if (c.fleet.seed == 0) c.fleet.seed = derive_seed(c.seed, "fleet");
    if (c.boost.seed == 0) c.boost.seed = derive_seed(c.seed, "train");

    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config(buf.str());
}

std::string config_json(const RunConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["paths"] = {{"weather_csv", c.paths.weather_csv},
                  {"spot_csv", c.paths.spot_csv},
                  {"carbon_csv", c.paths.carbon_csv},
                  {"base_load_csv", c.paths.base_load_csv},
                  {"out_dir", c.paths.out_dir}};
    j["fleet"] = serde::spec_to_json(c.fleet);
    j["signals"] = serde::constraints_to_json(c.signals);
    j["sampling"] = c.sampling;
    j["model_variant"] = c.model_variant;
    j["train_days"] = c.train_days;
    j["n_scenarios"] = c.n_scenarios;
    j["k_fraction"] = c.k_fraction;
    j["max_rows_per_scenario"] = c.max_rows_per_scenario;
    j["cutoff_day"] = c.cutoff_day;
    j["base_load_mean_kw"] = c.base_load_mean_kw;
    j["boost"] = boost_to_json(c.boost);
    j["p_peak"] = c.p_peak;
    j["warmup_days"] = c.warmup_days;
    j["horizon_days"] = c.horizon_days;
    j["ctrl_fraction"] = c.ctrl_fraction;
    j["signal_subsample"] = c.signal_subsample;
    j["n_threads"] = c.n_threads;
    return j.dump(2);
}

ExogenousSeries load_series(const RunConfig& c, int n_days, const std::string& stage) {
    if (n_days < 1) throw std::invalid_argument("load_series: n_days must be positive");
    const auto need = static_cast<std::size_t>(n_days) * kStepsPerDay;
    const std::uint64_t s = derive_seed(c.seed, "series/" + stage);

    ExogenousSeries out;
    if (!c.paths.weather_csv.empty()) {
        auto cols = read_csv_columns(c.paths.weather_csv, 2);
        if (cols[0].size() < need) throw std::runtime_error("weather CSV shorter than the horizon");
        cols[0].resize(need);
        cols[1].resize(need);
        out.weather.T_ext = std::move(cols[0]);
        out.weather.ghi = std::move(cols[1]);
    } else {
        out.weather = synth_weather(n_days, derive_seed(s, "weather"));
    }

    const auto load_one = [&](const std::string& path, const char* tag,
                              auto synth) -> std::vector<double> {
        if (!path.empty()) {
            auto cols = read_csv_columns(path, 1);
            if (cols[0].size() < need)
                throw std::runtime_error(std::string(tag) + " CSV shorter than the horizon");
            cols[0].resize(need);
            return std::move(cols[0]);
        }
        return synth(derive_seed(s, tag));
    };
    out.spot = load_one(c.paths.spot_csv, "spot",
                        [&](std::uint64_t sd) { return synth_spot_prices(n_days, sd); });
    out.carbon = load_one(c.paths.carbon_csv, "carbon",
                          [&](std::uint64_t sd) { return synth_carbon_intensity(n_days, sd); });
    out.base_load = load_one(c.paths.base_load_csv, "base_load", [&](std::uint64_t sd) {
        return synth_base_load(n_days, c.base_load_mean_kw, sd);
    });
    return out;
}

}  // namespace flexpool
