#pragma once
// Shared utilities: deterministic RNG, statistics, calendar, CSV and
// lightweight parallel execution. Everything here is seed-stable across
// platforms: no std::<distribution> types are used anywhere in the engine
// because their output is implementation-defined.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace flexpool {

// ---------------------------------------------------------------------------
// Seeding

// splitmix64 finalizer; used to derive stage seeds from one root seed.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// All randomness in the pipeline flows from a single root seed; each stage
// gets an independent stream derived from its name.
inline std::uint64_t derive_seed(std::uint64_t root, const std::string& stage) {
    return splitmix64(root ^ fnv1a(stage));
}

// ---------------------------------------------------------------------------
// Deterministic RNG. mt19937_64 is bit-stable by standard; the mappings to
// doubles/ints below are hand-rolled so results do not depend on the C++
// standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // uniform double in [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double loguniform(double a, double b) {
        if (a <= 0 || b <= 0) throw std::invalid_argument("loguniform: bounds must be positive");
        return std::exp(uniform(std::log(a), std::log(b)));
    }

    // uniform integer in [lo, hi] inclusive, unbiased via rejection
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
        const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
        if (range == 0) return static_cast<std::int64_t>(gen_());  // full 64-bit range
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % range);
    }

    // standard normal via Box-Muller (deterministic, no cached spare)
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Statistics

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean: empty vector");
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

// Linear-interpolation (inclusive) quantile, q in [0,1]; matches the common
// "linear" definition: h = (n-1)q, interpolate between floor(h) and ceil(h).
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile: empty vector");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile: q outside [0,1]");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
    const double frac = h - static_cast<double>(lo);
    return v[lo] + (v[hi] - v[lo]) * frac;
}

// ---------------------------------------------------------------------------
// Simulation calendar. The engine works on a fixed 365-day non-leap calendar
// at 15-minute resolution; day 0 is January 1st. The day of week of day 0 is
// configurable (default Sunday, matching a year starting like 2023).
constexpr int kStepsPerDay = 96;
constexpr int kStepsPerHour = 4;
constexpr double kStepSeconds = 900.0;
constexpr double kGamma = kStepSeconds / 3600.0;  // kW -> kWh per step

struct Calendar {
    int start_dow = 0;  // 0 = Sunday

    static constexpr int month_days[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};

    static int month_of_day(int day_of_year) {
        int d = day_of_year % 365;
        for (int m = 0; m < 12; ++m) {
            if (d < month_days[m]) return m;
            d -= month_days[m];
        }
        return 11;
    }

    int dow(int day_of_year) const { return (start_dow + day_of_year) % 7; }

    static int day_of_step(long t) { return static_cast<int>(t / kStepsPerDay); }
    static int step_in_day(long t) { return static_cast<int>(t % kStepsPerDay); }
    static int hour_of_step(long t) { return step_in_day(t) / kStepsPerHour; }
    static int minute_of_day(long t) { return step_in_day(t) * 15; }
};

// ---------------------------------------------------------------------------
// Parallel map over [0, n). Buildings/scenarios/ensembles are independent by
// design; this helper preserves determinism because each index owns its
// output slot. n_threads <= 1 degrades to a serial loop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int n_threads = 0);

// ---------------------------------------------------------------------------
// Minimal CSV support (numeric tables with a header row).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;  // column-major

    std::size_t n_rows() const { return columns.empty() ? 0 : columns[0].size(); }
    const std::vector<double>& col(const std::string& name) const;
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

}  // namespace flexpool
