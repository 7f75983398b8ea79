#include "flexpool/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace flexpool {

namespace {

void check_profile(const std::vector<double>& y) {
    if (static_cast<int>(y.size()) != kStepsPerDay)
        throw std::invalid_argument("expected a 96-step profile");
}

// Solve a small symmetric linear system in place; returns false when a pivot
// collapses (rank deficiency).
template <std::size_t K>
bool solve_normal(std::array<std::array<double, K>, K> a, std::array<double, K> b,
                  std::array<double, K>& out) {
    double scale = 0;
    for (const auto& row : a)
        for (double v : row) scale = std::max(scale, std::abs(v));
    if (scale == 0) return false;
    for (std::size_t i = 0; i < K; ++i) {
        std::size_t piv = i;
        for (std::size_t r = i + 1; r < K; ++r)
            if (std::abs(a[r][i]) > std::abs(a[piv][i])) piv = r;
        if (std::abs(a[piv][i]) < 1e-12 * scale) return false;
        std::swap(a[i], a[piv]);
        std::swap(b[i], b[piv]);
        for (std::size_t r = i + 1; r < K; ++r) {
            const double f = a[r][i] / a[i][i];
            for (std::size_t c = i; c < K; ++c) a[r][c] -= f * a[i][c];
            b[r] -= f * b[i];
        }
    }
    for (std::size_t i = K; i-- > 0;) {
        double acc = b[i];
        for (std::size_t c = i + 1; c < K; ++c) acc -= a[i][c] * out[c];
        out[i] = acc / a[i][i];
    }
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------

void Tariff::validate() const {
    if (static_cast<int>(p_spot.size()) != kStepsPerDay)
        throw std::invalid_argument("Tariff: p_spot must have 96 entries");
    if (p_peak < 0) throw std::invalid_argument("Tariff: p_peak < 0");
    if (y_max_month < 0) throw std::invalid_argument("Tariff: y_max_month < 0");
}

double day_ahead_cost(const std::vector<double>& y_hat, const Tariff& tariff) {
    tariff.validate();
    check_profile(y_hat);
    double spot = 0, peak = 0;
    for (int h = 0; h < kStepsPerDay; ++h) {
        spot += tariff.p_spot[static_cast<std::size_t>(h)] * y_hat[static_cast<std::size_t>(h)];
        peak = std::max(peak, y_hat[static_cast<std::size_t>(h)]);
    }
    return kGamma * spot + tariff.p_peak * std::max(0.0, peak - tariff.y_max_month);
}

// ---------------------------------------------------------------------------

GroupChoice optimize_group_custom(const std::vector<double>& total_forecast, const Group& group,
                                  const std::vector<ForceOffSignal>& signals, const CostFn& cost_fn,
                                  int n_threads) {
    check_profile(total_forecast);
    if (signals.empty()) throw std::invalid_argument("optimize_group: empty signal list");
    if (!group.predict) throw std::invalid_argument("optimize_group: group has no metamodel");
    if (!cost_fn) throw std::invalid_argument("optimize_group: missing cost function");

    const auto y0 = group.predict(ForceOffSignal{});
    check_profile(y0);

    std::vector<double> costs(signals.size());
    parallel_for(
        signals.size(),
        [&](std::size_t i) {
            const auto yf = group.predict(signals[i]);
            std::vector<double> adj(kStepsPerDay);
            for (int h = 0; h < kStepsPerDay; ++h)
                adj[static_cast<std::size_t>(h)] = total_forecast[static_cast<std::size_t>(h)] -
                                                   y0[static_cast<std::size_t>(h)] +
                                                   yf[static_cast<std::size_t>(h)];
            costs[i] = cost_fn(adj);
        },
        n_threads);

    std::size_t best = 0;
    for (std::size_t i = 1; i < signals.size(); ++i) {
        if (costs[i] < costs[best] ||
            (costs[i] == costs[best] && signals[i].lex_less(signals[best], kStepsPerDay)))
            best = i;
    }

    GroupChoice choice;
    choice.signal = signals[best];
    choice.cost = costs[best];
    choice.y_flex = group.predict(signals[best]);
    choice.y_hat.resize(kStepsPerDay);
    for (int h = 0; h < kStepsPerDay; ++h)
        choice.y_hat[static_cast<std::size_t>(h)] = total_forecast[static_cast<std::size_t>(h)] -
                                                    y0[static_cast<std::size_t>(h)] +
                                                    choice.y_flex[static_cast<std::size_t>(h)];
    return choice;
}

GroupChoice optimize_group(const std::vector<double>& total_forecast, const Group& group,
                           const std::vector<ForceOffSignal>& signals, const Tariff& tariff,
                           int n_threads) {
    tariff.validate();
    return optimize_group_custom(
        total_forecast, group, signals, [&tariff](const std::vector<double>& y) { return day_ahead_cost(y, tariff); },
        n_threads);
}

DayPlan optimize_sequential(const std::vector<Group>& groups,
                            const std::vector<std::vector<ForceOffSignal>>& signal_sets,
                            const std::vector<double>& total_forecast, const Tariff& tariff,
                            int n_threads) {
    if (groups.empty()) throw std::invalid_argument("optimize_sequential: no groups");
    if (signal_sets.size() != groups.size())
        throw std::invalid_argument("optimize_sequential: one signal set per group required");
    for (const auto& set : signal_sets) {
        const bool has_zero = std::any_of(set.begin(), set.end(),
                                          [](const ForceOffSignal& s) { return s == ForceOffSignal{}; });
        if (!has_zero) throw std::invalid_argument("optimize_sequential: signal set lacks the zero signal");
    }
    tariff.validate();
    check_profile(total_forecast);

    DayPlan plan;
    plan.cost_no_control = day_ahead_cost(total_forecast, tariff);
    auto adj = total_forecast;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto choice = optimize_group(adj, groups[gi], signal_sets[gi], tariff, n_threads);
        plan.signals.push_back(choice.signal);
        adj = choice.y_hat;
    }
    plan.y_hat_total = std::move(adj);
    double spot = 0, peak = 0;
    for (int h = 0; h < kStepsPerDay; ++h) {
        spot += tariff.p_spot[static_cast<std::size_t>(h)] * plan.y_hat_total[static_cast<std::size_t>(h)];
        peak = std::max(peak, plan.y_hat_total[static_cast<std::size_t>(h)]);
    }
    plan.spot_cost = kGamma * spot;
    plan.peak_cost = tariff.p_peak * std::max(0.0, peak - tariff.y_max_month);
    plan.cost = plan.spot_cost + plan.peak_cost;
    return plan;
}

// ---------------------------------------------------------------------------
// Energy signature

double EnergySignature::eval(double T_d, double I_d) const {
    return std::max(0.0, intercept + slope_t * std::min(T_d - breakpoint, 0.0) + slope_i * I_d);
}

EnergySignature fit_energy_signature(const std::vector<double>& daily_energy_kwh,
                                     const std::vector<double>& T_d, const std::vector<double>& I_d) {
    const std::size_t n = daily_energy_kwh.size();
    if (T_d.size() != n || I_d.size() != n)
        throw std::invalid_argument("fit_energy_signature: series length mismatch");
    if (n < 30) throw std::invalid_argument("fit_energy_signature: need at least 30 daily observations");

    std::vector<double> taus = T_d;
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

    bool any = false;
    double best_sse = std::numeric_limits<double>::infinity();
    EnergySignature best;
    for (const double tau : taus) {
        // Normal equations for e ~ [1, min(T - tau, 0), I].
        std::array<std::array<double, 3>, 3> a{};
        std::array<double, 3> b{};
        for (std::size_t i = 0; i < n; ++i) {
            const std::array<double, 3> row = {1.0, std::min(T_d[i] - tau, 0.0), I_d[i]};
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) a[r][c] += row[r] * row[c];
                b[r] += row[r] * daily_energy_kwh[i];
            }
        }
        std::array<double, 3> coef{};
        if (!solve_normal(a, b, coef)) continue;
        double sse = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double fit = coef[0] + coef[1] * std::min(T_d[i] - tau, 0.0) + coef[2] * I_d[i];
            const double r = daily_energy_kwh[i] - fit;
            sse += r * r;
        }
        if (sse < best_sse) {  // strict: ties keep the smaller breakpoint
            best_sse = sse;
            best = {coef[0], coef[1], coef[2], tau};
            any = true;
        }
    }
    if (!any) throw std::runtime_error("fit_energy_signature: rank-deficient design");

    if (best.slope_t > 0) {
        // Heating energy cannot rise with temperature; refit without the
        // temperature term.
        std::array<std::array<double, 2>, 2> a{};
        std::array<double, 2> b{};
        for (std::size_t i = 0; i < n; ++i) {
            const std::array<double, 2> row = {1.0, I_d[i]};
            for (int r = 0; r < 2; ++r) {
                for (int c = 0; c < 2; ++c) a[r][c] += row[r] * row[c];
                b[r] += row[r] * daily_energy_kwh[i];
            }
        }
        std::array<double, 2> coef{};
        if (solve_normal(a, b, coef)) {
            best.intercept = coef[0];
            best.slope_i = coef[1];
        } else {
            best.intercept = std::accumulate(daily_energy_kwh.begin(), daily_energy_kwh.end(), 0.0) /
                             static_cast<double>(n);
            best.slope_i = 0;
        }
        best.slope_t = 0;
    }
    return best;
}

double activation_hours(const EnergySignature& sig, double T_d, double I_d, double p_nom_kw) {
    if (p_nom_kw <= 0) throw std::invalid_argument("activation_hours: p_nom must be positive");
    return std::clamp(sig.eval(T_d, I_d) / p_nom_kw, 0.0, 24.0);
}

int comfort_budget(const std::vector<EnergySignature>& sigs, const std::vector<double>& p_noms_kw,
                   double T_d, double I_d) {
    if (sigs.empty()) throw std::invalid_argument("comfort_budget: no member signatures");
    if (sigs.size() != p_noms_kw.size())
        throw std::invalid_argument("comfort_budget: signature/p_nom count mismatch");
    double h_max = 0;
    for (std::size_t i = 0; i < sigs.size(); ++i)
        h_max = std::max(h_max, activation_hours(sigs[i], T_d, I_d, p_noms_kw[i]));
    const int reserved = static_cast<int>(std::ceil(4.0 * h_max));
    return std::max(0, kStepsPerDay - reserved);
}

}  // namespace flexpool
