#pragma once
// Day-ahead schedule selection: exact brute-force cost minimization over an
// enumerated signal list, the sequential multigroup heuristic, and the
// energy-signature comfort gate that bounds how long heat pumps may be
// blocked on cold days.

#include <functional>
#include <string>
#include <vector>

#include "flexpool/common.hpp"
#include "flexpool/signals.hpp"

namespace flexpool {

// ---------------------------------------------------------------------------
// Tariff and cost

struct Tariff {
    std::vector<double> p_spot;  // CHF/kWh, one per step (96)
    double p_peak = 0.0;         // CHF/kW applied to the monthly peak increase
    double y_max_month = 0.0;    // running monthly peak, kW

    void validate() const;
};

// gamma * sum_h p_spot[h]*y_hat[h] + p_peak * max(0, max_h y_hat[h] - y_max_month)
double day_ahead_cost(const std::vector<double>& y_hat, const Tariff& tariff);

// ---------------------------------------------------------------------------
// Groups

struct Group {
    int id = 0;
    std::string name;          // e.g. "eh", "hp"
    std::vector<int> members;  // building indices (bookkeeping/reporting)

    // Predicted aggregate of the group's flexible devices under a candidate
    // signal, kW per step (96 values). Must be safe to call concurrently when
    // the optimizer runs multithreaded.
    std::function<std::vector<double>(const ForceOffSignal&)> predict;
};

struct GroupChoice {
    ForceOffSignal signal;
    double cost = 0.0;              // day-ahead cost of the adjusted total
    std::vector<double> y_flex;     // group profile under the chosen signal
    std::vector<double> y_hat;      // adjusted total under the chosen signal
};

using CostFn = std::function<double(const std::vector<double>&)>;

// Exact argmin of cost_fn over y_hat(s) = total_forecast - y_f(zero) + y_f(s)
// for every listed signal. Ties break toward the lexicographically smallest
// signal, independent of list order and thread count.
GroupChoice optimize_group_custom(const std::vector<double>& total_forecast, const Group& group,
                                  const std::vector<ForceOffSignal>& signals, const CostFn& cost_fn,
                                  int n_threads = 0);

GroupChoice optimize_group(const std::vector<double>& total_forecast, const Group& group,
                           const std::vector<ForceOffSignal>& signals, const Tariff& tariff,
                           int n_threads = 0);

struct DayPlan {
    std::vector<ForceOffSignal> signals;  // per group, in optimization order
    std::vector<double> y_hat_total;      // final predicted total, kW
    double cost = 0.0;                    // day-ahead cost of y_hat_total
    double spot_cost = 0.0;
    double peak_cost = 0.0;
    double cost_no_control = 0.0;         // cost of the unadjusted forecast
};

// Sequential heuristic: groups are fixed one at a time in list order, each
// optimizing against the total adjusted by the previously chosen signals.
// signal_sets[g] is the admissible list for group g (comfort gating applied
// by the caller); every list must contain the all-zero signal.
DayPlan optimize_sequential(const std::vector<Group>& groups,
                            const std::vector<std::vector<ForceOffSignal>>& signal_sets,
                            const std::vector<double>& total_forecast, const Tariff& tariff,
                            int n_threads = 0);

// ---------------------------------------------------------------------------
// Energy signature and comfort gating

struct EnergySignature {
    double intercept = 0.0;    // kWh/day at and above the breakpoint (I_d = 0)
    double slope_t = 0.0;      // kWh/day per degC below the breakpoint; <= 0
    double slope_i = 0.0;      // kWh/day per (W/m2) of mean daily irradiance
    double breakpoint = 15.0;  // degC

    double eval(double T_d, double I_d) const;  // clamped at 0 from below
};

// Least-squares fit of e = a + b*min(T_d - tau, 0) + c*I_d with the breakpoint
// tau grid-searched over the observed temperatures (ties toward smaller tau).
EnergySignature fit_energy_signature(const std::vector<double>& daily_energy_kwh,
                                     const std::vector<double>& T_d, const std::vector<double>& I_d);

// h = e(T_d, I_d) / p_nom, clamped to [0, 24].
double activation_hours(const EnergySignature& sig, double T_d, double I_d, double p_nom_kw);

// Steps of force-off allowed on a day with forecast (T_d, I_d):
// 96 - ceil(4 * max_i h_i), floored at 0. Feeds filter_by_off_budget.
int comfort_budget(const std::vector<EnergySignature>& sigs, const std::vector<double>& p_noms_kw,
                   double T_d, double I_d);

}  // namespace flexpool
