#pragma once

// Household daily cost minimization. For one day and a usable capacity y
// the household picks storage actions to minimize
//
//     sum_h  q_h [g_h]+  +  r_h [g_h]-
//
// where g is grid exchange after PV, storage losses behind the inverter and
// load. Positive and negative parts of g and of the storage action u are
// split into nonnegative columns, which is exact because q >= r >= 0.

#include "p2p/domain.hpp"
#include "p2p/lp_simplex.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <utility>

namespace p2p {

struct DispatchOptions {
    // Require end-of-day charge to be at least the starting charge.
    bool require_terminal_soc = false;
    double complementarity_tol = 1e-9;
};

struct DailyDispatchResult {
    double cost = 0.0;         // purchases + sale_credit
    double purchases = 0.0;    // [g]+ . q
    double sale_credit = 0.0;  // [g]- . r, never positive
    double lp_objective = 0.0; // raw solver objective
    DayProfile grid{};            // kWh, positive = import
    DayProfile storage_action{};  // kWh change in stored energy before self-discharge
    DayProfile soc{};             // kWh at the end of each hour
};

namespace detail {

inline void fill_bill(DailyDispatchResult& r, const DayProfile& buy, const DayProfile& sell) {
    r.purchases = 0.0;
    r.sale_credit = 0.0;
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
        const double g = r.grid[h];
        if (g > 0.0) r.purchases += g * buy[h];
        else r.sale_credit += g * sell[h];
    }
    r.cost = r.purchases + r.sale_credit;
}

}  // namespace detail

/// Baseline cost of a day with no asset.
inline double baseline_day_cost(const DayProfile& load, const DayProfile& buy) {
    double c = 0.0;
    for (std::size_t h = 0; h < kHoursPerDay; ++h) c += load[h] * buy[h];
    return c;
}

inline DailyDispatchResult solve_day(const DayProfile& load, const DayProfile& irradiance, const DayProfile& buy,
                                     const DayProfile& sell, const AssetSpec& asset, double y,
                                     const DispatchOptions& options = {}) {
    if (!(y >= 0.0) || !std::isfinite(y)) throw DomainError("solve_day: capacity y must be finite and >= 0");
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
        if (!(sell[h] >= 0.0)) throw DomainError("solve_day: sell prices must be >= 0");
        if (buy[h] < sell[h]) throw DomainError("solve_day: buy price below sell price at hour " + std::to_string(h));
        if (!(load[h] >= 0.0) || !(irradiance[h] >= 0.0))
            throw DomainError("solve_day: load and irradiance must be >= 0");
    }

    DailyDispatchResult out;
    if (y == 0.0) {
        // No asset: the LP collapses to g = load.
        out.grid = load;
        detail::fill_bill(out, buy, sell);
        out.lp_objective = out.cost;
        return out;
    }

    const double charge_factor = 1.0 / (asset.eta_c * asset.eta_i);
    const double discharge_factor = asset.eta_d * asset.eta_i;
    const double capacity = asset.alpha * y;
    const double x_start = asset.x0 * capacity;

    lp::Problem lp;
    std::array<std::size_t, kHoursPerDay> up{}, um{}, x{}, gp{}, gm{};
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
        up[h] = lp.add_var(0.0, asset.u_charge_max * y);
        um[h] = lp.add_var(0.0, asset.u_discharge_max * y);
        x[h] = lp.add_var(0.0, capacity);
        gp[h] = lp.add_var(buy[h]);
        gm[h] = lp.add_var(-sell[h]);
    }
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
        lp.add_row({{gp[h], 1.0}, {gm[h], -1.0}, {up[h], -charge_factor}, {um[h], discharge_factor}},
                   lp::RowSense::kEqual, load[h] - asset.eta_i * irradiance[h] * y);
    }
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
        if (h == 0) {
            lp.add_row({{x[0], 1.0}, {up[0], -1.0}, {um[0], 1.0}}, lp::RowSense::kEqual, asset.eta_s * x_start);
        } else {
            lp.add_row({{x[h], 1.0}, {x[h - 1], -asset.eta_s}, {up[h], -1.0}, {um[h], 1.0}}, lp::RowSense::kEqual,
                       0.0);
        }
    }
    if (options.require_terminal_soc)
        lp.add_row({{x[kHoursPerDay - 1], 1.0}}, lp::RowSense::kGreaterEqual, x_start);

    const lp::Solution sol = lp::solve(lp);
    if (sol.status != lp::Status::kOptimal)
        throw std::runtime_error(std::string("solve_day: LP not solved: ") + lp::to_string(sol.status));

    out.lp_objective = sol.objective;
    for (std::size_t h = 0; h < kHoursPerDay; ++h) {
        double charge = sol.x[up[h]];
        double discharge = sol.x[um[h]];
        // Simultaneous charge and discharge only ties at zero-value hours;
        // netting keeps the state trajectory and never raises cost.
        if (charge > options.complementarity_tol && discharge > options.complementarity_tol) {
            const double m = std::min(charge, discharge);
            charge -= m;
            discharge -= m;
        }
        out.storage_action[h] = charge - discharge;
        out.soc[h] = sol.x[x[h]];
        out.grid[h] = load[h] - asset.eta_i * irradiance[h] * y + charge_factor * charge - discharge_factor * discharge;
    }
    detail::fill_bill(out, buy, sell);
    return out;
}

struct BillBreakdown {
    double bill = 0.0;
    double purchases = 0.0;
    double sale_credit = 0.0;
};

/// Period bill at capacity y, summed over days in day order and scaled by
/// the scenario day weight.
inline BillBreakdown annual_bill(const HouseholdRecord& household, const Scenario& scenario, double y,
                                 const DispatchOptions& options = {}) {
    BillBreakdown total;
    const std::size_t days = scenario.days();
    for (std::size_t d = 0; d < days; ++d) {
        const auto r = solve_day(household.load.day(d), scenario.irradiance.values.day(d), scenario.tariff.buy.day(d),
                                 scenario.tariff.sell.day(d), scenario.asset, y, options);
        total.bill += r.cost;
        total.purchases += r.purchases;
        total.sale_credit += r.sale_credit;
    }
    total.bill *= scenario.day_weight;
    total.purchases *= scenario.day_weight;
    total.sale_credit *= scenario.day_weight;
    return total;
}

/// Closed-form bill with no asset: L'Q scaled by the day weight.
inline double baseline_bill(const HouseholdRecord& household, const Scenario& scenario) {
    double c = 0.0;
    for (std::size_t d = 0; d < scenario.days(); ++d)
        c += baseline_day_cost(household.load.day(d), scenario.tariff.buy.day(d));
    return c * scenario.day_weight;
}

/// Memo of annual bills keyed by (household id, y). Safe for concurrent use.
class BillCache {
public:
    BillCache(const Scenario& scenario, DispatchOptions options = {}) : scenario_(scenario), options_(options) {}

    BillBreakdown get(std::size_t household_index, double y) {
        const auto& hh = scenario_.households.at(household_index);
        const auto key = std::make_pair(hh.id, y);
        {
            std::lock_guard lock(mutex_);
            if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        }
        const BillBreakdown b = annual_bill(hh, scenario_, y, options_);
        std::lock_guard lock(mutex_);
        memo_.emplace(key, b);
        return b;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return memo_.size();
    }

private:
    const Scenario& scenario_;
    DispatchOptions options_;
    mutable std::mutex mutex_;
    std::map<std::pair<std::string, double>, BillBreakdown> memo_;
};

}  // namespace p2p
