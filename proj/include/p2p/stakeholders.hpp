#pragma once

// Vendor revenue gain, utility billed-sales loss, and the profit-rate
// threshold above which the utility blocks the rental market.

#include "p2p/adoption.hpp"
#include "p2p/market.hpp"
#include "p2p/savings_curve.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace p2p {

/// Annual billed purchases versus usable capacity, linear between the LP
/// sample points. Sale credits are excluded: the utility neither gains nor
/// loses on buy-back.
class BilledSalesCurve {
public:
    BilledSalesCurve() = default;
    BilledSalesCurve(std::string household_id, std::vector<double> knots, std::vector<double> purchases)
        : id_(std::move(household_id)), knots_(std::move(knots)), purchases_(std::move(purchases)) {
        if (knots_.size() < 2 || knots_.size() != purchases_.size() || knots_.front() != 0.0)
            throw std::invalid_argument("BilledSalesCurve: need >= 2 samples starting at y = 0");
    }

    static BilledSalesCurve from_samples(const HouseholdSamples& s) { return {s.household_id, s.y, s.purchases}; }

    const std::string& household_id() const { return id_; }
    double net_zero_size() const { return knots_.back(); }
    double baseline() const { return purchases_.front(); }
    std::span<const double> knots() const { return knots_; }
    std::span<const double> purchases() const { return purchases_; }

    double eval(double y) const {
        const double ybar = knots_.back();
        if (!(y >= -1e-12 * ybar && y <= ybar * (1.0 + 1e-12)))
            throw DomainError("BilledSalesCurve: y outside [0, ybar] for household " + id_);
        if (y <= 0.0) return purchases_.front();
        if (y >= ybar) return purchases_.back();
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), y);
        const std::size_t k = static_cast<std::size_t>(it - knots_.begin());
        if (y == knots_[k - 1]) return purchases_[k - 1];
        const double w = (y - knots_[k - 1]) / (knots_[k] - knots_[k - 1]);
        return purchases_[k - 1] + w * (purchases_[k] - purchases_[k - 1]);
    }

    /// Number of sample steps where purchases rise with capacity by more than tol.
    std::size_t monotonicity_violations(double tol) const {
        std::size_t n = 0;
        for (std::size_t k = 0; k + 1 < purchases_.size(); ++k)
            if (purchases_[k + 1] > purchases_[k] + tol) ++n;
        return n;
    }

private:
    std::string id_;
    std::vector<double> knots_;
    std::vector<double> purchases_;
};

/// Total baseline bill over all households (sum of L'Q).
inline double total_baseline(std::span<const BilledSalesCurve> curves) {
    double t = 0.0;
    for (const auto& c : curves) t += c.baseline();
    return t;
}

inline double vendor_gain(double p, double quantity_short, double quantity_long) {
    return p * (quantity_long - quantity_short);
}

/// Billed sales with owners at full self-use and everyone else at zero.
inline double billed_sales_without_market(std::span<const BilledSalesCurve> curves, const std::vector<bool>& owners) {
    double b = 0.0;
    for (std::size_t i = 0; i < curves.size(); ++i) b += owners[i] ? curves[i].eval(curves[i].net_zero_size()) : curves[i].eval(0.0);
    return b;
}

/// Billed sales with every household at its equilibrium allocation.
inline double billed_sales_with_market(std::span<const BilledSalesCurve> curves, const MarketEquilibrium& eq) {
    double b = 0.0;
    for (std::size_t i = 0; i < curves.size(); ++i) b += curves[i].eval(eq.allocations[i]);
    return b;
}

struct UtilityLoss {
    double billed_without = 0.0;
    double billed_with = 0.0;
    double loss = 0.0;
};

inline UtilityLoss utility_loss(std::span<const BilledSalesCurve> curves, const std::vector<bool>& owners_without,
                                const MarketEquilibrium& with_market) {
    UtilityLoss u;
    u.billed_without = billed_sales_without_market(curves, owners_without);
    u.billed_with = billed_sales_with_market(curves, with_market);
    u.loss = u.billed_without - u.billed_with;
    return u;
}

struct RegimePoint {
    double price = 0.0;
    double delta_R_V = 0.0;
    double delta_R_U = 0.0;
    // Largest utility/vendor profit-rate ratio at which the market still
    // emerges. +inf when the utility does not lose.
    double threshold_A_U = std::numeric_limits<double>::infinity();

    bool threshold_unbounded() const { return std::isinf(threshold_A_U); }

    /// Market emerges iff vendor gain beats utility loss, strictly.
    bool emerges(double profit_rate_ratio) const {
        return threshold_unbounded() || profit_rate_ratio < threshold_A_U;
    }

    double vendor_profit(double zeta_v) const { return zeta_v * delta_R_V; }
    double utility_profit_loss(double zeta_u) const { return zeta_u * delta_R_U; }
};

inline RegimePoint regime_point(double p, double delta_R_V, double delta_R_U) {
    RegimePoint r{p, delta_R_V, delta_R_U};
    if (delta_R_U > 0.0) r.threshold_A_U = delta_R_V / delta_R_U;
    return r;
}

struct StakeholderRow {
    LongRunResult long_run;
    UtilityLoss utility;
    RegimePoint regime;
};

/// Regime curve over a purchase-price grid.
inline std::vector<StakeholderRow> regime_boundary(const Market& market, const AdoptionOrder& order,
                                                   std::span<const BilledSalesCurve> billed, std::span<const double> p_grid,
                                                   unsigned threads = 1) {
    if (billed.size() != market.size()) throw std::invalid_argument("regime_boundary: curve count mismatch");
    std::vector<StakeholderRow> rows(p_grid.size());
    parallel_for(p_grid.size(), threads, [&](std::size_t k) {
        auto& row = rows[k];
        row.long_run = long_run_adoption(market, order, p_grid[k]);
        const auto eq = market.clear(top_owners(order, row.long_run.n_long));
        row.utility = utility_loss(billed, top_owners(order, row.long_run.n_short), eq);
        const double gain = vendor_gain(p_grid[k], row.long_run.quantity_short, row.long_run.quantity_long);
        row.regime = regime_point(p_grid[k], gain, row.utility.loss);
    });
    return rows;
}

}  // namespace p2p
