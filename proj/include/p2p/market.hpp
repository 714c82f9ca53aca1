#pragma once

// Rental market clearing for a fixed owner set.
//
// Given rent r, every household keeps the capacity that maximizes
// f(y) - r y (renters pay r y, owners forgo r (ybar - y)). With piecewise
// linear savings curves each household's choice is a step function of r, so
// excess supply E(r) = supply - demand is a nondecreasing step function and
// the clearing price sits at a kink or on a flat zero stretch.

#include "p2p/savings_curve.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace p2p {

struct MarketOptions {
    double abs_tol = 1e-6;  // kW
    double rel_tol = 1e-9;  // times total net-zero capacity
};

enum class Role { kOwner, kRenter };

struct MarketEquilibrium {
    std::optional<double> clearing_price;  // empty when either side is empty
    double price_low = 0.0;                // ends of the clearing-price interval
    double price_high = 0.0;
    double volume = 0.0;
    double supply = 0.0;
    double demand = 0.0;
    bool rationed = false;

    std::vector<Role> roles;
    std::vector<double> allocations;  // y* per household, kW
    std::vector<double> surpluses;    // w per household

    double owner_surplus_total = 0.0;
    double renter_surplus_total = 0.0;
    double total_surplus = 0.0;

    double owner_participation = 0.0;
    double nonowner_participation = 0.0;
    double total_participation = 0.0;
};

/// A fixed population of savings curves, prepared for repeated clearing with
/// different owner sets. Sums run in household-id order so results do not
/// depend on the order the curves were supplied in.
class Market {
public:
    explicit Market(std::span<const SavingsCurve> curves, MarketOptions options = {})
        : curves_(curves), options_(options), order_(curves.size()) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
            return curves_[a].household_id() < curves_[b].household_id();
        });
        candidates_.push_back(0.0);
        for (const auto& c : curves_) {
            total_capacity_ += c.net_zero_size();
            for (double s : c.slopes()) candidates_.push_back(s);
        }
        std::sort(candidates_.begin(), candidates_.end());
        candidates_.erase(std::unique(candidates_.begin(), candidates_.end()), candidates_.end());
    }

    std::size_t size() const { return curves_.size(); }
    std::span<const SavingsCurve> curves() const { return curves_; }
    double tolerance() const { return std::max(options_.abs_tol, options_.rel_tol * total_capacity_); }

    /// Sum of renters' largest maximizers at rent r.
    double demand(const std::vector<bool>& owners, double r) const {
        check_price(r);
        double d = 0.0;
        for (std::size_t i : order_)
            if (!owners[i]) d += curves_[i].inverse_marginal(r);
        return d;
    }

    /// Capacity owners release at rent r.
    double supply(const std::vector<bool>& owners, double r) const {
        check_price(r);
        double s = 0.0;
        for (std::size_t i : order_)
            if (owners[i]) s += curves_[i].net_zero_size() - curves_[i].inverse_marginal(r);
        return s;
    }

    MarketEquilibrium clear(const std::vector<bool>& owners) const {
        if (owners.size() != curves_.size()) throw std::invalid_argument("Market::clear: owner mask size mismatch");
        const std::size_t n = curves_.size();
        MarketEquilibrium eq;
        eq.roles.resize(n);
        eq.allocations.resize(n);
        eq.surpluses.assign(n, 0.0);
        std::size_t n_owners = 0;
        for (std::size_t i = 0; i < n; ++i) {
            eq.roles[i] = owners[i] ? Role::kOwner : Role::kRenter;
            n_owners += owners[i] ? 1 : 0;
        }

        if (n_owners == 0 || n_owners == n) {
            for (std::size_t i = 0; i < n; ++i) eq.allocations[i] = owners[i] ? curves_[i].net_zero_size() : 0.0;
            return eq;
        }

        const double tol = tolerance();
        // First candidate with E_max >= -tol and last with E_min <= tol.
        const auto first = std::partition_point(candidates_.begin(), candidates_.end(),
                                                [&](double r) { return excess_bounds(owners, r).high < -tol; });
        const auto past_last = std::partition_point(candidates_.begin(), candidates_.end(),
                                                    [&](double r) { return excess_bounds(owners, r).low <= tol; });
        eq.price_low = first == candidates_.end() ? candidates_.back() : *first;
        eq.price_high = past_last == candidates_.begin() ? candidates_.front() : *(past_last - 1);
        if (eq.price_high < eq.price_low) eq.price_high = eq.price_low;
        const double price = 0.5 * (eq.price_low + eq.price_high);
        eq.clearing_price = price;

        // Choice intervals at the clearing price.
        std::vector<double> lo(n), hi(n);
        double s_min = 0.0, s_span = 0.0, d_min = 0.0, d_span = 0.0;
        for (std::size_t i : order_) {
            lo[i] = curves_[i].inverse_marginal_lower(price);
            hi[i] = curves_[i].inverse_marginal(price);
            if (owners[i]) {
                s_min += curves_[i].net_zero_size() - hi[i];
                s_span += hi[i] - lo[i];
            } else {
                d_min += lo[i];
                d_span += hi[i] - lo[i];
            }
        }
        // Smallest balanced volume: indifferent households trade only what
        // the other side strictly wants, each the same fraction of its span.
        const double volume = std::max(s_min, d_min);
        const double owner_frac = s_span > 0.0 ? std::clamp((volume - s_min) / s_span, 0.0, 1.0) : 0.0;
        const double renter_frac = d_span > 0.0 ? std::clamp((volume - d_min) / d_span, 0.0, 1.0) : 0.0;
        eq.rationed = (s_span > 0.0 && owner_frac < 1.0) || (d_span > 0.0 && renter_frac < 1.0);

        std::size_t owner_part = 0, renter_part = 0;
        for (std::size_t i : order_) {
            const auto& c = curves_[i];
            const double ybar = c.net_zero_size();
            const double y = owners[i] ? hi[i] - owner_frac * (hi[i] - lo[i]) : lo[i] + renter_frac * (hi[i] - lo[i]);
            eq.allocations[i] = y;
            const double fy = c.eval(y);
            const double participation_tol = 1e-12 * ybar;
            if (owners[i]) {
                eq.surpluses[i] = fy + price * (ybar - y) - c.full_savings();
                eq.supply += ybar - y;
                eq.owner_surplus_total += eq.surpluses[i];
                if (y < ybar - participation_tol) ++owner_part;
            } else {
                eq.surpluses[i] = fy - price * y;
                eq.demand += y;
                eq.renter_surplus_total += eq.surpluses[i];
                if (y > participation_tol) ++renter_part;
            }
        }
        eq.volume = eq.supply;
        eq.total_surplus = eq.owner_surplus_total + eq.renter_surplus_total;
        eq.owner_participation = static_cast<double>(owner_part) / static_cast<double>(n_owners);
        eq.nonowner_participation = static_cast<double>(renter_part) / static_cast<double>(n - n_owners);
        eq.total_participation = static_cast<double>(owner_part + renter_part) / static_cast<double>(n);
        return eq;
    }

private:
    struct Bounds {
        double low;
        double high;
    };

    static void check_price(double r) {
        if (!(r >= 0.0)) throw DomainError("rental price must be >= 0");
    }

    // Range of excess supply at rent r over all indifferent choices.
    Bounds excess_bounds(const std::vector<bool>& owners, double r) const {
        Bounds b{0.0, 0.0};
        for (std::size_t i : order_) {
            const double lo = curves_[i].inverse_marginal_lower(r);
            const double hi = curves_[i].inverse_marginal(r);
            if (owners[i]) {
                const double ybar = curves_[i].net_zero_size();
                b.low += ybar - hi;
                b.high += ybar - lo;
            } else {
                b.low -= hi;
                b.high -= lo;
            }
        }
        return b;
    }

    std::span<const SavingsCurve> curves_;
    MarketOptions options_;
    std::vector<std::size_t> order_;
    std::vector<double> candidates_;
    double total_capacity_ = 0.0;
};

/// Owner mask from a set of household ids.
inline std::vector<bool> owner_mask(std::span<const SavingsCurve> curves, std::span<const std::string> owner_ids) {
    std::vector<bool> mask(curves.size(), false);
    for (std::size_t i = 0; i < curves.size(); ++i)
        mask[i] = std::find(owner_ids.begin(), owner_ids.end(), curves[i].household_id()) != owner_ids.end();
    return mask;
}

inline double aggregate_demand(std::span<const SavingsCurve> curves, const std::vector<bool>& owners, double r) {
    return Market(curves).demand(owners, r);
}

inline double aggregate_supply(std::span<const SavingsCurve> curves, const std::vector<bool>& owners, double r) {
    return Market(curves).supply(owners, r);
}

inline MarketEquilibrium clear_market(std::span<const SavingsCurve> curves, const std::vector<bool>& owners,
                                      MarketOptions options = {}) {
    return Market(curves, options).clear(owners);
}

}  // namespace p2p
