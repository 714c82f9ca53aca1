#pragma once

// Adoption patterns and demand curves.
//
// Households adopt in decreasing order of normalized savings f(ybar)/ybar.
// The short-run demand D(p) counts those whose normalized savings reach the
// purchase price p; the long-run demand adds owners-to-rent until the
// clearing rent falls to p.

#include "p2p/market.hpp"
#include "p2p/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace p2p {

struct AdoptionOrder {
    std::vector<std::size_t> ranking;         // curve indices, best first
    std::vector<double> normalized_savings;   // along ranking, nonincreasing
    std::vector<double> cumulative_quantity;  // size N+1, [n] = sum of first n ybar

    std::size_t size() const { return ranking.size(); }
};

/// Stable ranking by normalized savings, ties broken by household id.
inline AdoptionOrder build_order(std::span<const SavingsCurve> curves) {
    AdoptionOrder order;
    order.ranking.resize(curves.size());
    std::iota(order.ranking.begin(), order.ranking.end(), std::size_t{0});
    std::stable_sort(order.ranking.begin(), order.ranking.end(), [&](std::size_t a, std::size_t b) {
        const double na = curves[a].normalized_savings();
        const double nb = curves[b].normalized_savings();
        if (na != nb) return na > nb;
        return curves[a].household_id() < curves[b].household_id();
    });
    order.cumulative_quantity.assign(curves.size() + 1, 0.0);
    for (std::size_t k = 0; k < curves.size(); ++k) {
        const auto& c = curves[order.ranking[k]];
        order.normalized_savings.push_back(c.normalized_savings());
        order.cumulative_quantity[k + 1] = order.cumulative_quantity[k] + c.net_zero_size();
    }
    return order;
}

/// Owner count for adoption rate t: nearest whole household.
inline std::size_t owners_for_rate(double t, std::size_t households) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("adoption rate must lie in [0, 1]");
    return std::min(households, static_cast<std::size_t>(std::llround(t * static_cast<double>(households))));
}

inline std::vector<bool> top_owners(const AdoptionOrder& order, std::size_t n) {
    std::vector<bool> mask(order.size(), false);
    for (std::size_t k = 0; k < n && k < order.size(); ++k) mask[order.ranking[k]] = true;
    return mask;
}

/// Short-run adoption count at purchase price p: households whose
/// normalized savings are at least p.
inline std::size_t short_run_count(const AdoptionOrder& order, double p) {
    return static_cast<std::size_t>(std::partition_point(order.normalized_savings.begin(),
                                                         order.normalized_savings.end(),
                                                         [p](double s) { return s >= p; }) -
                                    order.normalized_savings.begin());
}

/// Logit-spaced grid on [lo, hi]: dense near both ends.
inline std::vector<double> default_t_grid(std::size_t points = 200, double lo = 0.001, double hi = 0.999) {
    if (points < 2) throw std::invalid_argument("default_t_grid: need >= 2 points");
    auto logit = [](double t) { return std::log(t / (1.0 - t)); };
    const double a = logit(lo), b = logit(hi);
    std::vector<double> grid(points);
    for (std::size_t k = 0; k < points; ++k) {
        const double z = a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1);
        grid[k] = 1.0 / (1.0 + std::exp(-z));
    }
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

/// Evenly spaced cell midpoints across the range of normalized savings.
inline std::vector<double> default_price_grid(const AdoptionOrder& order, std::size_t points = 40) {
    if (order.size() == 0) return {};
    const double hi = order.normalized_savings.front();
    const double lo = order.normalized_savings.back();
    const std::size_t n = std::max<std::size_t>(points, 1);
    std::vector<double> grid(n);
    for (std::size_t k = 0; k < n; ++k)
        grid[k] = lo + (hi - lo) * (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    return grid;
}

struct SweepRow {
    double t = 0.0;
    std::size_t n_owners = 0;
    double adopted_quantity = 0.0;
    // Highest purchase price at which this many households adopt without a
    // market; NaN with no owners.
    double short_run_price = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> clearing_price;
    double volume = 0.0;
    double fraction_rented_out = 0.0;
    double owner_participation = 0.0;
    double nonowner_participation = 0.0;
    double total_participation = 0.0;
    double owner_surplus = 0.0;
    double renter_surplus = 0.0;
    double total_surplus = 0.0;
};

struct DemandCurves {
    std::vector<SweepRow> rows;
};

inline SweepRow sweep_point(const Market& market, const AdoptionOrder& order, double t) {
    SweepRow row;
    row.t = t;
    row.n_owners = owners_for_rate(t, order.size());
    row.adopted_quantity = order.cumulative_quantity[row.n_owners];
    if (row.n_owners > 0) row.short_run_price = order.normalized_savings[row.n_owners - 1];
    const auto eq = market.clear(top_owners(order, row.n_owners));
    row.clearing_price = eq.clearing_price;
    row.volume = eq.volume;
    row.fraction_rented_out = row.adopted_quantity > 0.0 ? eq.volume / row.adopted_quantity : 0.0;
    row.owner_participation = eq.owner_participation;
    row.nonowner_participation = eq.nonowner_participation;
    row.total_participation = eq.total_participation;
    row.owner_surplus = eq.owner_surplus_total;
    row.renter_surplus = eq.renter_surplus_total;
    row.total_surplus = eq.total_surplus;
    return row;
}

inline DemandCurves sweep_adoption(const Market& market, const AdoptionOrder& order, std::span<const double> t_grid,
                                   unsigned threads = 1) {
    DemandCurves out;
    out.rows.resize(t_grid.size());
    parallel_for(t_grid.size(), threads, [&](std::size_t k) { out.rows[k] = sweep_point(market, order, t_grid[k]); });
    return out;
}

/// Clearing rent with the top n households as owners. No owners means no
/// supply (+inf); no renters means no demand (0).
inline double rental_price_at(const Market& market, const AdoptionOrder& order, std::size_t n) {
    if (n == 0) return std::numeric_limits<double>::infinity();
    if (n >= order.size()) return 0.0;
    return *market.clear(top_owners(order, n)).clearing_price;
}

struct LongRunResult {
    double price = 0.0;
    std::size_t n_short = 0;  // adopters without the market
    std::size_t n_long = 0;   // adopters once owning-to-rent stops paying
    double rate_short = 0.0;
    double rate_long = 0.0;
    double quantity_short = 0.0;  // D(p)
    double quantity_long = 0.0;   // long-run D(p) with the market
    double delta_quantity = 0.0;
    double rent_at_long = 0.0;         // clearing rent with n_long owners
    double rent_before_long = 0.0;     // with n_long - 1 owners (+inf if none)
    bool saturated = false;            // everyone owns
    bool contraction = false;          // rent already below p at n_short
};

/// Long-run adoption at purchase price p, resolved to single households.
/// Extra adopters join in ranking order until the clearing rent is at most
/// p. Contraction below the short-run level is flagged, not simulated.
inline LongRunResult long_run_adoption(const Market& market, const AdoptionOrder& order, double p) {
    if (!(p > 0.0)) throw DomainError("long_run_adoption: price must be > 0");
    const std::size_t n = order.size();
    LongRunResult out;
    out.price = p;
    out.n_short = short_run_count(order, p);

    const double rent_short = rental_price_at(market, order, out.n_short);
    std::size_t n_long = out.n_short;
    if (rent_short > p) {
        // rental_price_at is nonincreasing in n and reaches 0 at n.
        std::size_t lo = out.n_short, hi = n;  // rent(lo) > p >= rent(hi)
        while (hi - lo > 1) {
            const std::size_t mid = lo + (hi - lo) / 2;
            if (rental_price_at(market, order, mid) > p) lo = mid;
            else hi = mid;
        }
        n_long = hi;
    } else if (rent_short < p && out.n_short > 0 && out.n_short < n) {
        out.contraction = true;
    }

    out.n_long = n_long;
    out.rate_short = static_cast<double>(out.n_short) / static_cast<double>(n);
    out.rate_long = static_cast<double>(n_long) / static_cast<double>(n);
    out.quantity_short = order.cumulative_quantity[out.n_short];
    out.quantity_long = order.cumulative_quantity[n_long];
    out.delta_quantity = out.quantity_long - out.quantity_short;
    out.rent_at_long = rental_price_at(market, order, n_long);
    out.rent_before_long =
        n_long == 0 ? std::numeric_limits<double>::infinity() : rental_price_at(market, order, n_long - 1);
    out.saturated = n_long == n && out.n_short < n;
    return out;
}

/// Inverse short-run demand D^{-1}(q) from a sweep table, by linear
/// interpolation over (adopted quantity, short-run price) rows. Clamped
/// outside the tabulated range.
class InverseDemand {
public:
    explicit InverseDemand(const DemandCurves& table) {
        for (const auto& row : table.rows) {
            if (row.n_owners == 0) continue;
            if (!q_.empty() && row.adopted_quantity == q_.back()) continue;
            if (!q_.empty() && row.adopted_quantity < q_.back())
                throw std::invalid_argument("InverseDemand: sweep rows must have increasing quantity");
            q_.push_back(row.adopted_quantity);
            price_.push_back(row.short_run_price);
        }
        if (q_.empty()) throw std::invalid_argument("InverseDemand: sweep has no rows with owners");
    }

    InverseDemand(std::vector<double> quantities, std::vector<double> prices)
        : q_(std::move(quantities)), price_(std::move(prices)) {
        if (q_.empty() || q_.size() != price_.size()) throw std::invalid_argument("InverseDemand: bad nodes");
    }

    double operator()(double q) const {
        if (q <= q_.front()) return price_.front();
        if (q >= q_.back()) return price_.back();
        const auto it = std::upper_bound(q_.begin(), q_.end(), q);
        const std::size_t k = static_cast<std::size_t>(it - q_.begin());
        const double w = (q - q_[k - 1]) / (q_[k] - q_[k - 1]);
        return price_[k - 1] + w * (price_[k] - price_[k - 1]);
    }

    std::span<const double> quantities() const { return q_; }

private:
    std::vector<double> q_;
    std::vector<double> price_;
};

struct SubsidyResult {
    double price = 0.0;
    double quantity_short = 0.0;
    double quantity_long = 0.0;
    double delta_quantity = 0.0;
    double equivalent_subsidy = 0.0;
    bool no_increase = false;
};

/// Direct subsidy matching the market's adoption increase: the integral of
/// p - D^{-1}(q) from D(p) to the long-run quantity, by the trapezoid rule on
/// the interpolation nodes, each interval split into `subdivisions` pieces.
inline SubsidyResult equivalent_subsidy(const InverseDemand& inverse, double p, double q_short, double q_long,
                                        std::size_t subdivisions = 1) {
    SubsidyResult out;
    out.price = p;
    out.quantity_short = q_short;
    out.quantity_long = q_long;
    out.delta_quantity = q_long - q_short;
    if (!(out.delta_quantity > 0.0)) {
        out.no_increase = true;
        return out;
    }
    std::vector<double> nodes{q_short};
    for (double q : inverse.quantities())
        if (q > q_short && q < q_long) nodes.push_back(q);
    nodes.push_back(q_long);

    subdivisions = std::max<std::size_t>(subdivisions, 1);
    double integral = 0.0;
    for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
        const double a = nodes[k], b = nodes[k + 1];
        const double h = (b - a) / static_cast<double>(subdivisions);
        for (std::size_t j = 0; j < subdivisions; ++j) {
            const double q0 = a + h * static_cast<double>(j);
            const double q1 = j + 1 == subdivisions ? b : q0 + h;
            integral += 0.5 * (q1 - q0) * ((p - inverse(q0)) + (p - inverse(q1)));
        }
    }
    out.equivalent_subsidy = integral;
    return out;
}

inline SubsidyResult equivalent_subsidy(const DemandCurves& table, const LongRunResult& long_run,
                                        std::size_t subdivisions = 1) {
    return equivalent_subsidy(InverseDemand(table), long_run.price, long_run.quantity_short, long_run.quantity_long,
                              subdivisions);
}

}  // namespace p2p
