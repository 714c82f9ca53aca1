#pragma once

// Savings functions f(y) = b(0) - b(y): sampled from the dispatch LP and
// fitted as concave, nondecreasing piecewise-linear curves.

#include "p2p/dispatch.hpp"
#include "p2p/domain.hpp"
#include "p2p/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace p2p {

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SlopeRange {
    double left = 0.0;
    double right = 0.0;
};

/// Concave, nondecreasing piecewise-linear savings curve on [0, ybar].
///
/// Knots run from 0 to the net-zero size; slopes are per segment and
/// nonincreasing. Values are stored alongside so that evaluation at a knot
/// is exact.
class SavingsCurve {
public:
    SavingsCurve() = default;

    /// Builds a curve from knots and per-segment slopes; values are the
    /// running integral from f(0) = 0.
    static SavingsCurve from_slopes(std::string household_id, std::vector<double> knots, std::vector<double> slopes) {
        if (knots.size() < 2 || slopes.size() + 1 != knots.size())
            throw std::invalid_argument("SavingsCurve: need n+1 knots for n slopes, n >= 1");
        std::vector<double> values(knots.size(), 0.0);
        for (std::size_t k = 0; k < slopes.size(); ++k) values[k + 1] = values[k] + slopes[k] * (knots[k + 1] - knots[k]);
        return from_parts(std::move(household_id), std::move(knots), std::move(values), std::move(slopes));
    }

    /// Builds a curve from stored parts (e.g. read back from CSV) and checks
    /// the shape invariants.
    static SavingsCurve from_parts(std::string household_id, std::vector<double> knots, std::vector<double> values,
                                   std::vector<double> slopes) {
        if (knots.size() < 2 || values.size() != knots.size() || slopes.size() + 1 != knots.size())
            throw std::invalid_argument("SavingsCurve: inconsistent part sizes");
        if (knots.front() != 0.0) throw std::invalid_argument("SavingsCurve: first knot must be 0");
        if (values.front() != 0.0) throw std::invalid_argument("SavingsCurve: f(0) must be 0");
        for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
            if (!(knots[k + 1] > knots[k])) throw std::invalid_argument("SavingsCurve: knots must increase");
            if (slopes[k] < 0.0) throw std::invalid_argument("SavingsCurve: slopes must be >= 0");
            if (k + 1 < slopes.size() && slopes[k + 1] > slopes[k])
                throw std::invalid_argument("SavingsCurve: slopes must be nonincreasing");
        }
        SavingsCurve c;
        c.id_ = std::move(household_id);
        c.knots_ = std::move(knots);
        c.values_ = std::move(values);
        c.slopes_ = std::move(slopes);
        return c;
    }

    const std::string& household_id() const { return id_; }
    double net_zero_size() const { return knots_.back(); }
    std::span<const double> knots() const { return knots_; }
    std::span<const double> values() const { return values_; }
    std::span<const double> slopes() const { return slopes_; }
    std::size_t segments() const { return slopes_.size(); }

    double initial_slope() const { return slopes_.front(); }
    double terminal_slope() const { return slopes_.back(); }
    double full_savings() const { return values_.back(); }
    /// f(ybar) / ybar, the per-kW savings from owning and self-using.
    double normalized_savings() const { return values_.back() / knots_.back(); }

    double eval(double y) const {
        const std::size_t k = segment_of(y);
        if (y == knots_[k]) return values_[k];
        if (k + 1 == knots_.size()) return values_.back();
        return values_[k] + slopes_[k] * (y - knots_[k]);
    }

    /// Left and right derivatives at y. At the domain ends both entries are
    /// the one-sided derivative that exists.
    SlopeRange deriv_range(double y) const {
        const std::size_t k = segment_of(y);
        const std::size_t last = slopes_.size() - 1;
        if (std::abs(y - knots_[k]) <= kKnotTol * net_zero_size()) {
            if (k == 0) return {slopes_.front(), slopes_.front()};
            if (k == knots_.size() - 1) return {slopes_.back(), slopes_.back()};
            return {slopes_[k - 1], slopes_[k]};
        }
        const std::size_t s = std::min(k, last);
        return {slopes_[s], slopes_[s]};
    }

    /// Largest maximizer of f(y) - r y over [0, ybar].
    double inverse_marginal(double r) const { return knots_[count_slopes_at_least(r)]; }

    /// Smallest maximizer of f(y) - r y over [0, ybar].
    double inverse_marginal_lower(double r) const { return knots_[count_slopes_above(r)]; }

    bool operator==(const SavingsCurve&) const = default;

private:
    static constexpr double kKnotTol = 1e-12;

    std::size_t count_slopes_at_least(double r) const {
        if (r < 0.0) throw DomainError("inverse_marginal: price must be >= 0");
        return static_cast<std::size_t>(
            std::partition_point(slopes_.begin(), slopes_.end(), [r](double s) { return s >= r; }) - slopes_.begin());
    }
    std::size_t count_slopes_above(double r) const {
        if (r < 0.0) throw DomainError("inverse_marginal: price must be >= 0");
        return static_cast<std::size_t>(
            std::partition_point(slopes_.begin(), slopes_.end(), [r](double s) { return s > r; }) - slopes_.begin());
    }

    // Index k of the knot at or left of y (the last knot for y = ybar).
    std::size_t segment_of(double y) const {
        const double ybar = net_zero_size();
        if (!(y >= -kKnotTol * ybar && y <= ybar * (1.0 + kKnotTol)))
            throw DomainError("SavingsCurve: y outside [0, ybar] for household " + id_);
        auto it = std::upper_bound(knots_.begin(), knots_.end(), y);
        if (it == knots_.begin()) return 0;
        return static_cast<std::size_t>(it - knots_.begin()) - 1;
    }

    std::string id_;
    std::vector<double> knots_;
    std::vector<double> values_;
    std::vector<double> slopes_;
};

struct FitOptions {
    double epsilon = 1e-6;              // minimum slope decrement per segment
    double max_repair_fraction = 0.01;  // of f(ybar)
};

struct FitDiagnostics {
    double r_squared = 1.0;
    double max_repair = 0.0;  // largest |projected - sampled| before regularization
    bool repaired = false;
    double epsilon_used = 0.0;
};

struct FittedCurve {
    SavingsCurve curve;
    FitDiagnostics diagnostics;
};

namespace detail {

// Weighted pool-adjacent-violators for a nonincreasing sequence.
inline std::vector<double> isotonic_nonincreasing(std::span<const double> v, std::span<const double> w) {
    struct Block {
        double weight;
        double mean;
        std::size_t count;
    };
    std::vector<Block> blocks;
    blocks.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        blocks.push_back({w[i], v[i], 1});
        while (blocks.size() >= 2 && blocks[blocks.size() - 1].mean > blocks[blocks.size() - 2].mean) {
            Block top = blocks.back();
            blocks.pop_back();
            Block& below = blocks.back();
            const double weight = below.weight + top.weight;
            below.mean = (below.mean * below.weight + top.mean * top.weight) / weight;
            below.weight = weight;
            below.count += top.count;
        }
    }
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean);
    return out;
}

}  // namespace detail

/// Projects samples (knots[0] = 0, values[0] = 0) onto concave nondecreasing
/// piecewise-linear curves and separates the slopes by at least epsilon
/// while keeping f(ybar).
inline FittedCurve fit_savings_curve(std::string household_id, std::span<const double> knots,
                                     std::span<const double> values, const FitOptions& options = {}) {
    const std::size_t n = knots.size();
    if (n < 2 || values.size() != n) throw std::invalid_argument("fit_savings_curve: need >= 2 samples");
    if (knots[0] != 0.0 || values[0] != 0.0) throw std::invalid_argument("fit_savings_curve: first sample must be (0, 0)");

    std::vector<double> widths(n - 1), slopes(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        widths[k] = knots[k + 1] - knots[k];
        if (!(widths[k] > 0.0)) throw std::invalid_argument("fit_savings_curve: knots must increase");
        slopes[k] = (values[k + 1] - values[k]) / widths[k];
    }

    std::vector<double> projected = detail::isotonic_nonincreasing(slopes, widths);
    for (double& s : projected) s = std::max(s, 0.0);

    FitDiagnostics diag;
    const double scale = std::max(std::abs(values.back()), 1e-12);
    {
        double f = 0.0;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            f += projected[k] * widths[k];
            diag.max_repair = std::max(diag.max_repair, std::abs(f - values[k + 1]));
        }
    }
    diag.repaired = diag.max_repair > 1e-9 * scale;
    if (diag.max_repair > options.max_repair_fraction * scale)
        throw FitError("fit_savings_curve: samples for household " + household_id +
                       " violate concavity beyond repair (" + std::to_string(diag.max_repair) + ")");

    // Tilt slopes by eps * (c - k) with c the width-weighted mean index, so
    // sum(tilt * width) = 0. Shrink eps if the last slope would go negative.
    double eps = options.epsilon;
    const std::size_t segs = n - 1;
    if (segs >= 2 && eps > 0.0) {
        double wsum = 0.0, kw = 0.0;
        for (std::size_t k = 0; k < segs; ++k) {
            wsum += widths[k];
            kw += static_cast<double>(k) * widths[k];
        }
        const double c = kw / wsum;
        const double drop = static_cast<double>(segs - 1) - c;
        if (drop > 0.0 && projected.back() < eps * drop) eps = projected.back() / drop;
        for (std::size_t k = 0; k < segs; ++k) projected[k] += eps * (c - static_cast<double>(k));
        for (std::size_t k = 0; k < segs; ++k) projected[k] = std::max(projected[k], 0.0);
        for (std::size_t k = 1; k < segs; ++k) projected[k] = std::min(projected[k], projected[k - 1]);
    } else {
        eps = 0.0;
    }
    diag.epsilon_used = eps;

    FittedCurve out{SavingsCurve::from_slopes(std::move(household_id), std::vector<double>(knots.begin(), knots.end()),
                                              std::move(projected)),
                    diag};

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double r = out.curve.values()[k] - values[k];
        ss_res += r * r;
        ss_tot += (values[k] - mean) * (values[k] - mean);
    }
    out.diagnostics.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    return out;
}

enum class SampleSpacing { kLinear, kGeometric };

struct SampleOptions {
    std::size_t n_samples = 30;
    double lowest_fraction = 0.01;  // first sample at this fraction of ybar
    SampleSpacing spacing = SampleSpacing::kLinear;
    DispatchOptions dispatch;
    FitOptions fit;
};

/// Sample capacities: 0 followed by n_samples points on [lowest*ybar, ybar].
inline std::vector<double> sample_grid(double ybar, const SampleOptions& opt) {
    if (opt.n_samples < 2) throw std::invalid_argument("sample_grid: n_samples must be >= 2");
    if (!(ybar > 0.0)) throw DomainError("sample_grid: net-zero size must be > 0");
    std::vector<double> ys{0.0};
    const double lo = opt.lowest_fraction * ybar;
    const double steps = static_cast<double>(opt.n_samples - 1);
    for (std::size_t k = 0; k < opt.n_samples; ++k) {
        const double t = static_cast<double>(k) / steps;
        double y = opt.spacing == SampleSpacing::kLinear ? lo + t * (ybar - lo) : lo * std::pow(ybar / lo, t);
        if (k + 1 == opt.n_samples) y = ybar;
        ys.push_back(y);
    }
    return ys;
}

/// Raw LP sweep of one household: bills, savings and billed purchases at
/// each sample capacity.
struct HouseholdSamples {
    std::string household_id;
    std::vector<double> y;
    std::vector<double> savings;
    std::vector<double> purchases;
    double baseline = 0.0;
};

struct SampledCurve {
    HouseholdSamples samples;
    FittedCurve fit;
};

inline SampledCurve sample_and_fit(const HouseholdRecord& household, const Scenario& scenario,
                                   const SampleOptions& options = {}) {
    SampledCurve out;
    auto& s = out.samples;
    s.household_id = household.id;
    s.y = sample_grid(household.net_zero_size, options);
    s.baseline = baseline_bill(household, scenario);
    s.savings.resize(s.y.size());
    s.purchases.resize(s.y.size());
    s.savings[0] = 0.0;
    s.purchases[0] = s.baseline;
    for (std::size_t k = 1; k < s.y.size(); ++k) {
        const auto b = annual_bill(household, scenario, s.y[k], options.dispatch);
        s.savings[k] = s.baseline - b.bill;
        s.purchases[k] = b.purchases;
    }
    out.fit = fit_savings_curve(household.id, s.y, s.savings, options.fit);
    return out;
}

/// Samples and fits every household. Work is split over (household, sample)
/// pairs; results do not depend on the thread count.
inline std::vector<SampledCurve> sample_and_fit_all(const Scenario& scenario, const SampleOptions& options,
                                                    unsigned threads) {
    const std::size_t n = scenario.households.size();
    std::vector<SampledCurve> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& hh = scenario.households[i];
        auto& s = out[i].samples;
        s.household_id = hh.id;
        s.y = sample_grid(hh.net_zero_size, options);
        s.baseline = baseline_bill(hh, scenario);
        s.savings.assign(s.y.size(), 0.0);
        s.purchases.assign(s.y.size(), 0.0);
        s.purchases[0] = s.baseline;
    }
    const std::size_t per = options.n_samples;
    parallel_for(n * per, threads, [&](std::size_t job) {
        const std::size_t i = job / per;
        const std::size_t k = job % per + 1;
        auto& s = out[i].samples;
        const auto b = annual_bill(scenario.households[i], scenario, s.y[k], options.dispatch);
        s.savings[k] = s.baseline - b.bill;
        s.purchases[k] = b.purchases;
    });
    parallel_for(n, threads, [&](std::size_t i) {
        const auto& s = out[i].samples;
        out[i].fit = fit_savings_curve(s.household_id, s.y, s.savings, options.fit);
    });
    return out;
}

}  // namespace p2p
