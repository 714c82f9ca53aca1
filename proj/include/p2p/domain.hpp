#pragma once

// Shared domain types for the rooftop PV + storage rental market model.
//
// Units used throughout:
//   energy      kWh
//   capacity    kW of PV (storage scales with it through AssetSpec::alpha)
//   prices      $/kWh for tariffs, $/yr/kW for rental and purchase prices
//   savings     $ over the modelled period, scaled by Scenario::day_weight

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace p2p {

inline constexpr std::size_t kHoursPerDay = 24;

using DayProfile = std::array<double, kHoursPerDay>;

/// D x 24 matrix of hourly values, one row per day.
class HourlyMatrix {
public:
    HourlyMatrix() = default;
    explicit HourlyMatrix(std::size_t days) : rows_(days) {
        for (auto& r : rows_) r.fill(0.0);
    }
    explicit HourlyMatrix(std::vector<DayProfile> rows) : rows_(std::move(rows)) {}

    std::size_t days() const { return rows_.size(); }
    const DayProfile& day(std::size_t d) const { return rows_[d]; }
    DayProfile& day(std::size_t d) { return rows_[d]; }
    double operator()(std::size_t d, std::size_t h) const { return rows_[d][h]; }
    double& operator()(std::size_t d, std::size_t h) { return rows_[d][h]; }

    const std::vector<DayProfile>& rows() const { return rows_; }

    double sum() const {
        double s = 0.0;
        for (const auto& r : rows_)
            for (double v : r) s += v;
        return s;
    }

    double min() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& r : rows_)
            for (double v : r) m = std::min(m, v);
        return m;
    }

    bool operator==(const HourlyMatrix&) const = default;

private:
    std::vector<DayProfile> rows_;
};

/// Error raised by validation passes. Names the offending entity and field.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string entity, std::string field, const std::string& message)
        : std::runtime_error(entity + "." + field + ": " + message),
          entity_(std::move(entity)),
          field_(std::move(field)) {}

    const std::string& entity() const noexcept { return entity_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::string entity_;
    std::string field_;
};

/// Raised when an input lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Asset parameters, all expressed per kW of PV capacity.
///
/// Efficiency and initial-charge defaults are nominal. alpha and the rate
/// limits describe a 13.5 kWh, 5 kW battery per 13.5 kW of PV.
struct AssetSpec {
    double alpha = 1.0;                   // kWh storage per kW PV
    double u_charge_max = 5.0 / 13.5;     // kW/kW
    double u_discharge_max = 5.0 / 13.5;  // kW/kW
    double eta_c = 0.95;
    double eta_d = 0.95;
    double eta_s = 0.9999;  // hourly self-discharge retention
    double eta_i = 0.96;
    double x0 = 0.0;  // initial state of charge, fraction of capacity

    bool operator==(const AssetSpec&) const = default;
};

inline void validate(const AssetSpec& a) {
    auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
    if (!(a.alpha > 0.0)) throw ValidationError("asset", "alpha", "must be > 0");
    if (!(a.u_charge_max > 0.0)) throw ValidationError("asset", "u_charge_max", "must be > 0");
    if (!(a.u_discharge_max > 0.0)) throw ValidationError("asset", "u_discharge_max", "must be > 0");
    if (!in_unit(a.eta_c)) throw ValidationError("asset", "eta_c", "must lie in (0,1]");
    if (!in_unit(a.eta_d)) throw ValidationError("asset", "eta_d", "must lie in (0,1]");
    if (!in_unit(a.eta_s)) throw ValidationError("asset", "eta_s", "must lie in (0,1]");
    if (!in_unit(a.eta_i)) throw ValidationError("asset", "eta_i", "must lie in (0,1]");
    if (!(a.x0 >= 0.0 && a.x0 <= 1.0)) throw ValidationError("asset", "x0", "must lie in [0,1]");
}

struct HouseholdRecord {
    std::string id;
    std::string region_id;
    HourlyMatrix load;         // kWh per hour
    double net_zero_size = 0;  // kW

    bool operator==(const HouseholdRecord&) const = default;
};

struct TariffSet {
    HourlyMatrix buy;   // $/kWh
    HourlyMatrix sell;  // $/kWh

    bool operator==(const TariffSet&) const = default;
};

/// Normalized PV output, kWh generated per kW of PV in each hour.
struct IrradianceSeries {
    HourlyMatrix values;

    bool operator==(const IrradianceSeries&) const = default;
};

struct Region {
    std::string id;
    double latitude = 0.0;
    double longitude = 0.0;

    bool operator==(const Region&) const = default;
};

struct Scenario {
    std::vector<HouseholdRecord> households;
    TariffSet tariff;
    IrradianceSeries irradiance;
    AssetSpec asset;
    std::vector<Region> regions;
    // Calendar days represented by each simulated day. Bills and savings are
    // multiplied by this factor so they read as annual figures.
    double day_weight = 1.0;

    std::size_t days() const { return irradiance.values.days(); }
    bool operator==(const Scenario&) const = default;
};

/// Net-zero PV size: delivered AC energy over the period equals consumption.
inline double compute_net_zero_size(const HourlyMatrix& load, const IrradianceSeries& irradiance,
                                    double eta_i) {
    const double generation = irradiance.values.sum();
    if (!(generation > 0.0)) throw DomainError("net-zero sizing needs positive total irradiance");
    if (!(eta_i > 0.0)) throw DomainError("net-zero sizing needs eta_i > 0");
    return load.sum() / (eta_i * generation);
}

inline void validate_matrix(const HourlyMatrix& m, const std::string& entity, const std::string& field,
                            std::size_t days) {
    if (m.days() != days)
        throw ValidationError(entity, field,
                              "has " + std::to_string(m.days()) + " days, expected " + std::to_string(days));
    for (std::size_t d = 0; d < m.days(); ++d)
        for (std::size_t h = 0; h < kHoursPerDay; ++h) {
            const double v = m(d, h);
            if (!std::isfinite(v) || v < 0.0)
                throw ValidationError(entity, field,
                                      "entry (day " + std::to_string(d) + ", hour " + std::to_string(h) +
                                          ") must be finite and >= 0");
        }
}

/// Full invariant check. Throws ValidationError naming the first offending
/// household or field.
inline void validate(const Scenario& s) {
    validate(s.asset);
    const std::size_t days = s.irradiance.values.days();
    if (days == 0) throw ValidationError("irradiance", "values", "no days");
    if (!(s.day_weight > 0.0)) throw ValidationError("scenario", "day_weight", "must be > 0");
    validate_matrix(s.irradiance.values, "irradiance", "values", days);
    validate_matrix(s.tariff.buy, "tariff", "buy", days);
    validate_matrix(s.tariff.sell, "tariff", "sell", days);
    for (std::size_t d = 0; d < days; ++d)
        for (std::size_t h = 0; h < kHoursPerDay; ++h)
            if (s.tariff.buy(d, h) < s.tariff.sell(d, h))
                throw ValidationError("tariff", "sell",
                                      "sell price exceeds buy price at day " + std::to_string(d) + ", hour " +
                                          std::to_string(h));

    std::unordered_set<std::string> region_ids;
    for (const auto& r : s.regions) {
        if (!region_ids.insert(r.id).second) throw ValidationError("region " + r.id, "id", "duplicate region");
        if (!(r.latitude >= -90.0 && r.latitude <= 90.0))
            throw ValidationError("region " + r.id, "latitude", "out of range");
        if (!(r.longitude >= -180.0 && r.longitude <= 180.0))
            throw ValidationError("region " + r.id, "longitude", "out of range");
    }

    std::unordered_set<std::string> ids;
    for (const auto& hh : s.households) {
        const std::string entity = "household " + hh.id;
        if (hh.id.empty()) throw ValidationError("household", "id", "empty identifier");
        if (!ids.insert(hh.id).second) throw ValidationError(entity, "id", "duplicate identifier");
        if (!region_ids.contains(hh.region_id))
            throw ValidationError(entity, "region_id", "unknown region '" + hh.region_id + "'");
        validate_matrix(hh.load, entity, "load", days);
        if (!(hh.net_zero_size > 0.0)) throw ValidationError(entity, "net_zero_size", "must be > 0");
        const double expected = compute_net_zero_size(hh.load, s.irradiance, s.asset.eta_i);
        if (std::abs(expected - hh.net_zero_size) > 1e-9 * expected)
            throw ValidationError(entity, "net_zero_size", "does not match net-zero sizing of the load");
    }
}

/// Keeps `k` evenly spaced days and scales day_weight by D/k so annual
/// totals stay comparable. Net-zero sizes are carried over unchanged.
inline Scenario subsample_days(const Scenario& s, std::size_t k) {
    const std::size_t days = s.days();
    if (k == 0) throw DomainError("subsample_days: k must be >= 1");
    if (k >= days) return s;
    std::vector<std::size_t> keep(k);
    for (std::size_t j = 0; j < k; ++j) keep[j] = (j * days) / k;

    auto pick = [&](const HourlyMatrix& m) {
        std::vector<DayProfile> rows;
        rows.reserve(k);
        for (std::size_t d : keep) rows.push_back(m.day(d));
        return HourlyMatrix(std::move(rows));
    };

    Scenario out = s;
    out.irradiance.values = pick(s.irradiance.values);
    out.tariff.buy = pick(s.tariff.buy);
    out.tariff.sell = pick(s.tariff.sell);
    for (auto& hh : out.households) hh.load = pick(hh.load);
    out.day_weight = s.day_weight * static_cast<double>(days) / static_cast<double>(k);
    return out;
}

}  // namespace p2p
