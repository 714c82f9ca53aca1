#pragma once

// Reproducible synthetic scenarios standing in for metered data.
//
// Loads: a base level with a daytime and an evening bump whose sizes vary by
// household, a summer swing and multiplicative noise, always positive.
// Tariff: two-level time-of-use buy price; sell-back at a wholesale-like
// price well under the off-peak rate. PV: a seasonal half-sine per day
// scaled by a daily clearness factor.

#include "p2p/domain.hpp"
#include "p2p/rng.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

namespace p2p {

struct HourWindow {
    std::size_t begin = 0;  // inclusive
    std::size_t end = 0;    // exclusive

    bool contains(std::size_t h) const { return h >= begin && h < end; }
    bool operator==(const HourWindow&) const = default;
};

struct SynthConfig {
    std::size_t n_households = 200;
    std::size_t n_days = 30;
    std::size_t n_regions = 8;
    std::uint64_t rng_seed = 42;

    // Load shape, kW.
    double base_load_min = 0.25;
    double base_load_max = 0.9;
    double evening_multiplier_min = 0.2;
    double evening_multiplier_max = 2.5;
    HourWindow evening_window{16, 21};
    double daytime_multiplier_min = 0.0;
    double daytime_multiplier_max = 1.5;
    HourWindow daytime_window{9, 16};
    double summer_swing = 0.25;
    double load_noise = 0.15;
    double load_floor = 0.02;

    // Tariff, $/kWh.
    double off_peak_price = 0.16;
    double peak_price = 0.38;
    HourWindow peak_window{13, 19};
    double sell_mean = 0.035;
    double sell_amplitude = 0.4;

    // Irradiance, kWh per kW per hour.
    double sunrise = 6.0;
    double sunset = 19.0;
    double daylight_swing = 1.0;  // hours added to each end at midsummer
    double peak_output = 0.75;
    double clearness_min = 0.55;
    double clearness_max = 1.0;

    // Region centroids.
    double center_latitude = 36.75;
    double center_longitude = -119.77;
    double region_spread_deg = 0.15;

    AssetSpec asset;

    bool operator==(const SynthConfig&) const = default;
};

inline void validate(const SynthConfig& c) {
    auto fail = [](const char* field, const char* msg) { throw ValidationError("synth", field, msg); };
    if (c.n_households < 1) fail("n_households", "must be >= 1");
    if (c.n_days < 1) fail("n_days", "must be >= 1");
    if (c.n_regions < 1) fail("n_regions", "must be >= 1");
    if (!(c.base_load_min > 0.0 && c.base_load_max >= c.base_load_min)) fail("base_load", "need 0 < min <= max");
    if (!(c.evening_multiplier_min >= 0.0 && c.evening_multiplier_max >= c.evening_multiplier_min))
        fail("evening_multiplier", "need 0 <= min <= max");
    if (!(c.daytime_multiplier_min >= 0.0 && c.daytime_multiplier_max >= c.daytime_multiplier_min))
        fail("daytime_multiplier", "need 0 <= min <= max");
    if (!(c.load_noise >= 0.0 && c.load_noise < 1.0)) fail("load_noise", "must lie in [0, 1)");
    if (!(c.load_floor > 0.0)) fail("load_floor", "must be > 0");
    if (!(c.sell_mean >= 0.0 && c.sell_amplitude >= 0.0 && c.sell_amplitude <= 1.0))
        fail("sell", "need mean >= 0 and amplitude in [0, 1]");
    if (!(c.peak_price >= c.off_peak_price)) fail("peak_price", "must be >= off-peak price");
    if (!(c.off_peak_price >= c.sell_mean * (1.0 + c.sell_amplitude)))
        fail("off_peak_price", "must be >= the largest sell price");
    for (const auto* w : {&c.evening_window, &c.daytime_window, &c.peak_window})
        if (w->begin > w->end || w->end > kHoursPerDay) fail("window", "hour windows must lie within the day");
    if (!(c.sunrise >= 0.0 && c.sunset <= 24.0 && c.sunset > c.sunrise)) fail("daylight", "need 0 <= sunrise < sunset <= 24");
    if (!(c.peak_output > 0.0)) fail("peak_output", "must be > 0");
    if (!(c.clearness_min > 0.0 && c.clearness_max >= c.clearness_min && c.clearness_max <= 1.0))
        fail("clearness", "need 0 < min <= max <= 1");
    if (!(c.region_spread_deg >= 0.0)) fail("region_spread_deg", "must be >= 0");
    validate(c.asset);
}

inline std::string format_id(const char* prefix, std::size_t n, std::size_t width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, static_cast<int>(width), n);
    return buf;
}

inline Scenario generate_scenario(const SynthConfig& config) {
    validate(config);
    Rng rng(config.rng_seed);
    const std::size_t days = config.n_days;
    constexpr double two_pi = 2.0 * std::numbers::pi;

    // Day d stands for day-of-year (d + 0.5) * 365 / days.
    std::vector<double> summer(days);
    for (std::size_t d = 0; d < days; ++d) {
        const double doy = (static_cast<double>(d) + 0.5) * 365.0 / static_cast<double>(days);
        summer[d] = std::cos(two_pi * (doy - 172.0) / 365.0);
    }

    Scenario s;
    s.asset = config.asset;
    s.day_weight = 365.0 / static_cast<double>(days);

    s.irradiance.values = HourlyMatrix(days);
    for (std::size_t d = 0; d < days; ++d) {
        const double rise = config.sunrise - config.daylight_swing * summer[d];
        const double set = config.sunset + config.daylight_swing * summer[d];
        const double clear = rng.uniform(config.clearness_min, config.clearness_max);
        const double peak = config.peak_output * (1.0 + 0.15 * summer[d]) * clear;
        for (std::size_t h = 0; h < kHoursPerDay; ++h) {
            const double mid = static_cast<double>(h) + 0.5;
            if (mid <= rise || mid >= set) continue;
            s.irradiance.values(d, h) = peak * std::sin(std::numbers::pi * (mid - rise) / (set - rise));
        }
    }

    s.tariff.buy = HourlyMatrix(days);
    s.tariff.sell = HourlyMatrix(days);
    for (std::size_t d = 0; d < days; ++d) {
        const double level = rng.uniform(0.8, 1.0);
        for (std::size_t h = 0; h < kHoursPerDay; ++h) {
            s.tariff.buy(d, h) = config.peak_window.contains(h) ? config.peak_price : config.off_peak_price;
            const double shape = std::cos(two_pi * (static_cast<double>(h) + 0.5 - 18.0) / 24.0);
            s.tariff.sell(d, h) = config.sell_mean * (1.0 + config.sell_amplitude * shape) * level;
        }
    }

    for (std::size_t k = 0; k < config.n_regions; ++k) {
        Region r;
        r.id = format_id("z", k + 1, 2);
        r.latitude = config.center_latitude + rng.uniform(-1.0, 1.0) * config.region_spread_deg;
        r.longitude = config.center_longitude + rng.uniform(-1.0, 1.0) * config.region_spread_deg;
        s.regions.push_back(std::move(r));
    }

    // Balanced region assignment: shuffled round-robin.
    std::vector<std::size_t> slots(config.n_households);
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i % config.n_regions;
    rng.shuffle(slots);

    const std::size_t width = std::max<std::size_t>(4, std::to_string(config.n_households).size());
    for (std::size_t i = 0; i < config.n_households; ++i) {
        HouseholdRecord hh;
        hh.id = format_id("h", i + 1, width);
        hh.region_id = s.regions[slots[i]].id;
        const double base = rng.uniform(config.base_load_min, config.base_load_max);
        const double evening = rng.uniform(config.evening_multiplier_min, config.evening_multiplier_max);
        const double daytime = rng.uniform(config.daytime_multiplier_min, config.daytime_multiplier_max);
        const double cooling = rng.uniform(0.5, 1.5) * config.summer_swing;
        hh.load = HourlyMatrix(days);
        for (std::size_t d = 0; d < days; ++d) {
            const double season = 1.0 + cooling * summer[d];
            for (std::size_t h = 0; h < kHoursPerDay; ++h) {
                double shape = 1.0;
                if (config.evening_window.contains(h)) shape += evening;
                if (config.daytime_window.contains(h)) shape += daytime;
                const double noise = 1.0 + config.load_noise * rng.uniform(-1.0, 1.0);
                hh.load(d, h) = base * shape * season * noise + config.load_floor;
            }
        }
        hh.net_zero_size = compute_net_zero_size(hh.load, s.irradiance, s.asset.eta_i);
        s.households.push_back(std::move(hh));
    }

    validate(s);
    return s;
}

}  // namespace p2p
