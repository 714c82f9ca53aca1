#pragma once

// Run configuration, read from JSON. Every key is optional; unknown keys are
// rejected so typos do not silently fall back to defaults.
//
// {
//   "seed": 42,
//   "days": null,                       // subsample K days, scale by D/K
//   "synth":     { "n_households", "n_days", "n_regions", "base_load": [lo, hi],
//                  "evening_multiplier": [lo, hi], "evening_window": [begin, end],
//                  "daytime_multiplier": [lo, hi], "daytime_window": [begin, end],
//                  "summer_swing", "load_noise", "load_floor",
//                  "off_peak_price", "peak_price", "peak_window": [begin, end],
//                  "sell_mean", "sell_amplitude", "sunrise", "sunset",
//                  "daylight_swing", "peak_output", "clearness": [lo, hi],
//                  "center": [lat, lon], "region_spread_deg" },
//   "asset":     { "alpha", "u_charge_max", "u_discharge_max", "eta_c", "eta_d",
//                  "eta_s", "eta_i", "x0" },
//   "fit":       { "n_samples", "lowest_fraction", "spacing": "linear"|"geometric",
//                  "epsilon", "max_repair_fraction", "require_terminal_soc" },
//   "market":    { "abs_tol", "rel_tol" },
//   "adoption":  { "t_grid_points", "t_grid": [...], "equilibrium_rate" },
//   "longrun":   { "p_grid_points", "p_grid": [...], "subsidy_subdivisions" },
//   "localness": { "metric": "haversine"|"equirectangular", "flow_rates": [...] },
//   "ingest":    { "min_mean_load_kw", "max_zero_fraction" }
// }

#include "p2p/csv_io.hpp"
#include "p2p/localness.hpp"
#include "p2p/market.hpp"
#include "p2p/savings_curve.hpp"
#include "p2p/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace p2p {

struct RunConfig {
    SynthConfig synth;
    SampleOptions sampling;
    MarketOptions market;
    IngestOptions ingest;
    std::optional<std::size_t> days;

    std::size_t t_grid_points = 200;
    std::vector<double> t_grid;  // explicit grid wins over t_grid_points
    double equilibrium_rate = 0.3;

    std::size_t p_grid_points = 40;
    std::vector<double> p_grid;
    std::size_t subsidy_subdivisions = 1;

    DistanceMetric metric = DistanceMetric::kHaversine;
    std::vector<double> flow_rates{0.1, 0.3, 0.5};
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ValidationError("config", section, "must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items())
        if (!ok.count(key)) throw ValidationError("config", section + "." + key, "unknown key");
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void read_range(const json& j, const char* key, double& lo, double& hi) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 2) throw ValidationError("config", key, "expected [low, high]");
    lo = v[0];
    hi = v[1];
}

inline void read_window(const json& j, const char* key, HourWindow& w) {
    if (!j.contains(key)) return;
    const auto v = j.at(key).get<std::vector<std::size_t>>();
    if (v.size() != 2) throw ValidationError("config", key, "expected [begin, end]");
    w = {v[0], v[1]};
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
    using detail::read;
    RunConfig c;
    detail::check_keys(j, "root",
                       {"seed", "days", "synth", "asset", "fit", "market", "adoption", "longrun", "localness", "ingest"});
    read(j, "seed", c.synth.rng_seed);
    if (j.contains("days") && !j.at("days").is_null()) c.days = j.at("days").get<std::size_t>();

    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        detail::check_keys(s, "synth",
                           {"n_households", "n_days", "n_regions", "base_load", "evening_multiplier", "evening_window",
                            "daytime_multiplier", "daytime_window", "summer_swing", "load_noise", "load_floor",
                            "off_peak_price", "peak_price", "peak_window", "sell_mean", "sell_amplitude", "sunrise",
                            "sunset", "daylight_swing", "peak_output", "clearness", "center", "region_spread_deg"});
        auto& o = c.synth;
        read(s, "n_households", o.n_households);
        read(s, "n_days", o.n_days);
        read(s, "n_regions", o.n_regions);
        detail::read_range(s, "base_load", o.base_load_min, o.base_load_max);
        detail::read_range(s, "evening_multiplier", o.evening_multiplier_min, o.evening_multiplier_max);
        detail::read_window(s, "evening_window", o.evening_window);
        detail::read_range(s, "daytime_multiplier", o.daytime_multiplier_min, o.daytime_multiplier_max);
        detail::read_window(s, "daytime_window", o.daytime_window);
        read(s, "summer_swing", o.summer_swing);
        read(s, "load_noise", o.load_noise);
        read(s, "load_floor", o.load_floor);
        read(s, "off_peak_price", o.off_peak_price);
        read(s, "peak_price", o.peak_price);
        detail::read_window(s, "peak_window", o.peak_window);
        read(s, "sell_mean", o.sell_mean);
        read(s, "sell_amplitude", o.sell_amplitude);
        read(s, "sunrise", o.sunrise);
        read(s, "sunset", o.sunset);
        read(s, "daylight_swing", o.daylight_swing);
        read(s, "peak_output", o.peak_output);
        detail::read_range(s, "clearness", o.clearness_min, o.clearness_max);
        detail::read_range(s, "center", o.center_latitude, o.center_longitude);
        read(s, "region_spread_deg", o.region_spread_deg);
    }
    if (j.contains("asset")) {
        const auto& a = j.at("asset");
        detail::check_keys(a, "asset",
                           {"alpha", "u_charge_max", "u_discharge_max", "eta_c", "eta_d", "eta_s", "eta_i", "x0"});
        auto& o = c.synth.asset;
        read(a, "alpha", o.alpha);
        read(a, "u_charge_max", o.u_charge_max);
        read(a, "u_discharge_max", o.u_discharge_max);
        read(a, "eta_c", o.eta_c);
        read(a, "eta_d", o.eta_d);
        read(a, "eta_s", o.eta_s);
        read(a, "eta_i", o.eta_i);
        read(a, "x0", o.x0);
    }
    if (j.contains("fit")) {
        const auto& f = j.at("fit");
        detail::check_keys(f, "fit",
                           {"n_samples", "lowest_fraction", "spacing", "epsilon", "max_repair_fraction",
                            "require_terminal_soc"});
        read(f, "n_samples", c.sampling.n_samples);
        read(f, "lowest_fraction", c.sampling.lowest_fraction);
        if (f.contains("spacing")) {
            const auto s = f.at("spacing").get<std::string>();
            if (s == "linear") c.sampling.spacing = SampleSpacing::kLinear;
            else if (s == "geometric") c.sampling.spacing = SampleSpacing::kGeometric;
            else throw ValidationError("config", "fit.spacing", "expected linear or geometric");
        }
        read(f, "epsilon", c.sampling.fit.epsilon);
        read(f, "max_repair_fraction", c.sampling.fit.max_repair_fraction);
        read(f, "require_terminal_soc", c.sampling.dispatch.require_terminal_soc);
    }
    if (j.contains("market")) {
        const auto& m = j.at("market");
        detail::check_keys(m, "market", {"abs_tol", "rel_tol"});
        read(m, "abs_tol", c.market.abs_tol);
        read(m, "rel_tol", c.market.rel_tol);
    }
    if (j.contains("adoption")) {
        const auto& a = j.at("adoption");
        detail::check_keys(a, "adoption", {"t_grid_points", "t_grid", "equilibrium_rate"});
        read(a, "t_grid_points", c.t_grid_points);
        read(a, "t_grid", c.t_grid);
        read(a, "equilibrium_rate", c.equilibrium_rate);
    }
    if (j.contains("longrun")) {
        const auto& l = j.at("longrun");
        detail::check_keys(l, "longrun", {"p_grid_points", "p_grid", "subsidy_subdivisions"});
        read(l, "p_grid_points", c.p_grid_points);
        read(l, "p_grid", c.p_grid);
        read(l, "subsidy_subdivisions", c.subsidy_subdivisions);
    }
    if (j.contains("localness")) {
        const auto& l = j.at("localness");
        detail::check_keys(l, "localness", {"metric", "flow_rates"});
        if (l.contains("metric")) {
            const auto m = l.at("metric").get<std::string>();
            if (m == "haversine") c.metric = DistanceMetric::kHaversine;
            else if (m == "equirectangular") c.metric = DistanceMetric::kEquirectangular;
            else throw ValidationError("config", "localness.metric", "expected haversine or equirectangular");
        }
        read(l, "flow_rates", c.flow_rates);
    }
    if (j.contains("ingest")) {
        const auto& g = j.at("ingest");
        detail::check_keys(g, "ingest", {"min_mean_load_kw", "max_zero_fraction"});
        read(g, "min_mean_load_kw", c.ingest.min_mean_load_kw);
        read(g, "max_zero_fraction", c.ingest.max_zero_fraction);
    }
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    try {
        return parse_config(nlohmann::json::parse(csv::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config", path.string(), e.what());
    }
}

/// Canonical JSON of the effective configuration. Keys are sorted and every
/// field is written, so equal configs produce equal text.
inline nlohmann::json to_json(const RunConfig& c) {
    using nlohmann::json;
    const auto& s = c.synth;
    const auto& a = s.asset;
    auto window = [](const HourWindow& w) { return json::array({w.begin, w.end}); };
    json j;
    j["seed"] = s.rng_seed;
    j["days"] = c.days ? json(*c.days) : json(nullptr);
    j["synth"] = {{"n_households", s.n_households},
                  {"n_days", s.n_days},
                  {"n_regions", s.n_regions},
                  {"base_load", {s.base_load_min, s.base_load_max}},
                  {"evening_multiplier", {s.evening_multiplier_min, s.evening_multiplier_max}},
                  {"evening_window", window(s.evening_window)},
                  {"daytime_multiplier", {s.daytime_multiplier_min, s.daytime_multiplier_max}},
                  {"daytime_window", window(s.daytime_window)},
                  {"summer_swing", s.summer_swing},
                  {"load_noise", s.load_noise},
                  {"load_floor", s.load_floor},
                  {"off_peak_price", s.off_peak_price},
                  {"peak_price", s.peak_price},
                  {"peak_window", window(s.peak_window)},
                  {"sell_mean", s.sell_mean},
                  {"sell_amplitude", s.sell_amplitude},
                  {"sunrise", s.sunrise},
                  {"sunset", s.sunset},
                  {"daylight_swing", s.daylight_swing},
                  {"peak_output", s.peak_output},
                  {"clearness", {s.clearness_min, s.clearness_max}},
                  {"center", {s.center_latitude, s.center_longitude}},
                  {"region_spread_deg", s.region_spread_deg}};
    j["asset"] = {{"alpha", a.alpha},   {"u_charge_max", a.u_charge_max}, {"u_discharge_max", a.u_discharge_max},
                  {"eta_c", a.eta_c},   {"eta_d", a.eta_d},               {"eta_s", a.eta_s},
                  {"eta_i", a.eta_i},   {"x0", a.x0}};
    j["fit"] = {{"n_samples", c.sampling.n_samples},
                {"lowest_fraction", c.sampling.lowest_fraction},
                {"spacing", c.sampling.spacing == SampleSpacing::kLinear ? "linear" : "geometric"},
                {"epsilon", c.sampling.fit.epsilon},
                {"max_repair_fraction", c.sampling.fit.max_repair_fraction},
                {"require_terminal_soc", c.sampling.dispatch.require_terminal_soc}};
    j["market"] = {{"abs_tol", c.market.abs_tol}, {"rel_tol", c.market.rel_tol}};
    j["adoption"] = {{"t_grid_points", c.t_grid_points}, {"t_grid", c.t_grid}, {"equilibrium_rate", c.equilibrium_rate}};
    j["longrun"] = {{"p_grid_points", c.p_grid_points},
                    {"p_grid", c.p_grid},
                    {"subsidy_subdivisions", c.subsidy_subdivisions}};
    j["localness"] = {{"metric", c.metric == DistanceMetric::kHaversine ? "haversine" : "equirectangular"},
                      {"flow_rates", c.flow_rates}};
    j["ingest"] = {{"min_mean_load_kw", c.ingest.min_mean_load_kw},
                   {"max_zero_fraction", c.ingest.max_zero_fraction}};
    return j;
}

}  // namespace p2p
