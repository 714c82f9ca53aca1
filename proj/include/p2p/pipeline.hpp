#pragma once

// Stage runner behind the command-line tool.
//
// Every stage reads its inputs from disk, builds its outputs in memory and
// publishes them atomically. manifest.json records, per stage, a key hashed
// from the effective config and the checksums of the stage's inputs; a stage
// whose key and outputs are unchanged is skipped. Wall-clock timings go to
// timings.json so the manifest itself stays reproducible.

#include "p2p/adoption.hpp"
#include "p2p/config.hpp"
#include "p2p/csv_io.hpp"
#include "p2p/localness.hpp"
#include "p2p/market.hpp"
#include "p2p/savings_curve.hpp"
#include "p2p/stakeholders.hpp"
#include "p2p/synth.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace p2p {

inline constexpr const char* kVersion = "0.1.0";

class MissingStageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

inline std::string config_hash(const RunConfig& c) { return sha256_hex(to_json(c).dump()); }

struct PipelineOptions {
    RunConfig config;
    std::filesystem::path out = "out";
    std::optional<std::filesystem::path> scenario_dir;  // defaults to out
    unsigned threads = 1;
    bool force = false;
};

using StageOutputs = std::map<std::string, std::string>;  // file name -> contents

/// Upstream artifacts parsed back from CSV.
struct FittedPopulation {
    std::vector<SavingsCurve> curves;
    std::vector<std::string> regions;  // per curve
};

class Pipeline {
public:
    explicit Pipeline(PipelineOptions options, std::ostream* log = nullptr)
        : opt_(std::move(options)), log_(log), hash_(config_hash(opt_.config)) {
        std::filesystem::create_directories(opt_.out);
        const auto manifest_path = opt_.out / "manifest.json";
        if (std::filesystem::exists(manifest_path)) {
            try {
                manifest_ = nlohmann::json::parse(csv::read_file(manifest_path));
            } catch (const nlohmann::json::exception&) {
                manifest_ = nlohmann::json::object();
            }
        }
    }

    const std::filesystem::path& out() const { return opt_.out; }
    std::filesystem::path scenario_dir() const { return opt_.scenario_dir.value_or(opt_.out); }
    const nlohmann::json& manifest() const { return manifest_; }

    void gen() {
        run_stage("gen", {}, [&] {
            const Scenario s = generate_scenario(opt_.config.synth);
            const auto tmp = opt_.out / ".gen.tmp";
            write_scenario(s, tmp);
            StageOutputs out;
            for (const char* f : {"loads.csv", "irradiance.csv", "tariff_buy.csv", "tariff_sell.csv", "regions.csv",
                                  "exclusions.csv"})
                out[f] = csv::read_file(tmp / f);
            std::filesystem::remove_all(tmp);
            say("gen: " + std::to_string(s.households.size()) + " households, " + std::to_string(s.days()) + " days");
            return out;
        });
    }

    void validate_input() {
        run_stage("validate", scenario_inputs(), [&] {
            const auto result = ingest();
            csv::Writer w({"household_id", "reason"});
            for (const auto& e : result.exclusions) w.row({e.household_id, e.reason});
            say("validate: " + std::to_string(result.scenario.households.size()) + " retained, " +
                std::to_string(result.exclusions.size()) + " excluded");
            return StageOutputs{{"exclusions.csv", w.str()}};
        });
    }

    void fit() {
        run_stage("fit", scenario_inputs(), [&] {
            auto ingested = ingest();
            Scenario scenario = std::move(ingested.scenario);
            if (opt_.config.days) scenario = subsample_days(scenario, *opt_.config.days);
            const auto fitted = sample_and_fit_all(scenario, opt_.config.sampling, opt_.threads);
            return fit_outputs(scenario, fitted);
        });
    }

    void sweep() {
        run_stage("sweep", {require("savings_curves.csv", "fit")}, [&] {
            const auto pop = load_population();
            const Market market(pop.curves, opt_.config.market);
            const auto order = build_order(pop.curves);
            const auto grid = t_grid();
            const auto table = sweep_adoption(market, order, grid, opt_.threads);
            say("sweep: " + std::to_string(grid.size()) + " adoption levels");
            return StageOutputs{{"sweep.csv", sweep_csv(table)},
                                {"equilibrium.csv", equilibrium_csv(market, order, pop.curves)},
                                {"equilibrium_summary.csv", equilibrium_summary_csv(market, order)}};
        });
    }

    void longrun() {
        run_stage("longrun", {require("savings_curves.csv", "fit"), require("sweep.csv", "sweep")}, [&] {
            const auto pop = load_population();
            const Market market(pop.curves, opt_.config.market);
            const auto order = build_order(pop.curves);
            const auto grid = p_grid(order);
            std::vector<LongRunResult> rows(grid.size());
            parallel_for(grid.size(), opt_.threads,
                         [&](std::size_t k) { rows[k] = long_run_adoption(market, order, grid[k]); });
            say("longrun: " + std::to_string(grid.size()) + " purchase prices");
            return StageOutputs{{"longrun.csv", longrun_csv(rows)}};
        });
    }

    void subsidy() {
        run_stage("subsidy", {require("sweep.csv", "sweep"), require("longrun.csv", "longrun")}, [&] {
            const auto table = read_sweep(opt_.out / "sweep.csv");
            const InverseDemand inverse(table);
            const auto t = csv::read(opt_.out / "longrun.csv");
            const std::size_t pc = t.column("p"), qs = t.column("quantity_short"), ql = t.column("quantity_long");
            csv::Writer w({"p", "quantity_short", "quantity_long", "delta_quantity", "equivalent_subsidy"});
            for (std::size_t r = 0; r < t.rows.size(); ++r) {
                const auto s = equivalent_subsidy(inverse, t.number(r, pc), t.number(r, qs), t.number(r, ql),
                                                  opt_.config.subsidy_subdivisions);
                w.row({fmt(s.price), fmt(s.quantity_short), fmt(s.quantity_long), fmt(s.delta_quantity),
                       fmt(s.equivalent_subsidy)});
            }
            say("subsidy: " + std::to_string(t.rows.size()) + " purchase prices");
            return StageOutputs{{"subsidy.csv", w.str()}};
        });
    }

    void localness() {
        auto inputs = std::vector<std::filesystem::path>{require("savings_curves.csv", "fit"),
                                                         require("fit_report.csv", "fit"), require("sweep.csv", "sweep")};
        inputs.push_back(scenario_file("regions.csv"));
        run_stage("localness", inputs, [&] {
            const auto pop = load_population();
            const auto regions = read_regions(scenario_file("regions.csv"));
            const Market market(pop.curves, opt_.config.market);
            const auto order = build_order(pop.curves);
            const auto dist = distance_matrix(regions, opt_.config.metric);
            const auto grid = t_grid();
            auto flows_at = [&](double t) {
                const auto eq = market.clear(top_owners(order, owners_for_rate(t, order.size())));
                const auto excess = regional_excess(eq, pop.curves, pop.regions, regions);
                return std::pair{eq.volume, min_cost_flow(excess, dist, eq.volume)};
            };

            std::vector<std::pair<double, RegionalFlow>> results(grid.size());
            parallel_for(grid.size(), opt_.threads, [&](std::size_t k) { results[k] = flows_at(grid[k]); });
            csv::Writer w({"t", "n_owners", "volume", "objective", "fraction_local"});
            for (std::size_t k = 0; k < grid.size(); ++k)
                w.row({fmt(grid[k]), std::to_string(owners_for_rate(grid[k], order.size())), fmt(results[k].first),
                       fmt(results[k].second.objective), fmt(results[k].second.fraction_local)});
            StageOutputs out{{"localness.csv", w.str()}};
            for (double t : opt_.config.flow_rates) {
                const auto [volume, flow] = flows_at(t);
                csv::Writer f({"from_region", "to_region", "kW"});
                for (std::size_t a = 0; a < regions.size(); ++a)
                    for (std::size_t b = 0; b < regions.size(); ++b)
                        if (flow.flow[a][b] > 0.0) f.row({regions[a].id, regions[b].id, fmt(flow.flow[a][b])});
                out["flows_t" + fmt(t) + ".csv"] = f.str();
            }
            say("localness: " + std::to_string(grid.size()) + " adoption levels, " +
                std::to_string(opt_.config.flow_rates.size()) + " flow maps");
            return out;
        });
    }

    void stakeholders() {
        run_stage("stakeholders",
                  {require("savings_curves.csv", "fit"), require("billed_sales.csv", "fit"), require("sweep.csv", "sweep")},
                  [&] {
                      const auto pop = load_population();
                      const auto billed = read_billed(opt_.out / "billed_sales.csv");
                      const Market market(pop.curves, opt_.config.market);
                      const auto order = build_order(pop.curves);
                      const auto grid = p_grid(order);
                      const auto rows = regime_boundary(market, order, billed, grid, opt_.threads);
                      csv::Writer w({"p", "n_short", "n_long", "delta_quantity", "delta_R_V", "billed_without",
                                     "billed_with", "delta_R_U", "threshold_A_U", "emerges_at_A_U_1"});
                      for (const auto& r : rows)
                          w.row({fmt(r.regime.price), std::to_string(r.long_run.n_short),
                                 std::to_string(r.long_run.n_long), fmt(r.long_run.delta_quantity),
                                 fmt(r.regime.delta_R_V), fmt(r.utility.billed_without), fmt(r.utility.billed_with),
                                 fmt(r.regime.delta_R_U), fmt(r.regime.threshold_A_U),
                                 r.regime.emerges(1.0) ? "1" : "0"});
                      say("stakeholders: " + std::to_string(rows.size()) + " purchase prices");
                      return StageOutputs{{"stakeholders.csv", w.str()}};
                  });
    }

    /// Whole pipeline. Generates data unless an input directory was given.
    void all() {
        if (opt_.scenario_dir) validate_input();
        else gen();
        fit();
        sweep();
        longrun();
        subsidy();
        localness();
        stakeholders();
    }

    // Readers for stage outputs, shared with tests.

    static FittedPopulation read_population(const std::filesystem::path& curves_csv,
                                            const std::filesystem::path& report_csv) {
        FittedPopulation pop;
        const auto t = csv::read(curves_csv);
        const std::size_t id = t.column("household_id"), y = t.column("y"), f = t.column("f"), sl = t.column("slope");
        std::vector<double> knots, values, slopes;
        std::string current;
        auto flush = [&] {
            if (current.empty()) return;
            pop.curves.push_back(SavingsCurve::from_parts(current, knots, values, slopes));
            knots.clear();
            values.clear();
            slopes.clear();
        };
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            if (t.rows[r][id] != current) {
                flush();
                current = t.rows[r][id];
            }
            knots.push_back(t.number(r, y));
            values.push_back(t.number(r, f));
            if (!t.rows[r][sl].empty()) slopes.push_back(t.number(r, sl));
        }
        flush();

        const auto rep = csv::read(report_csv);
        const std::size_t rid = rep.column("household_id"), reg = rep.column("region_id");
        std::map<std::string, std::string> region_of;
        for (std::size_t r = 0; r < rep.rows.size(); ++r) region_of[rep.rows[r][rid]] = rep.rows[r][reg];
        for (const auto& c : pop.curves) {
            const auto it = region_of.find(c.household_id());
            if (it == region_of.end())
                throw ParseError(report_csv.string(), 1, "no entry for household " + c.household_id());
            pop.regions.push_back(it->second);
        }
        return pop;
    }

    static std::vector<BilledSalesCurve> read_billed(const std::filesystem::path& path) {
        std::vector<BilledSalesCurve> out;
        const auto t = csv::read(path);
        const std::size_t id = t.column("household_id"), y = t.column("y"), p = t.column("purchases");
        std::vector<double> knots, purchases;
        std::string current;
        auto flush = [&] {
            if (!current.empty()) out.emplace_back(current, knots, purchases);
            knots.clear();
            purchases.clear();
        };
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            if (t.rows[r][id] != current) {
                flush();
                current = t.rows[r][id];
            }
            knots.push_back(t.number(r, y));
            purchases.push_back(t.number(r, p));
        }
        flush();
        return out;
    }

    static DemandCurves read_sweep(const std::filesystem::path& path) {
        const auto t = csv::read(path);
        const std::size_t tc = t.column("t"), n = t.column("n_owners"), q = t.column("adopted_quantity"),
                          p = t.column("short_run_price");
        DemandCurves table;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            SweepRow row;
            row.t = t.number(r, tc);
            row.n_owners = t.integer(r, n);
            row.adopted_quantity = t.number(r, q);
            row.short_run_price = t.number(r, p);
            table.rows.push_back(row);
        }
        return table;
    }

    static std::vector<Region> read_regions(const std::filesystem::path& path) {
        const auto t = csv::read(path);
        const std::size_t id = t.column("region_id"), lat = t.column("lat"), lon = t.column("lon");
        std::vector<Region> out;
        for (std::size_t r = 0; r < t.rows.size(); ++r) out.push_back({t.rows[r][id], t.number(r, lat), t.number(r, lon)});
        return out;
    }

    std::vector<double> t_grid() const {
        if (!opt_.config.t_grid.empty()) return opt_.config.t_grid;
        return default_t_grid(opt_.config.t_grid_points);
    }

    /// Explicit grid, or evenly spaced cell midpoints across the range of
    /// normalized savings.
    std::vector<double> p_grid(const AdoptionOrder& order) const {
        if (!opt_.config.p_grid.empty()) return opt_.config.p_grid;
        return default_price_grid(order, opt_.config.p_grid_points);
    }

private:
    static std::string fmt(double v) { return csv::format_double(v); }

    void say(const std::string& msg) const {
        if (log_) *log_ << msg << '\n';
    }

    std::filesystem::path scenario_file(const char* name) const {
        const auto p = scenario_dir() / name;
        if (!std::filesystem::exists(p))
            throw MissingStageError(p.string() + " not found: run gen-data first, or pass --in <scenario dir>");
        return p;
    }

    std::vector<std::filesystem::path> scenario_inputs() const {
        std::vector<std::filesystem::path> in;
        for (const char* f : {"loads.csv", "irradiance.csv", "tariff_buy.csv", "tariff_sell.csv", "regions.csv"})
            in.push_back(scenario_file(f));
        return in;
    }

    std::filesystem::path require(const char* file, const char* stage) const {
        const auto p = opt_.out / file;
        if (!std::filesystem::exists(p)) throw MissingStageError(p.string() + " not found: run " + stage + " first");
        return p;
    }

    IngestResult ingest() const {
        IngestOptions io = opt_.config.ingest;
        const auto irr = csv::read(scenario_file("irradiance.csv"));
        io.day_weight = 365.0 / static_cast<double>(std::max<std::size_t>(irr.rows.size(), 1));
        return load_scenario(ScenarioPaths::in_dir(scenario_dir()), opt_.config.synth.asset, io);
    }

    FittedPopulation load_population() const {
        return read_population(opt_.out / "savings_curves.csv", opt_.out / "fit_report.csv");
    }

    StageOutputs fit_outputs(const Scenario& scenario, const std::vector<SampledCurve>& fitted) const {
        csv::Writer curves({"household_id", "knot_index", "y", "f", "slope"});
        csv::Writer billed({"household_id", "knot_index", "y", "purchases"});
        csv::Writer samples({"household_id", "sample_index", "y", "savings", "purchases"});
        csv::Writer report({"household_id", "region_id", "net_zero_size", "baseline_bill", "full_savings",
                            "normalized_savings", "initial_slope", "terminal_slope", "r_squared", "max_repair",
                            "repaired", "purchase_monotonicity_violations"});
        std::size_t repaired = 0, nonmonotone = 0;
        for (std::size_t i = 0; i < fitted.size(); ++i) {
            const auto& sc = fitted[i];
            const auto& c = sc.fit.curve;
            const auto& id = c.household_id();
            for (std::size_t k = 0; k < c.knots().size(); ++k)
                curves.row({id, std::to_string(k), fmt(c.knots()[k]), fmt(c.values()[k]),
                            k < c.segments() ? fmt(c.slopes()[k]) : std::string()});
            for (std::size_t k = 0; k < sc.samples.y.size(); ++k) {
                billed.row({id, std::to_string(k), fmt(sc.samples.y[k]), fmt(sc.samples.purchases[k])});
                samples.row({id, std::to_string(k), fmt(sc.samples.y[k]), fmt(sc.samples.savings[k]),
                             fmt(sc.samples.purchases[k])});
            }
            const auto bsc = BilledSalesCurve::from_samples(sc.samples);
            const std::size_t violations = bsc.monotonicity_violations(1e-6 * std::max(1.0, bsc.baseline()));
            nonmonotone += violations > 0 ? 1 : 0;
            repaired += sc.fit.diagnostics.repaired ? 1 : 0;
            report.row({id, scenario.households[i].region_id, fmt(c.net_zero_size()), fmt(sc.samples.baseline),
                        fmt(c.full_savings()), fmt(c.normalized_savings()), fmt(c.initial_slope()),
                        fmt(c.terminal_slope()), fmt(sc.fit.diagnostics.r_squared), fmt(sc.fit.diagnostics.max_repair),
                        sc.fit.diagnostics.repaired ? "1" : "0", std::to_string(violations)});
        }
        say("fit: " + std::to_string(fitted.size()) + " households, " +
            std::to_string(fitted.size() * opt_.config.sampling.n_samples) + " LP samples, " +
            std::to_string(repaired) + " curves repaired");
        if (nonmonotone > 0)
            say("fit: warning: billed purchases rise with capacity for " + std::to_string(nonmonotone) +
                " households (see fit_report.csv)");
        return {{"savings_curves.csv", curves.str()},
                {"billed_sales.csv", billed.str()},
                {"samples.csv", samples.str()},
                {"fit_report.csv", report.str()}};
    }

    static std::string sweep_csv(const DemandCurves& table) {
        csv::Writer w({"t", "n_owners", "adopted_quantity", "short_run_price", "clearing_price", "volume",
                       "fraction_rented_out", "owner_participation", "nonowner_participation", "total_participation",
                       "owner_surplus", "renter_surplus", "total_surplus"});
        for (const auto& r : table.rows)
            w.row({fmt(r.t), std::to_string(r.n_owners), fmt(r.adopted_quantity), fmt(r.short_run_price),
                   r.clearing_price ? fmt(*r.clearing_price) : std::string(), fmt(r.volume), fmt(r.fraction_rented_out),
                   fmt(r.owner_participation), fmt(r.nonowner_participation), fmt(r.total_participation),
                   fmt(r.owner_surplus), fmt(r.renter_surplus), fmt(r.total_surplus)});
        return w.str();
    }

    MarketEquilibrium snapshot(const Market& market, const AdoptionOrder& order) const {
        return market.clear(top_owners(order, owners_for_rate(opt_.config.equilibrium_rate, order.size())));
    }

    std::string equilibrium_csv(const Market& market, const AdoptionOrder& order,
                                const std::vector<SavingsCurve>& curves) const {
        const auto eq = snapshot(market, order);
        csv::Writer w({"household_id", "role", "y_star", "surplus"});
        for (std::size_t i = 0; i < curves.size(); ++i)
            w.row({curves[i].household_id(), eq.roles[i] == Role::kOwner ? "owner" : "renter", fmt(eq.allocations[i]),
                   fmt(eq.surpluses[i])});
        return w.str();
    }

    std::string equilibrium_summary_csv(const Market& market, const AdoptionOrder& order) const {
        const auto eq = snapshot(market, order);
        csv::Writer w({"t", "n_owners", "clearing_price", "price_low", "price_high", "volume", "owner_participation",
                       "nonowner_participation", "total_participation", "owner_surplus", "renter_surplus",
                       "total_surplus"});
        const double t = opt_.config.equilibrium_rate;
        w.row({fmt(t), std::to_string(owners_for_rate(t, order.size())),
               eq.clearing_price ? fmt(*eq.clearing_price) : std::string(), fmt(eq.price_low), fmt(eq.price_high),
               fmt(eq.volume), fmt(eq.owner_participation), fmt(eq.nonowner_participation),
               fmt(eq.total_participation), fmt(eq.owner_surplus_total), fmt(eq.renter_surplus_total),
               fmt(eq.total_surplus)});
        return w.str();
    }

    static std::string longrun_csv(const std::vector<LongRunResult>& rows) {
        csv::Writer w({"p", "n_short", "n_long", "rate_short", "rate_long", "quantity_short", "quantity_long",
                       "delta_quantity", "rent_at_long", "rent_before_long", "saturated", "contraction"});
        for (const auto& r : rows)
            w.row({fmt(r.price), std::to_string(r.n_short), std::to_string(r.n_long), fmt(r.rate_short),
                   fmt(r.rate_long), fmt(r.quantity_short), fmt(r.quantity_long), fmt(r.delta_quantity),
                   fmt(r.rent_at_long), fmt(r.rent_before_long), r.saturated ? "1" : "0", r.contraction ? "1" : "0"});
        return w.str();
    }

    static std::string now_iso() {
        const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    void run_stage(const std::string& name, const std::vector<std::filesystem::path>& inputs,
                   const std::function<StageOutputs()>& body) {
        nlohmann::json input_sums = nlohmann::json::object();
        std::string key_material = hash_ + "\n" + name + "\n";
        for (const auto& p : inputs) {
            const auto sum = sha256_hex(csv::read_file(p));
            input_sums[p.filename().string()] = sum;
            key_material += p.filename().string() + "=" + sum + "\n";
        }
        const std::string key = sha256_hex(key_material);

        const auto started = now_iso();
        const auto t0 = std::chrono::steady_clock::now();
        bool cached = false;
        if (!opt_.force && manifest_.contains("stages") && manifest_["stages"].contains(name)) {
            const auto& rec = manifest_["stages"][name];
            cached = rec.value("key", "") == key && rec.contains("outputs");
            if (cached)
                for (const auto& [file, sum] : rec["outputs"].items()) {
                    const auto p = opt_.out / file;
                    if (!std::filesystem::exists(p) || sha256_hex(csv::read_file(p)) != sum.get<std::string>()) {
                        cached = false;
                        break;
                    }
                }
        }

        if (cached) {
            say(name + ": up to date");
        } else {
            const StageOutputs outputs = body();
            nlohmann::json sums = nlohmann::json::object();
            for (const auto& [file, contents] : outputs) {
                csv::write_file_atomic(opt_.out / file, contents);
                sums[file] = sha256_hex(contents);
            }
            manifest_["stages"][name] = {{"key", key}, {"inputs", input_sums}, {"outputs", sums}};
        }
        manifest_["version"] = kVersion;
        manifest_["config_hash"] = hash_;
        manifest_["seed"] = opt_.config.synth.rng_seed;
        csv::write_file_atomic(opt_.out / "manifest.json", manifest_.dump(2) + "\n");

        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        nlohmann::json timings = nlohmann::json::object();
        const auto tp = opt_.out / "timings.json";
        if (std::filesystem::exists(tp)) {
            try {
                timings = nlohmann::json::parse(csv::read_file(tp));
            } catch (const nlohmann::json::exception&) {
            }
        }
        timings[name] = {{"started", started}, {"finished", now_iso()}, {"seconds", seconds}, {"cached", cached}};
        csv::write_file_atomic(tp, timings.dump(2) + "\n");
    }

    PipelineOptions opt_;
    std::ostream* log_;
    std::string hash_;
    nlohmann::json manifest_ = nlohmann::json::object();
};

}  // namespace p2p
