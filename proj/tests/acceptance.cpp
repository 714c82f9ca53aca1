// Acceptance run: one PASS/FAIL line per criterion.

#include "p2p/pipeline.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>

using namespace p2p;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Check {
    bool ok = true;
    std::ostringstream note;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) note << "first failure: " << what << "; ";
        ok = ok && cond;
    }
};

int failures = 0;

void report(int id, const std::string& title, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0.0 && secs > limit_s) {
        out.pass = false;
        out.detail += " runtime over " + std::to_string(static_cast<int>(limit_s)) + " s";
    }
    if (!out.pass) ++failures;
    std::printf("criterion %d %s: %s (%.1f s) %s\n", id, out.pass ? "PASS" : "FAIL", title.c_str(), secs,
                out.detail.c_str());
    std::fflush(stdout);
}

// Default synthetic population, fitted once and shared by criteria 4, 5, 6, 8.
struct Population {
    Scenario scenario;
    std::vector<SampledCurve> sampled;
    std::vector<SavingsCurve> curves;
    std::vector<BilledSalesCurve> billed;
};

const Population& default_population() {
    static const Population pop = [] {
        Population p;
        p.scenario = generate_scenario(SynthConfig{});
        p.sampled = sample_and_fit_all(p.scenario, SampleOptions{}, default_thread_count());
        for (const auto& s : p.sampled) {
            p.curves.push_back(s.fit.curve);
            p.billed.push_back(BilledSalesCurve::from_samples(s.samples));
        }
        return p;
    }();
    return pop;
}

std::vector<double> with_ends(std::vector<double> grid) {
    grid.insert(grid.begin(), 0.0);
    grid.push_back(1.0);
    return grid;
}

Outcome remarks() {
    SynthConfig cfg;
    cfg.n_households = 50;
    cfg.rng_seed = 1001;
    const auto s = generate_scenario(cfg);
    const auto sampled = sample_and_fit_all(s, SampleOptions{}, default_thread_count());
    Check c;
    double worst_mono = 0.0, worst_concave = 0.0;
    std::size_t strict_checked = 0;
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < s.households.size(); ++i) {
        const auto& hh = s.households[i];
        const auto& f = sampled[i].samples.savings;
        bool sell_with_sun = false;
        for (std::size_t d = 0; d < s.days(); ++d)
            for (std::size_t h = 0; h < kHoursPerDay; ++h)
                sell_with_sun |= s.irradiance.values(d, h) > 0.0 && s.tariff.sell(d, h) > 0.0;
        for (std::size_t k = 1; k < f.size(); ++k) {
            worst_mono = std::min(worst_mono, f[k] - f[k - 1]);
            c.require(f[k] >= f[k - 1] - 1e-6, "savings decrease for " + hh.id);
            if (sell_with_sun) {
                c.require(f[k] > f[k - 1], "savings not strictly increasing for " + hh.id);
                ++strict_checked;
            }
        }
        // Equally spaced interior samples give midpoint triples directly.
        for (std::size_t k = 2; k + 1 < f.size(); ++k) {
            const double gap = f[k] - 0.5 * (f[k - 1] + f[k + 1]);
            worst_concave = std::min(worst_concave, gap);
            c.require(gap >= -1e-6, "sampled savings not midpoint-concave for " + hh.id);
        }
        // Random pairs with fresh solves.
        for (int r = 0; r < 2; ++r) {
            const double y1 = hh.net_zero_size * u(gen), y2 = hh.net_zero_size * u(gen);
            const double b1 = annual_bill(hh, s, y1).bill, b2 = annual_bill(hh, s, y2).bill;
            const double bm = annual_bill(hh, s, 0.5 * (y1 + y2)).bill;
            const double gap = 0.5 * (b1 + b2) - bm;
            worst_concave = std::min(worst_concave, gap);
            c.require(gap >= -1e-6, "bill not midpoint-convex for " + hh.id);
            const double blo = y1 <= y2 ? b1 : b2, bhi = y1 <= y2 ? b2 : b1;
            c.require(bhi <= blo + 1e-6, "bill increases with capacity for " + hh.id);
            worst_mono = std::min(worst_mono, blo - bhi);
        }
    }
    c.note << s.households.size() << " households, " << strict_checked << " strict steps, worst monotone gap "
           << worst_mono << ", worst concavity gap " << worst_concave;
    return {c.ok, c.note.str()};
}

Outcome sandwich() {
    std::mt19937_64 gen(2024);
    const AssetSpec asset;
    Check c;
    double worst_rel = 0.0, worst_below = 0.0, fine_rel = 0.0;
    double largest_cost = 0.0;
    std::size_t over = 0;
    const int n = 120;
    for (int k = 0; k < n; ++k) {
        const auto d = oracle::random_day(gen);
        const double lp = solve_day(d.load, d.irr, d.buy, d.sell, asset, d.y).cost;
        const double dp = oracle::dp_day_cost(d.load, d.irr, d.buy, d.sell, asset, d.y, 200);
        const double gap = dp - lp;
        worst_below = std::min(worst_below, gap);
        worst_rel = std::max(worst_rel, gap / std::max(std::abs(dp), 1e-12));
        c.require(gap >= -1e-6, "LP above the oracle on instance " + std::to_string(k));
        if (gap > 0.01 * std::abs(dp)) {
            c.require(false, "oracle gap above 1% on instance " + std::to_string(k));
            // Diagnostic only: the same instance on a finer oracle grid.
            ++over;
            largest_cost = std::max(largest_cost, std::abs(dp));
            const double fine = oracle::dp_day_cost(d.load, d.irr, d.buy, d.sell, asset, d.y, 1000);
            fine_rel = std::max(fine_rel, (fine - lp) / std::abs(fine));
        }
    }
    c.note << n << " instances, min gap " << worst_below << ", max relative gap " << worst_rel;
    if (over)
        c.note << "; " << over << " over 1%, all with |cost| <= " << largest_cost
               << " $, their worst relative gap at 1000 grid points " << fine_rel;
    return {c.ok, c.note.str()};
}

Outcome clearing_identities() {
    std::mt19937_64 gen(3003);
    Check c;
    double worst_balance = 0.0, worst_identity = 0.0;
    const int n = 25;
    for (int trial = 0; trial < n; ++trial) {
        const auto curves = fixtures::random_population(gen, 40 + 10 * (trial % 5));
        std::vector<bool> owners(curves.size());
        std::bernoulli_distribution coin(0.2 + 0.6 * (trial % 4) / 3.0);
        for (std::size_t i = 0; i < owners.size(); ++i) owners[i] = coin(gen);
        owners[0] = true;
        owners[1] = false;
        const auto eq = clear_market(curves, owners);
        double total_y = 0.0, supply = 0.0, demand = 0.0, fy = 0.0, owner_full = 0.0, w = 0.0;
        for (std::size_t i = 0; i < curves.size(); ++i) {
            const double ybar = curves[i].net_zero_size(), y = eq.allocations[i];
            total_y += ybar;
            if (owners[i]) {
                supply += ybar - y;
                owner_full += curves[i].full_savings();
            } else {
                demand += y;
            }
            fy += curves[i].eval(y);
            w += eq.surpluses[i];
            c.require(eq.surpluses[i] >= -1e-9, "negative surplus");
        }
        const double tol = std::max(1e-6, 1e-9 * total_y);
        worst_balance = std::max(worst_balance, std::abs(supply - demand));
        c.require(std::abs(supply - demand) <= tol, "supply and demand differ");
        const double target = fy - owner_full;
        const double rel = std::abs(w - target) / std::max(std::abs(target), 1e-12);
        worst_identity = std::max(worst_identity, rel);
        c.require(rel <= 1e-6, "surplus identity off");
    }
    c.note << n << " populations, max |S-D| " << worst_balance << " kW, max surplus identity error " << worst_identity;
    return {c.ok, c.note.str()};
}

Outcome price_path() {
    const auto& pop = default_population();
    const Market market(pop.curves);
    const auto order = build_order(pop.curves);
    const auto grid = with_ends(default_t_grid());
    const auto table = sweep_adoption(market, order, grid, default_thread_count());
    Check c;
    double prev = std::numeric_limits<double>::infinity(), peak = 0.0, peak_t = 0.0;
    for (const auto& row : table.rows) {
        if (row.clearing_price) {
            c.require(*row.clearing_price <= prev + 1e-9, "clearing price rises at t=" + std::to_string(row.t));
            prev = *row.clearing_price;
        }
        if (row.volume > peak) {
            peak = row.volume;
            peak_t = row.t;
        }
    }
    const auto& first = table.rows.front();
    const auto& last = table.rows.back();
    c.require(first.volume == 0.0, "volume at t=0 is not 0");
    c.require(last.volume == 0.0, "volume at t=1 is not 0");
    c.require(peak > 0.0 && peak_t > 0.0 && peak_t < 1.0, "no interior volume maximum");
    c.note << pop.curves.size() << " households, " << table.rows.size() << " adoption rates, peak volume " << peak
           << " kW at t=" << peak_t;
    return {c.ok, c.note.str()};
}

Outcome long_run() {
    const auto& pop = default_population();
    const Market market(pop.curves);
    const auto order = build_order(pop.curves);
    Check c;
    std::size_t increased = 0;
    const auto prices = default_price_grid(order, 40);
    for (double p : prices) {
        const auto lr = long_run_adoption(market, order, p);
        c.require(lr.quantity_long >= lr.quantity_short, "long-run quantity below short-run");
        if (lr.delta_quantity > 0.0) {
            ++increased;
            c.require(lr.rent_at_long <= p, "rent above p at the long-run count");
            c.require(p <= lr.rent_before_long, "rent below p one household earlier");
        }
    }
    c.note << prices.size() << " prices, " << increased << " with an adoption increase";
    return {c.ok, c.note.str()};
}

Outcome subsidy() {
    const auto& pop = default_population();
    const Market market(pop.curves);
    const auto order = build_order(pop.curves);
    const unsigned threads = default_thread_count();
    const auto coarse = sweep_adoption(market, order, default_t_grid(200), threads);
    const auto fine = sweep_adoption(market, order, default_t_grid(2000), threads);
    Check c;
    double worst = 0.0, worst_sub = 0.0;
    std::size_t compared = 0, zero_cases = 0;
    for (double p : default_price_grid(order, 40)) {
        const auto lr = long_run_adoption(market, order, p);
        const auto a = equivalent_subsidy(coarse, lr), b = equivalent_subsidy(fine, lr);
        if (lr.delta_quantity == 0.0) {
            ++zero_cases;
            c.require(a.equivalent_subsidy == 0.0 && b.equivalent_subsidy == 0.0, "nonzero subsidy without increase");
            continue;
        }
        ++compared;
        const double rel = std::abs(a.equivalent_subsidy - b.equivalent_subsidy) /
                           std::max(std::abs(b.equivalent_subsidy), 1e-12);
        worst = std::max(worst, rel);
        const double sub = equivalent_subsidy(coarse, lr, 10).equivalent_subsidy;
        worst_sub = std::max(worst_sub, std::abs(sub - a.equivalent_subsidy) / std::max(std::abs(sub), 1e-12));
        c.require(rel <= 0.005, "coarse and refined subsidy differ by " + std::to_string(100.0 * rel) +
                                    "% at p=" + std::to_string(p));
    }
    c.note << compared << " prices compared (200 vs 2000 adoption rates), worst relative difference " << worst
           << ", " << zero_cases << " prices without increase; 10x trapezoid subdivision on the 200-rate table moves S_E by at most "
           << worst_sub;
    return {c.ok, c.note.str()};
}

Outcome flows() {
    std::mt19937_64 gen(5005);
    std::uniform_real_distribution<double> lat(33.0, 41.0), lon(-122.0, -115.0), s(-20.0, 20.0);
    Check c;
    double worst = 0.0;
    const int n = 30;
    for (int trial = 0; trial < n; ++trial) {
        const std::size_t z = 2 + static_cast<std::size_t>(trial) % 7;
        std::vector<Region> regions;
        for (std::size_t k = 0; k < z; ++k) regions.push_back({format_id("z", k, 2), lat(gen), lon(gen)});
        const auto d = distance_matrix(regions);
        std::vector<double> excess(z);
        for (double& v : excess) v = s(gen);
        const auto f = min_cost_flow(excess, d, 100.0);
        const double lp = oracle::transport_lp_objective(excess, d);
        const double rel = std::abs(f.objective - lp) / std::max(std::abs(lp), 1.0);
        worst = std::max(worst, rel);
        c.require(rel <= 1e-7, "objective differs from the LP on instance " + std::to_string(trial));
    }
    // A market where every region clears internally.
    std::vector<SavingsCurve> curves;
    std::vector<std::string> where;
    std::vector<bool> owners;
    const std::vector<Region> regions{{"a", 36.0, -119.0}, {"b", 37.0, -120.0}, {"c", 38.0, -121.0}};
    for (std::size_t k = 0; k < regions.size(); ++k) {
        curves.push_back(fixtures::linear_curve(format_id("o", k, 2), 100.0, 1.0));
        curves.push_back(fixtures::linear_curve(format_id("r", k, 2), 200.0, 1.0));
        where.insert(where.end(), 2, regions[k].id);
        owners.push_back(true);
        owners.push_back(false);
    }
    const auto eq = clear_market(curves, owners);
    const auto excess = regional_excess(eq, curves, where, regions);
    const auto bal = min_cost_flow(excess, distance_matrix(regions), eq.volume);
    c.require(eq.volume > 0.0, "balanced market has no volume");
    c.require(bal.objective == 0.0, "balanced regions ship power");
    c.require(bal.fraction_local == 1.0, "balanced regions are not fully local");
    c.note << n << " instances, worst relative objective error " << worst << "; balanced case objective "
           << bal.objective << ", fraction local " << bal.fraction_local;
    return {c.ok, c.note.str()};
}

Outcome stakeholders() {
    const auto& pop = default_population();
    const Market market(pop.curves);
    const auto order = build_order(pop.curves);
    const auto prices = default_price_grid(order, 40);
    const auto rows = regime_boundary(market, order, pop.billed, prices, default_thread_count());
    Check c;
    std::size_t flips = 0;
    for (const auto& row : rows) {
        const double expect = row.long_run.price * row.long_run.delta_quantity;
        c.require(std::abs(row.regime.delta_R_V - expect) <= 1e-12 * std::max(std::abs(expect), 1e-300),
                  "vendor gain differs from p dQ");
        const double t = row.regime.threshold_A_U;
        if (std::isfinite(t)) {
            c.require(!row.regime.emerges(t), "market emerges at the threshold");
            c.require(t == 0.0 || row.regime.emerges(std::nextafter(t, 0.0)), "market blocked just below the threshold");
            c.require(!row.regime.emerges(std::nextafter(t, 1e300)), "market emerges above the threshold");
            ++flips;
        }
    }
    const std::vector<bool> none(pop.curves.size(), false);
    const double b0 = billed_sales_without_market(pop.billed, none);
    const double base = total_baseline(pop.billed);
    c.require(b0 == base, "billed sales at zero adoption differ from the baseline total");
    c.require(billed_sales_with_market(pop.billed, market.clear(none)) == base, "market with no owners changes bills");
    c.note << rows.size() << " prices, " << flips << " finite thresholds checked, B_e(0) = " << b0;
    return {c.ok, c.note.str()};
}

Outcome determinism() {
    const auto root = fs::temp_directory_path() / "p2p_acceptance";
    fs::remove_all(root);
    std::map<std::string, std::string> files[2];
    const unsigned threads[2] = {1, 8};
    for (int k = 0; k < 2; ++k) {
        PipelineOptions o;
        o.out = root / ("threads" + std::to_string(threads[k]));
        o.threads = threads[k];
        Pipeline(o).all();
        for (const auto& e : fs::directory_iterator(o.out))
            if (e.path().extension() == ".csv") files[k][e.path().filename().string()] = csv::read_file(e.path());
    }
    Check c;
    c.require(!files[0].empty(), "no CSV output");
    c.require(files[0].size() == files[1].size(), "different CSV sets");
    std::size_t bytes = 0;
    for (const auto& [name, body] : files[0]) {
        const auto it = files[1].find(name);
        c.require(it != files[1].end() && it->second == body, name + " differs between thread counts");
        bytes += body.size();
    }
    fs::remove_all(root);
    c.note << files[0].size() << " CSV files, " << bytes << " bytes, identical at 1 and 8 threads";
    return {c.ok, c.note.str()};
}

}  // namespace

int main() {
    report(1, "savings monotone and concave", 120.0, remarks);
    report(2, "dispatch LP against the DP oracle", 60.0, sandwich);
    report(3, "market clearing identities", 0.0, clearing_identities);
    report(4, "price path and volume shape", 0.0, price_path);
    report(5, "long-run bracketing", 0.0, long_run);
    report(6, "equivalent subsidy refinement", 0.0, subsidy);
    report(7, "transport optimality", 0.0, flows);
    report(8, "stakeholder identities", 0.0, stakeholders);
    report(9, "pipeline determinism", 600.0, determinism);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
