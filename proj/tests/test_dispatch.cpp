#include "p2p/dispatch.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace p2p;
using Catch::Approx;

namespace {

DayProfile constant(double v) {
    DayProfile p;
    p.fill(v);
    return p;
}

Scenario random_scenario(std::mt19937_64& gen, std::size_t days) {
    Scenario s;
    s.irradiance.values = HourlyMatrix(days);
    s.tariff.buy = HourlyMatrix(days);
    s.tariff.sell = HourlyMatrix(days);
    HouseholdRecord hh;
    hh.id = "h";
    hh.region_id = "z";
    hh.load = HourlyMatrix(days);
    for (std::size_t d = 0; d < days; ++d) {
        const auto inst = oracle::random_day(gen);
        s.irradiance.values.day(d) = inst.irr;
        s.tariff.buy.day(d) = inst.buy;
        s.tariff.sell.day(d) = inst.sell;
        hh.load.day(d) = inst.load;
    }
    s.regions = {{"z", 0.0, 0.0}};
    hh.net_zero_size = compute_net_zero_size(hh.load, s.irradiance, s.asset.eta_i);
    s.households.push_back(hh);
    s.day_weight = 365.0 / static_cast<double>(days);
    return s;
}

}  // namespace

TEST_CASE("no asset means the bill is load times price") {
    const auto r = solve_day(constant(1.0), constant(0.5), constant(0.2), constant(0.05), AssetSpec{}, 0.0);
    CHECK(r.cost == Approx(4.8).epsilon(1e-15));
    CHECK(r.purchases == Approx(4.8).epsilon(1e-15));
    CHECK(r.sale_credit == 0.0);
}

TEST_CASE("no load and worthless surplus costs nothing") {
    const auto r = solve_day(constant(0.0), constant(0.5), constant(0.2), constant(0.0), AssetSpec{}, 3.0);
    CHECK(r.cost == Approx(0.0).margin(1e-9));
}

TEST_CASE("precondition violations are domain errors") {
    DayProfile sell = constant(0.05);
    sell[7] = 0.5;
    CHECK_THROWS_AS(solve_day(constant(1.0), constant(0.5), constant(0.2), sell, AssetSpec{}, 1.0), DomainError);
    CHECK_THROWS_AS(solve_day(constant(1.0), constant(0.5), constant(0.2), constant(0.05), AssetSpec{}, -1.0),
                    DomainError);
}

TEST_CASE("dispatch result respects its invariants") {
    std::mt19937_64 gen(3);
    const AssetSpec a;
    for (int trial = 0; trial < 40; ++trial) {
        const auto d = oracle::random_day(gen);
        const auto r = solve_day(d.load, d.irr, d.buy, d.sell, a, d.y);
        CHECK(r.cost == Approx(r.purchases + r.sale_credit).margin(1e-9));
        CHECK(r.sale_credit <= 0.0);
        CHECK(r.cost == Approx(r.lp_objective).margin(1e-7));
        double prev = a.x0 * a.alpha * d.y;
        for (std::size_t h = 0; h < kHoursPerDay; ++h) {
            CHECK(r.soc[h] >= -1e-9);
            CHECK(r.soc[h] <= a.alpha * d.y + 1e-9);
            CHECK(r.storage_action[h] <= a.u_charge_max * d.y + 1e-9);
            CHECK(r.storage_action[h] >= -a.u_discharge_max * d.y - 1e-9);
            CHECK(r.soc[h] == Approx(a.eta_s * prev + r.storage_action[h]).margin(1e-9));
            prev = r.soc[h];
        }
    }
}

TEST_CASE("LP cost is sandwiched under the discretized DP oracle") {
    std::mt19937_64 gen(5);
    const AssetSpec a;
    for (int trial = 0; trial < 25; ++trial) {
        const auto d = oracle::random_day(gen);
        const double lp = solve_day(d.load, d.irr, d.buy, d.sell, a, d.y).cost;
        const double dp = oracle::dp_day_cost(d.load, d.irr, d.buy, d.sell, a, d.y);
        CHECK(dp - lp >= -1e-6);
        CHECK(dp - lp <= 0.01 * std::abs(dp) + 1e-6);
    }
}

TEST_CASE("terminal charge requirement can only raise cost") {
    std::mt19937_64 gen(9);
    AssetSpec a;
    a.x0 = 0.5;
    DispatchOptions strict;
    strict.require_terminal_soc = true;
    for (int trial = 0; trial < 20; ++trial) {
        const auto d = oracle::random_day(gen);
        const auto free = solve_day(d.load, d.irr, d.buy, d.sell, a, d.y);
        const auto held = solve_day(d.load, d.irr, d.buy, d.sell, a, d.y, strict);
        CHECK(held.cost >= free.cost - 1e-9);
        CHECK(held.soc[kHoursPerDay - 1] >= 0.5 * a.alpha * d.y - 1e-9);
    }
}

TEST_CASE("scaling load and capacity together scales cost") {
    std::mt19937_64 gen(13);
    const AssetSpec a;
    for (int trial = 0; trial < 20; ++trial) {
        auto d = oracle::random_day(gen);
        const double c1 = solve_day(d.load, d.irr, d.buy, d.sell, a, d.y).cost;
        for (double& v : d.load) v *= 2.0;
        const double c2 = solve_day(d.load, d.irr, d.buy, d.sell, a, 2.0 * d.y).cost;
        CHECK(c2 == Approx(2.0 * c1).epsilon(1e-7).margin(1e-9));
    }
}

TEST_CASE("annual bill at zero capacity is the closed-form baseline") {
    std::mt19937_64 gen(17);
    const auto s = random_scenario(gen, 6);
    const auto& hh = s.households[0];
    const auto b = annual_bill(hh, s, 0.0);
    CHECK(b.bill == baseline_bill(hh, s));
    CHECK(b.purchases == baseline_bill(hh, s));
}

TEST_CASE("annual bill is nonincreasing and convex in capacity") {
    std::mt19937_64 gen(19);
    for (int trial = 0; trial < 4; ++trial) {
        const auto s = random_scenario(gen, 4);
        const auto& hh = s.households[0];
        std::uniform_real_distribution<double> u(0.0, hh.net_zero_size);
        for (int k = 0; k < 8; ++k) {
            double y1 = u(gen), y2 = u(gen);
            if (y1 > y2) std::swap(y1, y2);
            const double b1 = annual_bill(hh, s, y1).bill, b2 = annual_bill(hh, s, y2).bill;
            const double bm = annual_bill(hh, s, 0.5 * (y1 + y2)).bill;
            CHECK(b2 <= b1 + 1e-6);
            CHECK(bm <= 0.5 * (b1 + b2) + 1e-6);
        }
    }
}

TEST_CASE("bill cache returns stored values") {
    std::mt19937_64 gen(23);
    const auto s = random_scenario(gen, 3);
    BillCache cache(s);
    const auto a = cache.get(0, 1.5);
    const auto b = cache.get(0, 1.5);
    CHECK(a.bill == b.bill);
    CHECK(cache.size() == 1);
    CHECK(a.bill == annual_bill(s.households[0], s, 1.5).bill);
}
