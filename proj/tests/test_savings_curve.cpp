#include "p2p/savings_curve.hpp"
#include "fixtures.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace p2p;
using Catch::Approx;

namespace {

double renter_objective(const SavingsCurve& c, double r, double y) { return c.eval(y) - r * y; }
double owner_objective(const SavingsCurve& c, double r, double y) {
    return c.eval(y) + r * (c.net_zero_size() - y);
}

double coefficient_of_variation(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(v.size())) / mean;
}

}  // namespace

TEST_CASE("evaluation at knots and inside segments") {
    const auto c = SavingsCurve::from_slopes("a", {0.0, 1.0, 3.0}, {100.0, 40.0});
    CHECK(c.eval(0.0) == 0.0);
    CHECK(c.eval(1.0) == 100.0);
    CHECK(c.eval(3.0) == 180.0);
    CHECK(c.eval(2.0) == Approx(140.0));
    CHECK(c.normalized_savings() == Approx(60.0));
    CHECK_THROWS_AS(c.eval(3.1), DomainError);
    CHECK_THROWS_AS(c.eval(-0.1), DomainError);
}

TEST_CASE("derivative ranges") {
    const auto c = SavingsCurve::from_slopes("a", {0.0, 1.0, 3.0}, {100.0, 40.0});
    const auto inside = c.deriv_range(0.5);
    CHECK(inside.left == inside.right);
    CHECK(inside.left == 100.0);
    const auto kink = c.deriv_range(1.0);
    CHECK(kink.left == 100.0);
    CHECK(kink.right == 40.0);
    CHECK(c.deriv_range(0.0).right == 100.0);
    CHECK(c.deriv_range(3.0).left == 40.0);
}

TEST_CASE("supergradients are monotone across fitted curves") {
    std::mt19937_64 gen(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto c = fixtures::random_curve(gen, "x");
        const auto k = c.knots();
        for (std::size_t a = 0; a < k.size(); ++a)
            for (std::size_t b = a + 1; b < k.size(); ++b) CHECK(c.deriv_range(k[a]).right >= c.deriv_range(k[b]).left);
    }
}

TEST_CASE("curve construction rejects shape violations") {
    CHECK_THROWS_AS(SavingsCurve::from_slopes("a", {0.0, 1.0, 2.0}, {10.0, 20.0}), std::invalid_argument);
    CHECK_THROWS_AS(SavingsCurve::from_slopes("a", {0.0, 1.0}, {-1.0}), std::invalid_argument);
    CHECK_THROWS_AS(SavingsCurve::from_slopes("a", {0.5, 1.0}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(SavingsCurve::from_parts("a", {0.0, 1.0}, {0.0, 2.0}, {1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("inverse marginal endpoints") {
    const auto c = SavingsCurve::from_slopes("a", {0.0, 1.0, 3.0}, {100.0, 40.0});
    CHECK(c.inverse_marginal(0.0) == 3.0);
    CHECK(c.inverse_marginal(100.5) == 0.0);
    CHECK(c.inverse_marginal(70.0) == 1.0);
    // At a slope the choice is the whole flat stretch.
    CHECK(c.inverse_marginal(40.0) == 3.0);
    CHECK(c.inverse_marginal_lower(40.0) == 1.0);
    CHECK_THROWS_AS(c.inverse_marginal(-1.0), DomainError);
}

TEST_CASE("inverse marginal maximizes f(y) - r y") {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const auto c = fixtures::random_curve(gen, "x");
        const double r = 600.0 * u(gen);
        const double ys = c.inverse_marginal(r);
        const double best = renter_objective(c, r, ys);
        for (double y : c.knots()) CHECK(best >= renter_objective(c, r, y) - 1e-9);
        for (int k = 0; k < 1000; ++k) CHECK(best >= renter_objective(c, r, u(gen) * c.net_zero_size()) - 1e-9);
    }
}

TEST_CASE("owners and renters share the maximizer") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const auto c = fixtures::random_curve(gen, "x");
        const double r = 600.0 * u(gen);
        // Largest knot maximizing each objective.
        double arg_r = 0.0, arg_o = 0.0, val_r = -1e300, val_o = -1e300;
        for (double y : c.knots()) {
            const double a = renter_objective(c, r, y), b = owner_objective(c, r, y);
            if (a >= val_r - 1e-9 * std::abs(val_r)) {
                arg_r = y;
                val_r = std::max(val_r, a);
            }
            if (b >= val_o - 1e-9 * std::abs(val_o)) {
                arg_o = y;
                val_o = std::max(val_o, b);
            }
        }
        CHECK(arg_r == arg_o);
        CHECK(c.inverse_marginal(r) == arg_r);
    }
}

TEST_CASE("inverse marginal is nonincreasing in the price") {
    std::mt19937_64 gen(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto c = fixtures::random_curve(gen, "x");
        double prev = 0.0;
        for (int k = 700; k >= 0; --k) {
            const double y = c.inverse_marginal(static_cast<double>(k));
            CHECK(y >= prev);
            prev = y;
        }
    }
}

TEST_CASE("isotonic projection pools violators") {
    const std::vector<double> v{5.0, 6.0, 2.0, 3.0, 1.0};
    const std::vector<double> w{1.0, 1.0, 1.0, 1.0, 1.0};
    const auto p = detail::isotonic_nonincreasing(v, w);
    CHECK(p == std::vector<double>{5.5, 5.5, 2.5, 2.5, 1.0});
}

TEST_CASE("fitting concave samples reproduces them") {
    const std::vector<double> y{0.0, 1.0, 2.0, 3.0, 4.0};
    const std::vector<double> f{0.0, 100.0, 180.0, 240.0, 280.0};
    const auto fit = fit_savings_curve("a", y, f);
    CHECK_FALSE(fit.diagnostics.repaired);
    CHECK(fit.diagnostics.r_squared > 0.999999);
    CHECK(fit.curve.eval(0.0) == 0.0);
    CHECK(fit.curve.eval(4.0) == Approx(280.0).epsilon(1e-9));
    for (std::size_t k = 0; k < y.size(); ++k) CHECK(fit.curve.eval(y[k]) == Approx(f[k]).margin(1e-5));
    const auto s = fit.curve.slopes();
    for (std::size_t k = 0; k + 1 < s.size(); ++k) CHECK(s[k] > s[k + 1]);
}

TEST_CASE("slope separation makes flat stretches strictly concave") {
    const std::vector<double> y{0.0, 1.0, 2.0, 3.0};
    const std::vector<double> f{0.0, 50.0, 100.0, 150.0};
    const auto fit = fit_savings_curve("a", y, f);
    const auto s = fit.curve.slopes();
    for (std::size_t k = 0; k + 1 < s.size(); ++k) CHECK(s[k] - s[k + 1] == Approx(1e-6).epsilon(1e-6));
    CHECK(fit.curve.full_savings() == Approx(150.0).epsilon(1e-12));
}

TEST_CASE("small concavity violations are repaired, large ones rejected") {
    const std::vector<double> y{0.0, 1.0, 2.0, 3.0};
    // Slopes 100, 60, 60.001: the last step bends the wrong way.
    const std::vector<double> noisy{0.0, 100.0, 160.0, 220.001};
    const auto fit = fit_savings_curve("a", y, noisy);
    CHECK(fit.diagnostics.repaired);
    const auto s = fit.curve.slopes();
    for (std::size_t k = 0; k + 1 < s.size(); ++k) CHECK(s[k] >= s[k + 1]);

    const std::vector<double> bad{0.0, 10.0, 100.0, 240.0};
    CHECK_THROWS_AS(fit_savings_curve("a", y, bad), FitError);
}

TEST_CASE("identically zero samples give the zero curve") {
    const std::vector<double> y{0.0, 1.0, 2.0, 3.0};
    const std::vector<double> f{0.0, 0.0, 0.0, 0.0};
    const auto fit = fit_savings_curve("a", y, f);
    for (double v : fit.curve.values()) CHECK(v == 0.0);
    for (double s : fit.curve.slopes()) CHECK(s == 0.0);
}

TEST_CASE("no PV and a flat price leave nothing to save") {
    Scenario s;
    s.irradiance.values = HourlyMatrix(3);
    s.tariff.buy = HourlyMatrix(3);
    s.tariff.sell = HourlyMatrix(3);
    HouseholdRecord hh;
    hh.id = "a";
    hh.load = HourlyMatrix(3);
    for (std::size_t d = 0; d < 3; ++d)
        for (std::size_t h = 0; h < kHoursPerDay; ++h) {
            s.tariff.buy(d, h) = s.tariff.sell(d, h) = 0.2;
            hh.load(d, h) = 0.5 + 0.02 * static_cast<double>(h);
        }
    hh.net_zero_size = 3.0;
    const auto sc = sample_and_fit(hh, s, fixtures::quick_sampling(8));
    for (double v : sc.samples.savings) CHECK(std::abs(v) <= 1e-9);
    for (double v : sc.fit.curve.values()) CHECK(std::abs(v) <= 1e-9);
}

TEST_CASE("sample grid") {
    const auto g = sample_grid(5.0, fixtures::quick_sampling(30));
    REQUIRE(g.size() == 31);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == Approx(0.05));
    CHECK(g.back() == 5.0);
    for (std::size_t k = 1; k + 1 < g.size(); ++k) CHECK(g[k + 1] - g[k] == Approx((5.0 - 0.05) / 29.0));
    SampleOptions geo = fixtures::quick_sampling(5);
    geo.spacing = SampleSpacing::kGeometric;
    const auto h = sample_grid(5.0, geo);
    CHECK(h[2] / h[1] == Approx(h[3] / h[2]));
}

TEST_CASE("fitted synthetic curves") {
    const auto s = generate_scenario(fixtures::small_synth(16, 5));
    const auto fitted = sample_and_fit_all(s, fixtures::quick_sampling(12), 1);
    std::vector<double> initial, terminal;
    for (const auto& sc : fitted) {
        const auto& c = sc.fit.curve;
        CHECK(c.eval(0.0) == 0.0);
        CHECK(c.eval(c.net_zero_size()) == Approx(sc.samples.savings.back()).epsilon(1e-9));
        CHECK(sc.fit.diagnostics.r_squared >= 0.999);
        // Between samples the curve stays between the chord and the
        // neighbouring tangent lines.
        const auto& y = sc.samples.y;
        const auto& f = sc.samples.savings;
        const double tol = 1e-6 * std::max(1.0, f.back());
        for (std::size_t k = 1; k + 2 < y.size(); ++k) {
            const double mid = 0.5 * (y[k] + y[k + 1]);
            const double chord = 0.5 * (f[k] + f[k + 1]);
            const double left = f[k] + (f[k] - f[k - 1]) / (y[k] - y[k - 1]) * (mid - y[k]);
            const double right = f[k + 1] - (f[k + 2] - f[k + 1]) / (y[k + 2] - y[k + 1]) * (y[k + 1] - mid);
            CHECK(c.eval(mid) >= chord - tol);
            CHECK(c.eval(mid) <= std::min(left, right) + tol);
        }
        initial.push_back(c.initial_slope());
        terminal.push_back(c.terminal_slope());
    }
    CHECK(coefficient_of_variation(initial) < coefficient_of_variation(terminal));
}

TEST_CASE("fitting is independent of the thread count") {
    const auto s = generate_scenario(fixtures::small_synth(6, 3));
    const auto a = sample_and_fit_all(s, fixtures::quick_sampling(6), 1);
    const auto b = sample_and_fit_all(s, fixtures::quick_sampling(6), 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].samples.savings == b[i].samples.savings);
        CHECK(a[i].fit.curve == b[i].fit.curve);
        const auto single = sample_and_fit(s.households[i], s, fixtures::quick_sampling(6));
        CHECK(single.fit.curve == a[i].fit.curve);
    }
}
