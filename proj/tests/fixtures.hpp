#pragma once

#include "p2p/savings_curve.hpp"
#include "p2p/synth.hpp"

#include <algorithm>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

/// Random concave nondecreasing curve with `segments` pieces on [0, ybar].
inline p2p::SavingsCurve random_curve(std::mt19937_64& gen, const std::string& id, std::size_t segments = 8) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double ybar = 1.0 + 8.0 * u(gen);
    std::vector<double> cuts(segments - 1);
    for (double& c : cuts) c = ybar * u(gen);
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> knots{0.0};
    for (double c : cuts)
        if (c > knots.back() + 1e-6 && c < ybar - 1e-6) knots.push_back(c);
    knots.push_back(ybar);
    std::vector<double> slopes(knots.size() - 1);
    double s = 300.0 + 250.0 * u(gen);
    for (double& v : slopes) {
        v = s;
        s = std::max(0.0, s - 120.0 * u(gen));
    }
    return p2p::SavingsCurve::from_slopes(id, knots, slopes);
}

inline std::vector<p2p::SavingsCurve> random_population(std::mt19937_64& gen, std::size_t n) {
    std::vector<p2p::SavingsCurve> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(random_curve(gen, p2p::format_id("h", i + 1, 4)));
    return out;
}

/// Linear curve f(y) = slope * y on [0, ybar].
inline p2p::SavingsCurve linear_curve(const std::string& id, double slope, double ybar) {
    return p2p::SavingsCurve::from_slopes(id, {0.0, ybar}, {slope});
}

inline p2p::SynthConfig small_synth(std::size_t households = 24, std::size_t days = 6, std::uint64_t seed = 42) {
    p2p::SynthConfig c;
    c.n_households = households;
    c.n_days = days;
    c.n_regions = 4;
    c.rng_seed = seed;
    return c;
}

inline p2p::SampleOptions quick_sampling(std::size_t n = 10) {
    p2p::SampleOptions o;
    o.n_samples = n;
    return o;
}

/// Fitted curves for a small synthetic population.
inline std::vector<p2p::SavingsCurve> synthetic_curves(const p2p::Scenario& s, std::size_t samples = 10) {
    std::vector<p2p::SavingsCurve> out;
    for (auto& sc : p2p::sample_and_fit_all(s, quick_sampling(samples), 1)) out.push_back(sc.fit.curve);
    return out;
}

}  // namespace fixtures
