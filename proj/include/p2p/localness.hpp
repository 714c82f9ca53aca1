#pragma once

// Geographic localness of a cleared rental market: per-region excess
// supply, the squared-distance transportation problem that matches regional
// surpluses to deficits, and the share of volume that clears within regions.

#include "p2p/domain.hpp"
#include "p2p/market.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace p2p {

enum class DistanceMetric { kHaversine, kEquirectangular };

inline constexpr double kEarthRadiusKm = 6371.0088;

inline double region_distance(const Region& a, const Region& b, DistanceMetric metric = DistanceMetric::kHaversine) {
    for (const Region* r : {&a, &b})
        if (!(r->latitude >= -90.0 && r->latitude <= 90.0 && r->longitude >= -180.0 && r->longitude <= 180.0))
            throw DomainError("region " + r->id + ": invalid coordinates");
    constexpr double deg = std::numbers::pi / 180.0;
    const double phi1 = a.latitude * deg, phi2 = b.latitude * deg;
    const double dphi = phi2 - phi1;
    const double dlambda = (b.longitude - a.longitude) * deg;
    if (metric == DistanceMetric::kEquirectangular) {
        const double x = dlambda * std::cos(0.5 * (phi1 + phi2));
        return kEarthRadiusKm * std::sqrt(x * x + dphi * dphi);
    }
    const double h = std::sin(dphi / 2) * std::sin(dphi / 2) +
                     std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) * std::sin(dlambda / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

using DistanceMatrix = std::vector<std::vector<double>>;

inline DistanceMatrix distance_matrix(std::span<const Region> regions,
                                      DistanceMetric metric = DistanceMetric::kHaversine) {
    const std::size_t n = regions.size();
    DistanceMatrix d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = region_distance(regions[i], regions[j], metric);
    return d;
}

/// Excess rental supply per region: owners' released capacity minus
/// renters' rented capacity. `household_region` maps curve index to region id.
inline std::vector<double> regional_excess(const MarketEquilibrium& eq, std::span<const SavingsCurve> curves,
                                           std::span<const std::string> household_region,
                                           std::span<const Region> regions) {
    if (household_region.size() != curves.size() || eq.allocations.size() != curves.size())
        throw std::invalid_argument("regional_excess: size mismatch");
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < regions.size(); ++k) index.emplace(regions[k].id, k);
    std::vector<double> s(regions.size(), 0.0);
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto it = index.find(household_region[i]);
        if (it == index.end())
            throw ValidationError("household " + curves[i].household_id(), "region_id",
                                  "not mapped to any region");
        const double y = eq.allocations[i];
        if (eq.roles[i] == Role::kOwner) s[it->second] += curves[i].net_zero_size() - y;
        else s[it->second] -= y;
    }
    return s;
}

/// 1 - sum|s_k| / (2 v). Defined as 1 when v = 0.
inline double fraction_cleared_locally(std::span<const double> excess, double volume) {
    if (!(volume > 0.0)) return 1.0;
    double total = 0.0;
    for (double s : excess) total += std::abs(s);
    return std::clamp(1.0 - total / (2.0 * volume), 0.0, 1.0);
}

struct RegionalFlow {
    std::vector<double> excess;                // s_k as given
    std::vector<std::vector<double>> flow;     // W[k][l], kW from k to l
    double objective = 0.0;                    // sum W d^2, kW km^2
    double fraction_local = 1.0;
    bool zero_volume = false;                  // v = 0, fraction defined as 1
    double rescaled_by = 0.0;                  // kW removed from the larger side
};

namespace detail {

// Successive shortest paths on the bipartite surplus/deficit graph.
inline std::vector<std::vector<double>> transport_ssp(std::span<const double> supply, std::span<const double> demand,
                                                      const std::vector<std::vector<double>>& cost) {
    const std::size_t ns = supply.size(), nd = demand.size();
    std::vector<std::vector<double>> flow(ns, std::vector<double>(nd, 0.0));
    std::vector<double> sup(supply.begin(), supply.end()), dem(demand.begin(), demand.end());
    double scale = 0.0;
    for (double v : sup) scale = std::max(scale, v);
    const double eps = 1e-14 * std::max(scale, 1.0);
    double cmax = 0.0;
    for (const auto& row : cost)
        for (double c : row) cmax = std::max(cmax, std::abs(c));
    // Path-length improvements below this are rounding noise; accepting them
    // can close a zero-cost cycle in the predecessor links.
    const double dtol = 1e-12 * std::max(cmax, 1.0);

    // Node ids: sources 0..ns-1, sinks ns..ns+nd-1.
    const std::size_t n = ns + nd;
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t guard = 0; guard < 100000; ++guard) {
        bool any_supply = false;
        for (double v : sup) any_supply |= v > eps;
        if (!any_supply) break;

        // Bellman-Ford from all sources with remaining supply.
        std::vector<double> dist(n, inf);
        std::vector<std::size_t> prev(n, SIZE_MAX);
        for (std::size_t i = 0; i < ns; ++i)
            if (sup[i] > eps) dist[i] = 0.0;
        for (std::size_t round = 0; round < n; ++round) {
            bool changed = false;
            for (std::size_t i = 0; i < ns; ++i) {
                if (dist[i] == inf) continue;
                for (std::size_t j = 0; j < nd; ++j) {
                    const double nd_ = dist[i] + cost[i][j];
                    if (nd_ < dist[ns + j] - dtol) {
                        dist[ns + j] = nd_;
                        prev[ns + j] = i;
                        changed = true;
                    }
                }
            }
            for (std::size_t j = 0; j < nd; ++j) {
                if (dist[ns + j] == inf) continue;
                for (std::size_t i = 0; i < ns; ++i) {
                    if (flow[i][j] <= eps) continue;
                    const double nd_ = dist[ns + j] - cost[i][j];
                    if (nd_ < dist[i] - dtol) {
                        dist[i] = nd_;
                        prev[i] = ns + j;
                        changed = true;
                    }
                }
            }
            if (!changed) break;
        }

        std::size_t best = SIZE_MAX;
        for (std::size_t j = 0; j < nd; ++j)
            if (dem[j] > eps && dist[ns + j] < inf && (best == SIZE_MAX || dist[ns + j] < dist[ns + best])) best = j;
        if (best == SIZE_MAX) break;

        // Walk back to the starting source: bottleneck, then apply.
        double amount = dem[best];
        std::size_t steps = 0;
        for (std::size_t v = ns + best;;) {
            if (++steps > n + 1) throw std::runtime_error("transport_ssp: cycle in shortest-path tree");
            const std::size_t u = prev[v];
            if (u == SIZE_MAX) {
                amount = std::min(amount, sup[v]);
                break;
            }
            if (v < ns) amount = std::min(amount, flow[v][u - ns]);  // reverse arc
            v = u;
        }
        dem[best] -= amount;
        for (std::size_t v = ns + best;;) {
            const std::size_t u = prev[v];
            if (u == SIZE_MAX) {
                sup[v] -= amount;
                break;
            }
            if (v >= ns) flow[u][v - ns] += amount;
            else flow[v][u - ns] -= amount;
            v = u;
        }
    }
    return flow;
}

}  // namespace detail

/// Squared-distance transportation between surplus and deficit regions.
/// Supplies and demands are rescaled proportionally on the larger side when
/// clearing tolerance leaves them slightly unequal.
inline RegionalFlow min_cost_flow(std::span<const double> excess, const DistanceMatrix& distances, double volume) {
    const std::size_t z = excess.size();
    if (distances.size() != z) throw std::invalid_argument("min_cost_flow: distance matrix size mismatch");
    for (const auto& row : distances) {
        if (row.size() != z) throw std::invalid_argument("min_cost_flow: distance matrix must be square");
        for (double d : row)
            if (!(d >= 0.0)) throw DomainError("min_cost_flow: distances must be >= 0");
    }

    RegionalFlow out;
    out.excess.assign(excess.begin(), excess.end());
    out.flow.assign(z, std::vector<double>(z, 0.0));
    out.zero_volume = !(volume > 0.0);
    out.fraction_local = fraction_cleared_locally(excess, volume);

    std::vector<std::size_t> src, dst;
    std::vector<double> supply, demand;
    double total_s = 0.0, total_d = 0.0;
    for (std::size_t k = 0; k < z; ++k) {
        if (excess[k] > 0.0) {
            src.push_back(k);
            supply.push_back(excess[k]);
            total_s += excess[k];
        } else if (excess[k] < 0.0) {
            dst.push_back(k);
            demand.push_back(-excess[k]);
            total_d += -excess[k];
        }
    }
    if (total_s == 0.0 || total_d == 0.0) {
        out.rescaled_by = total_s + total_d;
        return out;
    }
    if (total_s > total_d) {
        for (double& v : supply) v *= total_d / total_s;
        out.rescaled_by = total_s - total_d;
    } else if (total_d > total_s) {
        for (double& v : demand) v *= total_s / total_d;
        out.rescaled_by = total_d - total_s;
    }

    std::vector<std::vector<double>> cost(src.size(), std::vector<double>(dst.size()));
    for (std::size_t i = 0; i < src.size(); ++i)
        for (std::size_t j = 0; j < dst.size(); ++j) {
            const double d = distances[src[i]][dst[j]];
            cost[i][j] = d * d;
        }
    const auto flow = detail::transport_ssp(supply, demand, cost);
    for (std::size_t i = 0; i < src.size(); ++i)
        for (std::size_t j = 0; j < dst.size(); ++j) {
            out.flow[src[i]][dst[j]] = flow[i][j];
            out.objective += flow[i][j] * cost[i][j];
        }
    return out;
}

}  // namespace p2p
