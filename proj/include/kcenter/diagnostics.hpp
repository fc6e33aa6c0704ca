#pragma once
// Instance-hardness calculators: the per-arm gap terms
//
//   m^p_{v,s_i} = max{ d_{v,s_i} - d_{v,S_p},  d_{V,S_p} - d_{v,s_i} },
//
// the DS-UCB query-complexity upper bound built from them (with the
// min-with-2m clamp), the change-of-measure lower bound, the smallest-u
// iterated-log fact, and the Track-and-Stop characteristic-time sum. All pure
// functions of a dataset and its greedy trajectory.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <tuple>
#include <vector>

#include "kcenter/algorithms.hpp"
#include "kcenter/bandit.hpp"
#include "kcenter/dataset.hpp"
#include "kcenter/maximin.hpp"

namespace kc {

struct GreedyTrajectory {
    CenterSet centers;                     // s_1 .. s_k
    std::vector<double> bottleneck_values;  // d_{V,S_p}, p = 1..k-1
    // nearest_center[p-1][v]: index into centers of v's nearest center in S_p
    std::vector<std::vector<std::size_t>> nearest_center;
    std::vector<double> nearest_distance_flat;  // d_{v,S_p}, indexed (p-1)*n + v
    std::size_t n = 0;

    double nearest_distance(std::size_t p, std::size_t v) const {
        return nearest_distance_flat[(p - 1) * n + v];
    }
};

template <DistanceSource S>
GreedyTrajectory greedy_trajectory(const S& src, std::size_t k, std::size_t first_center = 0) {
    const std::size_t n = src.size();
    if (k < 2 || k > n) throw Error("greedy_trajectory: need 2 <= k <= n");
    GreedyTrajectory traj;
    traj.n = n;
    traj.centers.push_back(first_center);
    for (std::size_t p = 1; p < k; ++p) {
        std::vector<std::size_t> nearest(n, 0);
        std::vector<double> ndist(n, 0.0);
        for (std::size_t v = 0; v < n; ++v) {
            double dmin = kInf;
            std::size_t arg = 0;
            for (std::size_t i = 0; i < traj.centers.size(); ++i) {
                const double d = src.distance(v, traj.centers[i]);
                if (d < dmin) {
                    dmin = d;
                    arg = i;
                }
            }
            nearest[v] = arg;
            ndist[v] = dmin;
        }
        traj.nearest_center.push_back(std::move(nearest));
        traj.nearest_distance_flat.insert(traj.nearest_distance_flat.end(), ndist.begin(),
                                          ndist.end());
        const auto [v_star, value] = bottleneck(src, traj.centers);
        traj.bottleneck_values.push_back(value);
        traj.centers.push_back(v_star);
    }
    return traj;
}

// Key (v, i, p): arm between point v and center s_i, evaluated at stage p.
struct HardnessEntry {
    std::size_t v = 0;
    std::size_t i = 0;  // center ordinal, 1-based
    std::size_t p = 0;  // stage, 1-based
    double value = 0.0;
};

// m^p_{v,s_i} for every non-center v with i <= p <= k-1, and for every center
// pair (s_i, s_j), j < i, with j <= p <= i-1.
template <DistanceSource S>
std::vector<HardnessEntry> hardness_terms(const GreedyTrajectory& traj, const S& src) {
    const std::size_t n = src.size();
    const std::size_t k = traj.centers.size();
    std::vector<bool> is_center(n, false);
    for (std::size_t s : traj.centers) is_center[s] = true;
    std::vector<HardnessEntry> out;
    auto m_term = [&](std::size_t v, std::size_t i, std::size_t p) {
        const double d_vs = src.distance(v, traj.centers[i - 1]);
        const double d_vS = traj.nearest_distance(p, v);
        const double d_VS = traj.bottleneck_values[p - 1];
        return std::max(d_vs - d_vS, d_VS - d_vs);
    };
    for (std::size_t v = 0; v < n; ++v) {
        if (is_center[v]) continue;
        for (std::size_t i = 1; i <= k; ++i)
            for (std::size_t p = std::max<std::size_t>(i, 1); p + 1 <= k; ++p)
                out.push_back({v, i, p, m_term(v, i, p)});
    }
    for (std::size_t i = 2; i <= k; ++i) {
        const std::size_t v = traj.centers[i - 1];
        for (std::size_t j = 1; j < i; ++j)
            for (std::size_t p = j; p <= i - 1; ++p)
                out.push_back({v, j, p, m_term(v, j, p)});
    }
    return out;
}

// One summand of the DS-UCB bound: c log(n^2/d) log[2 log(2/m)] / m^2,
// clamped at 2m_dims. A zero gap clamps to the cap, never divides by zero.
inline double dsucb_bound_term(double m_term, std::size_t n, std::size_t m_dims, double delta,
                               double c) {
    const double cap = 2.0 * static_cast<double>(m_dims);
    if (m_term <= 0.0) return cap;
    const double gap = std::min(m_term, 1.0);
    const double loglog = std::log(2.0 * std::log(2.0 / gap));
    const double raw = c * std::log(static_cast<double>(n) * static_cast<double>(n) / delta) *
                       std::max(loglog, 0.0) / (gap * gap);
    return std::min(raw, cap);
}

// Theorem-style plug-in bound: for each arm, the max over stages of the
// per-stage term (worst stage dominates because statistics persist).
inline double dsucb_upper_bound(const std::vector<HardnessEntry>& terms, std::size_t n,
                                std::size_t m_dims, double delta, double c = 4.0) {
    std::map<std::pair<std::size_t, std::size_t>, double> worst;  // (v, i) -> max over p
    for (const auto& e : terms) {
        const double t = dsucb_bound_term(e.value, n, m_dims, delta, c);
        auto& slot = worst[{e.v, e.i}];
        slot = std::max(slot, t);
    }
    double total = 0.0;
    for (const auto& [key, t] : worst) total += t;
    return total;
}

// Change-of-measure lower bound on the expected queries of any stage-wise
// mimicking algorithm on a +-1/2-coordinate dataset. Inner kl maxima that are
// infinite contribute ratio 0 (that alternative is free); degenerate zero-kl
// alternatives (exact distance ties, excluded by the uniqueness assumption)
// are skipped the same way.
template <DistanceSource S>
double lower_bound(const GreedyTrajectory& traj, const S& src, double delta) {
    const std::size_t n = src.size();
    const std::size_t k = traj.centers.size();
    if (delta <= 0.0 || delta >= 1.0) throw Error("lower_bound: delta in (0,1)");
    const double log_term = std::log(1.0 / (2.4 * delta));
    if (log_term <= 0.0) return 0.0;
    auto klb = [](double x, double y) {
        auto clamp = [](double v) { return std::min(1.0 - 1e-12, std::max(1e-12, v)); };
        return kl_bernoulli(clamp(x), clamp(y));
    };
    std::vector<bool> is_center(n, false);
    for (std::size_t s : traj.centers) is_center[s] = true;

    double first_sum = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        if (is_center[v]) continue;
        double best_over_p = 0.0;
        for (std::size_t p = 1; p + 1 <= k; ++p) {
            const std::size_t next_center = traj.centers[p];
            double max_kl = 0.0;
            for (std::size_t i = 0; i < p; ++i) {
                const std::size_t s = traj.centers[i];
                max_kl = std::max(max_kl, klb(src.distance(v, s), src.distance(next_center, s)));
            }
            if (max_kl > 0.0 && std::isfinite(max_kl))
                best_over_p = std::max(best_over_p, log_term / max_kl);
        }
        first_sum += best_over_p;
    }

    double second_sum = 0.0;
    for (std::size_t p = 1; p + 1 <= k; ++p) {
        const std::size_t next_center = traj.centers[p];
        double best_over_v = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            bool in_spp1 = false;
            for (std::size_t i = 0; i <= p; ++i) in_spp1 |= (traj.centers[i] == v);
            if (in_spp1) continue;
            double max_kl = 0.0;
            for (std::size_t i = 0; i < p; ++i) {
                const std::size_t s = traj.centers[i];
                max_kl = std::max(max_kl, klb(src.distance(next_center, s), src.distance(v, s)));
            }
            if (max_kl > 0.0 && std::isfinite(max_kl))
                best_over_v = std::max(best_over_v, log_term / max_kl);
        }
        second_sum += best_over_v;
    }
    return 0.5 * (first_sum + second_sum);
}

// Closed form of the smallest-u fact: T <= c log(1/d') log(2 log(2/Delta)) / Delta^2.
inline double fact_bound_closed(double gap, double delta_prime, double c = 4.0) {
    if (gap <= 0.0 || gap >= 2.0) throw Error("fact_bound: gap in (0,2)");
    if (delta_prime <= 0.0 || delta_prime >= 1.0) throw Error("fact_bound: delta' in (0,1)");
    const double loglog = std::max(std::log(2.0 * std::log(2.0 / gap)), 0.0);
    return c * std::log(1.0 / delta_prime) * loglog / (gap * gap);
}

// Operational version: the smallest u with alpha(u, d') <= Delta/8, found by
// doubling then bisection (alpha is decreasing for u >= 2).
inline std::uint64_t fact_bound_search(double gap, double delta_prime) {
    if (gap <= 0.0) throw Error("fact_bound_search: gap must be positive");
    const double target = gap / 8.0;
    if (ci_iterated_log(1, delta_prime) <= target) return 1;
    std::uint64_t hi = 2;
    while (ci_iterated_log(hi, delta_prime) > target) {
        if (hi > (std::uint64_t{1} << 60)) throw Error("fact_bound_search: out of range");
        hi *= 2;
    }
    std::uint64_t lo = hi / 2;
    while (lo + 1 < hi) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (ci_iterated_log(mid, delta_prime) <= target) hi = mid;
        else lo = mid;
    }
    return hi;
}

// Per-stage distance matrices d^p (remaining vertices x current centers) from
// the greedy trajectory, rescaled to unit variance, fed to the optimizer:
// sum_p gamma * T*(d^p).
template <DistanceSource S>
double tands_bound(const GreedyTrajectory& traj, const S& src, double sigma2, double gamma,
                   const AscentConfig& ascent = {.iterations = 20000}) {
    if (gamma < 1.0 || gamma > std::exp(1.0) / 2.0)
        throw Error("tands_bound: gamma must lie in [1, e/2]");
    if (sigma2 <= 0.0) throw Error("tands_bound: sigma2 must be positive");
    const std::size_t n = src.size();
    const std::size_t k = traj.centers.size();
    const double sd = std::sqrt(sigma2);
    double total = 0.0;
    for (std::size_t p = 1; p + 1 <= k; ++p) {
        std::vector<std::size_t> rest;
        for (std::size_t v = 0; v < n; ++v) {
            bool in_s = false;
            for (std::size_t i = 0; i < p; ++i) in_s |= (traj.centers[i] == v);
            if (!in_s) rest.push_back(v);
        }
        std::vector<double> mu;
        mu.reserve(rest.size() * p);
        for (std::size_t v : rest)
            for (std::size_t i = 0; i < p; ++i) mu.push_back(src.distance(v, traj.centers[i]) / sd);
        const MaximinInstance inst(rest.size(), p, std::move(mu));
        total += gamma * t_star(inst, ascent).t_star;
    }
    return total;
}

struct HardnessReport {
    std::vector<HardnessEntry> m_terms;
    double ub = 0.0;
    double lb = 0.0;
    double tstar_sum = 0.0;
};

template <DistanceSource S>
HardnessReport hardness_report(const S& src, std::size_t k, double delta, double sigma2,
                               double gamma, std::size_t first_center = 0, double c = 4.0,
                               bool with_tstar = true) {
    const GreedyTrajectory traj = greedy_trajectory(src, k, first_center);
    HardnessReport rep;
    rep.m_terms = hardness_terms(traj, src);
    std::size_t m_dims = 1;
    if constexpr (std::is_same_v<S, PointSet>) m_dims = src.dims();
    rep.ub = dsucb_upper_bound(rep.m_terms, src.size(), m_dims, delta, c);
    rep.lb = lower_bound(traj, src, delta);
    if (with_tstar) rep.tstar_sum = tands_bound(traj, src, sigma2, gamma);
    return rep;
}

// Rademacher dataset: every coordinate +-1/2 (the lower bound's model class).
inline PointSet generate_rademacher(std::size_t n, std::size_t m, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x7261 /* "ra" */));
    std::vector<double> raw(n * m);
    for (double& x : raw) x = rng.bernoulli(0.5) ? 0.5 : -0.5;
    return PointSet(std::move(raw), n, m);
}

}  // namespace kc
