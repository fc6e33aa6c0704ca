#pragma once
// Maximin-bandit weight optimization.
//
// For an a x b matrix of unit-variance Gaussian arm means mu (boxes x arms),
// the characteristic time T*(mu) satisfies
//
//   T*(mu)^-1 = max_{w in restricted simplex} f(w),
//   f(w) = min_{i != 1, j}  w_{1,j} kl_g(mu_{1,j}, lam) + w_{i,1} kl_g(mu_{i,1}, lam),
//   lam  = (mu_{1,j} w_{1,j} + mu_{i,1} w_{i,1}) / (w_{1,j} + w_{i,1}),
//
// over weights supported on box 1's arms and each rival box's minimum-mean
// arm (after canonical relabeling). f is concave; l*(w) = kl_g(mu, lambda^*)
// is a supergradient, and mirror ascent with the negative-entropy map at
// learning rate (1/L) sqrt(2 log(a+b-1)/Z) has suboptimality at most
// L sqrt(2 log(a+b-1)/Z) for the iterate average.
//
// Non-unit noise variance is handled by the caller rescaling means by 1/sigma.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "kcenter/bandit.hpp"
#include "kcenter/dataset.hpp"

namespace kc {

struct MaximinInstance {
    std::size_t boxes = 0;
    std::size_t arms = 0;
    std::vector<double> mu;  // row-major boxes x arms

    MaximinInstance() = default;
    MaximinInstance(std::size_t a, std::size_t b, std::vector<double> means)
        : boxes(a), arms(b), mu(std::move(means)) {
        if (boxes < 2 || arms < 1) throw Error("MaximinInstance: need a >= 2, b >= 1");
        if (mu.size() != boxes * arms) throw Error("MaximinInstance: size mismatch");
        for (double x : mu)
            if (!std::isfinite(x)) throw Error("MaximinInstance: non-finite mean");
    }

    double at(std::size_t i, std::size_t j) const { return mu[i * arms + j]; }
    double& at(std::size_t i, std::size_t j) { return mu[i * arms + j]; }

    double box_score(std::size_t i) const {
        double s = kInf;
        for (std::size_t j = 0; j < arms; ++j) s = std::min(s, at(i, j));
        return s;
    }
    std::size_t maximin_box() const {
        std::size_t best = 0;
        double bs = box_score(0);
        for (std::size_t i = 1; i < boxes; ++i) {
            const double s = box_score(i);
            if (s > bs) {
                bs = s;
                best = i;
            }
        }
        return best;
    }
};

struct WeightMatrix {
    std::size_t boxes = 0;
    std::size_t arms = 0;
    std::vector<double> w;

    WeightMatrix() = default;
    WeightMatrix(std::size_t a, std::size_t b) : boxes(a), arms(b), w(a * b, 0.0) {}

    double at(std::size_t i, std::size_t j) const { return w[i * arms + j]; }
    double& at(std::size_t i, std::size_t j) { return w[i * arms + j]; }
    double sum() const { return std::accumulate(w.begin(), w.end(), 0.0); }
};

// Canonical relabeling: boxes sorted by descending min-mean (maximin box
// first), arms ascending within each box; ties by original index. box_perm[i]
// and arm_perm[i][j] give the original coordinates of canonical (i,j).
struct CanonicalInstance {
    MaximinInstance inst;
    std::vector<std::size_t> box_perm;
    std::vector<std::vector<std::size_t>> arm_perm;

    WeightMatrix unpermute(const WeightMatrix& canon) const {
        WeightMatrix out(inst.boxes, inst.arms);
        for (std::size_t i = 0; i < inst.boxes; ++i)
            for (std::size_t j = 0; j < inst.arms; ++j)
                out.at(box_perm[i], arm_perm[i][j]) = canon.at(i, j);
        return out;
    }
};

inline CanonicalInstance canonicalize(const MaximinInstance& in) {
    CanonicalInstance out;
    out.box_perm.resize(in.boxes);
    std::iota(out.box_perm.begin(), out.box_perm.end(), std::size_t{0});
    std::stable_sort(out.box_perm.begin(), out.box_perm.end(),
                     [&](std::size_t a, std::size_t b) {
                         const double sa = in.box_score(a), sb = in.box_score(b);
                         if (sa != sb) return sa > sb;
                         return a < b;
                     });
    out.arm_perm.resize(in.boxes);
    std::vector<double> mu(in.boxes * in.arms);
    for (std::size_t i = 0; i < in.boxes; ++i) {
        const std::size_t src_box = out.box_perm[i];
        auto& perm = out.arm_perm[i];
        perm.resize(in.arms);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
            const double ma = in.at(src_box, a), mb = in.at(src_box, b);
            if (ma != mb) return ma < mb;
            return a < b;
        });
        for (std::size_t j = 0; j < in.arms; ++j) mu[i * in.arms + j] = in.at(src_box, perm[j]);
    }
    out.inst = MaximinInstance(in.boxes, in.arms, std::move(mu));
    return out;
}

struct ObjectiveValue {
    double value = 0.0;
    std::size_t box = 0;  // binding rival box i (canonical labels)
    std::size_t arm = 0;  // binding box-1 arm j
};

namespace detail {

inline double pair_term(const MaximinInstance& mu, const WeightMatrix& w, std::size_t i,
                        std::size_t j, double* lambda_out = nullptr) {
    const double w1 = w.at(0, j), wi = w.at(i, 0);
    const double m1 = mu.at(0, j), mi = mu.at(i, 0);
    double lambda;
    if (w1 + wi <= 0.0) {
        lambda = m1;  // limit value: the term vanishes
    } else {
        lambda = (m1 * w1 + mi * wi) / (w1 + wi);
    }
    if (lambda_out) *lambda_out = lambda;
    return w1 * kl_gaussian(m1, lambda) + wi * kl_gaussian(mi, lambda);
}

inline void check_support(const WeightMatrix& w) {
    for (std::size_t i = 1; i < w.boxes; ++i)
        for (std::size_t j = 1; j < w.arms; ++j)
            if (w.at(i, j) != 0.0) throw Error("weights leave the restricted support");
}

}  // namespace detail

// f(w) on a canonical instance, with the minimizing (i, j) pair.
inline ObjectiveValue objective_f(const MaximinInstance& canon, const WeightMatrix& w) {
    if (w.boxes != canon.boxes || w.arms != canon.arms)
        throw Error("objective_f: shape mismatch");
    detail::check_support(w);
    ObjectiveValue best;
    best.value = kInf;
    for (std::size_t i = 1; i < canon.boxes; ++i) {
        for (std::size_t j = 0; j < canon.arms; ++j) {
            const double v = detail::pair_term(canon, w, i, j);
            if (v < best.value) {
                best.value = v;
                best.box = i;
                best.arm = j;
            }
        }
    }
    return best;
}

// l*(w): kl_g(mu, lambda^{i*,j*}) where lambda substitutes the binding pair's
// weighted mean at positions (1,j*) and (i*,1); zero elsewhere.
inline WeightMatrix supergradient(const MaximinInstance& canon, const WeightMatrix& w) {
    const ObjectiveValue ov = objective_f(canon, w);
    double lambda;
    detail::pair_term(canon, w, ov.box, ov.arm, &lambda);
    WeightMatrix g(canon.boxes, canon.arms);
    g.at(0, ov.arm) = kl_gaussian(canon.at(0, ov.arm), lambda);
    g.at(ov.box, 0) = kl_gaussian(canon.at(ov.box, 0), lambda);
    return g;
}

struct AscentConfig {
    std::size_t iterations = 100000;
    std::optional<double> lipschitz;          // default: max pairwise kl_g + 1e-6
    std::optional<WeightMatrix> warm_start;   // canonical coordinates
};

struct AscentResult {
    WeightMatrix omega;  // iterate average
    double f_value = 0.0;
    double t_star = kInf;
};

inline double default_lipschitz(const MaximinInstance& mu) {
    double mx = 0.0;
    for (double x : mu.mu)
        for (double y : mu.mu) mx = std::max(mx, kl_gaussian(x, y));
    return mx + 1e-6;
}

// Mirror gradient ascent with the negative-entropy map on the restricted
// simplex; support zeros are preserved exactly through all iterations.
inline AscentResult mirror_ascent(const MaximinInstance& canon, const AscentConfig& cfg) {
    if (cfg.iterations == 0) throw Error("mirror_ascent: need at least one iteration");
    const std::size_t a = canon.boxes, b = canon.arms;
    const double support = static_cast<double>(a + b - 1);
    const double lipschitz = cfg.lipschitz.value_or(default_lipschitz(canon));
    if (lipschitz <= 0.0) throw Error("mirror_ascent: Lipschitz constant must be positive");
    const double eta =
        (1.0 / lipschitz) * std::sqrt(2.0 * std::log(support) / static_cast<double>(cfg.iterations));

    WeightMatrix w(a, b);
    if (cfg.warm_start) {
        w = *cfg.warm_start;
        detail::check_support(w);
        const double s = w.sum();
        if (!(s > 0.0) || !std::isfinite(s)) throw Error("mirror_ascent: bad warm start");
        for (double& x : w.w) x /= s;
    } else {
        for (std::size_t j = 0; j < b; ++j) w.at(0, j) = 1.0 / support;
        for (std::size_t i = 1; i < a; ++i) w.at(i, 0) = 1.0 / support;
    }

    WeightMatrix avg(a, b);
    for (std::size_t z = 0; z < cfg.iterations; ++z) {
        for (std::size_t t = 0; t < w.w.size(); ++t) avg.w[t] += w.w[t];
        const WeightMatrix g = supergradient(canon, w);
        double sum = 0.0;
        for (std::size_t t = 0; t < w.w.size(); ++t) {
            w.w[t] *= std::exp(eta * g.w[t]);
            sum += w.w[t];
        }
        if (!std::isfinite(sum) || sum <= 0.0)
            throw Error("mirror_ascent: non-finite iterate at iteration " + std::to_string(z));
        for (double& x : w.w) x /= sum;
    }
    for (double& x : avg.w) x /= static_cast<double>(cfg.iterations);

    AscentResult out;
    out.omega = std::move(avg);
    out.f_value = objective_f(canon, out.omega).value;
    out.t_star = out.f_value > 0.0 ? 1.0 / out.f_value : kInf;
    return out;
}

// Canonicalize, optimize, un-permute. The returned omega is in the original
// labeling of inst.
inline AscentResult t_star(const MaximinInstance& inst, const AscentConfig& cfg = {}) {
    const CanonicalInstance canon = canonicalize(inst);
    AscentResult res = mirror_ascent(canon.inst, cfg);
    res.omega = canon.unpermute(res.omega);
    return res;
}

}  // namespace kc
