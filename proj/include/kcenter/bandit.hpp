#pragma once
// Per-arm statistics: running-mean estimators, confidence-interval families,
// conjugate posteriors, KL utilities and heap-indexed per-stage aggregates.
//
// CI families:
//   iterated_log         alpha = sqrt(2*beta(t,d')/t), beta(t,d') = 2*log(125*log(1.12 t)/d')
//   iterated_log_calpha  alpha(u) = sqrt(C_a * log(1 + (1+log u) n^2/delta) / u)
//   kl_racing            U = max{q : t*kl(dhat,q) <= log(k1 t^a / d')}, L the min analogue;
//                        Bernoulli kl solved by bisection, Gaussian kl in closed form.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "kcenter/dataset.hpp"
#include "kcenter/rng.hpp"

namespace kc {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// KL divergences
// ---------------------------------------------------------------------------

// Bernoulli KL with the usual boundary conventions: kl(0,y) = -log(1-y),
// kl(1,y) = -log(y); +inf when y is on the boundary and x is interior.
inline double kl_bernoulli(double x, double y) {
    if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0)
        throw Error("kl_bernoulli: arguments must lie in [0,1]");
    if (x <= 0.0) return y >= 1.0 ? kInf : -std::log1p(-y);
    if (x >= 1.0) return y <= 0.0 ? kInf : -std::log(y);
    if (y <= 0.0 || y >= 1.0) return kInf;
    return x * std::log(x / y) + (1.0 - x) * std::log((1.0 - x) / (1.0 - y));
}

// Gaussian KL at common variance sigma2: (x-y)^2 / (2 sigma2).
inline double kl_gaussian(double x, double y, double sigma2 = 1.0) {
    if (sigma2 <= 0.0) return x == y ? 0.0 : kInf;
    const double d = x - y;
    return d * d / (2.0 * sigma2);
}

// ---------------------------------------------------------------------------
// Confidence intervals
// ---------------------------------------------------------------------------

// Iterated-logarithm half width (anytime-valid). The outer log's argument is
// floored at e, which keeps the width finite for adversarial (t, delta')
// combinations; for t >= 1 and delta' < 1 the floor is inactive.
inline double ci_iterated_log(std::uint64_t t, double delta_prime) {
    if (delta_prime <= 0.0 || delta_prime >= 1.0)
        throw Error("ci_iterated_log: delta' must lie in (0,1)");
    if (t == 0) return kInf;
    const double td = static_cast<double>(t);
    const double inner = 125.0 * std::log(1.12 * td) / delta_prime;
    const double beta = 2.0 * std::log(std::max(inner, std::exp(1.0)));
    return std::sqrt(2.0 * beta / td);
}

// The experiments' C_alpha variant. Same flooring rule.
inline double ci_calpha(std::uint64_t t, std::size_t n, double delta, double c_alpha) {
    if (t == 0) return kInf;
    const double u = static_cast<double>(t);
    const double arg = 1.0 + (1.0 + std::log(u)) * static_cast<double>(n) *
                                 static_cast<double>(n) / delta;
    return std::sqrt(c_alpha * std::log(std::max(arg, std::exp(1.0))) / u);
}

// log(k1 * t^a / delta'), the KL-racing exploration threshold.
inline double kl_racing_threshold(std::uint64_t t, double kl_alpha, double k1,
                                  double delta_prime) {
    return std::log(k1 * std::pow(static_cast<double>(t), kl_alpha) / delta_prime);
}

// Bernoulli KL-racing bounds by bisection to 1e-9; bounds clamp to {0,1} when
// the threshold exceeds the divergence at the boundary.
inline std::pair<double, double> ci_kl_racing_bernoulli(double dhat, std::uint64_t t,
                                                        double threshold) {
    if (dhat < 0.0 || dhat > 1.0) throw Error("ci_kl_racing_bernoulli: dhat not in [0,1]");
    if (t == 0) return {1.0, 0.0};
    const double td = static_cast<double>(t);
    auto solve = [&](double lo, double hi, bool upper) {
        // feasibility: t*kl(dhat, q) <= threshold
        const double boundary = upper ? hi : lo;
        if (td * kl_bernoulli(dhat, boundary) <= threshold) return boundary;
        for (int it = 0; it < 100 && hi - lo > 1e-9; ++it) {
            const double mid = 0.5 * (lo + hi);
            const bool feasible = td * kl_bernoulli(dhat, mid) <= threshold;
            if (upper) {
                (feasible ? lo : hi) = mid;
            } else {
                (feasible ? hi : lo) = mid;
            }
        }
        return upper ? lo : hi;  // innermost feasible endpoint
    };
    const double u = solve(dhat, 1.0, true);
    const double l = solve(0.0, dhat, false);
    return {u, l};
}

// Gaussian KL-racing half width in closed form: sqrt(2 sigma2 * threshold / t).
inline double ci_kl_racing_gaussian(std::uint64_t t, double threshold, double sigma2) {
    if (t == 0) return kInf;
    return std::sqrt(2.0 * sigma2 * std::max(threshold, 0.0) / static_cast<double>(t));
}

enum class CiFamily { iterated_log, iterated_log_calpha, kl_racing };

struct CiConfig {
    CiFamily family = CiFamily::iterated_log_calpha;
    double delta = 0.1;        // global confidence
    double delta_prime = 0.1;  // per-arm risk, delta / n^2
    std::size_t n = 2;         // population size for the C_alpha form
    double c_alpha = 0.1;
    double kl_alpha = 1.1;
    double k1 = 11.01;

    void validate() const {
        if (delta <= 0.0 || delta >= 1.0) throw Error("CiConfig: delta must lie in (0,1)");
        if (delta_prime <= 0.0 || delta_prime >= 1.0)
            throw Error("CiConfig: delta' must lie in (0,1)");
        if (family == CiFamily::kl_racing) {
            if (kl_alpha <= 1.0) throw Error("CiConfig: kl_racing needs alpha > 1");
            if (k1 <= 1.0 + 1.0 / (kl_alpha - 1.0))
                throw Error("CiConfig: kl_racing needs k1 > 1 + 1/(alpha-1)");
        }
    }
};

// ---------------------------------------------------------------------------
// Posteriors
// ---------------------------------------------------------------------------

struct BetaPosterior {
    double s = 1.0;
    double f = 1.0;

    void update(int reward) {
        if (reward != 0 && reward != 1) throw Error("BetaPosterior: reward must be binary");
        s += reward;
        f += 1 - reward;
    }
    double mean() const { return s / (s + f); }
    double sample(Rng& rng) const { return rng.beta(s, f); }
};

struct GaussianPosterior {
    double mu = 0.0;
    double var = 0.5;

    // a = 1/var_t, b = (t+1)/sigma2_noise; the update re-weights the prior
    // against the current running mean. sigma2_noise = 0 degenerates to a
    // point mass at the estimate.
    void update(double dhat_next, std::uint64_t t, double sigma2_noise) {
        if (sigma2_noise <= 0.0) {
            mu = dhat_next;
            var = std::numeric_limits<double>::min();
            return;
        }
        const double a = 1.0 / var;
        const double b = static_cast<double>(t + 1) / sigma2_noise;
        mu = (a * mu + b * dhat_next) / (a + b);
        var = 1.0 / (a + b);
    }
    double sample(Rng& rng) const { return rng.normal(mu, std::sqrt(var)); }
};

// ---------------------------------------------------------------------------
// Arm state
// ---------------------------------------------------------------------------

// Compensated running sum; the estimator must equal the arithmetic mean of
// the rewards to ~1e-10 even over 1e6-length sequences.
class KahanMean {
public:
    void add(double x) {
        const double y = x - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
        ++count_;
    }
    double value() const { return count_ == 0 ? 0.0 : sum_ / static_cast<double>(count_); }
    std::uint64_t count() const { return count_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
    std::uint64_t count_ = 0;
};

struct ArmState {
    KahanMean mean;
    double ucb = kInf;
    double lcb = -kInf;
    bool exact = false;
    double exact_value_ = 0.0;
    std::optional<BetaPosterior> beta;
    std::optional<GaussianPosterior> gauss;

    std::uint64_t pulls() const { return mean.count(); }
    double estimate() const { return exact ? exact_value_ : mean.value(); }
    bool sampled() const { return exact || mean.count() > 0; }

    double upper() const {
        if (!sampled()) throw Error("ArmState: confidence bound read before any pull");
        return ucb;
    }
    double lower() const {
        if (!sampled()) throw Error("ArmState: confidence bound read before any pull");
        return lcb;
    }

    // d_hat <- (t*d_hat + reward) / (t+1); identical recurrence for DS and NS.
    void update_estimate(double reward) {
        if (exact) throw Error("ArmState: update after exact fallback");
        mean.add(reward);
    }

    void set_exact(double value) {
        exact = true;
        exact_value_ = value;
        ucb = value;
        lcb = value;
    }
    double exact_value() const { return exact_value_; }

    // Recompute U/L from the configured CI family. For kl_racing the bounds
    // are Bernoulli unless a positive noise variance is supplied, in which
    // case the Gaussian closed form is used.
    void refresh_ci(const CiConfig& cfg, double gaussian_sigma2 = -1.0) {
        if (exact) return;
        const std::uint64_t t = pulls();
        if (t == 0) return;
        switch (cfg.family) {
            case CiFamily::iterated_log: {
                const double a = ci_iterated_log(t, cfg.delta_prime);
                ucb = estimate() + a;
                lcb = estimate() - a;
                break;
            }
            case CiFamily::iterated_log_calpha: {
                const double a = ci_calpha(t, cfg.n, cfg.delta, cfg.c_alpha);
                ucb = estimate() + a;
                lcb = estimate() - a;
                break;
            }
            case CiFamily::kl_racing: {
                const double thr = kl_racing_threshold(t, cfg.kl_alpha, cfg.k1, cfg.delta_prime);
                if (gaussian_sigma2 >= 0.0) {
                    const double a = ci_kl_racing_gaussian(t, thr, gaussian_sigma2);
                    ucb = estimate() + a;
                    lcb = estimate() - a;
                } else {
                    const double d = std::min(1.0, std::max(0.0, estimate()));
                    const auto [u, l] = ci_kl_racing_bernoulli(d, t, thr);
                    ucb = u;
                    lcb = l;
                }
                break;
            }
        }
    }
};

inline void beta_update(BetaPosterior& p, int reward) { p.update(reward); }
inline double beta_sample(const BetaPosterior& p, Rng& rng) { return p.sample(rng); }
inline void gaussian_update(GaussianPosterior& p, double dhat_next, std::uint64_t t,
                            double sigma2_noise) {
    p.update(dhat_next, t, sigma2_noise);
}
inline double gaussian_sample(const GaussianPosterior& p, Rng& rng) { return p.sample(rng); }

// ---------------------------------------------------------------------------
// Stage aggregates
// ---------------------------------------------------------------------------

// Arm storage for one run: slot s (order the center was added) x vertex v.
class ArmTable {
public:
    ArmTable(std::size_t n, std::size_t k) : n_(n), arms_(n * k) {}

    ArmState& at(std::size_t v, std::size_t slot) { return arms_[slot * n_ + v]; }
    const ArmState& at(std::size_t v, std::size_t slot) const { return arms_[slot * n_ + v]; }
    std::size_t n() const { return n_; }

private:
    std::size_t n_;
    std::vector<ArmState> arms_;
};

// Binary max-heap over vertex indices with a position map; ordering is by
// (key desc, index asc) so the top always matches the lowest-index argmax of
// a linear scan.
class IndexedMaxHeap {
public:
    explicit IndexedMaxHeap(std::size_t n) : key_(n, -kInf), pos_(n, npos) {}

    bool contains(std::size_t v) const { return pos_[v] != npos; }
    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }

    void insert(std::size_t v, double key) {
        if (contains(v)) throw Error("IndexedMaxHeap: duplicate insert");
        key_[v] = key;
        pos_[v] = heap_.size();
        heap_.push_back(v);
        sift_up(pos_[v]);
    }

    void update(std::size_t v, double key) {
        if (!contains(v)) throw Error("IndexedMaxHeap: update of absent element");
        key_[v] = key;
        if (!sift_up(pos_[v])) sift_down(pos_[v]);
    }

    void remove(std::size_t v) {
        if (!contains(v)) throw Error("IndexedMaxHeap: remove of absent element");
        const std::size_t i = pos_[v];
        swap_nodes(i, heap_.size() - 1);
        heap_.pop_back();
        pos_[v] = npos;
        if (i < heap_.size()) {
            if (!sift_up(i)) sift_down(i);
        }
    }

    std::size_t top() const {
        if (heap_.empty()) throw Error("IndexedMaxHeap: top of empty heap");
        return heap_[0];
    }
    double top_key() const { return key_[top()]; }

    // The element that would become top if the current top were removed;
    // for a binary heap it is the better of the root's children.
    std::size_t second() const {
        if (heap_.size() < 2) throw Error("IndexedMaxHeap: no second element");
        if (heap_.size() == 2) return heap_[1];
        return before(heap_[1], heap_[2]) ? heap_[1] : heap_[2];
    }
    double second_key() const { return key_[second()]; }

    double key_of(std::size_t v) const { return key_[v]; }

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    bool before(std::size_t a, std::size_t b) const {
        if (key_[a] != key_[b]) return key_[a] > key_[b];
        return a < b;
    }
    void swap_nodes(std::size_t i, std::size_t j) {
        std::swap(heap_[i], heap_[j]);
        pos_[heap_[i]] = i;
        pos_[heap_[j]] = j;
    }
    bool sift_up(std::size_t i) {
        bool moved = false;
        while (i > 0) {
            const std::size_t parent = (i - 1) / 2;
            if (!before(heap_[i], heap_[parent])) break;
            swap_nodes(i, parent);
            i = parent;
            moved = true;
        }
        return moved;
    }
    void sift_down(std::size_t i) {
        for (;;) {
            const std::size_t l = 2 * i + 1, r = 2 * i + 2;
            std::size_t best = i;
            if (l < heap_.size() && before(heap_[l], heap_[best])) best = l;
            if (r < heap_.size() && before(heap_[r], heap_[best])) best = r;
            if (best == i) return;
            swap_nodes(i, best);
            i = best;
        }
    }

    std::vector<double> key_;
    std::vector<std::size_t> pos_;
    std::vector<std::size_t> heap_;
};

// Per-stage aggregates over the active (non-center) vertices:
//   U(d_{v,S}) = min_s U(d_{v,s}),  L(d_{v,S}) = min_s L(d_{v,s}),
// maintained in two max-heaps. v^L is the top of the L-heap; the stopping
// rule compares it against the best rival U.
class StageState {
public:
    StageState(std::size_t n, std::size_t k)
        : n_(n), k_(k), active_(n, true), heap_u_(n), heap_l_(n) {}

    // Register a newly added center: the vertex leaves the active set.
    void add_center(std::size_t s) {
        centers_.push_back(s);
        if (active_[s]) {
            active_[s] = false;
            if (heap_u_.contains(s)) heap_u_.remove(s);
            if (heap_l_.contains(s)) heap_l_.remove(s);
        }
    }

    const CenterSet& centers() const { return centers_; }
    bool active(std::size_t v) const { return active_[v]; }
    std::size_t active_count() const { return heap_l_.size(); }

    // Recompute v's min-over-centers aggregates and reposition it.
    void refresh_vertex(std::size_t v, const ArmTable& arms) {
        double u = kInf, l = kInf;
        for (std::size_t slot = 0; slot < centers_.size(); ++slot) {
            const ArmState& a = arms.at(v, slot);
            u = std::min(u, a.upper());
            l = std::min(l, a.lower());
        }
        if (heap_u_.contains(v)) {
            heap_u_.update(v, u);
            heap_l_.update(v, l);
        } else {
            heap_u_.insert(v, u);
            heap_l_.insert(v, l);
        }
    }

    double agg_u(std::size_t v) const { return heap_u_.key_of(v); }
    double agg_l(std::size_t v) const { return heap_l_.key_of(v); }

    std::size_t v_l() const { return heap_l_.top(); }
    std::size_t argmax_u() const { return heap_u_.top(); }

    // max_{v' != v_l} U(d_{v',S}); -inf when v_l is the only active vertex.
    double rival_u() const {
        const std::size_t vl = v_l();
        if (heap_u_.size() < 2) return -kInf;
        if (heap_u_.top() != vl) return heap_u_.top_key();
        return heap_u_.second_key();
    }

    // Eq. (7): stop once L(d_{v^L,S}) > max_{v' != v^L} U(d_{v',S}).
    bool stop_condition() const { return heap_l_.top_key() > rival_u(); }

    // Stopping margin (rival U minus incumbent L); non-positive at stop.
    double margin() const { return rival_u() - heap_l_.top_key(); }

private:
    std::size_t n_;
    std::size_t k_;
    CenterSet centers_;
    std::vector<bool> active_;
    IndexedMaxHeap heap_u_;
    IndexedMaxHeap heap_l_;
};

}  // namespace kc
