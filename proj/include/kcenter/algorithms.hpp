#pragma once
// Solvers for the k-center problem under query oracles.
//
//   greedy_exact     farthest-first traversal on exact distances (the
//                    baseline every adaptive scheme must mimic); the ledger
//                    charges the naive O(nmk) cost model.
//   random_sampling  stage-wise random arm pulls with the Eq.-style UCB/LCB
//                    stopping rule.
//   ds_ucb           UCB vertex choice, LCB center choice, MaxPulls exact
//                    fallback (dimension-sampling oracle).
//   ds_ts            DS-UCB skeleton with the center chosen by a Thompson /
//                    LCB sampling mixture over Beta posteriors (mixing z).
//   ns_ts            two-vertex variant for the noisy-distance oracle with
//                    Gaussian (or Beta, on Bernoulli sources) posteriors.
//   ns_tands         per-stage D-Track-and-Stop: forced exploration, tracking
//                    of the maximin weights, GLR stopping rule.
//
// Every stage starts by querying each remaining vertex once against the
// newest center. Arm statistics persist across stages. All argmax/argmin ties
// break toward the lowest index, which keeps runs reproducible.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kcenter/bandit.hpp"
#include "kcenter/dataset.hpp"
#include "kcenter/maximin.hpp"
#include "kcenter/oracles.hpp"
#include "kcenter/rng.hpp"

namespace kc {

struct RunConfig {
    std::size_t k = 2;
    double delta = 0.1;
    // Index of the first center; nullopt draws it uniformly from the run RNG.
    std::optional<std::size_t> first_center = 0;
    // CI family; when unset each algorithm picks its conventional default
    // (C_alpha for DS-UCB and random sampling on DS, KL racing for the rest).
    std::optional<CiFamily> ci_family;
    double c_alpha = 0.1;
    double kl_alpha = 1.1;
    double k1 = 11.01;
    double z = 0.0;  // TS / LCB sampling mixture
    std::uint64_t seed = 0;
    // DS pull cap per arm; defaults to m. 0 forces the exact fallback on
    // first selection, which degenerates DS-UCB to the naive greedy (test hook).
    std::optional<std::uint64_t> max_pulls;
    // NS-TandS knobs.
    double tands_beta_coeff = 2.0;  // beta(t, d') = log(coeff * t / d')
    std::size_t recompute_period = 100;
    std::size_t ascent_iterations = 20000;
    bool global_forced_exploration = false;  // sqrt(t) - nk/2 instead of stage-local arm count
    std::optional<double> tands_sigma2;      // GLR variance; defaults per oracle model
    // Safety valve: a stage exceeding this many rounds is a run failure.
    std::size_t max_rounds_per_stage = 10000000;
    // Observation hook for the stopping margin, called once per round.
    std::function<void(std::size_t stage, std::uint64_t round, double margin)> margin_hook;
};

struct StageDiagnostics {
    std::uint64_t rounds = 0;
    std::uint64_t queries = 0;
    double final_margin = 0.0;
};

struct RunResult {
    CenterSet centers;
    QueryLedger ledger;
    std::vector<StageDiagnostics> stages;
    std::optional<bool> matched_greedy;
};

// ---------------------------------------------------------------------------
// Exact greedy baseline
// ---------------------------------------------------------------------------

// Farthest-first traversal with exact distances. The ledger charges the
// naive cost model: m queries per (vertex, newest center) pair per stage for
// point sets (one query per pair for matrix sources).
template <DistanceSource S>
RunResult greedy_exact(const S& src, std::size_t k, std::size_t first_center,
                       std::uint64_t query_cost_per_pair) {
    const std::size_t n = src.size();
    if (k == 0 || k > n) throw Error("greedy_exact: need 1 <= k <= n");
    if (first_center >= n) throw Error("greedy_exact: first center out of range");
    RunResult res;
    res.centers.push_back(first_center);
    while (res.centers.size() < k) {
        const std::size_t newest = res.centers.back();
        std::uint64_t stage_queries = 0;
        for (std::size_t v = 0; v < n; ++v) {
            if (std::find(res.centers.begin(), res.centers.end(), v) != res.centers.end())
                continue;
            const std::uint64_t a = std::min(v, newest), b = std::max(v, newest);
            res.ledger.per_arm[a * n + b] += query_cost_per_pair;
            stage_queries += query_cost_per_pair;
        }
        res.ledger.total += stage_queries;
        res.ledger.per_stage.push_back(stage_queries);
        const auto [v_star, value] = bottleneck(src, res.centers);
        res.centers.push_back(v_star);
        StageDiagnostics diag;
        diag.queries = stage_queries;
        diag.final_margin = value;
        res.stages.push_back(diag);
    }
    return res;
}

inline RunResult greedy_exact(const PointSet& ps, std::size_t k, std::size_t first_center = 0) {
    return greedy_exact(ps, k, first_center, ps.dims());
}
inline RunResult greedy_exact(const DistanceMatrix& dm, std::size_t k,
                              std::size_t first_center = 0) {
    return greedy_exact(dm, k, first_center, 1);
}

// ---------------------------------------------------------------------------
// Shared CI-driven stage machinery
// ---------------------------------------------------------------------------

namespace detail {

enum class RewardPath {
    ds_value,      // DS random-dimension value updates the estimate
    ds_bernoulli,  // DS value updates the estimate, its Bernoulli draw the Beta posterior
    ns_gaussian,   // noisy distance updates estimate and Gaussian posterior
    bernoulli,     // Bernoulli bit updates estimate and Beta posterior
};

struct BanditRun {
    OracleSession& session;
    const RunConfig& cfg;
    RewardPath path;
    CiConfig ci;
    double gaussian_ci_sigma2 = -1.0;  // >= 0 switches KL racing to the Gaussian form
    std::uint64_t max_pulls = 0;       // 0 means uncapped unless capped flag set
    bool capped = false;
    ArmTable arms;
    StageState stage;
    Rng rng;

    BanditRun(OracleSession& s, const RunConfig& c, RewardPath p, CiFamily family)
        : session(s),
          cfg(c),
          path(p),
          arms(s.size(), c.k),
          stage(s.size(), c.k),
          rng(mix_seed(c.seed, 4)) {
        const std::size_t n = s.size();
        ci.family = family;
        ci.delta = c.delta;
        ci.delta_prime = c.delta / (static_cast<double>(n) * static_cast<double>(n));
        ci.n = n;
        ci.c_alpha = c.c_alpha;
        ci.kl_alpha = c.kl_alpha;
        ci.k1 = c.k1;
        ci.validate();
        if (path == RewardPath::ns_gaussian && family == CiFamily::kl_racing)
            gaussian_ci_sigma2 = s.noise_sigma2();
        if (path == RewardPath::ds_value || path == RewardPath::ds_bernoulli) {
            capped = true;
            max_pulls = c.max_pulls.value_or(s.dims());
        }
    }

    std::size_t n() const { return session.size(); }
    std::size_t slots() const { return stage.centers().size(); }

    std::size_t resolve_first_center() {
        if (cfg.first_center) {
            if (*cfg.first_center >= n()) throw Error("first center out of range");
            return *cfg.first_center;
        }
        return rng.uniform_index(n());
    }

    bool arm_open(std::size_t v, std::size_t slot) const {
        return !arms.at(v, slot).exact;
    }
    bool vertex_open(std::size_t v) const {
        for (std::size_t slot = 0; slot < slots(); ++slot)
            if (arm_open(v, slot)) return true;
        return false;
    }
    bool any_open() const {
        for (std::size_t v = 0; v < n(); ++v)
            if (stage.active(v) && vertex_open(v)) return true;
        return false;
    }

    // One oracle query on arm (v, slot) plus all bookkeeping.
    void pull(std::size_t v, std::size_t slot) {
        ArmState& arm = arms.at(v, slot);
        const std::size_t s = stage.centers()[slot];
        switch (path) {
            case RewardPath::ds_value:
                arm.update_estimate(session.query_ds_random_dim(v, s));
                break;
            case RewardPath::ds_bernoulli: {
                const BernoulliDraw d = session.query_ds_bernoulli(v, s);
                arm.update_estimate(d.value);
                if (!arm.beta) arm.beta.emplace();
                arm.beta->update(d.bit);
                break;
            }
            case RewardPath::ns_gaussian: {
                const double r = session.query_ns(v, s);
                arm.update_estimate(r);
                if (!arm.gauss) arm.gauss.emplace();
                arm.gauss->update(arm.estimate(), arm.pulls() - 1, session.noise_sigma2());
                break;
            }
            case RewardPath::bernoulli: {
                const int bit = session.query_bernoulli(v, s);
                arm.update_estimate(static_cast<double>(bit));
                if (!arm.beta) arm.beta.emplace();
                arm.beta->update(bit);
                break;
            }
        }
        arm.refresh_ci(ci, gaussian_ci_sigma2);
        stage.refresh_vertex(v, arms);
    }

    // MaxPulls fallback: compute the distance exactly (m charged queries).
    void fallback(std::size_t v, std::size_t slot) {
        ArmState& arm = arms.at(v, slot);
        const std::size_t s = stage.centers()[slot];
        arm.set_exact(session.query_exact_ds(v, s));
        stage.refresh_vertex(v, arms);
    }

    // Pull if below the cap, exact fallback otherwise.
    void pull_or_fallback(std::size_t v, std::size_t slot) {
        if (capped && arms.at(v, slot).pulls() >= max_pulls) {
            fallback(v, slot);
        } else {
            pull(v, slot);
        }
    }

    // Stage initialization: one query per remaining vertex against the newest
    // center (the cap cannot bind here; a fresh arm has zero pulls unless the
    // test hook zeroed MaxPulls, in which case the query still stands).
    void init_stage() {
        const std::size_t newest_slot = slots() - 1;
        for (std::size_t v = 0; v < n(); ++v) {
            if (!stage.active(v)) continue;
            pull(v, newest_slot);
        }
    }

    // Highest aggregate UCB among vertices that still have an open arm. Falls
    // back to a linear scan when the heap top is closed (rare).
    std::optional<std::size_t> select_vertex_ucb() {
        const std::size_t top = stage.argmax_u();
        if (vertex_open(top)) return top;
        std::optional<std::size_t> best;
        for (std::size_t v = 0; v < n(); ++v) {
            if (!stage.active(v) || !vertex_open(v)) continue;
            if (!best || stage.agg_u(v) > stage.agg_u(*best)) best = v;
        }
        return best;
    }

    // argmin L(d_{v,s'}) over open arms; ties toward the lowest center index.
    std::size_t select_center_lcb(std::size_t v) {
        std::optional<std::size_t> best;
        for (std::size_t slot = 0; slot < slots(); ++slot) {
            if (!arm_open(v, slot)) continue;
            if (!best) {
                best = slot;
                continue;
            }
            const double l = arms.at(v, slot).lower(), bl = arms.at(v, *best).lower();
            const std::size_t c = stage.centers()[slot], bc = stage.centers()[*best];
            if (l < bl || (l == bl && c < bc)) best = slot;
        }
        if (!best) throw Error("select_center_lcb: no open arm");
        return *best;
    }

    // z_t = Ber(z); Thompson sample when z_t = 1, LCB otherwise. Posterior
    // draws are taken only when actually used so that z = 0 consumes no
    // randomness and coincides with pure LCB sampling.
    std::size_t select_center_mixture(std::size_t v) {
        bool ts = false;
        if (cfg.z >= 1.0) ts = true;
        else if (cfg.z > 0.0) ts = rng.bernoulli(cfg.z);
        if (!ts) return select_center_lcb(v);
        std::optional<std::size_t> best;
        double best_theta = kInf;
        for (std::size_t slot = 0; slot < slots(); ++slot) {
            if (!arm_open(v, slot)) continue;
            const ArmState& arm = arms.at(v, slot);
            double theta;
            if (arm.beta) theta = arm.beta->sample(rng);
            else if (arm.gauss) theta = arm.gauss->sample(rng);
            else theta = arm.estimate();
            const std::size_t c = stage.centers()[slot];
            if (!best || theta < best_theta ||
                (theta == best_theta && c < stage.centers()[*best])) {
                best = slot;
                best_theta = theta;
            }
        }
        if (!best) throw Error("select_center_mixture: no open arm");
        return *best;
    }

    // Ends the stage: the incumbent v^L joins the center set.
    std::size_t promote_incumbent() { return stage.v_l(); }
};

// Center-selection rule for the DS-style single-vertex loop.
enum class CenterRule { lcb, mixture, random_arm };

inline RunResult run_stagewise(OracleSession& session, const RunConfig& cfg, RewardPath path,
                               CiFamily family, CenterRule rule) {
    if (cfg.k == 0 || cfg.k > session.size()) throw Error("run: need 1 <= k <= n");
    BanditRun run(session, cfg, path, family);
    RunResult res;
    const std::size_t first = run.resolve_first_center();
    run.stage.add_center(first);
    res.centers.push_back(first);

    while (res.centers.size() < cfg.k) {
        const std::size_t stage_idx = res.centers.size() - 1;
        const std::uint64_t stage_start = session.query_count();
        run.init_stage();
        std::uint64_t rounds = 0;
        while (!run.stage.stop_condition()) {
            if (!run.any_open()) break;  // all arms exact: ties resolved by index
            if (++rounds > cfg.max_rounds_per_stage)
                throw Error("stage " + std::to_string(stage_idx + 1) +
                            " exceeded the round cap");
            if (cfg.margin_hook) cfg.margin_hook(stage_idx, rounds, run.stage.margin());
            if (rule == CenterRule::random_arm) {
                // uniformly random open (vertex, center) arm
                std::vector<std::pair<std::size_t, std::size_t>> open;
                for (std::size_t v = 0; v < run.n(); ++v) {
                    if (!run.stage.active(v)) continue;
                    for (std::size_t slot = 0; slot < run.slots(); ++slot)
                        if (run.arm_open(v, slot)) open.emplace_back(v, slot);
                }
                const auto [v, slot] = open[run.rng.uniform_index(open.size())];
                run.pull_or_fallback(v, slot);
            } else {
                const auto v = run.select_vertex_ucb();
                if (!v) break;
                const std::size_t slot = rule == CenterRule::lcb
                                             ? run.select_center_lcb(*v)
                                             : run.select_center_mixture(*v);
                run.pull_or_fallback(*v, slot);
            }
        }
        const std::size_t next = run.promote_incumbent();
        StageDiagnostics diag;
        diag.rounds = rounds;
        diag.queries = session.query_count() - stage_start;
        diag.final_margin = run.stage.margin();
        res.stages.push_back(diag);
        run.stage.add_center(next);
        res.centers.push_back(next);
        session.mark_stage();
    }
    res.ledger = session.snapshot_ledger();
    return res;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Random sampling and the DS algorithms
// ---------------------------------------------------------------------------

namespace detail {

inline RewardPath default_path(const OracleSession& s, bool thompson) {
    switch (s.model()) {
        case OracleModel::dimension_sampling:
            return thompson ? RewardPath::ds_bernoulli : RewardPath::ds_value;
        case OracleModel::noisy_distance:
            return RewardPath::ns_gaussian;
        case OracleModel::bernoulli_distance:
            return RewardPath::bernoulli;
    }
    throw Error("unknown oracle model");
}

inline CiFamily default_family(const OracleSession& s, const RunConfig& cfg, bool thompson) {
    if (cfg.ci_family) return *cfg.ci_family;
    if (!thompson && s.model() == OracleModel::dimension_sampling)
        return CiFamily::iterated_log_calpha;
    return CiFamily::kl_racing;
}

}  // namespace detail

inline RunResult random_sampling(OracleSession& session, const RunConfig& cfg) {
    return detail::run_stagewise(session, cfg, detail::default_path(session, false),
                                 detail::default_family(session, cfg, false),
                                 detail::CenterRule::random_arm);
}

inline RunResult ds_ucb(OracleSession& session, const RunConfig& cfg) {
    if (session.model() != OracleModel::dimension_sampling)
        throw Error("ds_ucb: requires the dimension-sampling oracle");
    return detail::run_stagewise(session, cfg, detail::RewardPath::ds_value,
                                 detail::default_family(session, cfg, false),
                                 detail::CenterRule::lcb);
}

inline RunResult ds_ts(OracleSession& session, const RunConfig& cfg) {
    if (session.model() != OracleModel::dimension_sampling)
        throw Error("ds_ts: requires the dimension-sampling oracle");
    return detail::run_stagewise(session, cfg, detail::RewardPath::ds_bernoulli,
                                 detail::default_family(session, cfg, true),
                                 detail::CenterRule::mixture);
}

// ---------------------------------------------------------------------------
// NS-TS
// ---------------------------------------------------------------------------

inline RunResult ns_ts(OracleSession& session, const RunConfig& cfg) {
    if (session.model() == OracleModel::dimension_sampling)
        throw Error("ns_ts: requires a noisy-distance or Bernoulli oracle");
    if (cfg.k == 0 || cfg.k > session.size()) throw Error("ns_ts: need 1 <= k <= n");
    const detail::RewardPath path = detail::default_path(session, true);
    detail::BanditRun run(session, cfg, path, detail::default_family(session, cfg, true));
    RunResult res;
    const std::size_t first = run.resolve_first_center();
    run.stage.add_center(first);
    res.centers.push_back(first);

    auto agg_estimate = [&](std::size_t v) {
        double d = kInf;
        for (std::size_t slot = 0; slot < run.slots(); ++slot)
            d = std::min(d, run.arms.at(v, slot).estimate());
        return d;
    };

    while (res.centers.size() < cfg.k) {
        const std::size_t stage_idx = res.centers.size() - 1;
        const std::uint64_t stage_start = session.query_count();
        run.init_stage();
        std::uint64_t rounds = 0;
        while (!run.stage.stop_condition()) {
            if (++rounds > cfg.max_rounds_per_stage)
                throw Error("stage " + std::to_string(stage_idx + 1) +
                            " exceeded the round cap");
            if (cfg.margin_hook) cfg.margin_hook(stage_idx, rounds, run.stage.margin());
            // v1: highest empirical d_{v,S}; v2: highest rival UCB.
            std::optional<std::size_t> v1;
            for (std::size_t v = 0; v < run.n(); ++v) {
                if (!run.stage.active(v)) continue;
                if (!v1 || agg_estimate(v) > agg_estimate(*v1)) v1 = v;
            }
            std::size_t v2 = run.stage.argmax_u();
            if (v2 == *v1) {
                std::optional<std::size_t> alt;
                for (std::size_t v = 0; v < run.n(); ++v) {
                    if (!run.stage.active(v) || v == *v1) continue;
                    if (!alt || run.stage.agg_u(v) > run.stage.agg_u(*alt)) alt = v;
                }
                v2 = alt.value_or(*v1);
            }
            for (const std::size_t v : {*v1, v2}) {
                const std::size_t slot = run.select_center_mixture(v);
                run.pull(v, slot);
            }
        }
        const std::size_t next = run.promote_incumbent();
        StageDiagnostics diag;
        diag.rounds = rounds;
        diag.queries = session.query_count() - stage_start;
        diag.final_margin = run.stage.margin();
        res.stages.push_back(diag);
        run.stage.add_center(next);
        res.centers.push_back(next);
        session.mark_stage();
    }
    res.ledger = session.snapshot_ledger();
    return res;
}

// ---------------------------------------------------------------------------
// GLR statistic and the NS-TandS stopping rule
// ---------------------------------------------------------------------------

// Pull counts and empirical means for a boxes x arms table.
struct GlrTable {
    std::size_t boxes = 0;
    std::size_t arms = 0;
    std::vector<double> mean;
    std::vector<std::uint64_t> count;

    GlrTable() = default;
    GlrTable(std::size_t a, std::size_t b)
        : boxes(a), arms(b), mean(a * b, 0.0), count(a * b, 0) {}

    double mean_at(std::size_t i, std::size_t j) const { return mean[i * arms + j]; }
    std::uint64_t count_at(std::size_t i, std::size_t j) const { return count[i * arms + j]; }
    double& mean_at(std::size_t i, std::size_t j) { return mean[i * arms + j]; }
    std::uint64_t& count_at(std::size_t i, std::size_t j) { return count[i * arms + j]; }
};

// Generalized likelihood ratio statistic for d(i,j) >= d(i',j'):
//   Z = t_ij kl_g(m_ij, rho) + t_i'j' kl_g(m_i'j', rho),
// rho the pull-weighted mean; negated mirror when m_ij < m_i'j'.
inline double glr_statistic(const GlrTable& t, std::size_t i, std::size_t j, std::size_t i2,
                            std::size_t j2, double sigma2 = 1.0) {
    const std::uint64_t ta = t.count_at(i, j), tb = t.count_at(i2, j2);
    if (ta == 0 || tb == 0) throw Error("glr_statistic: both arms need at least one pull");
    const double ma = t.mean_at(i, j), mb = t.mean_at(i2, j2);
    const double rho = (static_cast<double>(ta) * ma + static_cast<double>(tb) * mb) /
                       static_cast<double>(ta + tb);
    const double z = static_cast<double>(ta) * kl_gaussian(ma, rho, sigma2) +
                     static_cast<double>(tb) * kl_gaussian(mb, rho, sigma2);
    return ma >= mb ? z : -z;
}

// Z(t) = max_i min_{i' != i} max_{j'} min_j Z_{(i,j)(i',j')}; +inf for a
// single box (no competitor).
inline double stop_statistic_z(const GlrTable& t, double sigma2 = 1.0) {
    if (t.boxes < 2) return kInf;
    double outer = -kInf;
    for (std::size_t i = 0; i < t.boxes; ++i) {
        double inner_min = kInf;
        for (std::size_t i2 = 0; i2 < t.boxes; ++i2) {
            if (i2 == i) continue;
            double mid_max = -kInf;
            for (std::size_t j2 = 0; j2 < t.arms; ++j2) {
                double low_min = kInf;
                for (std::size_t j = 0; j < t.arms; ++j)
                    low_min = std::min(low_min, glr_statistic(t, i, j, i2, j2, sigma2));
                mid_max = std::max(mid_max, low_min);
            }
            inner_min = std::min(inner_min, mid_max);
        }
        outer = std::max(outer, inner_min);
    }
    return outer;
}

namespace detail {

// Fast candidate for the outer max of Z(t): the expression evaluated at the
// empirically best box. For any other box the statistic against the best box
// is non-positive, so a stop decision confirmed by the full four-loop scan is
// equivalent to testing the candidate alone.
inline double z_candidate(const GlrTable& t, double sigma2) {
    if (t.boxes < 2) return kInf;
    std::size_t best = 0;
    double best_score = -kInf;
    for (std::size_t i = 0; i < t.boxes; ++i) {
        double s = kInf;
        for (std::size_t j = 0; j < t.arms; ++j) s = std::min(s, t.mean_at(i, j));
        if (s > best_score) {
            best_score = s;
            best = i;
        }
    }
    double inner_min = kInf;
    for (std::size_t i2 = 0; i2 < t.boxes; ++i2) {
        if (i2 == best) continue;
        double mid_max = -kInf;
        for (std::size_t j2 = 0; j2 < t.arms; ++j2) {
            double low_min = kInf;
            for (std::size_t j = 0; j < t.arms; ++j)
                low_min = std::min(low_min, glr_statistic(t, best, j, i2, j2, sigma2));
            mid_max = std::max(mid_max, low_min);
        }
        inner_min = std::min(inner_min, mid_max);
    }
    return inner_min;
}

// One D-Track-and-Stop decision: forced exploration below sqrt(t) - A/2
// pulls, otherwise track the maximin weights.
struct TrackAndStop {
    GlrTable table;
    double sigma2 = 1.0;
    double forced_offset = 0.0;  // A/2 (stage-local) or nk/2 (global form)
    std::size_t recompute_period = 100;
    std::size_t ascent_iterations = 20000;
    std::uint64_t queries_since_recompute = 0;
    std::optional<WeightMatrix> cached_weights;  // original labeling
    std::optional<WeightMatrix> warm_start;      // canonical labeling

    std::uint64_t total_pulls() const {
        std::uint64_t s = 0;
        for (std::uint64_t c : table.count) s += c;
        return s;
    }

    void refresh_weights() {
        MaximinInstance inst(table.boxes, table.arms, scaled_means());
        const CanonicalInstance canon = canonicalize(inst);
        AscentConfig cfg;
        cfg.iterations = ascent_iterations;
        if (warm_start && warm_start->boxes == table.boxes && warm_start->arms == table.arms)
            cfg.warm_start = warm_start;
        AscentResult res = mirror_ascent(canon.inst, cfg);
        warm_start = res.omega;
        cached_weights = canon.unpermute(res.omega);
        queries_since_recompute = 0;
    }

    std::vector<double> scaled_means() const {
        std::vector<double> mu = table.mean;
        const double s = std::sqrt(std::max(sigma2, 1e-300));
        for (double& x : mu) x /= s;
        return mu;
    }

    // (box, arm) to pull next.
    std::pair<std::size_t, std::size_t> choose() {
        const std::uint64_t t = total_pulls();
        // forced exploration
        std::size_t min_i = 0, min_j = 0;
        std::uint64_t min_c = UINT64_MAX;
        for (std::size_t i = 0; i < table.boxes; ++i)
            for (std::size_t j = 0; j < table.arms; ++j)
                if (table.count_at(i, j) < min_c) {
                    min_c = table.count_at(i, j);
                    min_i = i;
                    min_j = j;
                }
        if (static_cast<double>(min_c) < std::sqrt(static_cast<double>(t)) - forced_offset)
            return {min_i, min_j};
        if (!cached_weights || queries_since_recompute >= recompute_period) refresh_weights();
        const WeightMatrix& w = *cached_weights;
        std::size_t bi = 0, bj = 0;
        double best = -kInf;
        for (std::size_t i = 0; i < table.boxes; ++i) {
            for (std::size_t j = 0; j < table.arms; ++j) {
                const double score = w.at(i, j) - static_cast<double>(table.count_at(i, j)) /
                                                      static_cast<double>(t);
                if (score > best) {
                    best = score;
                    bi = i;
                    bj = j;
                }
            }
        }
        return {bi, bj};
    }

    void record(std::size_t i, std::size_t j, double reward) {
        const std::uint64_t c = table.count_at(i, j);
        table.mean_at(i, j) =
            (table.mean_at(i, j) * static_cast<double>(c) + reward) / static_cast<double>(c + 1);
        table.count_at(i, j) = c + 1;
        ++queries_since_recompute;
    }

    bool should_stop(double beta_threshold) const {
        if (table.boxes < 2) return true;
        if (z_candidate(table, sigma2) <= beta_threshold) return false;
        return stop_statistic_z(table, sigma2) > beta_threshold;
    }

    std::size_t best_box() const {
        std::size_t best = 0;
        double score = -kInf;
        for (std::size_t i = 0; i < table.boxes; ++i) {
            double s = kInf;
            for (std::size_t j = 0; j < table.arms; ++j) s = std::min(s, table.mean_at(i, j));
            if (s > score) {
                score = s;
                best = i;
            }
        }
        return best;
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// NS-TandS
// ---------------------------------------------------------------------------

inline RunResult ns_tands(OracleSession& session, const RunConfig& cfg) {
    if (session.model() == OracleModel::dimension_sampling)
        throw Error("ns_tands: requires a noisy-distance or Bernoulli oracle");
    if (cfg.k == 0 || cfg.k > session.size()) throw Error("ns_tands: need 1 <= k <= n");
    const std::size_t n = session.size();
    const double delta_prime =
        cfg.delta / (static_cast<double>(n) * static_cast<double>(n));
    const double sigma2 = cfg.tands_sigma2.value_or(
        session.model() == OracleModel::noisy_distance ? session.noise_sigma2() : 0.25);
    if (sigma2 <= 0.0)
        throw Error("ns_tands: GLR variance must be positive (set tands_sigma2)");

    Rng rng(mix_seed(cfg.seed, 4));
    RunResult res;
    std::size_t first;
    if (cfg.first_center) {
        if (*cfg.first_center >= n) throw Error("first center out of range");
        first = *cfg.first_center;
    } else {
        first = rng.uniform_index(n);
    }
    res.centers.push_back(first);

    // persistent per-arm statistics: (vertex, slot)
    std::vector<double> mean(n * cfg.k, 0.0);
    std::vector<std::uint64_t> count(n * cfg.k, 0);
    std::vector<bool> is_center(n, false);
    is_center[first] = true;

    auto reward = [&](std::size_t v, std::size_t s) {
        if (session.model() == OracleModel::noisy_distance) return session.query_ns(v, s);
        return static_cast<double>(session.query_bernoulli(v, s));
    };

    while (res.centers.size() < cfg.k) {
        const std::size_t stage_idx = res.centers.size() - 1;
        const std::size_t p = res.centers.size();
        const std::uint64_t stage_start = session.query_count();

        std::vector<std::size_t> boxes;  // remaining vertices, ascending
        for (std::size_t v = 0; v < n; ++v)
            if (!is_center[v]) boxes.push_back(v);

        // stage init: one query per remaining vertex against the newest center
        const std::size_t newest = res.centers.back();
        for (std::size_t v : boxes) {
            const double r = reward(v, newest);
            const std::size_t idx = v * cfg.k + (p - 1);
            mean[idx] = (mean[idx] * static_cast<double>(count[idx]) + r) /
                        static_cast<double>(count[idx] + 1);
            ++count[idx];
        }

        detail::TrackAndStop tas;
        tas.table = GlrTable(boxes.size(), p);
        tas.sigma2 = sigma2;
        tas.recompute_period = cfg.recompute_period;
        tas.ascent_iterations = cfg.ascent_iterations;
        const double arms_in_stage = static_cast<double>(boxes.size() * p);
        tas.forced_offset = cfg.global_forced_exploration
                                ? static_cast<double>(n) * static_cast<double>(cfg.k) / 2.0
                                : arms_in_stage / 2.0;
        for (std::size_t bi = 0; bi < boxes.size(); ++bi) {
            for (std::size_t slot = 0; slot < p; ++slot) {
                const std::size_t idx = boxes[bi] * cfg.k + slot;
                tas.table.mean_at(bi, slot) = mean[idx];
                tas.table.count_at(bi, slot) = count[idx];
            }
        }

        std::uint64_t rounds = 0;
        auto beta_threshold = [&] {
            const double t = static_cast<double>(tas.total_pulls());
            return std::log(cfg.tands_beta_coeff * std::max(t, 1.0) / delta_prime);
        };
        while (!tas.should_stop(beta_threshold())) {
            if (++rounds > cfg.max_rounds_per_stage)
                throw Error("stage " + std::to_string(stage_idx + 1) +
                            " exceeded the round cap");
            std::pair<std::size_t, std::size_t> pick;
            try {
                pick = tas.choose();  // may run the weight optimizer
            } catch (const Error& e) {
                throw Error("ns_tands stage " + std::to_string(stage_idx + 1) + ": " +
                            e.what());
            }
            const auto [bi, slot] = pick;
            const std::size_t v = boxes[bi];
            const std::size_t s = res.centers[slot];
            tas.record(bi, slot, reward(v, s));
            if (!std::isfinite(tas.table.mean_at(bi, slot)))
                throw Error("ns_tands stage " + std::to_string(stage_idx + 1) +
                            ": non-finite estimate");
        }

        // write back persistent stats, pick argmax_v min_s dhat
        std::size_t next = boxes[0];
        double best = -kInf;
        for (std::size_t bi = 0; bi < boxes.size(); ++bi) {
            double dmin = kInf;
            for (std::size_t slot = 0; slot < p; ++slot) {
                const std::size_t idx = boxes[bi] * cfg.k + slot;
                mean[idx] = tas.table.mean_at(bi, slot);
                count[idx] = tas.table.count_at(bi, slot);
                dmin = std::min(dmin, mean[idx]);
            }
            if (dmin > best) {
                best = dmin;
                next = boxes[bi];
            }
        }

        StageDiagnostics diag;
        diag.rounds = rounds;
        diag.queries = session.query_count() - stage_start;
        diag.final_margin = best;
        res.stages.push_back(diag);
        is_center[next] = true;
        res.centers.push_back(next);
        session.mark_stage();
    }
    res.ledger = session.snapshot_ledger();
    return res;
}

// ---------------------------------------------------------------------------
// Standalone maximin bandit (the inner machinery of one NS-TandS stage)
// ---------------------------------------------------------------------------

struct MaximinBanditResult {
    std::size_t box = 0;
    std::uint64_t queries = 0;
};

// D-Track-and-Stop on Gaussian arms with the given means and variance;
// stops when Z(t) > log(beta_coeff * t / delta).
inline MaximinBanditResult run_maximin_bandit(const MaximinInstance& truth, double sigma2,
                                              double delta, std::uint64_t seed,
                                              std::size_t recompute_period = 100,
                                              std::size_t ascent_iterations = 20000,
                                              double beta_coeff = 2.0,
                                              std::uint64_t max_queries = 100000000) {
    if (delta <= 0.0 || delta >= 1.0) throw Error("run_maximin_bandit: delta in (0,1)");
    if (sigma2 <= 0.0) throw Error("run_maximin_bandit: sigma2 must be positive");
    Rng rng(mix_seed(seed, 7));
    detail::TrackAndStop tas;
    tas.table = GlrTable(truth.boxes, truth.arms);
    tas.sigma2 = sigma2;
    tas.recompute_period = recompute_period;
    tas.ascent_iterations = ascent_iterations;
    tas.forced_offset = static_cast<double>(truth.boxes * truth.arms) / 2.0;

    MaximinBanditResult out;
    const double sd = std::sqrt(sigma2);
    // one initial sample per arm
    for (std::size_t i = 0; i < truth.boxes; ++i) {
        for (std::size_t j = 0; j < truth.arms; ++j) {
            tas.record(i, j, rng.normal(truth.at(i, j), sd));
            ++out.queries;
        }
    }
    auto beta_threshold = [&] {
        const double t = static_cast<double>(tas.total_pulls());
        return std::log(beta_coeff * std::max(t, 1.0) / delta);
    };
    while (!tas.should_stop(beta_threshold())) {
        if (out.queries >= max_queries) throw Error("run_maximin_bandit: query cap exceeded");
        const auto [i, j] = tas.choose();
        tas.record(i, j, rng.normal(truth.at(i, j), sd));
        ++out.queries;
    }
    // argmax_i min_j empirical mean
    double best = -kInf;
    for (std::size_t i = 0; i < truth.boxes; ++i) {
        double s = kInf;
        for (std::size_t j = 0; j < truth.arms; ++j) s = std::min(s, tas.table.mean_at(i, j));
        if (s > best) {
            best = s;
            out.box = i;
        }
    }
    return out;
}

}  // namespace kc
