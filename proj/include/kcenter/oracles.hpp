#pragma once
// Query oracles over a point set or a precomputed distance matrix.
//
// DS:        O(u,v,j) = ([x_u]_j - [x_v]_j)^2 for a chosen dimension j.
// NS:        O(u,v)   = d(u,v) + eta, eta ~ N(0, sigma2), i.i.d. per call.
// Bernoulli: O(u,v)   ~ Ber(d(u,v)); expected reward equals the distance.
//
// A session owns one RNG stream per purpose (dimension choice, noise,
// Bernoulli trials) so adding queries of one kind never perturbs another
// kind's sequence. Every query is counted, per arm and in total; the MaxPulls
// exact fallback is charged m queries (one per dimension).

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "kcenter/dataset.hpp"
#include "kcenter/rng.hpp"

namespace kc {

enum class OracleModel { dimension_sampling, noisy_distance, bernoulli_distance };

inline std::string to_string(OracleModel m) {
    switch (m) {
        case OracleModel::dimension_sampling: return "ds";
        case OracleModel::noisy_distance: return "ns";
        case OracleModel::bernoulli_distance: return "bernoulli";
    }
    return "?";
}

struct QueryLedger {
    std::uint64_t total = 0;
    std::vector<std::uint64_t> per_stage;                    // closed by stage marks
    std::unordered_map<std::uint64_t, std::uint64_t> per_arm;  // key: min*n+max

    std::uint64_t per_arm_sum() const {
        std::uint64_t s = 0;
        for (const auto& [k, v] : per_arm) s += v;
        return s;
    }

    // CSV with columns (stage, queries); a trailing open stage is included.
    std::string to_csv(std::uint64_t open_stage_count) const {
        std::string out = "stage,queries\n";
        std::uint64_t closed = 0;
        for (std::size_t i = 0; i < per_stage.size(); ++i) {
            out += std::to_string(i + 1) + "," + std::to_string(per_stage[i]) + "\n";
            closed += per_stage[i];
        }
        if (open_stage_count > 0)
            out += std::to_string(per_stage.size() + 1) + "," + std::to_string(open_stage_count) +
                   "\n";
        return out;
    }
};

struct BernoulliDraw {
    double value = 0.0;  // the success probability that was used
    int bit = 0;
};

class OracleSession {
public:
    OracleSession(const PointSet& ps, OracleModel model, double noise_sigma2,
                  std::uint64_t seed)
        : points_(&ps),
          model_(model),
          sigma2_(noise_sigma2),
          dim_rng_(mix_seed(seed, 1)),
          noise_rng_(mix_seed(seed, 2)),
          bern_rng_(mix_seed(seed, 3)) {
        if (model == OracleModel::bernoulli_distance)
            throw Error("OracleSession: Bernoulli model requires a distance matrix source");
        if (noise_sigma2 < 0.0) throw Error("OracleSession: noise variance must be >= 0");
    }

    OracleSession(const DistanceMatrix& dm, OracleModel model, double noise_sigma2,
                  std::uint64_t seed)
        : matrix_(&dm),
          model_(model),
          sigma2_(noise_sigma2),
          dim_rng_(mix_seed(seed, 1)),
          noise_rng_(mix_seed(seed, 2)),
          bern_rng_(mix_seed(seed, 3)) {
        if (model == OracleModel::dimension_sampling)
            throw Error("OracleSession: DS model requires a point-set source");
        if (noise_sigma2 < 0.0) throw Error("OracleSession: noise variance must be >= 0");
    }

    OracleModel model() const { return model_; }
    double noise_sigma2() const { return sigma2_; }
    std::size_t size() const { return points_ ? points_->size() : matrix_->size(); }
    std::size_t dims() const { return points_ ? points_->dims() : 0; }
    bool has_points() const { return points_ != nullptr; }

    double query_ds(std::size_t u, std::size_t v, std::size_t j) {
        require_model(OracleModel::dimension_sampling, "query_ds");
        check_pair(u, v);
        if (j >= points_->dims()) throw Error("query_ds: dimension out of range");
        count(u, v, 1);
        const double d = points_->coord(u, j) - points_->coord(v, j);
        return d * d;
    }

    double query_ds_random_dim(std::size_t u, std::size_t v) {
        require_model(OracleModel::dimension_sampling, "query_ds_random_dim");
        check_pair(u, v);
        const std::size_t j = dim_rng_.uniform_index(points_->dims());
        count(u, v, 1);
        const double d = points_->coord(u, j) - points_->coord(v, j);
        return d * d;
    }

    double query_ns(std::size_t u, std::size_t v) {
        require_model(OracleModel::noisy_distance, "query_ns");
        check_pair(u, v);
        count(u, v, 1);
        const double d = points_ ? points_->distance(u, v) : matrix_->distance(u, v);
        if (sigma2_ == 0.0) return d;
        return d + noise_rng_.normal(0.0, std::sqrt(sigma2_));
    }

    // DS reward together with its Bernoulli conversion: the random-dimension
    // value is an oracle response in [0,1] and then serves as the success
    // probability of one Bernoulli trial. Counts as a single query.
    BernoulliDraw query_ds_bernoulli(std::size_t u, std::size_t v) {
        require_model(OracleModel::dimension_sampling, "query_ds_bernoulli");
        BernoulliDraw out;
        out.value = query_ds_random_dim(u, v);
        out.bit = bern_rng_.bernoulli(out.value) ? 1 : 0;
        return out;
    }

    // Bernoulli reward with success probability equal to the underlying
    // value: the matrix entry under the Bernoulli model, or a fresh DS
    // random-dimension draw under the DS model. Only the bit is returned;
    // under the matrix model the underlying value stays hidden.
    int query_bernoulli(std::size_t u, std::size_t v) {
        check_pair(u, v);
        if (model_ == OracleModel::bernoulli_distance) {
            count(u, v, 1);
            return bern_rng_.bernoulli(matrix_->distance(u, v)) ? 1 : 0;
        }
        if (model_ == OracleModel::dimension_sampling) return query_ds_bernoulli(u, v).bit;
        throw Error("query_bernoulli: not available under the NS model");
    }

    // MaxPulls fallback: the exact distance, charged m queries (one full
    // sweep of the dimensions).
    double query_exact_ds(std::size_t u, std::size_t v) {
        require_model(OracleModel::dimension_sampling, "query_exact_ds");
        check_pair(u, v);
        count(u, v, points_->dims());
        return points_->distance(u, v);
    }

    void mark_stage() {
        ledger_.per_stage.push_back(ledger_.total - marked_);
        marked_ = ledger_.total;
    }

    std::uint64_t query_count() const { return ledger_.total; }
    std::uint64_t open_stage_count() const { return ledger_.total - marked_; }
    const QueryLedger& ledger() const { return ledger_; }
    QueryLedger snapshot_ledger() const { return ledger_; }

private:
    void require_model(OracleModel expect, const char* op) const {
        if (model_ != expect)
            throw Error(std::string(op) + ": oracle model mismatch (session is " +
                        to_string(model_) + ")");
    }
    void check_pair(std::size_t u, std::size_t v) const {
        if (u >= size() || v >= size()) throw Error("oracle query: index out of range");
    }
    void count(std::size_t u, std::size_t v, std::uint64_t q) {
        const std::uint64_t a = std::min(u, v), b = std::max(u, v);
        ledger_.per_arm[a * size() + b] += q;
        ledger_.total += q;
    }

    const PointSet* points_ = nullptr;
    const DistanceMatrix* matrix_ = nullptr;
    OracleModel model_;
    double sigma2_ = 0.0;
    Rng dim_rng_;
    Rng noise_rng_;
    Rng bern_rng_;
    QueryLedger ledger_;
    std::uint64_t marked_ = 0;
};

}  // namespace kc
