#pragma once
// Experiment harness: single runs, parameter sweeps over (k, delta, z,
// C_alpha, sigma2) grids with seeded repetitions, and CSV emission. Sweep
// seeds are a stable mix of (base seed, grid-point values, repetition), so
// extending a grid never changes the seeds of existing rows.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "kcenter/algorithms.hpp"
#include "kcenter/dataset.hpp"
#include "kcenter/diagnostics.hpp"
#include "kcenter/oracles.hpp"

namespace kc {

enum class Algo { greedy, random_sampling, ds_ucb, ds_ts, ns_ts, ns_tands };

inline Algo parse_algo(const std::string& s) {
    if (s == "greedy") return Algo::greedy;
    if (s == "random") return Algo::random_sampling;
    if (s == "ds-ucb") return Algo::ds_ucb;
    if (s == "ds-ts") return Algo::ds_ts;
    if (s == "ns-ts") return Algo::ns_ts;
    if (s == "ns-tands") return Algo::ns_tands;
    throw Error("unknown algorithm '" + s + "'");
}

inline std::string to_string(Algo a) {
    switch (a) {
        case Algo::greedy: return "greedy";
        case Algo::random_sampling: return "random";
        case Algo::ds_ucb: return "ds-ucb";
        case Algo::ds_ts: return "ds-ts";
        case Algo::ns_ts: return "ns-ts";
        case Algo::ns_tands: return "ns-tands";
    }
    return "?";
}

using DataSource = std::variant<PointSet, DistanceMatrix>;

inline std::size_t source_size(const DataSource& src) {
    return std::visit([](const auto& s) { return s.size(); }, src);
}
inline std::size_t source_dims(const DataSource& src) {
    if (const auto* ps = std::get_if<PointSet>(&src)) return ps->dims();
    return 0;
}

// Default oracle model: DS algorithms sample dimensions of a point set; the
// NS family adds Gaussian noise on point sets and runs on Bernoulli trials
// for matrix sources (empirical-probability distances).
inline OracleModel default_model(Algo algo, const DataSource& src) {
    const bool points = std::holds_alternative<PointSet>(src);
    switch (algo) {
        case Algo::greedy:
            return points ? OracleModel::dimension_sampling : OracleModel::bernoulli_distance;
        case Algo::random_sampling:
        case Algo::ds_ucb:
        case Algo::ds_ts:
            if (algo != Algo::random_sampling && !points)
                throw Error(to_string(algo) + " requires a point-set source");
            return points ? OracleModel::dimension_sampling : OracleModel::bernoulli_distance;
        case Algo::ns_ts:
        case Algo::ns_tands:
            return points ? OracleModel::noisy_distance : OracleModel::bernoulli_distance;
    }
    throw Error("unknown algorithm");
}

struct ResultRow {
    std::string algo;
    std::size_t n = 0, m = 0, k = 0;
    double delta = 0.0, z = 0.0, c_alpha = 0.0, sigma2 = 0.0;
    std::uint64_t seed = 0;
    std::size_t first_center = 0;
    std::uint64_t queries_total = 0;
    std::optional<bool> matched_greedy;
    double wall_ms = 0.0;
    std::vector<std::uint64_t> stage_queries;
    std::string error;

    static std::string csv_header() {
        return "algo,n,m,k,delta,z,c_alpha,sigma2,seed,first_center,queries_total,"
               "matched_greedy,wall_ms,stage_queries,error";
    }

    std::string to_csv(bool include_wall = true) const {
        std::ostringstream os;
        os << algo << ',' << n << ',' << m << ',' << k << ',' << format_double(delta) << ','
           << format_double(z) << ',' << format_double(c_alpha) << ',' << format_double(sigma2)
           << ',' << seed << ',' << first_center << ',' << queries_total << ',';
        if (matched_greedy) os << (*matched_greedy ? 1 : 0);
        os << ',';
        if (include_wall) os << format_double(wall_ms);
        os << ',';
        for (std::size_t i = 0; i < stage_queries.size(); ++i) {
            if (i) os << '|';
            os << stage_queries[i];
        }
        os << ',' << error;
        return os.str();
    }
};

struct SingleRunSpec {
    Algo algo = Algo::ds_ucb;
    std::optional<OracleModel> model;  // default per algorithm/source
    RunConfig cfg;
    double sigma2 = 0.01;  // NS noise variance
    bool check_greedy = false;
};

inline RunResult dispatch_run(Algo algo, OracleSession& session, const RunConfig& cfg) {
    switch (algo) {
        case Algo::greedy:
            throw Error("dispatch_run: greedy runs without a session");
        case Algo::random_sampling: return random_sampling(session, cfg);
        case Algo::ds_ucb: return ds_ucb(session, cfg);
        case Algo::ds_ts: return ds_ts(session, cfg);
        case Algo::ns_ts: return ns_ts(session, cfg);
        case Algo::ns_tands: return ns_tands(session, cfg);
    }
    throw Error("unknown algorithm");
}

inline ResultRow run_single(const DataSource& src, SingleRunSpec spec) {
    ResultRow row;
    row.algo = to_string(spec.algo);
    row.n = source_size(src);
    row.m = source_dims(src);
    row.k = spec.cfg.k;
    row.delta = spec.cfg.delta;
    row.z = spec.cfg.z;
    row.c_alpha = spec.cfg.c_alpha;
    row.sigma2 = spec.sigma2;
    row.seed = spec.cfg.seed;

    // Resolve a random first center up front so the greedy reference uses the
    // same one.
    if (!spec.cfg.first_center) {
        Rng r(mix_seed(spec.cfg.seed, 5));
        spec.cfg.first_center = r.uniform_index(row.n);
    }
    row.first_center = *spec.cfg.first_center;

    const auto t0 = std::chrono::steady_clock::now();
    RunResult res;
    if (spec.algo == Algo::greedy) {
        res = std::visit(
            [&](const auto& s) { return greedy_exact(s, spec.cfg.k, row.first_center); }, src);
    } else {
        const OracleModel model = spec.model.value_or(default_model(spec.algo, src));
        const double sigma2 = model == OracleModel::noisy_distance ? spec.sigma2 : 0.0;
        auto session = std::visit(
            [&](const auto& s) { return OracleSession(s, model, sigma2, spec.cfg.seed); }, src);
        if (model == OracleModel::bernoulli_distance && !spec.cfg.tands_sigma2 &&
            spec.algo == Algo::ns_tands && spec.sigma2 > 0.0)
            spec.cfg.tands_sigma2 = spec.sigma2;
        res = dispatch_run(spec.algo, session, spec.cfg);
        if (res.ledger.total != session.query_count())
            throw Error("ledger mismatch: run accounting is broken");
    }
    const auto t1 = std::chrono::steady_clock::now();
    row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    row.queries_total = res.ledger.total;
    row.stage_queries = res.ledger.per_stage;

    if (spec.check_greedy) {
        const RunResult ref = std::visit(
            [&](const auto& s) { return greedy_exact(s, spec.cfg.k, row.first_center); }, src);
        row.matched_greedy = (res.centers == ref.centers);
    }
    return row;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct ExperimentSpec {
    std::optional<std::string> data_path;
    std::optional<std::string> matrix_path;
    std::optional<ClusterSpec> gen;
    Algo algo = Algo::ds_ucb;
    std::optional<OracleModel> model;
    std::vector<std::size_t> k{2};
    std::vector<double> delta{0.1};
    std::vector<double> z{0.0};
    std::vector<double> c_alpha{0.1};
    std::vector<double> sigma2{0.01};
    std::size_t reps = 1;
    std::uint64_t seed_base = 0;
    std::optional<std::size_t> first_center = 0;
    std::string out = "sweep.csv";
    std::size_t jobs = 0;  // 0 = hardware concurrency
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    for (const auto& tok : split_list(s)) {
        double v;
        if (!parse_double(tok, v)) throw Error("sweep spec: bad number in " + key);
        out.push_back(v);
    }
    if (out.empty()) throw Error("sweep spec: empty list for " + key);
    return out;
}

}  // namespace detail

inline ExperimentSpec parse_experiment_spec(std::istream& in) {
    ExperimentSpec spec;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw Error("sweep spec: expected key=value at line " + std::to_string(lineno));
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "data") spec.data_path = val;
        else if (key == "matrix") spec.matrix_path = val;
        else if (key == "algo") spec.algo = parse_algo(val);
        else if (key == "model") {
            if (val == "ds") spec.model = OracleModel::dimension_sampling;
            else if (val == "ns") spec.model = OracleModel::noisy_distance;
            else if (val == "bernoulli") spec.model = OracleModel::bernoulli_distance;
            else throw Error("sweep spec: unknown model '" + val + "'");
        } else if (key == "k") {
            spec.k.clear();
            for (double v : detail::parse_double_list(val, key))
                spec.k.push_back(static_cast<std::size_t>(v));
        } else if (key == "delta") spec.delta = detail::parse_double_list(val, key);
        else if (key == "z") spec.z = detail::parse_double_list(val, key);
        else if (key == "c_alpha") spec.c_alpha = detail::parse_double_list(val, key);
        else if (key == "sigma2") spec.sigma2 = detail::parse_double_list(val, key);
        else if (key == "reps") spec.reps = static_cast<std::size_t>(std::stoull(val));
        else if (key == "seed") spec.seed_base = std::stoull(val);
        else if (key == "first_center") {
            if (val == "random") spec.first_center.reset();
            else spec.first_center = std::stoull(val);
        } else if (key == "out") spec.out = val;
        else if (key == "jobs") spec.jobs = static_cast<std::size_t>(std::stoull(val));
        else if (key.rfind("gen_", 0) == 0) {
            if (!spec.gen) spec.gen.emplace();
            ClusterSpec& g = *spec.gen;
            if (key == "gen_clusters") g.clusters = static_cast<std::size_t>(std::stoull(val));
            else if (key == "gen_per") g.per_cluster = static_cast<std::size_t>(std::stoull(val));
            else if (key == "gen_m") g.dims = static_cast<std::size_t>(std::stoull(val));
            else if (key == "gen_spread") g.spread = std::stod(val);
            else if (key == "gen_seed") g.seed = std::stoull(val);
            else if (key == "gen_layout") {
                if (val == "uniform") g.layout = ClusterLayout::uniform;
                else if (val == "coded") g.layout = ClusterLayout::coded;
                else throw Error("sweep spec: unknown layout '" + val + "'");
            } else throw Error("sweep spec: unknown key '" + key + "'");
        } else if (!key.empty()) throw Error("sweep spec: unknown key '" + key + "'");
    }
    if (spec.reps < 1) throw Error("sweep spec: reps must be >= 1");
    const bool have_source =
        spec.data_path.has_value() || spec.matrix_path.has_value() || spec.gen.has_value();
    if (!have_source) throw Error("sweep spec: need one of data=, matrix= or gen_* keys");
    return spec;
}

struct GridPoint {
    std::size_t k;
    double delta, z, c_alpha, sigma2;

    std::string tag() const {
        return "k=" + std::to_string(k) + ";delta=" + format_double(delta) + ";z=" +
               format_double(z) + ";c_alpha=" + format_double(c_alpha) + ";sigma2=" +
               format_double(sigma2);
    }
};

struct AggregateRow {
    GridPoint point;
    double median_queries = 0.0;
    double mean_queries = 0.0;
    double match_rate = 0.0;
    std::size_t failures = 0;
};

struct SweepResult {
    std::vector<ResultRow> rows;
    std::vector<AggregateRow> aggregates;
};

inline DataSource load_sweep_source(const ExperimentSpec& spec) {
    if (spec.gen) return DataSource(std::in_place_type<PointSet>, generate_synthetic(*spec.gen));
    if (spec.data_path)
        return DataSource(std::in_place_type<PointSet>, load_points(*spec.data_path));
    return DataSource(std::in_place_type<DistanceMatrix>,
                      load_distance_matrix(*spec.matrix_path));
}

inline SweepResult run_sweep(const ExperimentSpec& spec) {
    const DataSource src = load_sweep_source(spec);
    std::vector<GridPoint> grid;
    for (std::size_t k : spec.k)
        for (double d : spec.delta)
            for (double z : spec.z)
                for (double ca : spec.c_alpha)
                    for (double s2 : spec.sigma2) grid.push_back({k, d, z, ca, s2});
    if (grid.empty()) throw Error("sweep: empty grid");

    struct Job {
        std::size_t grid_idx;
        std::size_t rep;
    };
    std::vector<Job> jobs;
    for (std::size_t g = 0; g < grid.size(); ++g)
        for (std::size_t r = 0; r < spec.reps; ++r) jobs.push_back({g, r});

    std::vector<ResultRow> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    const std::size_t workers =
        spec.jobs > 0 ? spec.jobs : std::max(1u, std::thread::hardware_concurrency());

    auto worker = [&] {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= jobs.size()) return;
            const Job& job = jobs[idx];
            const GridPoint& gp = grid[job.grid_idx];
            SingleRunSpec run;
            run.algo = spec.algo;
            run.model = spec.model;
            run.check_greedy = true;
            run.sigma2 = gp.sigma2;
            run.cfg.k = gp.k;
            run.cfg.delta = gp.delta;
            run.cfg.z = gp.z;
            run.cfg.c_alpha = gp.c_alpha;
            run.cfg.first_center = spec.first_center;
            run.cfg.seed = mix_seed(spec.seed_base, fnv1a(gp.tag()), job.rep);
            try {
                rows[idx] = run_single(src, run);
            } catch (const std::exception& e) {
                ResultRow row;
                row.algo = to_string(spec.algo);
                row.n = source_size(src);
                row.m = source_dims(src);
                row.k = gp.k;
                row.delta = gp.delta;
                row.z = gp.z;
                row.c_alpha = gp.c_alpha;
                row.sigma2 = gp.sigma2;
                row.seed = run.cfg.seed;
                row.error = e.what();
                rows[idx] = row;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    SweepResult out;
    out.rows = std::move(rows);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        AggregateRow agg;
        agg.point = grid[g];
        std::vector<double> queries;
        double qsum = 0.0;
        std::size_t matches = 0, checked = 0;
        for (std::size_t r = 0; r < spec.reps; ++r) {
            const ResultRow& row = out.rows[g * spec.reps + r];
            if (!row.error.empty()) {
                ++agg.failures;
                continue;
            }
            queries.push_back(static_cast<double>(row.queries_total));
            qsum += static_cast<double>(row.queries_total);
            if (row.matched_greedy) {
                ++checked;
                if (*row.matched_greedy) ++matches;
            }
        }
        if (!queries.empty()) {
            std::sort(queries.begin(), queries.end());
            const std::size_t mid = queries.size() / 2;
            agg.median_queries = queries.size() % 2 == 1
                                     ? queries[mid]
                                     : 0.5 * (queries[mid - 1] + queries[mid]);
            agg.mean_queries = qsum / static_cast<double>(queries.size());
        }
        agg.match_rate = checked ? static_cast<double>(matches) / static_cast<double>(checked)
                                 : 0.0;
        out.aggregates.push_back(agg);
    }
    return out;
}

inline void write_sweep_csv(const SweepResult& res, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    out << ResultRow::csv_header() << '\n';
    for (const auto& row : res.rows) out << row.to_csv() << '\n';

    const std::string agg_path = path + ".agg.csv";
    std::ofstream agg(agg_path);
    if (!agg) throw Error("cannot write file: " + agg_path);
    agg << "k,delta,z,c_alpha,sigma2,median_queries,mean_queries,match_rate,failures\n";
    for (const auto& a : res.aggregates) {
        agg << a.point.k << ',' << format_double(a.point.delta) << ','
            << format_double(a.point.z) << ',' << format_double(a.point.c_alpha) << ','
            << format_double(a.point.sigma2) << ',' << format_double(a.median_queries) << ','
            << format_double(a.mean_queries) << ',' << format_double(a.match_rate) << ','
            << a.failures << '\n';
    }
}

}  // namespace kc
