// Command-line harness.
//
//   kcenter gen     synthesize a clustered point set (CSV or KCPT binary)
//   kcenter run     one algorithm run, result row to stdout or a CSV file
//   kcenter sweep   parameter grid x repetitions from a key=value spec file
//   kcenter diag    hardness terms and query-complexity bounds
//   kcenter t-star  maximin characteristic time of a means matrix
//
// Exit codes: 0 success, 2 usage, 3 data validation, 4 run failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "kcenter/kcenter.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitRun = 4;

kc::DataSource load_source(const std::string& data, const std::string& matrix) {
    if (!data.empty() && !matrix.empty())
        throw kc::Error("pass either --data or --matrix, not both");
    if (!data.empty())
        return kc::DataSource(std::in_place_type<kc::PointSet>, kc::load_points(data));
    if (!matrix.empty())
        return kc::DataSource(std::in_place_type<kc::DistanceMatrix>,
                              kc::load_distance_matrix(matrix));
    throw kc::Error("a dataset is required (--data or --matrix)");
}

int cmd_gen(const kc::ClusterSpec& spec, const std::string& out, const std::string& format) {
    const kc::PointSet ps = kc::generate_synthetic(spec);
    if (format == "bin") kc::save_points_bin(ps, out);
    else kc::save_points_csv(ps, out);
    std::cout << "wrote " << ps.size() << " points x " << ps.dims() << " dims to " << out
              << "\n";
    return 0;
}

void print_tstar(const kc::MaximinInstance& inst, std::size_t iterations) {
    kc::AscentConfig cfg;
    cfg.iterations = iterations;
    const kc::AscentResult res = kc::t_star(inst, cfg);
    std::cout << "t_star," << kc::format_double(res.t_star) << "\n";
    std::cout << "f_value," << kc::format_double(res.f_value) << "\n";
    for (std::size_t i = 0; i < res.omega.boxes; ++i) {
        std::cout << "omega";
        for (std::size_t j = 0; j < res.omega.arms; ++j)
            std::cout << ',' << kc::format_double(res.omega.at(i, j));
        std::cout << "\n";
    }
}

kc::MaximinInstance load_means(const std::string& path) {
    const kc::detail::CsvTable table = kc::detail::load_csv(path);
    const std::size_t a = table.rows.size();
    const std::size_t b = table.rows.front().size();
    std::vector<double> mu;
    mu.reserve(a * b);
    for (const auto& row : table.rows) mu.insert(mu.end(), row.begin(), row.end());
    return kc::MaximinInstance(a, b, std::move(mu));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Greedy k-center from noisy distance samples"};
    app.require_subcommand(1);

    // --- gen ---
    auto* gen = app.add_subcommand("gen", "generate a synthetic clustered point set");
    kc::ClusterSpec gspec;
    std::string gen_out = "points.csv";
    std::string gen_format = "csv";
    std::string gen_layout = "uniform";
    gen->add_option("--clusters", gspec.clusters, "number of clusters");
    gen->add_option("--per", gspec.per_cluster, "points per cluster");
    gen->add_option("--m", gspec.dims, "dimensions");
    gen->add_option("--spread", gspec.spread, "per-dimension spread");
    gen->add_option("--seed", gspec.seed, "generator seed");
    gen->add_option("--layout", gen_layout, "uniform|coded")
        ->check(CLI::IsMember({"uniform", "coded"}));
    gen->add_option("--core-scale", gspec.core_scale, "coded layout core magnitude");
    gen->add_option("--outlier-scale", gspec.outlier_scale, "coded layout outlier magnitude");
    gen->add_option("--out", gen_out, "output path");
    gen->add_option("--format", gen_format, "csv|bin")->check(CLI::IsMember({"csv", "bin"}));

    // --- run ---
    auto* runc = app.add_subcommand("run", "run one algorithm once");
    std::string run_algo = "ds-ucb", run_data, run_matrix, run_model, run_out, run_first = "0";
    kc::RunConfig rcfg;
    double run_sigma2 = 0.01;
    bool run_check = false;
    runc->add_option("--algo", run_algo, "greedy|random|ds-ucb|ds-ts|ns-ts|ns-tands")
        ->check(CLI::IsMember({"greedy", "random", "ds-ucb", "ds-ts", "ns-ts", "ns-tands"}));
    runc->add_option("--data", run_data, "points file (CSV or KCPT)");
    runc->add_option("--matrix", run_matrix, "distance matrix CSV");
    runc->add_option("--model", run_model, "oracle override: ds|ns|bernoulli")
        ->check(CLI::IsMember({"", "ds", "ns", "bernoulli"}));
    runc->add_option("--k", rcfg.k, "number of centers");
    runc->add_option("--delta", rcfg.delta, "confidence parameter");
    runc->add_option("--z", rcfg.z, "TS/LCB mixing parameter");
    runc->add_option("--c-alpha", rcfg.c_alpha, "C_alpha CI hyperparameter");
    runc->add_option("--sigma2", run_sigma2, "NS noise variance (and GLR scale)");
    runc->add_option("--seed", rcfg.seed, "run seed");
    runc->add_option("--first-center", run_first, "index or 'random'");
    runc->add_option("--recompute-period", rcfg.recompute_period,
                     "NS-TandS weight recompute period");
    runc->add_option("--ascent-iters", rcfg.ascent_iterations,
                     "mirror ascent iterations inside NS-TandS");
    runc->add_flag("--check-greedy", run_check, "also run exact greedy and compare");
    runc->add_option("--out", run_out, "append the result row to this CSV");

    // --- sweep ---
    auto* sweep = app.add_subcommand("sweep", "grid x repetitions from a spec file");
    std::string sweep_spec_path;
    std::size_t sweep_jobs = 0;
    sweep->add_option("spec", sweep_spec_path, "key=value spec file")->required();
    sweep->add_option("--jobs", sweep_jobs, "worker threads (default: logical cores)");

    // --- diag ---
    auto* diag = app.add_subcommand("diag", "hardness terms and bounds");
    std::string diag_data, diag_matrix, diag_out, diag_tstar;
    std::size_t diag_k = 3, diag_n = 10, diag_m = 64;
    double diag_delta = 0.1, diag_sigma2 = 0.01, diag_gamma = 1.0;
    std::uint64_t diag_seed = 0;
    bool diag_rademacher = false;
    std::size_t diag_first = 0;
    diag->add_option("--data", diag_data, "points file");
    diag->add_option("--matrix", diag_matrix, "distance matrix CSV");
    diag->add_option("--k", diag_k, "number of centers");
    diag->add_option("--delta", diag_delta, "confidence parameter");
    diag->add_option("--sigma2", diag_sigma2, "noise variance for the T* sum");
    diag->add_option("--gamma", diag_gamma, "Track-and-Stop constant in [1, e/2]");
    diag->add_option("--first-center", diag_first, "first center index");
    diag->add_option("--out", diag_out, "write per-arm hardness terms CSV here");
    diag->add_flag("--rademacher", diag_rademacher, "generate a +-1/2 dataset instead");
    diag->add_option("--n", diag_n, "rademacher points");
    diag->add_option("--m", diag_m, "rademacher dimensions");
    diag->add_option("--seed", diag_seed, "rademacher seed");
    diag->add_option("--tstar", diag_tstar, "means matrix CSV: print T* and omega*");

    // --- t-star ---
    auto* ts = app.add_subcommand("t-star", "maximin characteristic time of a means matrix");
    std::string ts_means;
    std::size_t ts_iters = 100000;
    ts->add_option("means", ts_means, "a x b means CSV")->required();
    ts->add_option("--iters", ts_iters, "mirror ascent iterations");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*gen) {
            gspec.layout =
                gen_layout == "coded" ? kc::ClusterLayout::coded : kc::ClusterLayout::uniform;
            return cmd_gen(gspec, gen_out, gen_format);
        }
        if (*runc) {
            const kc::DataSource src = load_source(run_data, run_matrix);
            kc::SingleRunSpec spec;
            spec.algo = kc::parse_algo(run_algo);
            if (run_model == "ds") spec.model = kc::OracleModel::dimension_sampling;
            else if (run_model == "ns") spec.model = kc::OracleModel::noisy_distance;
            else if (run_model == "bernoulli") spec.model = kc::OracleModel::bernoulli_distance;
            spec.cfg = rcfg;
            spec.sigma2 = run_sigma2;
            spec.check_greedy = run_check;
            if (run_first == "random") spec.cfg.first_center.reset();
            else spec.cfg.first_center = std::stoull(run_first);
            const kc::ResultRow row = kc::run_single(src, spec);
            if (!run_out.empty()) {
                const bool fresh = !std::ifstream(run_out).good();
                std::ofstream out(run_out, std::ios::app);
                if (!out) throw kc::Error("cannot write file: " + run_out);
                if (fresh) out << kc::ResultRow::csv_header() << '\n';
                out << row.to_csv() << '\n';
            }
            std::cout << kc::ResultRow::csv_header() << '\n' << row.to_csv() << '\n';
            return 0;
        }
        if (*sweep) {
            std::ifstream in(sweep_spec_path);
            if (!in) throw kc::Error("cannot open spec file: " + sweep_spec_path);
            kc::ExperimentSpec espec = kc::parse_experiment_spec(in);
            if (sweep_jobs > 0) espec.jobs = sweep_jobs;
            const kc::SweepResult res = kc::run_sweep(espec);
            kc::write_sweep_csv(res, espec.out);
            std::size_t failures = 0;
            for (const auto& row : res.rows)
                if (!row.error.empty()) ++failures;
            std::cout << "wrote " << res.rows.size() << " rows to " << espec.out << " ("
                      << failures << " failures)\n";
            return failures == 0 ? 0 : kExitRun;
        }
        if (*diag) {
            if (!diag_tstar.empty()) {
                print_tstar(load_means(diag_tstar), 100000);
                return 0;
            }
            kc::DataSource src =
                diag_rademacher
                    ? kc::DataSource(std::in_place_type<kc::PointSet>,
                                     kc::generate_rademacher(diag_n, diag_m, diag_seed))
                    : load_source(diag_data, diag_matrix);
            const kc::HardnessReport rep = std::visit(
                [&](const auto& s) {
                    return kc::hardness_report(s, diag_k, diag_delta, diag_sigma2, diag_gamma,
                                               diag_first);
                },
                src);
            std::cout << "metric,value\n";
            std::cout << "ub," << kc::format_double(rep.ub) << "\n";
            std::cout << "lb," << kc::format_double(rep.lb) << "\n";
            std::cout << "tstar_sum," << kc::format_double(rep.tstar_sum) << "\n";
            if (!diag_out.empty()) {
                std::ofstream out(diag_out);
                if (!out) throw kc::Error("cannot write file: " + diag_out);
                out << "v,center_ordinal,stage,m_term\n";
                for (const auto& e : rep.m_terms)
                    out << e.v << ',' << e.i << ',' << e.p << ',' << kc::format_double(e.value)
                        << '\n';
            }
            return 0;
        }
        if (*ts) {
            print_tstar(load_means(ts_means), ts_iters);
            return 0;
        }
    } catch (const kc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        const std::string what = e.what();
        if (what.find("exceeded the round cap") != std::string::npos ||
            what.find("non-finite") != std::string::npos ||
            what.find("ledger mismatch") != std::string::npos)
            return kExitRun;
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRun;
    }
    return kExitUsage;
}
