#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "kcenter/algorithms.hpp"
#include "kcenter/dataset.hpp"

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("kc_dataset_" + name)).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

// independent oracle: scan every (v, s) pair
template <kc::DistanceSource S>
std::pair<std::size_t, double> bottleneck_scan(const S& src, const kc::CenterSet& centers) {
    std::size_t best_v = src.size();
    double best = -1.0;
    for (std::size_t v = 0; v < src.size(); ++v) {
        if (std::find(centers.begin(), centers.end(), v) != centers.end()) continue;
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t s : centers) dmin = std::min(dmin, src.distance(v, s));
        if (dmin > best) {
            best = dmin;
            best_v = v;
        }
    }
    return {best_v, best};
}

// independent oracle: recursive subset enumeration
void enumerate_subsets(std::size_t n, std::size_t k, std::size_t start, kc::CenterSet& cur,
                       const std::function<void(const kc::CenterSet&)>& fn) {
    if (cur.size() == k) {
        fn(cur);
        return;
    }
    for (std::size_t v = start; v < n; ++v) {
        cur.push_back(v);
        enumerate_subsets(n, k, v + 1, cur, fn);
        cur.pop_back();
    }
}

kc::PointSet random_points(std::size_t n, std::size_t m, std::uint64_t seed) {
    kc::Rng rng(seed);
    std::vector<double> raw(n * m);
    for (double& x : raw) x = rng.uniform(-3.0, 5.0);
    return kc::normalize(raw, n, m);
}

const kc::PointSet kLine3 = kc::PointSet({-0.5, 0.0, 0.5}, 3, 1);

}  // namespace

TEST_CASE("normalize maps each dimension onto [-1/2, 1/2]") {
    const kc::PointSet ps = kc::normalize({0, 1, 2}, 3, 1);
    CHECK(ps.coord(0, 0) == -0.5);
    CHECK(ps.coord(1, 0) == 0.0);
    CHECK(ps.coord(2, 0) == 0.5);

    const kc::PointSet constant = kc::normalize({5, 5, 5}, 3, 1);
    for (std::size_t u = 0; u < 3; ++u) CHECK(constant.coord(u, 0) == 0.0);
}

TEST_CASE("normalize unit convention shifts to [0, 1]") {
    const kc::PointSet ps = kc::normalize({0, 1, 2}, 3, 1, kc::NormConvention::unit);
    CHECK(ps.coord(0, 0) == 0.0);
    CHECK(ps.coord(1, 0) == 0.5);
    CHECK(ps.coord(2, 0) == 1.0);
}

TEST_CASE("normalize handles image-scale dimensionality") {
    const std::size_t m = 12288;
    kc::Rng rng(11);
    std::vector<double> raw(3 * m);
    for (double& x : raw) x = rng.uniform01();
    const kc::PointSet ps = kc::normalize(raw, 3, m);
    for (std::size_t u = 0; u < 3; ++u)
        for (std::size_t j = 0; j < m; ++j) {
            REQUIRE(ps.coord(u, j) >= -0.5);
            REQUIRE(ps.coord(u, j) <= 0.5);
        }
}

TEST_CASE("normalize rejects non-finite input naming the dimension") {
    std::vector<double> raw = {0, 1, std::numeric_limits<double>::quiet_NaN(), 3};
    try {
        kc::normalize(raw, 2, 2);
        FAIL("expected rejection");
    } catch (const kc::Error& e) {
        CHECK(std::string(e.what()).find("dimension 0") != std::string::npos);
    }
}

TEST_CASE("exact distance basics") {
    CHECK(kc::exact_distance(kLine3, 0, 2) == 1.0);
    CHECK(kc::exact_distance(kLine3, 1, 1) == 0.0);

    const kc::PointSet two({-0.5, 0.0, 0.5, 0.0}, 2, 2);
    CHECK(kc::exact_distance(two, 0, 1) == 0.5);
}

TEST_CASE("exact distance is a bounded symmetric form") {
    const kc::PointSet ps = random_points(12, 6, 42);
    for (std::size_t u = 0; u < ps.size(); ++u) {
        for (std::size_t v = 0; v < ps.size(); ++v) {
            const double d = kc::exact_distance(ps, u, v);
            CHECK(d >= 0.0);
            CHECK(d <= 1.0);
            CHECK(d == kc::exact_distance(ps, v, u));
        }
        CHECK(kc::exact_distance(ps, u, u) == 0.0);
    }
}

TEST_CASE("bottleneck on the 1-D line") {
    auto [v1, d1] = kc::bottleneck(kLine3, {0});
    CHECK(v1 == 2);
    CHECK(d1 == 1.0);

    auto [v2, d2] = kc::bottleneck(kLine3, {0, 2});
    CHECK(v2 == 1);
    CHECK(d2 == 0.25);
}

TEST_CASE("bottleneck ties break toward the lowest index") {
    // two coincident far points
    const kc::PointSet ps({-0.5, 0.5, 0.5, -0.4}, 4, 1);
    auto [v, d] = kc::bottleneck(ps, {0});
    CHECK(v == 1);
    CHECK(d == 1.0);
}

TEST_CASE("bottleneck equals the exhaustive scan") {
    const kc::PointSet small = random_points(8, 3, 7);
    auto [v, d] = kc::bottleneck(small, {1, 5});
    auto [sv, sd] = bottleneck_scan(small, {1, 5});
    CHECK(v == sv);
    CHECK(d == sd);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const std::size_t n = 20 + static_cast<std::size_t>(seed) * 3;  // up to 47
        const kc::PointSet ps = random_points(n, 4, 100 + seed);
        kc::Rng rng(seed);
        kc::CenterSet centers;
        while (centers.size() < 3) {
            const std::size_t c = rng.uniform_index(n);
            if (std::find(centers.begin(), centers.end(), c) == centers.end())
                centers.push_back(c);
        }
        auto got = kc::bottleneck(ps, centers);
        auto want = bottleneck_scan(ps, centers);
        CHECK(got.first == want.first);
        CHECK(got.second == want.second);
    }
}

TEST_CASE("brute-force optimum on the 1-D line") {
    const auto res = kc::optimal_kcenter_bruteforce(kLine3, 2);
    CHECK(res.value == 0.25);
}

TEST_CASE("brute-force optimum matches an independent enumeration") {
    const kc::PointSet ps = random_points(10, 3, 3);
    const auto res = kc::optimal_kcenter_bruteforce(ps, 3);
    double best = std::numeric_limits<double>::infinity();
    kc::CenterSet cur;
    std::size_t subsets = 0;
    enumerate_subsets(10, 3, 0, cur, [&](const kc::CenterSet& s) {
        ++subsets;
        best = std::min(best, kc::bottleneck_value(ps, s));
    });
    CHECK(subsets == 120);
    CHECK(res.value == best);
}

TEST_CASE("brute-force handles k = n and refuses huge instances") {
    const auto res = kc::optimal_kcenter_bruteforce(kLine3, 3);
    CHECK(res.value == 0.0);
    const kc::PointSet big = random_points(40, 2, 1);
    CHECK_THROWS_AS(kc::optimal_kcenter_bruteforce(big, 20), kc::Error);
}

TEST_CASE("greedy is a 2-approximation on small instances") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const std::size_t n = 8 + seed % 5;  // 8..12
        const std::size_t k = 2 + seed % 2;
        const kc::PointSet ps = random_points(n, 4, 500 + seed);
        const kc::RunResult g = kc::greedy_exact(ps, k, 0);
        const auto opt = kc::optimal_kcenter_bruteforce(ps, k);
        const double gv = kc::bottleneck_value(ps, g.centers);
        CHECK(gv <= 2.0 * opt.value);
    }
}

TEST_CASE("synthetic generation is deterministic") {
    kc::ClusterSpec spec;
    spec.clusters = 4;
    spec.per_cluster = 10;
    spec.dims = 50;
    spec.spread = 0.01;
    spec.seed = 7;
    const kc::PointSet a = kc::generate_synthetic(spec);
    const kc::PointSet b = kc::generate_synthetic(spec);
    REQUIRE(a.size() == 40);
    REQUIRE(a.dims() == 50);
    for (std::size_t u = 0; u < a.size(); ++u)
        for (std::size_t j = 0; j < a.dims(); ++j) REQUIRE(a.coord(u, j) == b.coord(u, j));
}

TEST_CASE("zero spread collapses clusters onto their centers") {
    kc::ClusterSpec spec;
    spec.clusters = 3;
    spec.per_cluster = 4;
    spec.dims = 8;
    spec.spread = 0.0;
    spec.seed = 9;
    const kc::PointSet ps = kc::generate_synthetic(spec);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t p = 1; p < 4; ++p)
            CHECK(kc::exact_distance(ps, c * 4, c * 4 + p) == 0.0);
}

TEST_CASE("greedy picks one point per cluster on the separated instance") {
    kc::ClusterSpec spec;
    spec.clusters = 4;
    spec.per_cluster = 10;
    spec.dims = 50;
    spec.spread = 0.01;
    spec.seed = 7;
    const kc::PointSet ps = kc::generate_synthetic(spec);
    const kc::RunResult g = kc::greedy_exact(ps, 4, 0);
    std::set<std::size_t> clusters;
    for (std::size_t c : g.centers) clusters.insert(c / 10);
    CHECK(clusters.size() == 4);
}

TEST_CASE("CSV points load with normalization and header detection") {
    const std::string path = temp_path("pts.csv");
    write_file(path, "0,0\n1,0\n0,1\n");
    const kc::PointSet ps = kc::load_points(path);
    REQUIRE(ps.size() == 3);
    REQUIRE(ps.dims() == 2);
    CHECK(ps.coord(0, 0) == -0.5);
    CHECK(ps.coord(1, 0) == 0.5);

    const std::string hdr = temp_path("pts_hdr.csv");
    write_file(hdr, "x,y\n0,0\n1,0\n0,1\n");
    const kc::PointSet ps2 = kc::load_points(hdr);
    CHECK(ps2.size() == 3);
    std::remove(path.c_str());
    std::remove(hdr.c_str());
}

TEST_CASE("binary KCPT round trip") {
    const kc::PointSet orig = random_points(9, 5, 77);
    const std::string path = temp_path("pts.kcpt");
    kc::save_points_bin(orig, path);
    const kc::PointSet back = kc::load_points(path);
    REQUIRE(back.size() == orig.size());
    REQUIRE(back.dims() == orig.dims());
    for (std::size_t u = 0; u < orig.size(); ++u)
        for (std::size_t v = 0; v < orig.size(); ++v)
            CHECK(kc::exact_distance(back, u, v) ==
                  Catch::Approx(kc::exact_distance(orig, u, v)).margin(1e-5));
    std::remove(path.c_str());
}

TEST_CASE("distance matrix validation") {
    const std::string path = temp_path("dm.csv");
    write_file(path, "0,0.2,0.3\n0.2,0,0.4\n0.3,0.7,0\n");  // d[1][2] != d[2][1]
    try {
        kc::load_distance_matrix(path);
        FAIL("expected rejection");
    } catch (const kc::Error& e) {
        CHECK(std::string(e.what()).find("asymmetry") != std::string::npos);
        CHECK(std::string(e.what()).find("(1,2)") != std::string::npos);
    }

    write_file(path, "0,0.2,1.5\n0.2,0,0.4\n1.5,0.4,0\n");  // out of range
    CHECK_THROWS_AS(kc::load_distance_matrix(path), kc::Error);
    std::remove(path.c_str());
}

TEST_CASE("an empirical-probability matrix loads cleanly") {
    const std::size_t n = 55;
    kc::Rng rng(31);
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = rng.uniform01();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    const std::string path = temp_path("zappos.csv");
    {
        std::ofstream out(path);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (j) out << ',';
                out << kc::format_double(d[i * n + j]);
            }
            out << '\n';
        }
    }
    const kc::DistanceMatrix dm = kc::load_distance_matrix(path);
    REQUIRE(dm.size() == n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(dm.distance(i, j) >= 0.0);
            CHECK(dm.distance(i, j) <= 1.0);
        }
    std::remove(path.c_str());
}

TEST_CASE("cluster spec parsing") {
    std::istringstream in(
        "clusters=4\nper_cluster=10\nm=200\nspread=0.01\nseed=7\nlayout=coded\n");
    const kc::ClusterSpec spec = kc::parse_cluster_spec(in);
    CHECK(spec.clusters == 4);
    CHECK(spec.per_cluster == 10);
    CHECK(spec.dims == 200);
    CHECK(spec.spread == 0.01);
    CHECK(spec.seed == 7);
    CHECK(spec.layout == kc::ClusterLayout::coded);

    std::istringstream bad("clusterz=4\n");
    CHECK_THROWS_AS(kc::parse_cluster_spec(bad), kc::Error);
}
