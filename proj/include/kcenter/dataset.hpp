#pragma once
// Point sets, distance matrices and exact-distance utilities.
//
// Distances are normalized squared Euclidean: d(u,v) = ||x_u - x_v||^2 / m.
// Coordinates are kept in [-1/2, 1/2] (or [0, 1] under the unit convention),
// which bounds every per-dimension squared distance -- and hence every
// distance -- by 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kcenter/rng.hpp"

namespace kc {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

enum class NormConvention { centered, unit };

class PointSet {
public:
    PointSet(std::vector<double> data, std::size_t n, std::size_t m)
        : data_(std::move(data)), n_(n), m_(m) {
        if (n_ < 2 || m_ < 1) throw Error("PointSet: need n >= 2 and m >= 1");
        if (data_.size() != n_ * m_) throw Error("PointSet: data size mismatch");
    }

    std::size_t size() const { return n_; }
    std::size_t dims() const { return m_; }

    double coord(std::size_t u, std::size_t j) const { return data_[u * m_ + j]; }
    std::span<const double> row(std::size_t u) const { return {data_.data() + u * m_, m_}; }

    // (1/m) sum_j (x_u_j - x_v_j)^2
    double distance(std::size_t u, std::size_t v) const {
        const double* a = data_.data() + u * m_;
        const double* b = data_.data() + v * m_;
        double acc = 0.0;
        for (std::size_t j = 0; j < m_; ++j) {
            const double d = a[j] - b[j];
            acc += d * d;
        }
        return acc / static_cast<double>(m_);
    }

private:
    std::vector<double> data_;
    std::size_t n_;
    std::size_t m_;
};

inline double exact_distance(const PointSet& ps, std::size_t u, std::size_t v) {
    if (u >= ps.size() || v >= ps.size()) throw Error("exact_distance: index out of range");
    return ps.distance(u, v);
}

// Affine per-dimension map onto the target interval. Constant dimensions map
// to the interval midpoint offset, i.e. 0 (centered) or 0.5 shifted back to 0.
inline PointSet normalize(const std::vector<double>& raw, std::size_t n, std::size_t m,
                          NormConvention conv = NormConvention::centered) {
    if (n < 2 || m < 1) throw Error("normalize: need n >= 2 and m >= 1");
    if (raw.size() != n * m) throw Error("normalize: data size mismatch");
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t j = 0; j < m; ++j) {
            if (!std::isfinite(raw[u * m + j])) {
                throw Error("normalize: non-finite value at row " + std::to_string(u) +
                            ", dimension " + std::to_string(j));
            }
        }
    }
    std::vector<double> out(n * m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double lo = raw[j], hi = raw[j];
        for (std::size_t u = 1; u < n; ++u) {
            lo = std::min(lo, raw[u * m + j]);
            hi = std::max(hi, raw[u * m + j]);
        }
        const double range = hi - lo;
        const double mid = 0.5 * (hi + lo);
        for (std::size_t u = 0; u < n; ++u) {
            double x = 0.0;
            if (range > 0.0) x = (raw[u * m + j] - mid) / range;  // [-1/2, 1/2]
            if (conv == NormConvention::unit) x += 0.5;
            out[u * m + j] = x;
        }
    }
    return PointSet(std::move(out), n, m);
}

class DistanceMatrix {
public:
    // Validates symmetry (tolerance 1e-9), zero diagonal and the [0,1] range;
    // entries within 1e-12 of a boundary are clamped onto it. The stored
    // matrix is exactly symmetric.
    DistanceMatrix(std::vector<double> d, std::size_t n) : d_(std::move(d)), n_(n) {
        if (n_ < 2) throw Error("DistanceMatrix: need n >= 2");
        if (d_.size() != n_ * n_) throw Error("DistanceMatrix: data size mismatch");
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) {
                double& x = d_[i * n_ + j];
                if (!std::isfinite(x))
                    throw Error("DistanceMatrix: non-finite entry at (" + std::to_string(i) +
                                "," + std::to_string(j) + ")");
                if (x < 0.0 && x > -1e-12) x = 0.0;
                if (x > 1.0 && x < 1.0 + 1e-12) x = 1.0;
                if (x < 0.0 || x > 1.0)
                    throw Error("DistanceMatrix: entry out of [0,1] at (" + std::to_string(i) +
                                "," + std::to_string(j) + ")");
            }
            if (d_[i * n_ + i] != 0.0)
                throw Error("DistanceMatrix: nonzero diagonal at (" + std::to_string(i) + "," +
                            std::to_string(i) + ")");
        }
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = i + 1; j < n_; ++j) {
                const double a = d_[i * n_ + j], b = d_[j * n_ + i];
                if (std::fabs(a - b) > 1e-9)
                    throw Error("DistanceMatrix: asymmetry at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
                const double s = 0.5 * (a + b);
                d_[i * n_ + j] = s;
                d_[j * n_ + i] = s;
            }
        }
    }

    std::size_t size() const { return n_; }
    double distance(std::size_t u, std::size_t v) const { return d_[u * n_ + v]; }

private:
    std::vector<double> d_;
    std::size_t n_;
};

template <typename S>
concept DistanceSource = requires(const S& s, std::size_t u, std::size_t v) {
    { s.size() } -> std::convertible_to<std::size_t>;
    { s.distance(u, v) } -> std::convertible_to<double>;
};

// Ordered center list; order is the greedy stage order.
using CenterSet = std::vector<std::size_t>;

// argmax over v not in S of min over s in S of d(v,s). Ties by lowest index.
template <DistanceSource S>
std::pair<std::size_t, double> bottleneck(const S& src, const CenterSet& centers) {
    const std::size_t n = src.size();
    if (centers.empty() || centers.size() >= n) throw Error("bottleneck: need 1 <= |S| < n");
    std::vector<bool> in_s(n, false);
    for (std::size_t s : centers) {
        if (s >= n) throw Error("bottleneck: center index out of range");
        in_s[s] = true;
    }
    std::size_t best_v = n;
    double best = -1.0;
    for (std::size_t v = 0; v < n; ++v) {
        if (in_s[v]) continue;
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t s : centers) dmin = std::min(dmin, src.distance(v, s));
        if (dmin > best) {
            best = dmin;
            best_v = v;
        }
    }
    return {best_v, best};
}

// Bottleneck value of a full center set; 0 when every point is a center.
template <DistanceSource S>
double bottleneck_value(const S& src, const CenterSet& centers) {
    if (centers.size() >= src.size()) return 0.0;
    return bottleneck(src, centers).second;
}

struct BruteForceResult {
    CenterSet centers;
    double value = 0.0;
};

inline double subset_count(std::size_t n, std::size_t k) {
    double c = 1.0;
    for (std::size_t i = 0; i < k; ++i) c = c * static_cast<double>(n - i) / static_cast<double>(i + 1);
    return c;
}

// Exact optimum by exhaustive enumeration; test oracle for the greedy
// 2-approximation. Refuses instances with more than max_subsets subsets.
template <DistanceSource S>
BruteForceResult optimal_kcenter_bruteforce(const S& src, std::size_t k,
                                            double max_subsets = 1e6) {
    const std::size_t n = src.size();
    if (k == 0 || k > n) throw Error("optimal_kcenter_bruteforce: need 1 <= k <= n");
    if (subset_count(n, k) > max_subsets)
        throw Error("optimal_kcenter_bruteforce: instance too large (C(n,k) over budget)");
    CenterSet subset(k);
    std::iota(subset.begin(), subset.end(), 0);
    BruteForceResult best;
    best.value = std::numeric_limits<double>::infinity();
    for (;;) {
        const double val = bottleneck_value(src, subset);
        if (val < best.value) {
            best.value = val;
            best.centers = subset;
        }
        // next k-combination of {0..n-1}
        std::size_t i = k;
        while (i > 0 && subset[i - 1] == n - k + i - 1) --i;
        if (i == 0) break;
        ++subset[i - 1];
        for (std::size_t j = i; j < k; ++j) subset[j] = subset[j - 1] + 1;
    }
    return best;
}

enum class ClusterLayout { uniform, coded };

// Synthetic cluster generator. The uniform layout draws cluster centers
// uniformly in [-1/2,1/2]^m and scatters points around them. The coded layout
// places cluster sign patterns on structured dimension blocks so that the
// greedy trajectory has well-separated per-stage gaps; the last point of each
// cluster is pushed outward to outlier_scale and becomes that cluster's
// representative.
struct ClusterSpec {
    std::size_t clusters = 4;
    std::size_t per_cluster = 10;
    std::size_t dims = 50;
    double spread = 0.01;
    std::uint64_t seed = 0;
    ClusterLayout layout = ClusterLayout::uniform;
    double core_scale = 0.3;     // coded layout only
    double outlier_scale = 0.5;  // coded layout only
};

namespace detail {

// Exact flip-block design for 4 coded clusters: fractions of dimensions on
// which each subset of clusters {1,2,3} is sign-flipped relative to cluster 0.
// Chosen so that h(0,i) = (0.5, 0.65, 0.8) and h(i,j) = 0.55 for i,j >= 1,
// where h is the fraction of differing dimensions.
struct CodedBlock {
    unsigned mask;  // bit i-1 set => cluster i flipped
    double weight;
};

inline const std::vector<CodedBlock>& coded_blocks4() {
    static const std::vector<CodedBlock> blocks = {
        {0b010, 0.075}, {0b100, 0.150}, {0b011, 0.125},
        {0b101, 0.200}, {0b110, 0.275}, {0b111, 0.175},
    };
    return blocks;
}

}  // namespace detail

inline PointSet generate_synthetic(const ClusterSpec& spec) {
    if (spec.clusters < 2 || spec.per_cluster < 1 || spec.dims < 1)
        throw Error("generate_synthetic: need clusters >= 2, per_cluster >= 1, dims >= 1");
    const std::size_t n = spec.clusters * spec.per_cluster;
    const std::size_t m = spec.dims;
    if (n < 2) throw Error("generate_synthetic: need at least 2 points");
    Rng rng(mix_seed(spec.seed, 0x67656e /* "gen" */));
    std::vector<double> raw(n * m, 0.0);

    if (spec.layout == ClusterLayout::uniform) {
        std::vector<double> centers(spec.clusters * m);
        for (double& c : centers) c = rng.uniform(-0.5, 0.5);
        for (std::size_t c = 0; c < spec.clusters; ++c) {
            for (std::size_t p = 0; p < spec.per_cluster; ++p) {
                const std::size_t u = c * spec.per_cluster + p;
                for (std::size_t j = 0; j < m; ++j) {
                    raw[u * m + j] =
                        centers[c * m + j] + rng.uniform(-spec.spread, spec.spread);
                }
            }
        }
    } else {
        // Sign pattern per (cluster, dim): cluster 0 is the base pattern.
        std::vector<double> base(m);
        for (double& b : base) b = rng.bernoulli(0.5) ? 1.0 : -1.0;
        std::vector<unsigned> flip_mask(m, 0);
        if (spec.clusters == 4) {
            std::size_t j = 0;
            for (const auto& blk : detail::coded_blocks4()) {
                const std::size_t cnt = static_cast<std::size_t>(
                    std::llround(blk.weight * static_cast<double>(m)));
                for (std::size_t c = 0; c < cnt && j < m; ++c, ++j) flip_mask[j] = blk.mask;
            }
            for (; j < m; ++j) flip_mask[j] = detail::coded_blocks4().back().mask;
        } else {
            const std::size_t kk = spec.clusters - 1;
            for (std::size_t j = 0; j < m; ++j) {
                unsigned mask = 0;
                for (std::size_t i = 1; i < spec.clusters; ++i) {
                    const double p =
                        kk > 1 ? 0.5 + 0.3 * static_cast<double>(i - 1) / static_cast<double>(kk - 1)
                               : 0.7;
                    if (rng.bernoulli(p)) mask |= (1u << (i - 1));
                }
                flip_mask[j] = mask;
            }
        }
        for (std::size_t c = 0; c < spec.clusters; ++c) {
            for (std::size_t p = 0; p < spec.per_cluster; ++p) {
                const std::size_t u = c * spec.per_cluster + p;
                const bool outlier = (p + 1 == spec.per_cluster) && spec.per_cluster > 1;
                const double scale = outlier ? spec.outlier_scale : spec.core_scale;
                for (std::size_t j = 0; j < m; ++j) {
                    double sign = base[j];
                    if (c > 0 && (flip_mask[j] & (1u << (c - 1)))) sign = -sign;
                    double x = sign * scale;
                    if (!outlier) x += rng.uniform(-spec.spread, spec.spread);
                    raw[u * m + j] = x;
                }
            }
        }
    }
    return normalize(raw, n, m);
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

namespace detail {

inline bool parse_double(const std::string& tok, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(tok, &pos);
        while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
        return pos == tok.size();
    } catch (...) {
        return false;
    }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

struct CsvTable {
    std::vector<std::vector<double>> rows;
};

// Reads a numeric CSV; an optional header row is detected by a non-numeric
// first cell and skipped.
inline CsvTable load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    bool first_data = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto toks = split_csv_line(line);
        std::vector<double> row;
        row.reserve(toks.size());
        bool ok = true;
        for (const auto& t : toks) {
            double v;
            if (!parse_double(t, v)) {
                ok = false;
                break;
            }
            row.push_back(v);
        }
        if (!ok) {
            if (first_data) {  // header row
                first_data = false;
                continue;
            }
            throw Error(path + ": non-numeric value at line " + std::to_string(lineno));
        }
        first_data = false;
        if (!table.rows.empty() && row.size() != table.rows.front().size())
            throw Error(path + ": inconsistent column count at line " + std::to_string(lineno));
        table.rows.push_back(std::move(row));
    }
    if (table.rows.empty()) throw Error(path + ": no data rows");
    return table;
}

}  // namespace detail

inline constexpr char kPointsMagic[4] = {'K', 'C', 'P', 'T'};

inline PointSet load_points_csv(const std::string& path,
                                NormConvention conv = NormConvention::centered) {
    const auto table = detail::load_csv(path);
    const std::size_t n = table.rows.size();
    const std::size_t m = table.rows.front().size();
    std::vector<double> raw;
    raw.reserve(n * m);
    for (const auto& row : table.rows) raw.insert(raw.end(), row.begin(), row.end());
    return normalize(raw, n, m, conv);
}

inline PointSet load_points_bin(const std::string& path,
                                NormConvention conv = NormConvention::centered) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kPointsMagic, 4))
        throw Error(path + ": bad magic (expected KCPT)");
    std::uint32_t n = 0, m = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    in.read(reinterpret_cast<char*>(&m), 4);
    if (!in || n < 2 || m < 1) throw Error(path + ": bad header");
    std::vector<float> buf(static_cast<std::size_t>(n) * m);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!in) throw Error(path + ": truncated payload");
    std::vector<double> raw(buf.begin(), buf.end());
    return normalize(raw, n, m, conv);
}

inline PointSet load_points(const std::string& path,
                            NormConvention conv = NormConvention::centered) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    in.close();
    if (std::string(magic, 4) == std::string(kPointsMagic, 4)) return load_points_bin(path, conv);
    return load_points_csv(path, conv);
}

inline DistanceMatrix load_distance_matrix(const std::string& path) {
    const auto table = detail::load_csv(path);
    const std::size_t n = table.rows.size();
    if (table.rows.front().size() != n)
        throw Error(path + ": distance matrix must be square, got " + std::to_string(n) +
                    " rows x " + std::to_string(table.rows.front().size()) + " columns");
    std::vector<double> d;
    d.reserve(n * n);
    for (const auto& row : table.rows) d.insert(d.end(), row.begin(), row.end());
    return DistanceMatrix(std::move(d), n);
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void save_points_csv(const PointSet& ps, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    for (std::size_t u = 0; u < ps.size(); ++u) {
        for (std::size_t j = 0; j < ps.dims(); ++j) {
            if (j) out << ',';
            out << format_double(ps.coord(u, j));
        }
        out << '\n';
    }
}

inline void save_points_bin(const PointSet& ps, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out.write(kPointsMagic, 4);
    const std::uint32_t n = static_cast<std::uint32_t>(ps.size());
    const std::uint32_t m = static_cast<std::uint32_t>(ps.dims());
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(&m), 4);
    for (std::size_t u = 0; u < ps.size(); ++u) {
        for (std::size_t j = 0; j < ps.dims(); ++j) {
            const float f = static_cast<float>(ps.coord(u, j));
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
}

// key=value cluster spec, one pair per line; '#' starts a comment.
inline ClusterSpec parse_cluster_spec(std::istream& in) {
    ClusterSpec spec;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw Error("cluster spec: expected key=value at line " + std::to_string(lineno));
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        double num = 0.0;
        const bool numeric = detail::parse_double(val, num);
        if (key == "clusters" && numeric) spec.clusters = static_cast<std::size_t>(num);
        else if (key == "per_cluster" && numeric) spec.per_cluster = static_cast<std::size_t>(num);
        else if (key == "m" && numeric) spec.dims = static_cast<std::size_t>(num);
        else if (key == "spread" && numeric) spec.spread = num;
        else if (key == "seed" && numeric) spec.seed = static_cast<std::uint64_t>(num);
        else if (key == "layout") {
            if (val == "uniform") spec.layout = ClusterLayout::uniform;
            else if (val == "coded") spec.layout = ClusterLayout::coded;
            else throw Error("cluster spec: unknown layout '" + val + "'");
        } else if (key == "core_scale" && numeric) spec.core_scale = num;
        else if (key == "outlier_scale" && numeric) spec.outlier_scale = num;
        else throw Error("cluster spec: unknown or malformed entry '" + key + "'");
    }
    return spec;
}

}  // namespace kc
