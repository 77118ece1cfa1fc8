#pragma once

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <optional>
#include <unordered_map>

#include "arw/common.hpp"

namespace arw::lattice {

// ---------------------------------------------------------------------------
// Sums of three squares
// ---------------------------------------------------------------------------

inline int64_t isqrt64(int64_t n) {
    if (n < 0) return -1;
    auto r = static_cast<int64_t>(std::sqrt(static_cast<double>(n)));
    while (r * r > n) --r;
    while ((r + 1) * (r + 1) <= n) ++r;
    return r;
}

// n is a sum of three squares iff it is not of the form 4^a(8b+7).
inline bool is_sum_of_three_squares(int64_t n) {
    if (n < 1) throw Error("is_sum_of_three_squares: n must be positive");
    while (n % 4 == 0) n /= 4;
    return n % 8 != 7;
}

inline bool is_admissible(int64_t n) {
    int64_t r = n % 8;
    return r != 0 && r != 4 && r != 7;
}

// Integer points on the sphere of radius sqrt(n), lexicographically ordered.
struct FrequencySet {
    int64_t n = 0;
    std::vector<ivec3> points;
    bool admissible = false;

    int32_t cardinality() const { return static_cast<int32_t>(points.size()); }

    // index of -points[i]; filled by enumerate_frequencies
    std::vector<int32_t> negation;
    // true where the first nonzero coordinate is positive
    std::vector<uint8_t> canonical;

    int32_t index_of(const ivec3& p) const {
        auto it = std::lower_bound(points.begin(), points.end(), p);
        if (it == points.end() || *it != p) return -1;
        return static_cast<int32_t>(it - points.begin());
    }
};

inline FrequencySet enumerate_frequencies(int64_t n) {
    if (!is_sum_of_three_squares(n))
        throw NotRepresentable("n = " + std::to_string(n) + " is of the form 4^a(8b+7)");
    FrequencySet fs;
    fs.n = n;
    fs.admissible = is_admissible(n);
    int64_t r = isqrt64(n);
    for (int64_t a = -r; a <= r; ++a) {
        int64_t rem1 = n - a * a;
        int64_t r2 = isqrt64(rem1);
        for (int64_t b = -r2; b <= r2; ++b) {
            int64_t rem2 = rem1 - b * b;
            int64_t c = isqrt64(rem2);
            if (c * c == rem2) {
                if (c == 0) {
                    fs.points.push_back({int32_t(a), int32_t(b), 0});
                } else {
                    fs.points.push_back({int32_t(a), int32_t(b), int32_t(c)});
                    fs.points.push_back({int32_t(a), int32_t(b), int32_t(-c)});
                }
            }
        }
    }
    std::sort(fs.points.begin(), fs.points.end());
    int32_t N = fs.cardinality();
    fs.negation.resize(N);
    fs.canonical.resize(N);
    for (int32_t i = 0; i < N; ++i) {
        const ivec3& p = fs.points[i];
        ivec3 q{-p[0], -p[1], -p[2]};
        fs.negation[i] = fs.index_of(q);
        int32_t lead = p[0] != 0 ? p[0] : (p[1] != 0 ? p[1] : p[2]);
        fs.canonical[i] = lead > 0 ? 1 : 0;
    }
    return fs;
}

// ---------------------------------------------------------------------------
// Moment sums over the frequency set
// ---------------------------------------------------------------------------

struct LatticeMoments {
    std::array<std::array<double, 3>, 3> second_moment{};   // (1/nN) sum l_k l_j
    double psi = 0.0;                                       // (1/n^2 N) sum l_k^4
    double fourth[3][3][3][3] = {};                         // (1/n^2 N) sum l_k l_l l_j l_m
};

inline LatticeMoments lattice_moments(const FrequencySet& fs) {
    if (fs.points.empty()) throw Error("lattice_moments: empty frequency set");
    LatticeMoments m;
    double n = static_cast<double>(fs.n);
    double N = static_cast<double>(fs.cardinality());
    double acc2[3][3] = {};
    double acc4[3][3][3][3] = {};
    for (const auto& p : fs.points) {
        double l[3] = {double(p[0]), double(p[1]), double(p[2])};
        for (int k = 0; k < 3; ++k)
            for (int j = 0; j < 3; ++j) {
                acc2[k][j] += l[k] * l[j];
                for (int a = 0; a < 3; ++a)
                    for (int b = 0; b < 3; ++b) acc4[k][j][a][b] += l[k] * l[j] * l[a] * l[b];
            }
    }
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j) m.second_moment[k][j] = acc2[k][j] / (n * N);
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j)
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) m.fourth[k][j][a][b] = acc4[k][j][a][b] / (n * n * N);
    m.psi = m.fourth[0][0][0][0];
    return m;
}

// ---------------------------------------------------------------------------
// Pair-sum table: ordered pairs (i,j) grouped by the sum points[i]+points[j].
// Only one representative bucket per {s,-s} class is stored; the partner
// bucket is recovered through the symmetry (i,j) -> (neg i, neg j).
// ---------------------------------------------------------------------------

inline uint64_t pack_sum(int32_t x, int32_t y, int32_t z) {
    // coordinates of pair sums are bounded by 2*sqrt(n) < 2^20 for n < 2^38
    auto u = [](int32_t v) { return static_cast<uint64_t>(v + (1 << 20)); };
    return (u(x) << 42) | (u(y) << 21) | u(z);
}

struct PairTable {
    // pairs with s != 0 and key(s) < key(-s), grouped contiguously by s
    std::vector<int32_t> first, second;
    std::vector<uint32_t> bucket_start;  // size = #buckets + 1
    uint64_t total_ordered_pairs = 0;    // N^2 - N (pairs with nonzero sum)

    std::size_t bucket_count() const { return bucket_start.size() - 1; }
};

inline PairTable build_pair_table(const FrequencySet& fs,
                                  uint64_t memory_cap_bytes = 4ull << 30) {
    const int32_t N = fs.cardinality();
    uint64_t half = (uint64_t(N) * N - N) / 2;
    // keys + index pairs + sort scratch
    uint64_t need = half * (8 + 4 + 4 + 8);
    if (need > memory_cap_bytes)
        throw MemoryBudgetExceeded("pair table would need " + std::to_string(need) + " bytes");

    std::vector<uint64_t> keys;
    PairTable t;
    keys.reserve(half);
    t.first.reserve(half);
    t.second.reserve(half);
    for (int32_t i = 0; i < N; ++i) {
        const ivec3& a = fs.points[i];
        for (int32_t j = 0; j < N; ++j) {
            if (j == fs.negation[i]) continue;
            const ivec3& b = fs.points[j];
            int32_t sx = a[0] + b[0], sy = a[1] + b[1], sz = a[2] + b[2];
            uint64_t k = pack_sum(sx, sy, sz);
            uint64_t nk = pack_sum(-sx, -sy, -sz);
            if (k > nk) continue;  // the mirrored pair covers this one
            keys.push_back(k);
            t.first.push_back(i);
            t.second.push_back(j);
        }
    }
    t.total_ordered_pairs = uint64_t(N) * N - N;

    std::vector<uint32_t> order(keys.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](uint32_t a, uint32_t b) { return keys[a] < keys[b] || (keys[a] == keys[b] && a < b); });
    std::vector<int32_t> f2(keys.size()), s2(keys.size());
    std::vector<uint64_t> k2(keys.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        f2[i] = t.first[order[i]];
        s2[i] = t.second[order[i]];
        k2[i] = keys[order[i]];
    }
    t.first.swap(f2);
    t.second.swap(s2);
    t.bucket_start.clear();
    t.bucket_start.push_back(0);
    for (std::size_t i = 1; i < k2.size(); ++i)
        if (k2[i] != k2[i - 1]) t.bucket_start.push_back(static_cast<uint32_t>(i));
    t.bucket_start.push_back(static_cast<uint32_t>(k2.size()));
    return t;
}

// ---------------------------------------------------------------------------
// Correlation census
// ---------------------------------------------------------------------------

struct CorrelationCensus {
    int64_t n = 0;
    int m = 0;
    uint64_t card_C = 0;
    uint64_t card_X4 = 0;  // m == 4 only
    double rn_moment = 0.0;
};

namespace detail {

// Dense 3-d counting grid over coordinates in [-limit, limit].
class SumGrid {
  public:
    SumGrid(int32_t limit, uint64_t memory_cap_bytes) : limit_(limit), side_(2 * limit + 1) {
        uint64_t cells = uint64_t(side_) * side_ * side_;
        if (cells * sizeof(int64_t) > memory_cap_bytes)
            throw MemoryBudgetExceeded("census grid would need " +
                                       std::to_string(cells * sizeof(int64_t)) + " bytes");
        counts_.assign(cells, 0);
    }
    int64_t& at(int32_t x, int32_t y, int32_t z) {
        return counts_[(uint64_t(x + limit_) * side_ + (y + limit_)) * side_ + (z + limit_)];
    }
    template <typename F>
    void for_each(F&& f) const {
        for (int32_t x = -limit_; x <= limit_; ++x)
            for (int32_t y = -limit_; y <= limit_; ++y)
                for (int32_t z = -limit_; z <= limit_; ++z) {
                    int64_t c = counts_[(uint64_t(x + limit_) * side_ + (y + limit_)) * side_ +
                                        (z + limit_)];
                    if (c) f(x, y, z, c);
                }
    }
    int64_t get(int32_t x, int32_t y, int32_t z) const {
        if (std::abs(x) > limit_ || std::abs(y) > limit_ || std::abs(z) > limit_) return 0;
        return counts_[(uint64_t(x + limit_) * side_ + (y + limit_)) * side_ + (z + limit_)];
    }

  private:
    int32_t limit_, side_;
    std::vector<int64_t> counts_;
};

}  // namespace detail

// Number of m-tuples of frequencies summing to zero, via pair/triple sum
// convolution. For m = 4 the non-degenerate count follows from
// card C = 3N^2 - 3N + card X4.
inline CorrelationCensus correlation_census(const FrequencySet& fs, int m,
                                            uint64_t memory_cap_bytes = 4ull << 30) {
    if (m != 2 && m != 4 && m != 6) throw Error("correlation_census: m must be 2, 4 or 6");
    CorrelationCensus c;
    c.n = fs.n;
    c.m = m;
    const int64_t N = fs.cardinality();
    int32_t root = static_cast<int32_t>(isqrt64(fs.n));
    if (m == 2) {
        // lambda' = -lambda is the only solution
        c.card_C = static_cast<uint64_t>(N);
    } else if (m == 4) {
        detail::SumGrid grid(2 * root, memory_cap_bytes);
        for (const auto& a : fs.points)
            for (const auto& b : fs.points) ++grid.at(a[0] + b[0], a[1] + b[1], a[2] + b[2]);
        uint64_t total = 0;
        // summing cnt(s) * cnt(-s) over all s counts each quadruple once
        grid.for_each([&](int32_t x, int32_t y, int32_t z, int64_t cnt) {
            total += static_cast<uint64_t>(cnt) * static_cast<uint64_t>(grid.get(-x, -y, -z));
        });
        c.card_C = total;
        c.card_X4 = total - 3 * uint64_t(N) * N + 3 * uint64_t(N);
    } else {
        detail::SumGrid pairs(2 * root, memory_cap_bytes);
        for (const auto& a : fs.points)
            for (const auto& b : fs.points) ++pairs.at(a[0] + b[0], a[1] + b[1], a[2] + b[2]);
        detail::SumGrid triples(3 * root, memory_cap_bytes);
        pairs.for_each([&](int32_t x, int32_t y, int32_t z, int64_t cnt) {
            for (const auto& p : fs.points) triples.at(x + p[0], y + p[1], z + p[2]) += cnt;
        });
        uint64_t total = 0;
        triples.for_each([&](int32_t x, int32_t y, int32_t z, int64_t cnt) {
            total += static_cast<uint64_t>(cnt) * static_cast<uint64_t>(triples.get(-x, -y, -z));
        });
        c.card_C = total;
    }
    c.rn_moment = static_cast<double>(c.card_C) / std::pow(static_cast<double>(N), m);
    return c;
}

// Exhaustive O(N^3) count with membership lookups; oracle for the census.
inline CorrelationCensus correlation_census_bruteforce(const FrequencySet& fs) {
    CorrelationCensus c;
    c.n = fs.n;
    c.m = 4;
    const int32_t N = fs.cardinality();
    uint64_t cardC = 0, cardX = 0;
    for (int32_t i = 0; i < N; ++i)
        for (int32_t j = 0; j < N; ++j)
            for (int32_t k = 0; k < N; ++k) {
                ivec3 need{-(fs.points[i][0] + fs.points[j][0] + fs.points[k][0]),
                           -(fs.points[i][1] + fs.points[j][1] + fs.points[k][1]),
                           -(fs.points[i][2] + fs.points[j][2] + fs.points[k][2])};
                int32_t l = fs.index_of(need);
                if (l < 0) continue;
                ++cardC;
                if (fs.negation[i] != j && fs.negation[i] != k && fs.negation[i] != l &&
                    fs.negation[j] != k && fs.negation[j] != l && fs.negation[k] != l)
                    ++cardX;
            }
    c.card_C = cardC;
    c.card_X4 = cardX;
    c.rn_moment = static_cast<double>(cardC) / std::pow(static_cast<double>(N), 4);
    return c;
}

// Visits every element of X_n(4) in a deterministic order. The visitor gets
// the four point indices (i, j, k, l) with points[i]+points[j]+points[k]+
// points[l] = 0 and no vanishing pairwise sum. Returns the emitted count.
template <typename Visitor>
uint64_t stream_nondegenerate_quadruples(const FrequencySet& fs, const PairTable& t,
                                         Visitor&& visit) {
    uint64_t count = 0;
    const auto& neg = fs.negation;
    auto emit_half = [&](uint32_t lo, uint32_t hi, bool mirrored) {
        // first pair from this bucket (mirrored: its negation), second pair
        // from the opposite one
        for (uint32_t p = lo; p < hi; ++p) {
            int32_t i = t.first[p], j = t.second[p];
            if (mirrored) {
                i = neg[i];
                j = neg[j];
            }
            for (uint32_t q = lo; q < hi; ++q) {
                int32_t k = t.first[q], l = t.second[q];
                if (!mirrored) {
                    k = neg[k];
                    l = neg[l];
                }
                if (k == neg[i] || l == neg[i] || k == neg[j] || l == neg[j]) continue;
                visit(i, j, k, l);
                ++count;
            }
        }
    };
    for (std::size_t b = 0; b + 1 < t.bucket_start.size(); ++b) {
        uint32_t lo = t.bucket_start[b], hi = t.bucket_start[b + 1];
        emit_half(lo, hi, false);
        emit_half(lo, hi, true);
    }
    return count;
}

// ---------------------------------------------------------------------------
// Binary cache files
// ---------------------------------------------------------------------------

inline std::filesystem::path cache_dir() {
    if (const char* env = std::getenv("ARW_CACHE_DIR")) return env;
    if (const char* xdg = std::getenv("XDG_CACHE_HOME"))
        return std::filesystem::path(xdg) / "arw";
    if (const char* home = std::getenv("HOME"))
        return std::filesystem::path(home) / ".cache" / "arw";
    return std::filesystem::path(".arw-cache");
}

namespace detail {

template <typename T>
void put(std::string& buf, T v) {
    char tmp[sizeof(T)];
    std::memcpy(tmp, &v, sizeof(T));
    buf.append(tmp, sizeof(T));  // little-endian hosts only
}

template <typename T>
T get(const std::string& buf, std::size_t& off) {
    T v;
    if (off + sizeof(T) > buf.size()) throw Error("cache record truncated");
    std::memcpy(&v, buf.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

inline void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw Error("cannot open " + tmp.string());
    std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
    std::filesystem::rename(tmp, path);
}

inline std::optional<std::string> read_all(const std::filesystem::path& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return std::nullopt;
    std::string out;
    char buf[1 << 16];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) out.append(buf, got);
    std::fclose(f);
    return out;
}

}  // namespace detail

constexpr uint16_t kCacheFormatVersion = 1;

inline void save_frequency_set(const FrequencySet& fs,
                               std::filesystem::path dir = cache_dir()) {
    std::string buf;
    buf.append("ARWL", 4);
    detail::put<uint16_t>(buf, kCacheFormatVersion);
    detail::put<uint64_t>(buf, static_cast<uint64_t>(fs.n));
    detail::put<uint32_t>(buf, static_cast<uint32_t>(fs.cardinality()));
    for (const auto& p : fs.points)
        for (int32_t c : p) detail::put<int32_t>(buf, c);
    detail::atomic_write(dir / ("lattice-" + std::to_string(fs.n) + ".arwl"), buf);
}

inline std::optional<FrequencySet> load_frequency_set(int64_t n,
                                                      std::filesystem::path dir = cache_dir()) {
    auto bytes = detail::read_all(dir / ("lattice-" + std::to_string(n) + ".arwl"));
    if (!bytes) return std::nullopt;
    const std::string& buf = *bytes;
    if (buf.size() < 18 || buf.compare(0, 4, "ARWL") != 0) return std::nullopt;
    std::size_t off = 4;
    if (detail::get<uint16_t>(buf, off) != kCacheFormatVersion) return std::nullopt;
    if (detail::get<uint64_t>(buf, off) != static_cast<uint64_t>(n)) return std::nullopt;
    uint32_t N = detail::get<uint32_t>(buf, off);
    FrequencySet fs;
    fs.n = n;
    fs.admissible = is_admissible(n);
    fs.points.resize(N);
    for (uint32_t i = 0; i < N; ++i)
        for (int c = 0; c < 3; ++c) fs.points[i][c] = detail::get<int32_t>(buf, off);
    fs.negation.resize(N);
    fs.canonical.resize(N);
    for (uint32_t i = 0; i < N; ++i) {
        const ivec3& p = fs.points[i];
        fs.negation[i] = fs.index_of({-p[0], -p[1], -p[2]});
        int32_t lead = p[0] != 0 ? p[0] : (p[1] != 0 ? p[1] : p[2]);
        fs.canonical[i] = lead > 0 ? 1 : 0;
    }
    return fs;
}

inline void save_census(const CorrelationCensus& c, std::filesystem::path dir = cache_dir()) {
    std::string buf;
    buf.append("ARWC", 4);
    detail::put<uint16_t>(buf, kCacheFormatVersion);
    detail::put<uint64_t>(buf, static_cast<uint64_t>(c.n));
    detail::put<uint16_t>(buf, static_cast<uint16_t>(c.m));
    detail::put<uint64_t>(buf, c.card_C);
    detail::put<uint64_t>(buf, c.card_X4);
    detail::atomic_write(
        dir / ("census-" + std::to_string(c.n) + "-m" + std::to_string(c.m) + ".arwc"), buf);
}

inline std::optional<CorrelationCensus> load_census(int64_t n, int m,
                                                    std::filesystem::path dir = cache_dir()) {
    auto bytes =
        detail::read_all(dir / ("census-" + std::to_string(n) + "-m" + std::to_string(m) + ".arwc"));
    if (!bytes) return std::nullopt;
    const std::string& buf = *bytes;
    if (buf.size() < 4 || buf.compare(0, 4, "ARWC") != 0) return std::nullopt;
    std::size_t off = 4;
    if (detail::get<uint16_t>(buf, off) != kCacheFormatVersion) return std::nullopt;
    CorrelationCensus c;
    c.n = static_cast<int64_t>(detail::get<uint64_t>(buf, off));
    c.m = detail::get<uint16_t>(buf, off);
    c.card_C = detail::get<uint64_t>(buf, off);
    c.card_X4 = detail::get<uint64_t>(buf, off);
    if (c.n != n || c.m != m) return std::nullopt;
    double N = 0;
    // rn_moment needs N; recompute cheaply from the identity for m = 4,
    // otherwise leave it to the caller who holds the frequency set.
    if (m == 4) {
        // card_C = 3N^2 - 3N + X4  =>  solve for N
        double a = 3, b = -3, cc = double(c.card_X4) - double(c.card_C);
        N = (-b + std::sqrt(b * b - 4 * a * cc)) / (2 * a);
        c.rn_moment = double(c.card_C) / std::pow(N, 4);
    }
    return c;
}

// Largest-N admissible eigenvalue indices up to a limit.
inline std::vector<std::pair<int64_t, int32_t>> scan_admissible(int64_t limit, int top) {
    std::vector<std::pair<int64_t, int32_t>> all;
    for (int64_t n = 1; n <= limit; ++n) {
        if (!is_admissible(n)) continue;
        if (!is_sum_of_three_squares(n)) continue;
        all.emplace_back(n, enumerate_frequencies(n).cardinality());
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (static_cast<int>(all.size()) > top) all.resize(top);
    return all;
}

}  // namespace arw::lattice
