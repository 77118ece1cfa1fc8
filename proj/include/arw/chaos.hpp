#pragma once

#include <span>

#include "arw/field.hpp"
#include "arw/lattice.hpp"

namespace arw::chaos {

using field::FieldGrid;
using field::WaveCoefficients;
using lattice::FrequencySet;
using lattice::PairTable;

// ---------------------------------------------------------------------------
// Hermite polynomials and Dirac coefficients
// ---------------------------------------------------------------------------

// Probabilists' Hermite polynomials, H_k(x) = x H_{k-1}(x) - H'_{k-1}(x).
inline double hermite(int j, double x) {
    if (j < 0) throw Error("hermite: negative degree");
    double hm1 = 0.0, h = 1.0;
    for (int k = 1; k <= j; ++k) {
        double next = x * h - (k - 1) * hm1;
        hm1 = h;
        h = next;
    }
    return h;
}

inline double gaussian_density(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(kTwoPi);
}

// Hermite coefficient of the formal Dirac expansion, H_j(u) * density(u).
inline double beta_coefficient(int j, double u = 0.0) {
    return hermite(j, u) * gaussian_density(u);
}

// Coefficient of the (2 eps)^-1 indicator approximation of the Dirac mass.
inline double beta_epsilon(int j, double u, double eps) {
    if (eps <= 0) throw Error("beta_epsilon: eps must be positive");
    if (j == 0) {
        // (1/2eps) * integral of the density over [u-eps, u+eps]
        return (std::erf((u + eps) * M_SQRT1_2) - std::erf((u - eps) * M_SQRT1_2)) / (4.0 * eps);
    }
    return -(hermite(j - 1, u + eps) * gaussian_density(u + eps) -
             hermite(j - 1, u - eps) * gaussian_density(u - eps)) /
           (2.0 * eps);
}

// ---------------------------------------------------------------------------
// Gramian constants
// ---------------------------------------------------------------------------

// alpha(l, k) = (k)_l kappa_k / ((2 pi)^{l/2} kappa_{k-l}) with kappa_k the
// volume of the unit ball in R^k.
inline double unit_ball_volume(int k) {
    return std::pow(M_PI, k / 2.0) / std::tgamma(1.0 + k / 2.0);
}

inline double alpha(int ell, int k) {
    if (ell < 1 || k < ell) throw Error("alpha: need 1 <= ell <= k");
    double falling = 1.0;
    for (int i = 0; i < ell; ++i) falling *= double(k - i);
    return falling * unit_ball_volume(k) /
           (std::pow(kTwoPi, ell / 2.0) * unit_ball_volume(k - ell));
}

// Normalized fourth-chaos (and lower) projection coefficients of the Gramian
// determinant map X -> sqrt(det(X X^T)) on an ell x k Gaussian matrix:
// E[Phi(X) * prod H_p(X_ij)] / prod(p!). The multi-index is given row-major.
inline double gramian_hermite_coefficient(int ell, int k, std::span<const int> degrees) {
    if (static_cast<int>(degrees.size()) != ell * k)
        throw Error("gramian_hermite_coefficient: index grid must be ell x k");
    struct Cell {
        int row, col, deg;
    };
    std::vector<Cell> active;
    int total = 0;
    for (int i = 0; i < ell; ++i)
        for (int j = 0; j < k; ++j) {
            int d = degrees[i * k + j];
            if (d < 0) throw Error("negative Hermite degree");
            if (d > 0) active.push_back({i, j, d});
            total += d;
        }
    if (total % 2 == 1) return 0.0;  // sign-flip symmetry kills odd totals
    if (total != 0 && total != 2 && total != 4)
        throw UnsupportedDegree("total degree " + std::to_string(total) + " not tabulated");
    const double a = alpha(ell, k);
    if (total == 0) return a;
    if (total == 2) {
        if (active.size() == 1) return a / (2.0 * k);  // single H2
        return 0.0;                                    // H1 x H1
    }
    // total degree 4
    const double kk2 = double(k) * (k + 2);
    if (active.size() == 1) {
        // single H4
        return -3.0 * a / kk2 / 24.0;
    }
    if (active.size() == 2) {
        if (active[0].deg == 3 || active[1].deg == 3) return 0.0;  // H3 x H1
        // H2 x H2
        if (active[0].row == active[1].row) return -a / kk2 / 4.0;
        if (active[0].col == active[1].col) return -a / kk2 / 4.0;
        return a * (k + 3) / (kk2 * (k - 1)) / 4.0;
    }
    if (active.size() == 3) return 0.0;  // H2 x H1 x H1
    // four H1 factors: nonzero only on rectangle patterns spanning two rows
    // and two columns
    std::array<int, 2> rows{active[0].row, -1};
    std::array<int, 2> cols{active[0].col, -1};
    auto insert = [](std::array<int, 2>& set, int v) {
        if (set[0] == v || set[1] == v) return true;
        if (set[1] == -1) {
            set[1] = v;
            return true;
        }
        return false;
    };
    for (const Cell& c : active)
        if (!insert(rows, c.row) || !insert(cols, c.col)) return 0.0;
    if (rows[1] == -1 || cols[1] == -1) return 0.0;
    return -a * (k + 1) / (kk2 * (k - 1));
}

// Every distinct nonzero row of the degree-4 coefficient table, as concrete
// representative patterns; used by the constants report and its tests.
struct TableEntry {
    std::string pattern;
    int ell, k;
    std::vector<int> degrees;
    double value;
};

inline std::vector<TableEntry> gramian_table(int ell, int k) {
    std::vector<TableEntry> rows;
    auto add = [&](std::string name, std::vector<int> deg) {
        double v = gramian_hermite_coefficient(ell, k, deg);
        rows.push_back({std::move(name), ell, k, std::move(deg), v});
    };
    auto grid = [&](std::initializer_list<std::pair<std::pair<int, int>, int>> cells) {
        std::vector<int> d(ell * k, 0);
        for (auto& [rc, deg] : cells) d[rc.first * k + rc.second] = deg;
        return d;
    };
    add("const", grid({}));
    add("H2", grid({{{0, 0}, 2}}));
    add("H4", grid({{{0, 0}, 4}}));
    if (k >= 2) {
        add("H2.H2 same row", grid({{{0, 0}, 2}, {{0, 1}, 2}}));
        add("H3.H1", grid({{{0, 0}, 3}, {{0, 1}, 1}}));
    }
    if (ell >= 2) {
        add("H2.H2 same col", grid({{{0, 0}, 2}, {{1, 0}, 2}}));
        if (k >= 2) {
            add("H2.H2 distinct", grid({{{0, 0}, 2}, {{1, 1}, 2}}));
            add("H1x4 rectangle",
                grid({{{0, 0}, 1}, {{0, 1}, 1}, {{1, 0}, 1}, {{1, 1}, 1}}));
            add("H2.H1.H1", grid({{{0, 0}, 2}, {{1, 0}, 1}, {{1, 1}, 1}}));
        }
        if (k >= 3)
            add("H1x4 non-rectangle",
                grid({{{0, 0}, 1}, {{0, 1}, 1}, {{1, 0}, 1}, {{1, 2}, 1}}));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Spectral statistics of a replication
// ---------------------------------------------------------------------------

// The quadratic and quartic coefficient statistics of one replication. The
// X-families are sums over non-degenerate 4-correlations; "first"/"second"
// marks which pair of the quadruple carries the lattice weights, which
// matters pathwise for the mixed-field sums.
struct SpectralStatistics {
    struct Diagonal {
        double W = 0;
        double Wjk[3][3] = {};
        double R = 0;
        double Rjk[3][3] = {};
        double X = 0;
        double Xkk[3] = {};
        double Xkkjj[3][3] = {};
    };
    struct Cross {
        double M = 0;
        double Mj[3] = {};
        double Mjk[3][3] = {};
        double R = 0;
        double Rjk[3][3] = {};
        double S = 0;
        double Sjk[3][3] = {};
        double X = 0;
        double Xkk_first[3] = {};   // weights l_k l'_k on the lower-index pair
        double Xkk_second[3] = {};  // weights on the higher-index pair
        double Xkkjj[3][3] = {};    // k on the lower-index pair, j on the higher
        double Xmix[3] = {};        // pattern l_k l'_j l''_k l'''_j, (k,j) in {(0,1),(0,2),(1,2)}
    };
    int64_t n = 0;
    int ell = 0;
    int32_t N = 0;
    std::array<Diagonal, 3> diag{};
    Cross cross[3][3];  // [u][v] with u < v
};

namespace detail {

constexpr int kMixPairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};

struct XCorrections {
    double x, kk[3], kkjj[3][3], mix[3];
};

// Removes the degenerate pair-of-pairs contributions (second pair equal to
// the negated first pair) from the bucket products.
inline XCorrections x_corrections(const FrequencySet& fs, const cplx* au, const cplx* av) {
    const int32_t N = fs.cardinality();
    cplx tau0 = 0, tauk[3] = {}, taukk[3] = {}, taukj[3][3] = {};
    double rho0 = 0, rhokk[3] = {}, rho2[3][3] = {};
    cplx sig0 = 0, sigkk[3] = {}, sig2[3][3] = {};
    for (int32_t i = 0; i < N; ++i) {
        cplx t = au[i] * std::conj(av[i]);
        double t2 = std::norm(t);
        cplx ts = t * t;
        const ivec3& l = fs.points[i];
        tau0 += t;
        rho0 += t2;
        sig0 += ts;
        for (int kk = 0; kk < 3; ++kk) {
            double lk = l[kk];
            tauk[kk] += lk * t;
            taukk[kk] += lk * lk * t;
            rhokk[kk] += lk * lk * t2;
            sigkk[kk] += lk * lk * ts;
            for (int jj = 0; jj < 3; ++jj) {
                double lj = l[jj];
                taukj[kk][jj] += lk * lj * t;
                rho2[kk][jj] += lk * lk * lj * lj * t2;
                sig2[kk][jj] += lk * lk * lj * lj * ts;
            }
        }
    }
    XCorrections c{};
    c.x = std::real(-2.0 * tau0 * tau0 + sig0) + 2.0 * rho0;
    for (int kk = 0; kk < 3; ++kk)
        c.kk[kk] = std::real(-2.0 * tauk[kk] * tauk[kk] + sigkk[kk]) - 2.0 * rhokk[kk];
    for (int kk = 0; kk < 3; ++kk)
        for (int jj = 0; jj < 3; ++jj)
            c.kkjj[kk][jj] =
                std::real(-2.0 * taukj[kk][jj] * taukj[kk][jj] + sig2[kk][jj]) + 2.0 * rho2[kk][jj];
    for (int m = 0; m < 3; ++m) {
        int kk = kMixPairs[m][0], jj = kMixPairs[m][1];
        c.mix[m] = std::real(-taukk[kk] * taukk[jj] - taukj[kk][jj] * taukj[kk][jj] +
                             sig2[kk][jj]) +
                   2.0 * rho2[kk][jj];
    }
    return c;
}

}  // namespace detail

// Streams the X-family sums over the non-degenerate 4-correlation set. The
// enumeration is organised by pair-sum classes {s, -s}; within one class the
// bucket sums of the mirrored pairs are complex conjugates, so each class
// contributes real products of same-bucket sums. Cancellation-heavy global
// accumulation uses blocked compensated summation.
inline void accumulate_x_families(SpectralStatistics& st,
                                  std::span<const WaveCoefficients> sets,
                                  const FrequencySet& fs, const PairTable& table) {
    const int ell = st.ell;
    const auto& pts = fs.points;
    // accumulator layout per diagonal: X, Xkk[3], Xkkjj upper (6)
    // per cross pair: X, Xkk_first[3], Xkk_second[3], Xkkjj[9], Xmix[3]
    const int diag_width = 10, cross_width = 19;
    const int n_cross = ell * (ell - 1) / 2;
    const int width = ell * diag_width + n_cross * cross_width;
    std::vector<KahanSum> global(width);
    std::vector<double> block(width, 0.0);
    const std::size_t n_buckets = table.bucket_count();
    std::size_t since_merge = 0;

    cplx S[3], W[3][3], V[3][3];
    for (std::size_t b = 0; b < n_buckets; ++b) {
        uint32_t lo = table.bucket_start[b], hi = table.bucket_start[b + 1];
        for (int u = 0; u < ell; ++u) {
            S[u] = 0;
            for (int m = 0; m < 3; ++m) W[u][m] = V[u][m] = 0;
        }
        for (uint32_t p = lo; p < hi; ++p) {
            const ivec3& A = pts[table.first[p]];
            const ivec3& B = pts[table.second[p]];
            double wkk[3] = {double(A[0]) * B[0], double(A[1]) * B[1], double(A[2]) * B[2]};
            double wmx[3] = {double(A[0]) * B[1], double(A[0]) * B[2], double(A[1]) * B[2]};
            for (int u = 0; u < ell; ++u) {
                cplx c = sets[u].a[table.first[p]] * sets[u].a[table.second[p]];
                S[u] += c;
                for (int m = 0; m < 3; ++m) {
                    W[u][m] += wkk[m] * c;
                    V[u][m] += wmx[m] * c;
                }
            }
        }
        auto re2 = [](cplx a, cplx b) {
            return 2.0 * (a.real() * b.real() + a.imag() * b.imag());  // 2 Re(a conj b)
        };
        int off = 0;
        for (int u = 0; u < ell; ++u) {
            block[off++] += re2(S[u], S[u]);
            for (int m = 0; m < 3; ++m) block[off++] += re2(W[u][m], S[u]);
            for (int kk = 0; kk < 3; ++kk)
                for (int jj = kk; jj < 3; ++jj) block[off++] += re2(W[u][kk], W[u][jj]);
        }
        for (int u = 0; u < ell; ++u)
            for (int v = u + 1; v < ell; ++v) {
                block[off++] += re2(S[u], S[v]);
                for (int m = 0; m < 3; ++m) block[off++] += re2(W[u][m], S[v]);
                for (int m = 0; m < 3; ++m) block[off++] += re2(S[u], W[v][m]);
                for (int kk = 0; kk < 3; ++kk)
                    for (int jj = 0; jj < 3; ++jj) block[off++] += re2(W[u][kk], W[v][jj]);
                for (int m = 0; m < 3; ++m) block[off++] += re2(V[u][m], V[v][m]);
            }
        if (++since_merge == 1024 || b + 1 == n_buckets) {
            for (int i = 0; i < width; ++i) {
                global[i].add(block[i]);
                block[i] = 0.0;
            }
            since_merge = 0;
        }
    }

    const double N = fs.cardinality();
    const double n = static_cast<double>(fs.n);
    int off = 0;
    for (int u = 0; u < ell; ++u) {
        auto corr = detail::x_corrections(fs, sets[u].a.data(), sets[u].a.data());
        auto& d = st.diag[u];
        d.X = (global[off++].value() + corr.x) / N;
        for (int m = 0; m < 3; ++m) d.Xkk[m] = (global[off++].value() + corr.kk[m]) / (n * N);
        for (int kk = 0; kk < 3; ++kk)
            for (int jj = kk; jj < 3; ++jj) {
                double v = (global[off++].value() + corr.kkjj[kk][jj]) / (n * n * N);
                d.Xkkjj[kk][jj] = v;
                d.Xkkjj[jj][kk] = v;
            }
    }
    for (int u = 0; u < ell; ++u)
        for (int v = u + 1; v < ell; ++v) {
            auto corr = detail::x_corrections(fs, sets[u].a.data(), sets[v].a.data());
            auto& c = st.cross[u][v];
            c.X = (global[off++].value() + corr.x) / N;
            for (int m = 0; m < 3; ++m)
                c.Xkk_first[m] = (global[off++].value() + corr.kk[m]) / (n * N);
            for (int m = 0; m < 3; ++m)
                c.Xkk_second[m] = (global[off++].value() + corr.kk[m]) / (n * N);
            for (int kk = 0; kk < 3; ++kk)
                for (int jj = 0; jj < 3; ++jj)
                    c.Xkkjj[kk][jj] = (global[off++].value() + corr.kkjj[kk][jj]) / (n * n * N);
            for (int m = 0; m < 3; ++m)
                c.Xmix[m] = (global[off++].value() + corr.mix[m]) / (n * n * N);
        }
}

// Reference accumulation through the explicit quadruple stream; quadratic in
// the number of visited quadruples, used to validate the class-factored path.
inline void accumulate_x_families_reference(SpectralStatistics& st,
                                            std::span<const WaveCoefficients> sets,
                                            const FrequencySet& fs, const PairTable& table) {
    const int ell = st.ell;
    const auto& pts = fs.points;
    const double N = fs.cardinality();
    const double n = static_cast<double>(fs.n);
    lattice::stream_nondegenerate_quadruples(fs, table, [&](int32_t i, int32_t j, int32_t k,
                                                            int32_t l) {
        for (int u = 0; u < ell; ++u) {
            for (int v = 0; v < ell; ++v) {
                if (v < u) continue;
                cplx m = sets[u].a[i] * sets[u].a[j] * sets[v].a[k] * sets[v].a[l];
                double mr = m.real();
                if (u == v) {
                    auto& d = st.diag[u];
                    d.X += mr / N;
                    for (int kk = 0; kk < 3; ++kk) {
                        d.Xkk[kk] += pts[i][kk] * pts[j][kk] * mr / (n * N);
                        for (int jj = 0; jj < 3; ++jj)
                            d.Xkkjj[kk][jj] +=
                                pts[i][kk] * pts[j][kk] * pts[k][jj] * pts[l][jj] * mr / (n * n * N);
                    }
                } else {
                    auto& c = st.cross[u][v];
                    c.X += mr / N;
                    for (int kk = 0; kk < 3; ++kk) {
                        c.Xkk_first[kk] += pts[i][kk] * pts[j][kk] * mr / (n * N);
                        c.Xkk_second[kk] += pts[k][kk] * pts[l][kk] * mr / (n * N);
                        for (int jj = 0; jj < 3; ++jj)
                            c.Xkkjj[kk][jj] +=
                                pts[i][kk] * pts[j][kk] * pts[k][jj] * pts[l][jj] * mr / (n * n * N);
                    }
                    for (int m3 = 0; m3 < 3; ++m3) {
                        int kk = detail::kMixPairs[m3][0], jj = detail::kMixPairs[m3][1];
                        c.Xmix[m3] +=
                            pts[i][kk] * pts[j][jj] * pts[k][kk] * pts[l][jj] * mr / (n * n * N);
                    }
                }
            }
        }
    });
}

enum class XAccumulation { class_factored, quadruple_stream };

inline SpectralStatistics compute_rv1(std::span<const WaveCoefficients> sets,
                                      const FrequencySet& fs, const PairTable& table,
                                      XAccumulation mode = XAccumulation::class_factored) {
    const int ell = static_cast<int>(sets.size());
    if (ell < 1 || ell > 3) throw Error("compute_rv1: need 1 to 3 coefficient sets");
    SpectralStatistics st;
    st.n = fs.n;
    st.ell = ell;
    st.N = fs.cardinality();
    const double N = st.N;
    const double n = static_cast<double>(fs.n);
    const double sqN = std::sqrt(N);
    for (int u = 0; u < ell; ++u) {
        auto& d = st.diag[u];
        for (int32_t i = 0; i < st.N; ++i) {
            double mod2 = std::norm(sets[u].a[i]);
            double cen = mod2 - 1.0;
            const ivec3& l = fs.points[i];
            d.W += cen / sqN;
            d.R += mod2 * mod2 / N;
            for (int kk = 0; kk < 3; ++kk)
                for (int jj = 0; jj < 3; ++jj) {
                    d.Wjk[kk][jj] += l[kk] * l[jj] * cen / (n * sqN);
                    d.Rjk[kk][jj] +=
                        double(l[kk]) * l[kk] * l[jj] * l[jj] * mod2 * mod2 / (n * n * N);
                }
        }
    }
    for (int u = 0; u < ell; ++u)
        for (int v = u + 1; v < ell; ++v) {
            auto& c = st.cross[u][v];
            cplx M = 0, Mj[3] = {}, Mjk[3][3] = {}, Ssum = 0, Sjk[3][3] = {};
            for (int32_t i = 0; i < st.N; ++i) {
                cplx t = sets[u].a[i] * std::conj(sets[v].a[i]);
                cplx s = t * t;
                double r = std::norm(sets[u].a[i]) * std::norm(sets[v].a[i]);
                const ivec3& l = fs.points[i];
                M += t;
                Ssum += s;
                c.R += r / N;
                for (int kk = 0; kk < 3; ++kk) {
                    Mj[kk] += double(l[kk]) * t;
                    for (int jj = 0; jj < 3; ++jj) {
                        Mjk[kk][jj] += double(l[kk]) * l[jj] * t;
                        Sjk[kk][jj] += double(l[kk]) * l[kk] * l[jj] * l[jj] * s;
                        c.Rjk[kk][jj] += double(l[kk]) * l[kk] * l[jj] * l[jj] * r / (n * n * N);
                    }
                }
            }
            c.M = M.real() / sqN;
            c.S = Ssum.real() / N;
            for (int kk = 0; kk < 3; ++kk) {
                c.Mj[kk] = std::real(cplx(0, 1) * Mj[kk]) / std::sqrt(n * N);
                for (int jj = 0; jj < 3; ++jj) {
                    c.Mjk[kk][jj] = Mjk[kk][jj].real() / (n * sqN);
                    c.Sjk[kk][jj] = Sjk[kk][jj].real() / (n * n * N);
                }
            }
        }
    if (mode == XAccumulation::class_factored)
        accumulate_x_families(st, sets, fs, table);
    else
        accumulate_x_families_reference(st, sets, fs, table);
    return st;
}

// ---------------------------------------------------------------------------
// Quartic Hermite integrals (closed form and grid quadrature)
// ---------------------------------------------------------------------------

struct Rv2Values {
    struct APart {
        double a1 = 0, a2 = 0, a3 = 0, a4 = 0;
    };
    struct BPart {
        double b1 = 0, b2 = 0, b2p = 0, b3 = 0, b4 = 0, b5 = 0;
    };
    int ell = 0;
    std::array<APart, 3> a{};
    BPart b[3][3];  // [u][v], u < v
};

inline Rv2Values rv2_closed_form(const SpectralStatistics& st) {
    Rv2Values out;
    out.ell = st.ell;
    const double N = st.N;
    for (int u = 0; u < st.ell; ++u) {
        const auto& d = st.diag[u];
        auto& a = out.a[u];
        double sum_xkk = d.Xkk[0] + d.Xkk[1] + d.Xkk[2];
        a.a1 = 3.0 / N * (d.W * d.W - d.R + d.X / 3.0);
        a.a2 = 3.0 / N * (d.W * d.W - d.R - sum_xkk);
        for (int k = 0; k < 3; ++k)
            a.a3 += 27.0 / N * (sqr(d.Wjk[k][k]) - d.Rjk[k][k] + d.Xkkjj[k][k] / 3.0);
        for (int k = 0; k < 3; ++k)
            for (int j = k + 1; j < 3; ++j)
                a.a4 += 9.0 / N *
                        (d.Wjk[k][k] * d.Wjk[j][j] + 2.0 * sqr(d.Wjk[k][j]) - 3.0 * d.Rjk[k][j] +
                         d.Xkkjj[k][j]);
    }
    for (int u = 0; u < st.ell; ++u)
        for (int v = u + 1; v < st.ell; ++v) {
            const auto& c = st.cross[u][v];
            const auto& du = st.diag[u];
            const auto& dv = st.diag[v];
            auto& b = out.b[u][v];
            double mj2 = sqr(c.Mj[0]) + sqr(c.Mj[1]) + sqr(c.Mj[2]);
            b.b1 = 1.0 / N * (du.W * dv.W + 2.0 * sqr(c.M) - 2.0 * c.R - c.S + c.X);
            double xkk2 = c.Xkk_second[0] + c.Xkk_second[1] + c.Xkk_second[2];
            double xkk1 = c.Xkk_first[0] + c.Xkk_first[1] + c.Xkk_first[2];
            b.b2 = 3.0 / N * (du.W * dv.W + 2.0 * mj2 - 2.0 * c.R + c.S - xkk2);
            b.b2p = 3.0 / N * (du.W * dv.W + 2.0 * mj2 - 2.0 * c.R + c.S - xkk1);
            for (int k = 0; k < 3; ++k)
                for (int j = 0; j < 3; ++j) {
                    if (j == k) continue;
                    b.b3 += 9.0 / N *
                            (du.Wjk[k][k] * dv.Wjk[j][j] + 2.0 * sqr(c.Mjk[k][j]) -
                             2.0 * c.Rjk[k][j] - c.Sjk[k][j] + c.Xkkjj[k][j]);
                }
            for (int k = 0; k < 3; ++k)
                b.b4 += 9.0 / N *
                        (du.Wjk[k][k] * dv.Wjk[k][k] + 2.0 * sqr(c.Mjk[k][k]) - 2.0 * c.Rjk[k][k] -
                         c.Sjk[k][k] + c.Xkkjj[k][k]);
            for (int m = 0; m < 3; ++m) {
                int k = detail::kMixPairs[m][0], j = detail::kMixPairs[m][1];
                b.b5 += 9.0 / N *
                        (du.Wjk[k][j] * dv.Wjk[k][j] + c.Mjk[k][k] * c.Mjk[j][j] +
                         sqr(c.Mjk[k][j]) - 2.0 * c.Rjk[k][j] - c.Sjk[k][j] + c.Xmix[m]);
            }
        }
    return out;
}

// Same quantities by quadrature over sampled grids. Exact once the grid
// resolution exceeds the bandwidth of the degree-4 integrands.
inline Rv2Values rv2_numerical(std::span<const FieldGrid> grids) {
    const int ell = static_cast<int>(grids.size());
    if (ell < 1 || ell > 3) throw Error("rv2_numerical: need 1 to 3 grids");
    const FieldGrid& g0 = grids[0];
    int root = static_cast<int>(lattice::isqrt64(g0.n));
    if (g0.resolution <= 4 * root)
        throw ResolutionTooLow("need resolution > 4 floor(sqrt(n)) for quartic quadrature");
    for (const auto& g : grids) {
        if (g.n != g0.n || g.resolution != g0.resolution)
            throw Error("rv2_numerical: grids must share n and resolution");
        if (!g.has_gradients) throw Error("rv2_numerical: gradient channels required");
    }
    const std::size_t nodes = g0.nodes();
    auto H2 = [](double x) { return x * x - 1.0; };
    Rv2Values out;
    out.ell = ell;
    for (int u = 0; u < ell; ++u) {
        KahanSum a1, a2, a3, a4;
        const auto& v = grids[u].values;
        const auto& gr = grids[u].gradients;
        for (std::size_t i = 0; i < nodes; ++i) {
            double t = v[i];
            a1.add(hermite(4, t));
            double h2t = H2(t);
            for (int k = 0; k < 3; ++k) {
                a2.add(h2t * H2(gr[k][i]));
                a3.add(hermite(4, gr[k][i]));
                for (int j = k + 1; j < 3; ++j) a4.add(H2(gr[k][i]) * H2(gr[j][i]));
            }
        }
        out.a[u] = {a1.value() / nodes, a2.value() / nodes, a3.value() / nodes,
                    a4.value() / nodes};
    }
    for (int u = 0; u < ell; ++u)
        for (int v = u + 1; v < ell; ++v) {
            KahanSum b1, b2, b2p, b3, b4, b5;
            const auto& tu = grids[u].values;
            const auto& tv = grids[v].values;
            const auto& gu = grids[u].gradients;
            const auto& gv = grids[v].gradients;
            for (std::size_t i = 0; i < nodes; ++i) {
                double h2u = H2(tu[i]), h2v = H2(tv[i]);
                b1.add(h2u * h2v);
                for (int k = 0; k < 3; ++k) {
                    b2.add(h2u * H2(gv[k][i]));
                    b2p.add(H2(gu[k][i]) * h2v);
                    b4.add(H2(gu[k][i]) * H2(gv[k][i]));
                    for (int j = 0; j < 3; ++j)
                        if (j != k) b3.add(H2(gu[k][i]) * H2(gv[j][i]));
                    for (int j = k + 1; j < 3; ++j)
                        b5.add(gu[k][i] * gu[j][i] * gv[k][i] * gv[j][i]);
                }
            }
            out.b[u][v] = {b1.value() / nodes,  b2.value() / nodes, b2p.value() / nodes,
                           b3.value() / nodes,  b4.value() / nodes, b5.value() / nodes};
        }
    return out;
}

// ---------------------------------------------------------------------------
// Fourth chaotic projection
// ---------------------------------------------------------------------------

// Exact quartic-fluctuation terms entering the single-field part: combines
// the quartic moment R with the non-degenerate correlation sums.
inline double mu_exact(const SpectralStatistics::Diagonal& d) {
    double sum_xkk = d.Xkk[0] + d.Xkk[1] + d.Xkk[2];
    double sum_kkjj = 0;
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j) sum_kkjj += d.Xkkjj[k][j];
    return d.R / 20.0 + d.X / 16.0 + sum_xkk / 8.0 - 3.0 / 80.0 * sum_kkjj;
}

// Mixed-pair analogue of mu. The three X-weight orientations appearing in
// the pair expansion are distinct random variables (equal in law); keeping
// them separate makes the projection identical to the quadrature route.
inline double eta_exact(const SpectralStatistics::Cross& c) {
    double xkk = 0;
    for (int m = 0; m < 3; ++m) xkk += c.Xkk_first[m] + c.Xkk_second[m];
    double off = 0, diag = 0, mix = 0;
    for (int k = 0; k < 3; ++k) {
        diag += c.Xkkjj[k][k];
        for (int j = 0; j < 3; ++j)
            if (j != k) off += c.Xkkjj[k][j];
    }
    for (int m = 0; m < 3; ++m) mix += c.Xmix[m];
    return 2.0 / 5.0 * c.R - 3.0 / 10.0 * c.S + c.X / 8.0 + xkk / 8.0 + 9.0 / 40.0 * off -
           3.0 / 40.0 * diag - 3.0 / 5.0 * mix;
}

// (c_n)^{-1} proj4: the standardized fourth chaotic component, before the
// c_n scale factor. An explicit ell restricts to the first ell fields, so
// one three-field replication yields all three projections.
inline double standardized_proj4(const SpectralStatistics& st, int ell = 0) {
    if (ell == 0) ell = st.ell;
    if (ell > st.ell) throw Error("standardized_proj4: ell exceeds available fields");
    double total = 0.0;
    for (int u = 0; u < ell; ++u) {
        const auto& d = st.diag[u];
        double F = 0.0;
        for (int k = 0; k < 3; ++k)
            for (int j = k + 1; j < 3; ++j) {
                F += -1.0 / 40.0 * sqr(d.Wjk[k][k] - d.Wjk[j][j]);
                F += -3.0 / 20.0 * sqr(d.Wjk[k][j]);
            }
        total += F + mu_exact(d);
    }
    for (int u = 0; u < ell; ++u)
        for (int v = u + 1; v < ell; ++v) {
            const auto& c = st.cross[u][v];
            const auto& W1 = st.diag[u].Wjk;
            const auto& W2 = st.diag[v].Wjk;
            double G = 0.0;
            for (int k = 0; k < 3; ++k)
                for (int j = k + 1; j < 3; ++j) {
                    G += -1.0 / 10.0 * (W1[k][k] - W1[j][j]) * (W2[k][k] - W2[j][j]);
                    G += -3.0 / 5.0 * W1[k][j] * W2[k][j];
                    G += 3.0 / 10.0 * sqr(c.Mjk[k][j]);
                }
            for (int k = 0; k < 3; ++k) {
                G += 1.0 / 10.0 * sqr(c.Mjk[k][k]) - 1.0 / 2.0 * sqr(c.Mj[k]);
                for (int j = 0; j < 3; ++j)
                    if (j != k) G += -1.0 / 20.0 * c.Mjk[k][k] * c.Mjk[j][j];
            }
            total += G + eta_exact(c);
        }
    return total;
}

inline double proj4_scale(int64_t n, int ell, int32_t N) {
    double en3 = field::eigenvalue(n) / 3.0;
    return std::pow(en3, ell / 2.0) * 2.0 / std::pow(kTwoPi, ell / 2.0) * alpha(ell, 3) / N;
}

inline double proj4(const SpectralStatistics& st) {
    return proj4_scale(st.n, st.ell, st.N) * standardized_proj4(st);
}

// Fourth projection assembled from the quartic integrals; equals proj4 up to
// rounding and cross-checks the expansion coefficients.
inline double proj4_from_rv2(const Rv2Values& rv, int64_t n, int32_t N) {
    const int ell = rv.ell;
    double pref = 2.0 * alpha(ell, 3) / std::pow(kTwoPi, ell / 2.0);
    double total = 0.0;
    for (int u = 0; u < ell; ++u) {
        const auto& a = rv.a[u];
        total += pref * (a.a1 / 16.0 - a.a2 / 24.0 - a.a3 / 240.0 - a.a4 / 120.0);
    }
    for (int u = 0; u < ell; ++u)
        for (int v = u + 1; v < ell; ++v) {
            const auto& b = rv.b[u][v];
            total += pref * (b.b1 / 8.0 - b.b2 / 24.0 - b.b2p / 24.0 + b.b3 / 40.0 -
                             b.b4 / 120.0 - b.b5 / 15.0);
        }
    double en3 = field::eigenvalue(n) / 3.0;
    return std::pow(en3, ell / 2.0) * total;
}

// ---------------------------------------------------------------------------
// Low-order projections at general levels
// ---------------------------------------------------------------------------

struct LowOrderProjections {
    double p0 = 0, p1 = 0, p2 = 0;
};

inline LowOrderProjections low_order_projections(std::span<const WaveCoefficients> sets,
                                                 std::span<const double> levels) {
    const int ell = static_cast<int>(sets.size());
    if (static_cast<int>(levels.size()) != ell)
        throw Error("low_order_projections: one level per field");
    double density_product = 1.0;
    for (double u : levels) density_product *= gaussian_density(u);
    LowOrderProjections out;
    out.p0 = alpha(ell, 3) * density_product;
    double sum1 = 0.0, sum2 = 0.0;
    for (int i = 0; i < ell; ++i) {
        auto pf = field::parseval_functionals(sets[i]);
        sum1 += pf.mean_functional * levels[i];
        sum2 += sqr(levels[i]) * pf.centred_energy + pf.energy_defect;
    }
    out.p1 = out.p0 * sum1;
    out.p2 = alpha(ell, 3) / 2.0 * density_product * sum2;
    return out;
}

// ---------------------------------------------------------------------------
// Reference statistics and the limit law
// ---------------------------------------------------------------------------

struct ReferenceStatistics {
    double expected_volume = 0;
    double variance_asymptote = 0;
    double c_n = 0;
    std::array<std::array<double, 6>, 6> sigma_w{};  // (11,12,13,22,23,33)
    std::array<std::array<double, 9>, 9> sigma_m{};  // (1,2,3,11,12,13,22,23,33)
};

inline double limit_variance_constant(int ell) {
    return ell / 250.0 + ell * (ell - 1) / 2.0 * 76.0 / 375.0;
}

inline ReferenceStatistics reference_statistics(int64_t n, int ell) {
    if (!lattice::is_sum_of_three_squares(n))
        throw NotRepresentable("n = " + std::to_string(n));
    auto fs = lattice::enumerate_frequencies(n);
    ReferenceStatistics r;
    double en3 = field::eigenvalue(n) / 3.0;
    r.expected_volume = std::pow(en3, ell / 2.0) * alpha(ell, 3) / std::pow(kTwoPi, ell / 2.0);
    r.c_n = proj4_scale(n, ell, fs.cardinality());
    r.variance_asymptote = sqr(r.c_n) * limit_variance_constant(ell);
    // index helpers for the symmetric pairs (11,12,13,22,23,33)
    constexpr int pair_of[6][2] = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
    auto fourth_limit = [&](int a, int b, int c, int d) {
        if (a == b && b == c && c == d) return 1.0 / 5.0;
        int cnt[3] = {};
        ++cnt[a], ++cnt[b], ++cnt[c], ++cnt[d];
        for (int k = 0; k < 3; ++k)
            if (cnt[k] % 2 == 1) return 0.0;
        return 1.0 / 15.0;
    };
    for (int p = 0; p < 6; ++p)
        for (int q = 0; q < 6; ++q)
            r.sigma_w[p][q] =
                2.0 * fourth_limit(pair_of[p][0], pair_of[p][1], pair_of[q][0], pair_of[q][1]);
    for (int j = 0; j < 3; ++j) r.sigma_m[j][j] = 1.0 / 3.0;
    for (int p = 0; p < 6; ++p)
        for (int q = 0; q < 6; ++q)
            r.sigma_m[3 + p][3 + q] =
                fourth_limit(pair_of[p][0], pair_of[p][1], pair_of[q][0], pair_of[q][1]);
    return r;
}

// The limiting law of the normalized fourth projection: a fixed linear
// combination of independent centred chi-squared variables.
struct LimitLawSpec {
    int ell = 0;
    std::array<std::pair<double, int>, 5> chi_weights{};  // (weight, degrees)
    double variance = 0;
};

inline LimitLawSpec make_limit_law(int ell) {
    if (ell < 1 || ell > 3) throw Error("make_limit_law: ell in {1,2,3}");
    LimitLawSpec s;
    s.ell = ell;
    int pair_deg = 5 * ell * (ell - 1) / 2;
    s.chi_weights = {{{-1.0 / 50.0, 5 * ell},
                      {-1.0 / 25.0, pair_deg},
                      {1.0 / 25.0, pair_deg},
                      {1.0 / 50.0, pair_deg},
                      {-1.0 / 6.0, 3 * ell * (ell - 1) / 2}}};
    for (auto [w, d] : s.chi_weights) s.variance += w * w * 2.0 * d;
    return s;
}

struct LimitLawDraw {
    double value = 0;
    double normalized = 0;
};

inline LimitLawDraw sample_limit_law(const LimitLawSpec& spec, Rng& rng) {
    double v = 0.0;
    for (auto [w, d] : spec.chi_weights) {
        if (d == 0) continue;  // zero-degree chi-squared is the constant 0
        v += w * (rng.chi_squared(d) - d);
    }
    return {v, v / std::sqrt(spec.variance)};
}

}  // namespace arw::chaos
