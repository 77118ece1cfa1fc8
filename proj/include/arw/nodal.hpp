#pragma once

#include <fstream>
#include <optional>
#include <span>

#include "arw/field.hpp"

namespace arw::nodal {

using field::FieldGrid;
using field::WaveCoefficients;

// ---------------------------------------------------------------------------
// Cube topology and the 256-case cell table
// ---------------------------------------------------------------------------

namespace cubes {

// corner c sits at ((c>>0)&1, (c>>1)&1, (c>>2)&1)
constexpr int kEdgeCorners[12][2] = {
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // x-aligned
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // y-aligned
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // z-aligned
};

// faces as corner cycles; consecutive corners are joined by a cube edge
constexpr int kFaceCycles[6][4] = {
    {0, 2, 6, 4},  // x = 0
    {1, 3, 7, 5},  // x = 1
    {0, 1, 5, 4},  // y = 0
    {2, 3, 7, 6},  // y = 1
    {0, 1, 3, 2},  // z = 0
    {4, 5, 7, 6},  // z = 1
};

inline int edge_between(int a, int b) {
    for (int e = 0; e < 12; ++e) {
        if ((kEdgeCorners[e][0] == a && kEdgeCorners[e][1] == b) ||
            (kEdgeCorners[e][0] == b && kEdgeCorners[e][1] == a))
            return e;
    }
    throw Error("corners are not edge-adjacent");
}

struct CaseEntry {
    // closed polygons on the cube boundary, as cyclic lists of edge indices
    std::vector<std::vector<uint8_t>> loops;
    bool ambiguous = false;  // some face had four cut edges
};

// Builds the surface topology for every sign configuration. Configurations
// are canonicalized under global sign flip before resolving ambiguous faces,
// so a field and its negation produce identical geometry.
inline std::array<CaseEntry, 256> build_case_table() {
    std::array<CaseEntry, 256> table;
    for (int mask = 0; mask < 256; ++mask) {
        int canon = mask;
        int pc = __builtin_popcount(mask);
        if (pc > 4 || (pc == 4 && mask > (mask ^ 0xFF))) canon = mask ^ 0xFF;
        auto inside = [&](int c) { return (canon >> c) & 1; };
        // chords[e] lists the (at most 2) edges connected to edge e
        std::array<std::array<int, 2>, 12> chords;
        std::array<int, 12> degree{};
        for (auto& c : chords) c = {-1, -1};
        bool ambiguous = false;
        auto connect = [&](int e1, int e2) {
            chords[e1][degree[e1]++] = e2;
            chords[e2][degree[e2]++] = e1;
        };
        for (const auto& cyc : kFaceCycles) {
            int cut[4], n_cut = 0;
            int cut_pos[4];
            for (int i = 0; i < 4; ++i) {
                int a = cyc[i], b = cyc[(i + 1) % 4];
                if (inside(a) != inside(b)) {
                    cut_pos[n_cut] = i;
                    cut[n_cut++] = edge_between(a, b);
                }
            }
            if (n_cut == 2) {
                connect(cut[0], cut[1]);
            } else if (n_cut == 4) {
                ambiguous = true;
                // corners alternate; draw the chords that cut off the inside
                // corners of the canonical configuration
                if (inside(cyc[(cut_pos[0] + 1) % 4])) {
                    // inside corners follow edges 0 and 2 of the cut list
                    connect(cut[0], cut[1]);
                    connect(cut[2], cut[3]);
                } else {
                    connect(cut[3], cut[0]);
                    connect(cut[1], cut[2]);
                }
            }
        }
        CaseEntry entry;
        entry.ambiguous = ambiguous;
        std::array<bool, 12> used{};
        for (int start = 0; start < 12; ++start) {
            if (degree[start] == 0 || used[start]) continue;
            std::vector<uint8_t> loop;
            int prev = -1, cur = start;
            while (!used[cur]) {
                used[cur] = true;
                loop.push_back(static_cast<uint8_t>(cur));
                int next = chords[cur][0] == prev ? chords[cur][1] : chords[cur][0];
                prev = cur;
                cur = next;
            }
            entry.loops.push_back(std::move(loop));
        }
        table[mask] = std::move(entry);
    }
    return table;
}

inline const std::array<CaseEntry, 256>& case_table() {
    static const std::array<CaseEntry, 256> table = build_case_table();
    return table;
}

}  // namespace cubes

// ---------------------------------------------------------------------------
// Estimates
// ---------------------------------------------------------------------------

struct NodalEstimate {
    double value = 0;
    int ell = 0;
    enum class Estimator { cells, coarea } estimator = Estimator::cells;
    int resolution = 0;
    std::optional<double> epsilon;
    struct Diagnostics {
        int64_t ambiguous_cells = 0;
        int64_t newton_failures = 0;
        int64_t nudged_corners = 0;
    } diagnostics;
};

struct Triangle {
    dvec3 a, b, c;
};

namespace detail {

inline double triangle_area(const dvec3& a, const dvec3& b, const dvec3& c) {
    double u[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    double v[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    double cx = u[1] * v[2] - u[2] * v[1];
    double cy = u[2] * v[0] - u[0] * v[2];
    double cz = u[0] * v[1] - u[1] * v[0];
    return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

}  // namespace detail

// Codimension-one area by cell-wise polygon extraction with linear edge
// interpolation on the periodic grid.
inline NodalEstimate estimate_hypersurface_area(const FieldGrid& grid,
                                                std::vector<Triangle>* capture = nullptr) {
    if (grid.values.empty()) throw Error("estimate_hypersurface_area: empty grid");
    const int M = grid.resolution;
    const double h = 1.0 / M;
    NodalEstimate est;
    est.ell = 1;
    est.resolution = M;
    const auto& table = cubes::case_table();
    KahanSum area;
    double corner_vals[8];
    dvec3 pts_on_edge[12];
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j)
            for (int k = 0; k < M; ++k) {
                int mask = 0;
                for (int c = 0; c < 8; ++c) {
                    int ci = (i + (c & 1)) % M;
                    int cj = (j + ((c >> 1) & 1)) % M;
                    int ck = (k + ((c >> 2) & 1)) % M;
                    double v = grid.values[grid.index(ci, cj, ck)];
                    if (v == 0.0) {
                        v = 1e-12;  // deterministic tie-break off the surface
                        ++est.diagnostics.nudged_corners;
                    }
                    corner_vals[c] = v;
                    if (v < 0.0) mask |= 1 << c;
                }
                if (mask == 0 || mask == 255) continue;
                const auto& entry = table[mask];
                if (entry.ambiguous) ++est.diagnostics.ambiguous_cells;
                for (const auto& loop : entry.loops) {
                    for (uint8_t e : loop) {
                        int a = cubes::kEdgeCorners[e][0], b = cubes::kEdgeCorners[e][1];
                        double va = corner_vals[a], vb = corner_vals[b];
                        double t = va / (va - vb);
                        dvec3 pa{double(a & 1), double((a >> 1) & 1), double((a >> 2) & 1)};
                        dvec3 pb{double(b & 1), double((b >> 1) & 1), double((b >> 2) & 1)};
                        pts_on_edge[e] = {pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]),
                                          pa[2] + t * (pb[2] - pa[2])};
                    }
                    dvec3 centroid{0, 0, 0};
                    for (uint8_t e : loop)
                        for (int d = 0; d < 3; ++d) centroid[d] += pts_on_edge[e][d] / loop.size();
                    for (std::size_t v = 0; v < loop.size(); ++v) {
                        const dvec3& p = pts_on_edge[loop[v]];
                        const dvec3& q = pts_on_edge[loop[(v + 1) % loop.size()]];
                        area.add(detail::triangle_area(centroid, p, q) * h * h);
                        if (capture) {
                            auto shift = [&](const dvec3& u) {
                                return dvec3{(i + u[0]) * h, (j + u[1]) * h, (k + u[2]) * h};
                            };
                            capture->push_back({shift(centroid), shift(p), shift(q)});
                        }
                    }
                }
            }
    est.value = area.value();
    return est;
}

inline void export_mesh(const std::vector<Triangle>& tris, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path);
    for (const auto& t : tris)
        out << "v " << t.a[0] << ' ' << t.a[1] << ' ' << t.a[2] << "\n"
            << "v " << t.b[0] << ' ' << t.b[1] << ' ' << t.b[2] << "\n"
            << "v " << t.c[0] << ' ' << t.c[1] << ' ' << t.c[2] << "\n";
    for (std::size_t i = 0; i < tris.size(); ++i)
        out << "f " << 3 * i + 1 << ' ' << 3 * i + 2 << ' ' << 3 * i + 3 << "\n";
}

// Codimension-two curve length from the common zero set of two fields.
inline NodalEstimate estimate_intersection_length(const FieldGrid& ga, const FieldGrid& gb) {
    if (ga.n != gb.n || ga.resolution != gb.resolution)
        throw Error("estimate_intersection_length: grids must share n and resolution");
    if (ga.values == gb.values)
        throw IdenticalFields("the two grids carry the same field");
    const int M = ga.resolution;
    const double h = 1.0 / M;
    NodalEstimate est;
    est.ell = 2;
    est.resolution = M;
    KahanSum length;

    // local corner positions per face cycle, as (corner index within cube)
    double va[8], vb[8];
    dvec3 crossings[12];
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j)
            for (int k = 0; k < M; ++k) {
                int sa = 0, sb = 0;
                for (int c = 0; c < 8; ++c) {
                    int ci = (i + (c & 1)) % M;
                    int cj = (j + ((c >> 1) & 1)) % M;
                    int ck = (k + ((c >> 2) & 1)) % M;
                    std::size_t idx = ga.index(ci, cj, ck);
                    va[c] = ga.values[idx];
                    vb[c] = gb.values[idx];
                    sa |= va[c] < 0 ? 1 : 2;
                    sb |= vb[c] < 0 ? 1 : 2;
                }
                if (sa != 3 || sb != 3) continue;  // a field keeps one sign here
                int n_cross = 0;
                for (const auto& cyc : cubes::kFaceCycles) {
                    // bilinear interpolants of both fields on the face:
                    // F = A + B s + C t + D s t with (s, t) in [0,1]^2.
                    // Eliminating t gives a quadratic in s, so a face carries
                    // up to two crossings and adjacent cubes see identical
                    // crossing sets on their shared face.
                    auto model = [&](const double* v, double m[4]) {
                        double f00 = v[cyc[0]], f10 = v[cyc[1]], f11 = v[cyc[2]],
                               f01 = v[cyc[3]];
                        m[0] = f00;
                        m[1] = f10 - f00;
                        m[2] = f01 - f00;
                        m[3] = f00 + f11 - f10 - f01;
                    };
                    double F[4], G[4];
                    model(va, F);
                    model(vb, G);
                    double qa = G[1] * F[3] - G[3] * F[1];
                    double qb = G[0] * F[3] + G[1] * F[2] - G[2] * F[1] - G[3] * F[0];
                    double qc = G[0] * F[2] - G[2] * F[0];
                    double roots[2];
                    int n_roots = 0;
                    if (std::abs(qa) < 1e-14 * (std::abs(qb) + std::abs(qc))) {
                        if (qb != 0.0) roots[n_roots++] = -qc / qb;
                    } else {
                        double disc = qb * qb - 4 * qa * qc;
                        if (disc >= 0) {
                            double sq = std::sqrt(disc);
                            double q = -0.5 * (qb + (qb >= 0 ? sq : -sq));
                            roots[n_roots++] = q / qa;
                            if (q != 0.0) roots[n_roots++] = qc / q;
                        }
                    }
                    for (int rix = 0; rix < n_roots; ++rix) {
                        double s = roots[rix];
                        if (!(s >= 0.0 && s <= 1.0)) continue;
                        double denom = F[2] + F[3] * s;
                        double t;
                        if (std::abs(denom) > 1e-300) {
                            t = -(F[0] + F[1] * s) / denom;
                        } else {
                            double gden = G[2] + G[3] * s;
                            if (std::abs(gden) < 1e-300) continue;
                            t = -(G[0] + G[1] * s) / gden;
                        }
                        if (!(t >= 0.0 && t <= 1.0)) continue;
                        // face coordinates back to cube coordinates
                        dvec3 p0{double(cyc[0] & 1), double((cyc[0] >> 1) & 1),
                                 double((cyc[0] >> 2) & 1)};
                        dvec3 es, et;
                        for (int d = 0; d < 3; ++d) {
                            es[d] = double((cyc[1] >> d) & 1) - double((cyc[0] >> d) & 1);
                            et[d] = double((cyc[3] >> d) & 1) - double((cyc[0] >> d) & 1);
                        }
                        if (n_cross < 12) {
                            for (int d = 0; d < 3; ++d)
                                crossings[n_cross][d] = p0[d] + s * es[d] + t * et[d];
                            ++n_cross;
                        }
                    }
                }
                if (n_cross == 2) {
                    double d2 = 0;
                    for (int d = 0; d < 3; ++d) d2 += sqr(crossings[0][d] - crossings[1][d]);
                    length.add(std::sqrt(d2) * h);
                } else if (n_cross > 2) {
                    ++est.diagnostics.ambiguous_cells;
                    // greedy nearest pairing of the remaining crossings
                    std::vector<dvec3> pts(crossings, crossings + n_cross);
                    while (pts.size() >= 2) {
                        std::size_t best_j = 1;
                        double best = 1e300;
                        for (std::size_t q = 1; q < pts.size(); ++q) {
                            double d2 = 0;
                            for (int d = 0; d < 3; ++d) d2 += sqr(pts[0][d] - pts[q][d]);
                            if (d2 < best) {
                                best = d2;
                                best_j = q;
                            }
                        }
                        length.add(std::sqrt(best) * h);
                        pts.erase(pts.begin() + best_j);
                        pts.erase(pts.begin());
                    }
                } else if (n_cross == 1) {
                    ++est.diagnostics.ambiguous_cells;
                }
            }
    est.value = length.value();
    return est;
}

// Codimension-three zero count: sign-screened cells refined by a damped
// Newton iteration on the exact trigonometric system.
inline NodalEstimate count_triple_zeros(const WaveCoefficients& c1, const WaveCoefficients& c2,
                                        const WaveCoefficients& c3, int resolution) {
    const WaveCoefficients* cs[3] = {&c1, &c2, &c3};
    for (int u = 0; u < 3; ++u)
        if (cs[u]->freq->n != c1.freq->n) throw Error("count_triple_zeros: mismatched n");
    const int M = resolution;
    const double h = 1.0 / M;
    const double grad_scale = std::sqrt(field::eigenvalue(c1.freq->n) / 3.0);
    NodalEstimate est;
    est.ell = 3;
    est.resolution = M;

    FieldGrid grids[3];
    for (int u = 0; u < 3; ++u) grids[u] = field::synthesize_grid(*cs[u], M, false);

    auto eval = [&](const dvec3& x, double f[3], double jac[3][3]) {
        for (int u = 0; u < 3; ++u) {
            auto pv = field::evaluate_point(*cs[u], x);
            f[u] = pv.value;
            for (int d = 0; d < 3; ++d) jac[u][d] = grad_scale * pv.normalized_gradient[d];
        }
    };
    auto norm3 = [](const double f[3]) {
        return std::sqrt(f[0] * f[0] + f[1] * f[1] + f[2] * f[2]);
    };

    std::vector<dvec3> roots;
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j)
            for (int k = 0; k < M; ++k) {
                bool mixed = true;
                for (int u = 0; u < 3 && mixed; ++u) {
                    int s = 0;
                    for (int c = 0; c < 8; ++c) {
                        int ci = (i + (c & 1)) % M;
                        int cj = (j + ((c >> 1) & 1)) % M;
                        int ck = (k + ((c >> 2) & 1)) % M;
                        s |= grids[u].values[grids[u].index(ci, cj, ck)] < 0 ? 1 : 2;
                    }
                    mixed = s == 3;
                }
                if (!mixed) continue;
                dvec3 centre{(i + 0.5) * h, (j + 0.5) * h, (k + 0.5) * h};
                dvec3 x = centre;
                double f[3], jac[3][3];
                eval(x, f, jac);
                double fn = norm3(f);
                bool converged = false;
                for (int it = 0; it < 50; ++it) {
                    if (fn < 1e-10) {
                        converged = true;
                        break;
                    }
                    // solve jac * delta = -f by Cramer's rule
                    double det = jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1]) -
                                 jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0]) +
                                 jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0]);
                    if (std::abs(det) < 1e-300) break;
                    double rhs[3] = {-f[0], -f[1], -f[2]};
                    double delta[3];
                    for (int col = 0; col < 3; ++col) {
                        double m[3][3];
                        for (int r = 0; r < 3; ++r)
                            for (int c = 0; c < 3; ++c) m[r][c] = c == col ? rhs[r] : jac[r][c];
                        double d = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                                   m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                                   m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
                        delta[col] = d / det;
                    }
                    double step = 1.0;
                    for (int halvings = 0; halvings < 5; ++halvings) {
                        dvec3 trial{x[0] + step * delta[0], x[1] + step * delta[1],
                                    x[2] + step * delta[2]};
                        double tf[3], tj[3][3];
                        eval(trial, tf, tj);
                        if (norm3(tf) < fn || halvings == 4) {
                            x = trial;
                            std::copy(tf, tf + 3, f);
                            std::copy(&tj[0][0], &tj[0][0] + 9, &jac[0][0]);
                            fn = norm3(tf);
                            break;
                        }
                        step *= 0.5;
                    }
                }
                if (!converged && fn < 1e-10) converged = true;
                if (!converged) {
                    ++est.diagnostics.newton_failures;
                    continue;
                }
                bool in_cell = true;
                for (int d = 0; d < 3; ++d) {
                    double delta = x[d] - centre[d];
                    delta -= std::round(delta);  // torus wrap
                    if (std::abs(delta) > 0.75 * h) in_cell = false;
                }
                if (!in_cell) continue;
                dvec3 wrapped;
                for (int d = 0; d < 3; ++d) wrapped[d] = x[d] - std::floor(x[d]);
                roots.push_back(wrapped);
            }

    // deduplicate within torus distance 0.25 / M, keeping first occurrences
    const double dedup = 0.25 * h;
    std::vector<dvec3> kept;
    for (const auto& r : roots) {
        bool dup = false;
        for (const auto& q : kept) {
            double d2 = 0;
            for (int d = 0; d < 3; ++d) {
                double dd = r[d] - q[d];
                dd -= std::round(dd);
                d2 += dd * dd;
            }
            if (d2 < dedup * dedup) {
                dup = true;
                break;
            }
        }
        if (!dup) kept.push_back(r);
    }
    est.value = static_cast<double>(kept.size());
    return est;
}

// Thickened-level-set quadrature of the nodal volume: indicator of all
// fields within eps, weighted by the Gramian of the normalized Jacobian.
inline NodalEstimate coarea_epsilon_estimate(std::span<const FieldGrid> grids, double eps) {
    const int ell = static_cast<int>(grids.size());
    if (ell < 1 || ell > 3) throw Error("coarea_epsilon_estimate: 1 to 3 grids");
    if (eps <= 0) throw Error("coarea_epsilon_estimate: eps must be positive");
    for (const auto& g : grids) {
        if (g.n != grids[0].n || g.resolution != grids[0].resolution)
            throw Error("coarea grids must share n and resolution");
        if (!g.has_gradients) throw Error("coarea needs gradient channels");
    }
    const std::size_t nodes = grids[0].nodes();
    const double h = 1.0 / grids[0].resolution;
    const double grad_scale = std::sqrt(field::eigenvalue(grids[0].n) / 3.0);
    KahanSum sum;
    int64_t passing = 0;
    for (std::size_t idx = 0; idx < nodes; ++idx) {
        bool hard_pass = true;
        double weight = 1.0;
        double g[3][3];
        for (int u = 0; u < ell; ++u) {
            double t = grids[u].values[idx];
            hard_pass = hard_pass && std::abs(t) <= eps;
            for (int d = 0; d < 3; ++d) g[u][d] = grids[u].gradients[d][idx];
            // band membership averaged over the cell: with T varying by
            // slope across one cell, the weight is the overlap fraction of
            // [T - slope/2, T + slope/2] with [-eps, eps]. The raw indicator
            // misplaces the band edges by up to a cell and biases the sum.
            double slope = h * grad_scale *
                           std::sqrt(sqr(g[u][0]) + sqr(g[u][1]) + sqr(g[u][2]));
            double w;
            if (slope > 0) {
                double lo = std::max(t - 0.5 * slope, -eps);
                double hi = std::min(t + 0.5 * slope, eps);
                w = std::max(0.0, hi - lo) / slope;
            } else {
                w = std::abs(t) <= eps ? 1.0 : 0.0;
            }
            weight *= w;
        }
        if (hard_pass) ++passing;
        if (weight == 0.0) continue;
        double phi = 0;
        if (ell == 1) {
            phi = std::sqrt(sqr(g[0][0]) + sqr(g[0][1]) + sqr(g[0][2]));
        } else if (ell == 2) {
            double aa = sqr(g[0][0]) + sqr(g[0][1]) + sqr(g[0][2]);
            double bb = sqr(g[1][0]) + sqr(g[1][1]) + sqr(g[1][2]);
            double ab = g[0][0] * g[1][0] + g[0][1] * g[1][1] + g[0][2] * g[1][2];
            phi = std::sqrt(std::max(0.0, aa * bb - ab * ab));
        } else {
            phi = std::abs(g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) -
                           g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0]) +
                           g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]));
        }
        sum.add(weight * phi);
    }
    if (passing < 100)
        throw EpsilonTooSmall("only " + std::to_string(passing) + " grid nodes inside the band");
    NodalEstimate est;
    est.ell = ell;
    est.estimator = NodalEstimate::Estimator::coarea;
    est.resolution = grids[0].resolution;
    est.epsilon = eps;
    double e3 = field::eigenvalue(grids[0].n) / 3.0;
    est.value = std::pow(e3, ell / 2.0) * std::pow(2.0 * eps, -double(ell)) * sum.value() /
                static_cast<double>(nodes);
    return est;
}

}  // namespace arw::nodal
