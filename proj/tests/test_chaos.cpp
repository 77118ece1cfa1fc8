#include <catch2/catch_amalgamated.hpp>

#include "arw/chaos.hpp"

using namespace arw;
using namespace arw::chaos;

namespace {

std::vector<field::WaveCoefficients> draw_sets(const lattice::FrequencySet& fs, int ell,
                                               uint64_t seed, int rep) {
    std::vector<field::WaveCoefficients> out;
    for (int u = 0; u < ell; ++u)
        out.push_back(field::make_coefficients(fs, seed, int64_t(rep) * 4 + u));
    return out;
}

}  // namespace

TEST_CASE("hermite values and dirac coefficients", "[chaos]") {
    CHECK(hermite(2, 1.5) == Catch::Approx(1.25));
    CHECK(hermite(3, 2.0) == Catch::Approx(2.0));
    CHECK(hermite(4, 0.0) == Catch::Approx(3.0));
    CHECK(beta_coefficient(0) == Catch::Approx(1.0 / std::sqrt(kTwoPi)));
    CHECK(beta_coefficient(2) == Catch::Approx(-1.0 / std::sqrt(kTwoPi)));
    CHECK(beta_coefficient(4) == Catch::Approx(3.0 / std::sqrt(kTwoPi)));
    CHECK(beta_coefficient(1) == 0.0);
    CHECK(beta_coefficient(3) == 0.0);
    // indicator coefficients approach the formal ones
    CHECK(std::abs(beta_epsilon(2, 0.0, 0.01) - beta_coefficient(2)) < 1e-3);
    CHECK(std::abs(beta_epsilon(0, 0.0, 1e-4) - beta_coefficient(0)) < 1e-6);
    CHECK(std::abs(beta_epsilon(4, 0.3, 1e-5) - beta_coefficient(4, 0.3)) < 1e-6);

    // Hermite orthogonality, Monte Carlo; sd(H2 H3) is about 19 so the
    // 0.02 window needs a few million draws
    Rng rng(Rng::key(31, 7));
    double acc = 0;
    const int reps = 10000000;
    for (int i = 0; i < reps; ++i) {
        double z = rng.normal();
        acc += hermite(2, z) * hermite(3, z);
    }
    CHECK(std::abs(acc / reps) < 0.02);
}

TEST_CASE("alpha constants", "[chaos]") {
    CHECK(alpha(1, 3) == Catch::Approx(4.0 / std::sqrt(kTwoPi)).epsilon(1e-14));
    CHECK(alpha(3, 3) == Catch::Approx(4.0 / std::sqrt(kTwoPi)).epsilon(1e-14));
    CHECK(alpha(2, 3) == Catch::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("gramian coefficient table", "[chaos]") {
    // single H4 cell, normalized: -(1/120) alpha for k = 3
    std::vector<int> d13 = {4, 0, 0};
    CHECK(gramian_hermite_coefficient(1, 3, d13) ==
          Catch::Approx(-alpha(1, 3) / 120.0).epsilon(1e-12));
    // H2 x H2 in the same row at (2,3), raw expectation -(1/15) alpha(2,3) = -2/15
    std::vector<int> d23 = {2, 2, 0, 0, 0, 0};
    CHECK(gramian_hermite_coefficient(2, 3, d23) * 4.0 ==
          Catch::Approx(-2.0 / 15.0).epsilon(1e-12));
    // rectangle of H1 factors
    std::vector<int> rect = {1, 1, 0, 1, 1, 0};
    CHECK(gramian_hermite_coefficient(2, 3, rect) ==
          Catch::Approx(-alpha(2, 3) * 4.0 / 30.0).epsilon(1e-12));
    // odd totals vanish
    std::vector<int> odd = {3, 0, 0, 0, 0, 0};
    CHECK(gramian_hermite_coefficient(2, 3, odd) == 0.0);
    // unsupported degree
    std::vector<int> six = {6, 0, 0};
    CHECK_THROWS_AS(gramian_hermite_coefficient(1, 3, six), UnsupportedDegree);
    // non-rectangle quadruple of H1
    std::vector<int> nonrect = {1, 1, 0, 1, 0, 1};
    CHECK(gramian_hermite_coefficient(2, 3, nonrect) == 0.0);
}

TEST_CASE("rv1 statistics: injected coefficients", "[chaos]") {
    auto fs = lattice::enumerate_frequencies(5);
    auto table = lattice::build_pair_table(fs);
    std::vector<cplx> ones(fs.cardinality(), cplx(1, 0));
    std::vector<field::WaveCoefficients> sets = {field::make_coefficients(fs, 0, 0, ones)};
    auto st = compute_rv1(sets, fs, table);
    CHECK(st.diag[0].W == Catch::Approx(0.0).margin(1e-14));
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j)
            CHECK(st.diag[0].Wjk[k][j] == Catch::Approx(0.0).margin(1e-13));
    CHECK(st.diag[0].R == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("rv1 invariant sum rules", "[chaos]") {
    auto fs = lattice::enumerate_frequencies(17);
    auto table = lattice::build_pair_table(fs);
    auto sets = draw_sets(fs, 2, 9, 0);
    auto st = compute_rv1(sets, fs, table);
    double wsum = st.diag[0].Wjk[0][0] + st.diag[0].Wjk[1][1] + st.diag[0].Wjk[2][2];
    CHECK(wsum == Catch::Approx(st.diag[0].W).epsilon(1e-12));
    const auto& c = st.cross[0][1];
    double msum = c.Mjk[0][0] + c.Mjk[1][1] + c.Mjk[2][2];
    CHECK(msum == Catch::Approx(c.M).epsilon(1e-12));
    double rsum = 0, ssum = 0;
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j) {
            rsum += c.Rjk[k][j];
            ssum += c.Sjk[k][j];
        }
    CHECK(rsum == Catch::Approx(c.R).epsilon(1e-12));
    CHECK(ssum == Catch::Approx(c.S).epsilon(1e-10));
    CHECK(c.R >= 0.0);
}

TEST_CASE("class-factored X sums match the quadruple stream", "[chaos]") {
    for (int64_t n : {2, 5, 17, 41}) {
        auto fs = lattice::enumerate_frequencies(n);
        auto table = lattice::build_pair_table(fs);
        auto sets = draw_sets(fs, 3, 1234 + n, 0);
        auto fast = compute_rv1(sets, fs, table, XAccumulation::class_factored);
        auto ref = compute_rv1(sets, fs, table, XAccumulation::quadruple_stream);
        for (int u = 0; u < 3; ++u) {
            CHECK(fast.diag[u].X == Catch::Approx(ref.diag[u].X).margin(1e-10));
            for (int k = 0; k < 3; ++k) {
                CHECK(fast.diag[u].Xkk[k] == Catch::Approx(ref.diag[u].Xkk[k]).margin(1e-10));
                for (int j = 0; j < 3; ++j)
                    CHECK(fast.diag[u].Xkkjj[k][j] ==
                          Catch::Approx(ref.diag[u].Xkkjj[k][j]).margin(1e-10));
            }
        }
        for (int u = 0; u < 3; ++u)
            for (int v = u + 1; v < 3; ++v) {
                const auto& a = fast.cross[u][v];
                const auto& b = ref.cross[u][v];
                CHECK(a.X == Catch::Approx(b.X).margin(1e-10));
                for (int k = 0; k < 3; ++k) {
                    CHECK(a.Xkk_first[k] == Catch::Approx(b.Xkk_first[k]).margin(1e-10));
                    CHECK(a.Xkk_second[k] == Catch::Approx(b.Xkk_second[k]).margin(1e-10));
                    CHECK(a.Xmix[k] == Catch::Approx(b.Xmix[k]).margin(1e-10));
                    for (int j = 0; j < 3; ++j)
                        CHECK(a.Xkkjj[k][j] == Catch::Approx(b.Xkkjj[k][j]).margin(1e-10));
                }
            }
    }
}

TEST_CASE("closed-form quartic integrals equal grid quadrature", "[chaos]") {
    for (int64_t n : {1, 2, 17}) {
        auto fs = lattice::enumerate_frequencies(n);
        auto table = lattice::build_pair_table(fs);
        for (int rep = 0; rep < 3; ++rep) {
            auto sets = draw_sets(fs, 2, 55 + n, rep);
            auto st = compute_rv1(sets, fs, table);
            auto closed = rv2_closed_form(st);
            int M = 4 * static_cast<int>(lattice::isqrt64(n)) + 1;
            std::vector<field::FieldGrid> grids;
            for (int u = 0; u < 2; ++u)
                grids.push_back(field::synthesize_grid(sets[u], M, true));
            auto numer = rv2_numerical(grids);
            auto close = [](double a, double b) {
                double scale = std::max({std::abs(a), std::abs(b), 1e-6});
                return std::abs(a - b) / scale < 1e-9;
            };
            for (int u = 0; u < 2; ++u) {
                CHECK(close(closed.a[u].a1, numer.a[u].a1));
                CHECK(close(closed.a[u].a2, numer.a[u].a2));
                CHECK(close(closed.a[u].a3, numer.a[u].a3));
                CHECK(close(closed.a[u].a4, numer.a[u].a4));
            }
            CHECK(close(closed.b[0][1].b1, numer.b[0][1].b1));
            CHECK(close(closed.b[0][1].b2, numer.b[0][1].b2));
            CHECK(close(closed.b[0][1].b2p, numer.b[0][1].b2p));
            CHECK(close(closed.b[0][1].b3, numer.b[0][1].b3));
            CHECK(close(closed.b[0][1].b4, numer.b[0][1].b4));
            CHECK(close(closed.b[0][1].b5, numer.b[0][1].b5));
        }
    }
}

TEST_CASE("n = 1 has empty nondegenerate quadruples", "[chaos]") {
    auto fs = lattice::enumerate_frequencies(1);
    auto table = lattice::build_pair_table(fs);
    auto sets = draw_sets(fs, 1, 3, 0);
    auto st = compute_rv1(sets, fs, table);
    CHECK(std::abs(st.diag[0].X) < 1e-12);  // empty set, floating residue only
    // a1 reduces to the two-term form
    auto rv = rv2_closed_form(st);
    CHECK(rv.a[0].a1 ==
          Catch::Approx(3.0 / 6.0 * (sqr(st.diag[0].W) - st.diag[0].R)).epsilon(1e-12));
}

TEST_CASE("projection routes agree", "[chaos]") {
    auto fs = lattice::enumerate_frequencies(17);
    auto table = lattice::build_pair_table(fs);
    for (int rep = 0; rep < 5; ++rep) {
        auto sets = draw_sets(fs, 3, 321, rep);
        auto st = compute_rv1(sets, fs, table);
        auto rv = rv2_closed_form(st);
        for (int ell = 1; ell <= 3; ++ell) {
            SpectralStatistics sub = st;
            sub.ell = ell;
            Rv2Values rvsub = rv;
            rvsub.ell = ell;
            double via_stats = proj4(sub);
            double via_rv2 = proj4_from_rv2(rvsub, st.n, st.N);
            CHECK(via_stats == Catch::Approx(via_rv2).epsilon(1e-11));
        }
    }
}

TEST_CASE("proj4 invariant under torus translation", "[chaos]") {
    auto fs = lattice::enumerate_frequencies(17);
    auto table = lattice::build_pair_table(fs);
    auto sets = draw_sets(fs, 2, 77, 0);
    auto st = compute_rv1(sets, fs, table);
    dvec3 t{0.234, 0.711, 0.05};
    std::vector<field::WaveCoefficients> shifted;
    for (const auto& s : sets) shifted.push_back(field::translate(s, t));
    auto st2 = compute_rv1(shifted, fs, table);
    CHECK(proj4(st2) == Catch::Approx(proj4(st)).epsilon(1e-10));
}

TEST_CASE("proj4 is centred and ell = 1 uses only the single-field part", "[chaos]") {
    auto fs = lattice::enumerate_frequencies(101);
    auto table = lattice::build_pair_table(fs);
    double acc = 0, acc2 = 0;
    const int reps = 2000;
    for (int rep = 0; rep < reps; ++rep) {
        auto sets = draw_sets(fs, 1, 4242, rep);
        auto st = compute_rv1(sets, fs, table);
        double v = proj4(st);
        acc += v;
        acc2 += v * v;
    }
    double mean = acc / reps;
    double se = std::sqrt((acc2 / reps - mean * mean) / reps);
    CHECK(std::abs(mean) < 3 * se);
}

TEST_CASE("law of large numbers for R", "[chaos]") {
    auto fs = lattice::enumerate_frequencies(194);  // N = 240
    auto table = lattice::build_pair_table(fs);
    double acc = 0;
    const int reps = 500;
    for (int rep = 0; rep < reps; ++rep) {
        auto sets = draw_sets(fs, 1, 5, rep);
        auto st = compute_rv1(sets, fs, table);
        acc += st.diag[0].R;
    }
    CHECK(acc / reps == Catch::Approx(2.0).margin(0.1));
}

TEST_CASE("X second moment bounded by the census", "[chaos]") {
    auto fs = lattice::enumerate_frequencies(41);
    auto table = lattice::build_pair_table(fs);
    auto census = lattice::correlation_census(fs, 4);
    double acc = 0;
    const int reps = 800;
    for (int rep = 0; rep < reps; ++rep) {
        auto sets = draw_sets(fs, 2, 6, rep);
        auto st = compute_rv1(sets, fs, table);
        acc += sqr(st.cross[0][1].X);
    }
    // pairing count gives E|X|^2 = 4 card(X4)/N^2 to leading order for a
    // mixed pair of fields; allow Monte Carlo slack around that constant
    double base = double(census.card_X4) / sqr(double(fs.cardinality()));
    CHECK(acc / reps <= 5.5 * base);
    CHECK(acc / reps >= 2.5 * base);
}

TEST_CASE("low order projections", "[chaos]") {
    auto fs = lattice::enumerate_frequencies(17);
    auto sets = draw_sets(fs, 2, 13, 0);
    std::vector<double> zero{0.0, 0.0};
    auto at_zero = low_order_projections(sets, zero);
    CHECK(at_zero.p1 == 0.0);
    CHECK(std::abs(at_zero.p2) < 1e-12);
    CHECK(at_zero.p0 == Catch::Approx(alpha(2, 3) / kTwoPi).epsilon(1e-13));
    // matches the expected volume divided by the gradient scale factor
    auto ref = reference_statistics(17, 2);
    double e3 = field::eigenvalue(17) / 3.0;
    CHECK(at_zero.p0 == Catch::Approx(ref.expected_volume / e3).epsilon(1e-12));
    std::vector<double> lvl{0.4, -0.7};
    CHECK(low_order_projections(sets, lvl).p1 == 0.0);  // mean functional vanishes
}

TEST_CASE("reference statistics identities", "[chaos]") {
    auto r1 = reference_statistics(101, 1);
    double en = field::eigenvalue(101);
    double n1 = lattice::enumerate_frequencies(101).cardinality();
    CHECK(r1.expected_volume == Catch::Approx(2.0 * std::sqrt(en) / (std::sqrt(3.0) * M_PI)));
    CHECK(r1.variance_asymptote ==
          Catch::Approx(en / sqr(n1) * 8.0 / (375.0 * M_PI * M_PI)).epsilon(1e-12));
    auto r2 = reference_statistics(101, 2);
    CHECK(r2.expected_volume == Catch::Approx(en / (3.0 * M_PI)));
    auto r3 = reference_statistics(101, 3);
    CHECK(r3.expected_volume ==
          Catch::Approx(std::pow(en, 1.5) / (3.0 * std::sqrt(3.0) * M_PI * M_PI)));
    CHECK(r2.sigma_m[3][3] == Catch::Approx(1.0 / 5.0));
    CHECK(r2.sigma_m[0][0] == Catch::Approx(1.0 / 3.0));
    CHECK(r2.sigma_w[0][3] == Catch::Approx(2.0 / 15.0));
    CHECK_THROWS_AS(reference_statistics(7, 1), NotRepresentable);
}

TEST_CASE("limit law sampler", "[chaos]") {
    for (int ell = 1; ell <= 3; ++ell) {
        auto spec = make_limit_law(ell);
        double direct = 0;
        for (auto [w, d] : spec.chi_weights) direct += w * w * 2.0 * d;
        CHECK(spec.variance == Catch::Approx(limit_variance_constant(ell)).epsilon(1e-15));
        CHECK(direct == Catch::Approx(spec.variance).epsilon(1e-15));
    }
    auto spec = make_limit_law(1);
    Rng rng(Rng::key(8, 8));
    double acc = 0, acc2 = 0;
    const int reps = 1000000;
    for (int i = 0; i < reps; ++i) {
        double v = sample_limit_law(spec, rng).value;
        acc += v;
        acc2 += v * v;
    }
    double mean = acc / reps;
    double var = acc2 / reps - mean * mean;
    CHECK(var == Catch::Approx(1.0 / 250.0).epsilon(0.02));
    CHECK(std::abs(mean) < 3 * std::sqrt(var / reps));
    auto spec2 = make_limit_law(2);
    CHECK(spec2.variance == Catch::Approx(2.0 / 250.0 + 76.0 / 375.0).epsilon(1e-15));
}
