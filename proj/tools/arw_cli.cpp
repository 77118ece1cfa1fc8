// Command-line front end: lattice inspection, sampling, nodal estimates and
// the Monte Carlo experiment harness. Exit code 0 on pass, 2 on a failed
// verdict, 1 on error.

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>

#include "arw/harness.hpp"

namespace {

int cmd_lattice(int64_t n, int census_m) {
    using namespace arw;
    if (!lattice::is_sum_of_three_squares(n)) {
        std::printf("n=%" PRId64 " representable=false\n", n);
        return 0;
    }
    auto& ctx = harness::lattice_context(n);
    auto mom = lattice::lattice_moments(ctx.freq);
    std::printf("n=%" PRId64 " N=%d admissible=%s psi=%.12f\n", n, ctx.freq.cardinality(),
                ctx.freq.admissible ? "true" : "false", mom.psi);
    if (census_m > 0) {
        auto c = lattice::correlation_census(ctx.freq, census_m);
        lattice::save_census(c);
        std::printf("census m=%d card_C=%" PRIu64 " card_X4=%" PRIu64 " rn_moment=%.12e\n",
                    c.m, c.card_C, c.card_X4, c.rn_moment);
    }
    return 0;
}

int cmd_scan(int64_t limit, int top) {
    auto rows = arw::harness::scan_admissible(limit, top);
    std::printf("n,N\n");
    for (auto [n, N] : rows) std::printf("%" PRId64 ",%d\n", n, N);
    return 0;
}

int cmd_sample(int64_t n, uint64_t seed, int64_t rep, int grid, const std::string& dump) {
    using namespace arw;
    auto& ctx = harness::lattice_context(n);
    int M = grid > 0 ? grid : field::default_resolution(n);
    auto coeffs = field::make_coefficients(ctx.freq, seed, rep);
    auto g = field::synthesize_grid(coeffs, M, true);
    double mean = 0, mean2 = 0;
    for (double v : g.values) {
        mean += v;
        mean2 += v * v;
    }
    mean /= g.nodes();
    mean2 /= g.nodes();
    std::printf("n=%" PRId64 " N=%d grid=%d mean=%.3e mean_square=%.6f\n", n,
                ctx.freq.cardinality(), M, mean, mean2);
    if (!dump.empty()) {
        for (int ch = 0; ch < 4; ++ch)
            field::dump_grid_channel(g, ch, dump + ".ch" + std::to_string(ch) + ".arwg");
        std::printf("wrote %s.ch0..3.arwg\n", dump.c_str());
    }
    return 0;
}

int cmd_nodal(int64_t n, int ell, const std::string& estimator, double eps, uint64_t seed,
              int grid, const std::string& mesh) {
    using namespace arw;
    auto& ctx = harness::lattice_context(n);
    int M = grid > 0 ? grid : field::default_resolution(n);
    std::vector<field::WaveCoefficients> sets;
    for (int u = 0; u < ell; ++u) sets.push_back(field::make_coefficients(ctx.freq, seed, u));
    nodal::NodalEstimate est;
    if (estimator == "coarea") {
        std::vector<field::FieldGrid> grids;
        for (int u = 0; u < ell; ++u) grids.push_back(field::synthesize_grid(sets[u], M, true));
        est = nodal::coarea_epsilon_estimate(grids, eps);
    } else if (ell == 1) {
        auto g = field::synthesize_grid(sets[0], M, false);
        if (!mesh.empty()) {
            std::vector<nodal::Triangle> tris;
            est = nodal::estimate_hypersurface_area(g, &tris);
            nodal::export_mesh(tris, mesh);
        } else {
            est = nodal::estimate_hypersurface_area(g);
        }
    } else if (ell == 2) {
        auto ga = field::synthesize_grid(sets[0], M, false);
        auto gb = field::synthesize_grid(sets[1], M, false);
        est = nodal::estimate_intersection_length(ga, gb);
    } else {
        est = nodal::count_triple_zeros(sets[0], sets[1], sets[2], M);
    }
    auto ref = chaos::reference_statistics(n, ell);
    std::printf("n=%" PRId64 " ell=%d estimator=%s grid=%d value=%.6f expected=%.6f\n", n, ell,
                estimator.c_str(), M, est.value, ref.expected_volume);
    std::printf("diagnostics ambiguous=%" PRId64 " newton_failures=%" PRId64
                " nudged=%" PRId64 "\n",
                est.diagnostics.ambiguous_cells, est.diagnostics.newton_failures,
                est.diagnostics.nudged_corners);
    return 0;
}

int cmd_constants(int64_t mc_samples, uint64_t seed) {
    using namespace arw;
    std::printf("pattern,ell,k,value\n");
    for (auto [ell, k] : {std::pair{1, 3}, {2, 3}, {3, 3}, {2, 2}}) {
        for (const auto& row : chaos::gramian_table(ell, k))
            std::printf("\"%s\",%d,%d,%.15f\n", row.pattern.c_str(), row.ell, row.k, row.value);
    }
    for (int j : {0, 2, 4})
        std::printf("\"beta_%d\",0,0,%.15f\n", j, chaos::beta_coefficient(j));
    for (int ell : {1, 2, 3})
        std::printf("\"alpha(%d,3)\",%d,3,%.15f\n", ell, ell, chaos::alpha(ell, 3));
    if (mc_samples > 0) {
        arw::harness::ExperimentConfig cfg;
        cfg.kind = "constants";
        cfg.replications = static_cast<int>(mc_samples);
        cfg.seed = seed;
        auto rep = arw::harness::run_experiment(cfg);
        for (const auto& c : rep.checks)
            std::printf("# verify %-32s observed=%+.6f target=%+.6f %s\n", c.name.c_str(),
                        c.observed, c.target, c.pass ? "ok" : "FAIL");
        return rep.pass ? 0 : 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"arithmetic random waves on the 3-torus: nodal volumes and chaos projections"};
    app.require_subcommand(1);

    int64_t n = 0, limit = 100, rep_index = 0, mc_samples = 0;
    uint64_t seed = 1;
    int top = 10, census_m = 0, ell = 1, grid = 0, reps = 100;
    double eps = 0.1;
    std::string estimator = "cells", dump, mesh, kind = "mean", out_path, csv_path;

    auto* lat = app.add_subcommand("lattice", "enumerate frequencies and census");
    lat->add_option("n", n, "eigenvalue index")->required();
    lat->add_option("--census", census_m, "correlation order (2, 4 or 6)");

    auto* scan = app.add_subcommand("scan", "largest admissible frequency sets");
    scan->add_option("--limit", limit, "maximum n")->required();
    scan->add_option("--top", top, "how many to list");

    auto* sample = app.add_subcommand("sample", "synthesize one replication on a grid");
    sample->add_option("--n", n)->required();
    sample->add_option("--seed", seed);
    sample->add_option("--rep", rep_index);
    sample->add_option("--grid", grid, "resolution (default scales with sqrt(n))");
    sample->add_option("--dump", dump, "path prefix for channel dumps");

    auto* nod = app.add_subcommand("nodal", "single-replication nodal estimate");
    nod->add_option("--n", n)->required();
    nod->add_option("--ell", ell)->check(CLI::Range(1, 3));
    nod->add_option("--estimator", estimator)->check(CLI::IsMember({"cells", "coarea"}));
    nod->add_option("--eps", eps);
    nod->add_option("--seed", seed);
    nod->add_option("--grid", grid);
    nod->add_option("--mesh", mesh, "triangle-soup export path (ell = 1, cells)");

    auto* cons = app.add_subcommand("constants", "projection-coefficient table as CSV");
    cons->add_option("--mc-samples", mc_samples, "verify the table by Monte Carlo");
    cons->add_option("--seed", seed);

    auto* exp = app.add_subcommand("experiment", "Monte Carlo experiment with a verdict");
    exp->add_option("--kind", kind)
        ->check(CLI::IsMember(
            {"mean", "variance", "distribution", "covariance", "constants", "residual", "taylor"}));
    exp->add_option("--n", n);
    exp->add_option("--ell", ell)->check(CLI::Range(1, 3));
    exp->add_option("--reps", reps);
    exp->add_option("--seed", seed);
    exp->add_option("--grid", grid);
    exp->add_option("--eps", eps);
    exp->add_option("--estimator", estimator);
    exp->add_option("--out", out_path, "JSON report path");
    exp->add_option("--csv", csv_path, "per-replication CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (lat->parsed()) return cmd_lattice(n, census_m);
        if (scan->parsed()) return cmd_scan(limit, top);
        if (sample->parsed()) return cmd_sample(n, seed, rep_index, grid, dump);
        if (nod->parsed()) return cmd_nodal(n, ell, estimator, eps, seed, grid, mesh);
        if (cons->parsed()) return cmd_constants(mc_samples, seed);
        if (exp->parsed()) {
            arw::harness::ExperimentConfig cfg;
            cfg.kind = kind;
            cfg.n = n;
            cfg.ell = ell;
            cfg.replications = reps;
            cfg.seed = seed;
            cfg.grid_resolution = grid;
            cfg.epsilon = eps;
            cfg.estimator = estimator;
            cfg.out_path = out_path;
            cfg.csv_path = csv_path;
            auto rep = arw::harness::run_experiment(cfg);
            std::printf("kind=%s n=%" PRId64 " ell=%d reps=%d mean=%.6g variance=%.6g\n",
                        kind.c_str(), n, ell, reps, rep.mean, rep.variance);
            for (const auto& c : rep.checks)
                if (!c.pass || rep.checks.size() <= 8)
                    std::printf("  %-40s observed=%+.6g target=%+.6g %s\n", c.name.c_str(),
                                c.observed, c.target, c.pass ? "pass" : "FAIL");
            std::printf("verdict: %s (%.1f s)\n", rep.pass ? "pass" : "fail", rep.wall_seconds);
            return rep.pass ? 0 : 2;
        }
    } catch (const arw::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
