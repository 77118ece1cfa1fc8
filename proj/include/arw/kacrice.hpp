#pragma once

#include <Eigen/Dense>

#include "arw/chaos.hpp"
#include "arw/field.hpp"

namespace arw::kacrice {

using field::CovarianceProfile;
using lattice::FrequencySet;

// ---------------------------------------------------------------------------
// Conditional law of the two gradients given equal levels at lag z
// ---------------------------------------------------------------------------

// Law of (grad T(z), grad T(0)) given T(z) = T(0) = u.
struct ConditionalGaussian {
    Eigen::Matrix<double, 6, 1> mean;
    Eigen::Matrix<double, 6, 6> covariance;
    Eigen::Matrix3d omega1, omega2;
    int64_t n = 0;
    dvec3 z{};
    double level = 0;
};

inline ConditionalGaussian conditional_jacobian_law(const FrequencySet& fs, const dvec3& z,
                                                    double level) {
    auto prof = field::covariance_profile(fs, z);
    double r = prof.value;
    double denom = 1.0 - r * r;
    if (denom <= 1e-12)
        throw DegenerateCovariance("1 - r^2 = " + std::to_string(denom) + " at this lag");
    ConditionalGaussian out;
    out.n = fs.n;
    out.z = z;
    out.level = level;
    Eigen::Vector3d grad(prof.gradient[0], prof.gradient[1], prof.gradient[2]);
    Eigen::Matrix3d hess;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) hess(a, b) = prof.hessian[a][b];
    double e3 = field::eigenvalue(fs.n) / 3.0;
    out.omega1 = e3 * Eigen::Matrix3d::Identity() - grad * grad.transpose() / denom;
    // Schur complement of the joint covariance; the sign of the rank-one
    // term follows from B C^{-1} B^T and makes omega2 -> omega1 as z -> 0.
    out.omega2 = -hess - r / denom * grad * grad.transpose();
    out.covariance.topLeftCorner<3, 3>() = out.omega1;
    out.covariance.bottomRightCorner<3, 3>() = out.omega1;
    out.covariance.topRightCorner<3, 3>() = out.omega2;
    out.covariance.bottomLeftCorner<3, 3>() = out.omega2.transpose();
    out.mean.head<3>() = level / (1.0 + r) * grad;
    out.mean.tail<3>() = -level / (1.0 + r) * grad;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> es(out.covariance);
    if (es.eigenvalues().minCoeff() < -1e-9)
        throw DegenerateCovariance("conditional covariance is not positive semi-definite");
    return out;
}

// Independent assembly of the same conditional covariance through the joint
// 8-dimensional covariance and the Schur complement A - B C^{-1} B^T.
inline Eigen::Matrix<double, 6, 6> conditional_covariance_schur(const FrequencySet& fs,
                                                                const dvec3& z) {
    auto prof = field::covariance_profile(fs, z);
    double e3 = field::eigenvalue(fs.n) / 3.0;
    Eigen::Matrix<double, 6, 6> A;
    Eigen::Matrix<double, 6, 2> B;
    Eigen::Matrix2d C;
    Eigen::Vector3d grad(prof.gradient[0], prof.gradient[1], prof.gradient[2]);
    Eigen::Matrix3d hess;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) hess(a, b) = prof.hessian[a][b];
    A.setZero();
    A.topLeftCorner<3, 3>() = e3 * Eigen::Matrix3d::Identity();
    A.bottomRightCorner<3, 3>() = e3 * Eigen::Matrix3d::Identity();
    A.topRightCorner<3, 3>() = -hess;
    A.bottomLeftCorner<3, 3>() = -hess;
    B.setZero();
    B.col(1).head<3>() = grad;
    B.col(0).tail<3>() = -grad;
    C << 1.0, prof.value, prof.value, 1.0;
    return A - B * C.inverse() * B.transpose();
}

// ---------------------------------------------------------------------------
// Two-point correlation upper bound
// ---------------------------------------------------------------------------

struct TwoPointBound {
    double q_value = 0;
    double leading = 0;         // (3)_l (1 - l/3) e_n^{l/2} |z|^{-l}
    double residual_scale = 0;  // E_n^{l/2+1} |z|^{2-l}
};

inline double falling_factorial_3(int ell) {
    double f = 1;
    for (int i = 0; i < ell; ++i) f *= 3 - i;
    return f;
}

inline TwoPointBound two_point_upper_bound(const FrequencySet& fs, const dvec3& z, double u_norm,
                                           int ell) {
    auto prof = field::covariance_profile(fs, z);
    double r = prof.value;
    double denom = 1.0 - r * r;
    if (denom <= 1e-12) throw DegenerateCovariance("two_point_upper_bound: r^2 = 1");
    double en = field::eigenvalue(fs.n);
    double e3 = en / 3.0;
    double g2 = sqr(prof.gradient[0]) + sqr(prof.gradient[1]) + sqr(prof.gradient[2]);
    double bracket = e3 - (ell / 3.0) * g2 / denom + (sqr(u_norm) / 3.0) * g2 / sqr(1.0 + r);
    TwoPointBound out;
    out.q_value = std::pow(denom, -ell / 2.0) * falling_factorial_3(ell) *
                  std::pow(e3, ell - 1.0) * bracket;
    double norm_z = std::sqrt(sqr(z[0]) + sqr(z[1]) + sqr(z[2]));
    out.leading = falling_factorial_3(ell) * (1.0 - ell / 3.0) * std::pow(e3, ell / 2.0) *
                  std::pow(norm_z, -double(ell));
    out.residual_scale = std::pow(en, ell / 2.0 + 1.0) * std::pow(norm_z, 2.0 - ell);
    return out;
}

// Conditional second moment of the Gramian of the normalized-at-lag-z
// gradient rows; closed bracket tested against Monte Carlo.
inline double conditional_gramian_second_moment(const FrequencySet& fs, const dvec3& z,
                                                double u_norm, int ell) {
    auto prof = field::covariance_profile(fs, z);
    double r = prof.value;
    double denom = 1.0 - r * r;
    if (denom <= 1e-12) throw DegenerateCovariance("r^2 = 1");
    double e3 = field::eigenvalue(fs.n) / 3.0;
    double g2 = sqr(prof.gradient[0]) + sqr(prof.gradient[1]) + sqr(prof.gradient[2]);
    return falling_factorial_3(ell) * std::pow(e3, ell - 1.0) *
           (e3 - (ell / 3.0) * g2 / denom + (sqr(u_norm) / 3.0) * g2 / sqr(1.0 + r));
}

// ---------------------------------------------------------------------------
// Taylor behaviour near the diagonal
// ---------------------------------------------------------------------------

struct SlopeFit {
    double slope = 0;
    double intercept = 0;  // log-log intercept
};

inline SlopeFit fit_loglog(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw Error("fit_loglog: need matching samples");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = x.size();
    for (std::size_t i = 0; i < m; ++i) {
        double lx = std::log(x[i]), ly = std::log(std::abs(y[i]));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    SlopeFit f;
    f.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / m;
    return f;
}

// Fits |q - leading| against |z| in log-log over a shrinking lag sequence;
// the expected exponent is 2 - ell.
inline SlopeFit taylor_residual_check(const FrequencySet& fs, int ell, double u_norm,
                                      std::span<const dvec3> lags) {
    std::vector<double> norms, resid;
    for (const auto& z : lags) {
        auto b = two_point_upper_bound(fs, z, u_norm, ell);
        norms.push_back(std::sqrt(sqr(z[0]) + sqr(z[1]) + sqr(z[2])));
        resid.push_back(ell == 3 ? b.q_value : b.q_value - b.leading);
    }
    return fit_loglog(norms, resid);
}

// Verified non-degeneracy radius c0 / sqrt(E_n) for two-point computations.
inline double nondegeneracy_radius(const FrequencySet& fs, double c0 = 0.5,
                                   int samples = 1000) {
    double radius = c0 / std::sqrt(field::eigenvalue(fs.n));
    Rng rng(Rng::key(0x4152574bULL, static_cast<uint64_t>(fs.n)));
    for (int s = 0; s < samples; ++s) {
        // uniform direction, radius biased toward the shell
        dvec3 dir{rng.normal(), rng.normal(), rng.normal()};
        double len = std::sqrt(sqr(dir[0]) + sqr(dir[1]) + sqr(dir[2]));
        if (len == 0) continue;
        double rho = radius * std::pow(rng.uniform(), 1.0 / 3.0);
        dvec3 z{dir[0] / len * rho, dir[1] / len * rho, dir[2] / len * rho};
        double r = field::covariance_profile(fs, z).value;
        if (1.0 - r * r <= 0.0)
            throw RadiusRejected("1 - r^2 not positive at |z| = " + std::to_string(rho));
    }
    return radius;
}

// ---------------------------------------------------------------------------
// Chi moments and Gramian sampling
// ---------------------------------------------------------------------------

// E |X|^m for a standard k-dimensional Gaussian vector.
inline double chi_moment(int k, int m) {
    if (k < 1 || m < 1) throw Error("chi_moment: k, m >= 1");
    return std::pow(2.0, m / 2.0) * std::tgamma((k + m) / 2.0) / std::tgamma(k / 2.0);
}

// Gram-Schmidt product representation of sqrt(det(X X^T)).
inline double gramian_via_gram_schmidt(const Eigen::MatrixXd& X) {
    const int ell = static_cast<int>(X.rows());
    Eigen::MatrixXd W = X;
    double prod = 1.0;
    for (int s = 0; s < ell; ++s) {
        for (int t = 0; t < s; ++t) {
            double proj = W.row(s).dot(W.row(t)) / W.row(t).squaredNorm();
            W.row(s) -= proj * W.row(t);
        }
        prod *= W.row(s).norm();
    }
    return prod;
}

inline double gramian_direct(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd G = X * X.transpose();
    return std::sqrt(std::max(0.0, G.determinant()));
}

struct GramianCheck {
    double mc_mean = 0;
    double alpha_prediction = 0;
    double ks_statistic = 0;
};

inline double two_sample_ks(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

// Monte Carlo of the Gramian mean against alpha(ell, k), plus a two-sample
// KS comparison with the product of independent chi factors of degrees
// k, k-1, ..., k-ell+1.
inline GramianCheck gramian_mean_check(int ell, int k, std::size_t samples, Rng& rng) {
    GramianCheck out;
    out.alpha_prediction = chaos::alpha(ell, k);
    KahanSum mean;
    std::size_t ks_budget = std::min<std::size_t>(samples, 100000);
    std::vector<double> gram_draws, chi_draws;
    gram_draws.reserve(ks_budget);
    chi_draws.reserve(ks_budget);
    Eigen::MatrixXd X(ell, k);
    for (std::size_t s = 0; s < samples; ++s) {
        for (int i = 0; i < ell; ++i)
            for (int j = 0; j < k; ++j) X(i, j) = rng.normal();
        double g = gramian_via_gram_schmidt(X);
        mean.add(g);
        if (gram_draws.size() < ks_budget) {
            gram_draws.push_back(g);
            double prod = 1.0;
            for (int d = 0; d < ell; ++d) prod *= std::sqrt(rng.chi_squared(k - d));
            chi_draws.push_back(prod);
        }
    }
    out.mc_mean = mean.value() / static_cast<double>(samples);
    out.ks_statistic = two_sample_ks(std::move(gram_draws), std::move(chi_draws));
    return out;
}

}  // namespace arw::kacrice
