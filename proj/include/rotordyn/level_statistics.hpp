#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rotordyn/dense_eigen.hpp"
#include "rotordyn/errors.hpp"
#include "rotordyn/rng.hpp"

namespace rotordyn {

inline constexpr double r_poisson = 0.38629436111989057; // 2 ln 2 - 1
inline constexpr double r_coe_reference = 0.5269;

struct SpacingRatio {
    double r = 0.0;
    std::size_t ratios = 0;
    std::size_t degenerate = 0; ///< ratio terms involving a zero spacing
    double stderr_r = 0.0;      ///< sample sd / sqrt(count); neighbouring ratios are correlated, so this is a rough scale
};

/// Mean of min(s_a, s_{a+1}) / max(s_a, s_{a+1}) over consecutive spacings of
/// the sorted levels (no wrap-around spacing). Terms touching a zero spacing
/// count as 0 and are reported.
inline SpacingRatio level_spacing_ratio_detail(std::vector<double> mu)
{
    require(mu.size() >= 3, "level_spacing_ratio: need at least 3 levels");
    for (double x : mu) require(std::isfinite(x), "level_spacing_ratio: non-finite level");
    std::sort(mu.begin(), mu.end());
    SpacingRatio out;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t a = 0; a + 2 < mu.size(); ++a) {
        const double s0 = mu[a + 1] - mu[a], s1 = mu[a + 2] - mu[a + 1];
        const double hi = std::max(s0, s1), lo = std::min(s0, s1);
        if (lo <= 0.0) {
            ++out.degenerate;
        } else {
            sum += lo / hi;
            sum2 += (lo / hi) * (lo / hi);
        }
        ++out.ratios;
    }
    const auto n = static_cast<double>(out.ratios);
    out.r = sum / n;
    if (out.ratios > 1) out.stderr_r = std::sqrt(std::max(0.0, (sum2 - n * out.r * out.r) / (n - 1.0)) / n);
    if (out.degenerate > 0)
        warn("level_spacing_ratio: " + std::to_string(out.degenerate) + " ratio terms involve repeated quasienergies and were counted as 0");
    return out;
}

inline double level_spacing_ratio(std::vector<double> mu)
{
    return level_spacing_ratio_detail(std::move(mu)).r;
}

inline double level_spacing_ratio(const Eigen::VectorXd& mu)
{
    return level_spacing_ratio(std::vector<double>(mu.data(), mu.data() + mu.size()));
}

/// Quasienergies of a complex symmetric unitary matrix U = X + iY.
///
/// X and Y are real symmetric and commute, so they share a real orthogonal
/// eigenbasis. X is diagonalized; Y is rotated into that basis and
/// re-diagonalized inside every cluster of nearly equal X eigenvalues, where
/// the X eigenvectors alone are not determined. Eigenvalue x + iy gives
/// mu = atan2(-y, x) for the convention U v = exp(-i mu) v. Throws
/// NumericalError if some |x + iy| is off the unit circle by more than unit_tol.
inline Eigen::VectorXd symmetric_unitary_quasienergies(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double cluster_gap = 1e-5,
                                                       double unit_tol = 1e-9)
{
    require(X.rows() == X.cols() && Y.rows() == X.rows() && Y.cols() == X.cols(), "symmetric_unitary_quasienergies: shape mismatch");
    const Eigen::Index n = X.rows();
    const auto ex = symmetric_eigen(X);
    // Only the diagonal blocks of V^T Y V are needed.
    Eigen::MatrixXd YV(n, n);
    YV.noalias() = Y * ex.vectors;
    Eigen::VectorXd mu(n);
    double worst = 0.0;
    auto take = [&](Eigen::Index j, double x, double y) {
        worst = std::max(worst, std::abs(std::hypot(x, y) - 1.0));
        mu(j) = std::atan2(-y, x);
    };
    Eigen::Index lo = 0;
    while (lo < n) {
        Eigen::Index hi = lo + 1;
        while (hi < n && ex.values(hi) - ex.values(hi - 1) < cluster_gap) ++hi;
        const Eigen::Index m = hi - lo;
        if (m == 1) {
            take(lo, ex.values(lo), ex.vectors.col(lo).dot(YV.col(lo)));
        } else {
            // Inside the cluster X is ~x I; diagonalize Y and X together through Y.
            const Eigen::MatrixXd Yc = ex.vectors.middleCols(lo, m).transpose() * YV.middleCols(lo, m);
            const Eigen::MatrixXd Yb = 0.5 * (Yc + Yc.transpose());
            const auto ey = symmetric_eigen(Yb);
            const Eigen::MatrixXd Xb = ex.vectors.middleCols(lo, m).transpose() * X * ex.vectors.middleCols(lo, m);
            for (Eigen::Index k = 0; k < m; ++k) {
                const double x = ey.vectors.col(k).dot(Xb * ey.vectors.col(k));
                take(lo + k, x, ey.values(k));
            }
        }
        lo = hi;
    }
    if (worst > unit_tol) throw NumericalError("symmetric_unitary_quasienergies: eigenvalue modulus off the unit circle by " + std::to_string(worst));
    for (Eigen::Index j = 0; j < n; ++j)
        if (mu(j) <= -std::numbers::pi) mu(j) += 2.0 * std::numbers::pi;
    std::sort(mu.data(), mu.data() + n);
    return mu;
}

/// Quasienergies of a general unitary via LAPACK zgeev, sorted ascending.
inline Eigen::VectorXd general_unitary_quasienergies(const Eigen::MatrixXcd& U, double unit_tol = 1e-9)
{
    const auto ev = general_eigenvalues(U);
    Eigen::VectorXd mu(ev.size());
    for (Eigen::Index j = 0; j < ev.size(); ++j) {
        if (std::abs(std::abs(ev(j)) - 1.0) > unit_tol)
            throw NumericalError("general_unitary_quasienergies: eigenvalue modulus " + std::to_string(std::abs(ev(j))) + " is off the unit circle");
        double x = -std::arg(ev(j));
        if (x <= -std::numbers::pi) x += 2.0 * std::numbers::pi;
        mu(j) = x;
    }
    std::sort(mu.data(), mu.data() + mu.size());
    return mu;
}

/// n independent uniform levels on (-pi, pi] (Poisson statistics).
inline std::vector<double> poisson_spectrum(std::size_t n, std::uint64_t seed)
{
    CounterRng rng(seed, stream_id({0x706F6973ull}));
    std::vector<double> mu(n);
    for (auto& x : mu) x = std::numbers::pi * (2.0 * rng.uniform() - 1.0);
    return mu;
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix,
/// with the phases of R's diagonal moved into Q.
inline Eigen::MatrixXcd haar_unitary(int n, std::uint64_t seed, std::uint64_t index)
{
    CounterRng rng(seed, stream_id({0x68616172ull, index}));
    Eigen::MatrixXcd Z(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double a = rng.normal(), b = rng.normal();
            Z(i, j) = std::complex<double>(a, b) * std::sqrt(0.5);
        }
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Z);
    Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(n, n);
    const Eigen::MatrixXcd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < n; ++j) {
        const auto d = R(j, j);
        Q.col(j) *= d / std::abs(d);
    }
    return Q;
}

/// Quasienergies of `count` COE matrices U = W^T W with W Haar of size n.
inline std::vector<Eigen::VectorXd> coe_spectra(int n, int count, std::uint64_t seed)
{
    std::vector<Eigen::VectorXd> out;
    for (int k = 0; k < count; ++k) {
        const auto W = haar_unitary(n, seed, static_cast<std::uint64_t>(k));
        const Eigen::MatrixXcd U = W.transpose() * W;
        out.push_back(symmetric_unitary_quasienergies(U.real(), U.imag()));
    }
    return out;
}

} // namespace rotordyn
