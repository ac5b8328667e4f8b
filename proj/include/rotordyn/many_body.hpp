#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rotordyn/core_state.hpp"
#include "rotordyn/dense_eigen.hpp"
#include "rotordyn/errors.hpp"
#include "rotordyn/level_statistics.hpp"
#include "rotordyn/parallel.hpp"

namespace rotordyn {

inline constexpr std::size_t default_max_sector_dim = 12000;

/// Number of ways to put n bosons on s sites.
inline std::uint64_t boson_configurations(std::uint64_t n, std::uint64_t s)
{
    if (s == 0) return n == 0 ? 1 : 0;
    // C(n + s - 1, n), built up multiplicatively; every partial product is an integer.
    const std::uint64_t top = n + s - 1;
    const std::uint64_t k = std::min(n, s - 1);
    unsigned __int128 c = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        c = c * (top - k + i) / i;
        if (c > std::numeric_limits<std::uint64_t>::max()) throw ValidationError("boson_configurations: count overflows 64 bits");
    }
    return static_cast<std::uint64_t>(c);
}

/// Fock states of N bosons on the momentum sites m = -M..M, stored as
/// occupation rows in ascending lexicographic order of (n_{-M}, ..., n_M).
class FockBasis {
public:
    FockBasis(int N, int M, std::size_t max_dim)
        : N_(N), M_(M), L_(2 * M + 1)
    {
        require(N >= 1 && N <= 255, "FockBasis: N must be in [1, 255]");
        require(M >= 1, "FockBasis: M must be >= 1");
        const auto dim = boson_configurations(static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(L_));
        if (dim > max_dim)
            throw ValidationError("FockBasis: dimension " + std::to_string(dim) + " for N=" + std::to_string(N) + ", M=" + std::to_string(M) +
                                  " exceeds the limit " + std::to_string(max_dim));
        occ_.reserve(dim * static_cast<std::size_t>(L_));
        std::vector<std::uint8_t> cur(static_cast<std::size_t>(L_), 0);
        fill(cur, 0, N);
        for (int s = 0; s <= L_; ++s)
            for (int n = 0; n <= N; ++n) counts_.push_back(boson_configurations(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(s)));
    }

    int particles() const { return N_; }
    int cutoff() const { return M_; }
    int sites() const { return L_; }
    std::size_t size() const { return occ_.size() / static_cast<std::size_t>(L_); }

    std::span<const std::uint8_t> state(std::size_t i) const
    {
        return {occ_.data() + i * static_cast<std::size_t>(L_), static_cast<std::size_t>(L_)};
    }

    /// Position of an occupation vector in the ordering.
    std::size_t index(std::span<const std::uint8_t> occ) const
    {
        std::size_t rank = 0;
        int left = N_;
        for (int i = 0; i < L_; ++i) {
            const int rest = L_ - i - 1;
            for (int v = 0; v < occ[static_cast<std::size_t>(i)]; ++v) rank += count(left - v, rest);
            left -= occ[static_cast<std::size_t>(i)];
        }
        return rank;
    }

    /// Index of the state with every momentum reversed, m -> -m.
    std::size_t reflected(std::size_t i) const
    {
        std::vector<std::uint8_t> r(state(i).rbegin(), state(i).rend());
        return index(r);
    }

private:
    void fill(std::vector<std::uint8_t>& cur, int i, int left)
    {
        if (i == L_ - 1) {
            cur[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(left);
            occ_.insert(occ_.end(), cur.begin(), cur.end());
            return;
        }
        for (int v = 0; v <= left; ++v) {
            cur[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
            fill(cur, i + 1, left - v);
        }
    }

    std::size_t count(int n, int s) const { return counts_[static_cast<std::size_t>(s * (N_ + 1) + n)]; }

    int N_, M_, L_;
    std::vector<std::uint8_t> occ_;
    std::vector<std::uint64_t> counts_;
};

inline FockBasis enumerate_basis(int N, int M, std::size_t max_dim = 8 * default_max_sector_dim)
{
    return FockBasis(N, M, max_dim);
}

enum class Parity { even, odd };

/// Symmetric or antisymmetric combinations under m -> -m. Each sector vector
/// has a representative r <= reverse(r): (|r> +- |r'>)/sqrt 2 for a pair,
/// |r> for a palindrome (even sector only).
struct SymmetricBasis {
    Parity parity = Parity::even;
    std::vector<std::size_t> reps;        ///< full-basis index of each representative
    std::vector<std::size_t> partners;    ///< full-basis index of its reflection
    std::vector<std::int64_t> sector_of;  ///< full index -> sector index, -1 if absent

    std::size_t size() const { return reps.size(); }
    bool paired(std::size_t k) const { return reps[k] != partners[k]; }

    /// Coefficient of full-basis state s in sector vector k (s must belong to it).
    double coefficient(std::size_t k, std::size_t s) const
    {
        if (!paired(k)) return 1.0;
        const double w = std::sqrt(0.5);
        return s == reps[k] || parity == Parity::even ? w : -w;
    }
};

inline SymmetricBasis project_sector(const FockBasis& basis, Parity parity = Parity::even)
{
    SymmetricBasis sb;
    sb.parity = parity;
    sb.sector_of.assign(basis.size(), -1);
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const std::size_t j = basis.reflected(i);
        if (j < i) continue; // lexicographic order equals index order
        if (j == i && parity == Parity::odd) continue;
        const auto k = static_cast<std::int64_t>(sb.reps.size());
        sb.reps.push_back(i);
        sb.partners.push_back(j);
        sb.sector_of[i] = sb.sector_of[j] = k;
    }
    return sb;
}

inline SymmetricBasis project_even_sector(const FockBasis& basis) { return project_sector(basis, Parity::even); }

namespace detail {

/// Calls out(state, amplitude) for every term of sum_m b+_{m+dir} b_m |occ>,
/// dir = +1 or -1, sites taken around the ring.
template <class Out>
void apply_shift(std::span<const std::uint8_t> occ, int dir, std::vector<std::uint8_t>& scratch, Out&& out)
{
    const int L = static_cast<int>(occ.size());
    scratch.assign(occ.begin(), occ.end());
    for (int i = 0; i < L; ++i) {
        const int n_from = occ[static_cast<std::size_t>(i)];
        if (n_from == 0) continue;
        const int j = (i + dir + L) % L;
        const int n_to = scratch[static_cast<std::size_t>(j)];
        scratch[static_cast<std::size_t>(i)] -= 1;
        scratch[static_cast<std::size_t>(j)] += 1;
        out(std::span<const std::uint8_t>(scratch), std::sqrt(static_cast<double>(n_from) * (n_to + 1)));
        scratch[static_cast<std::size_t>(j)] -= 1;
        scratch[static_cast<std::size_t>(i)] += 1;
    }
}

} // namespace detail

/// Operators of the boson model restricted to one parity sector.
/// free_diag: sum_m m^2 n_m. hop: sum_m (b+_{m+1} b_m + h.c.). pair: S+ S-
/// with S+ = sum_m b+_{m+1} b_m. All momentum shifts wrap around the ring.
struct HamiltonianParts {
    Eigen::VectorXd free_diag;
    Eigen::MatrixXd hop;
    Eigen::MatrixXd pair;
};

inline HamiltonianParts build_hamiltonian_parts(const FockBasis& basis, const SymmetricBasis& sector)
{
    const auto n = static_cast<Eigen::Index>(sector.size());
    HamiltonianParts h;
    h.free_diag.resize(n);
    h.hop = Eigen::MatrixXd::Zero(n, n);
    h.pair = Eigen::MatrixXd::Zero(n, n);
    const int M = basis.cutoff();
    std::vector<std::uint8_t> s1, s2;
    for (Eigen::Index k = 0; k < n; ++k) {
        const std::size_t r = sector.reps[static_cast<std::size_t>(k)];
        const auto occ = basis.state(r);
        double e = 0.0;
        for (int i = 0; i < basis.sites(); ++i) e += static_cast<double>((i - M) * (i - M)) * occ[static_cast<std::size_t>(i)];
        h.free_diag(k) = e;
        // <k'|O|k> = norm(k) * sum_s <s|O|r> coefficient(k', s) for m -> -m symmetric O.
        const double norm = sector.paired(static_cast<std::size_t>(k)) ? std::sqrt(2.0) : 1.0;
        auto deposit = [&](Eigen::MatrixXd& target, std::span<const std::uint8_t> s, double amp) {
            const std::size_t si = basis.index(s);
            const auto kp = sector.sector_of[si];
            if (kp < 0) return;
            target(kp, k) += norm * amp * sector.coefficient(static_cast<std::size_t>(kp), si);
        };
        for (int dir : {+1, -1}) detail::apply_shift(occ, dir, s1, [&](auto s, double a) { deposit(h.hop, s, a); });
        detail::apply_shift(occ, -1, s1, [&](auto mid, double a) {
            const std::vector<std::uint8_t> m(mid.begin(), mid.end());
            detail::apply_shift(m, +1, s2, [&](auto s, double b) { deposit(h.pair, s, a * b); });
        });
    }
    return h;
}

struct ManyBodyParams {
    int N = 4;
    int M = 6;
    double K = 6.0;
    double epsilon = 0.0;
    double kbar = 1.7;

    void validate() const
    {
        require(N >= 1, "many-body: N must be >= 1");
        require(M >= 1, "many-body: M must be >= 1");
        require(std::isfinite(K) && K >= 0.0, "many-body: K must be finite and >= 0");
        require(std::isfinite(epsilon), "many-body: epsilon must be finite");
        require(std::isfinite(kbar) && kbar > 0.0, "many-body: kbar must be > 0");
        require(!(N == 1 && epsilon != 0.0), "many-body: the interaction needs N >= 2 (it carries 1/(N-1))");
    }
};

enum class QuasienergyRoute { symmetric_real, general };

struct QuasienergySpectrum {
    double K = 0.0;
    Eigen::VectorXd quasienergies; ///< ascending, in (-pi, pi]
    std::size_t dim = 0;
};

/// Floquet operator U = exp(-i V / kbar) exp(-i H_free / kbar) in one parity
/// sector, with H_free = (kbar^2/2) sum m^2 n_m and
/// V = (kbar K/2) hop - kbar K eps / (2 (N-1)) S+ S-.
/// V is linear in K, so its eigenbasis is computed once and reused for every K;
/// each further K costs one symmetric eigendecomposition and one product.
class ManyBodyFloquet {
public:
    ManyBodyFloquet(ManyBodyParams p, Parity parity = Parity::even, std::size_t max_sector_dim = default_max_sector_dim)
        : p_(p)
    {
        p_.validate();
        const auto full = boson_configurations(static_cast<std::uint64_t>(p.N), static_cast<std::uint64_t>(2 * p.M + 1));
        if (full / 2 > max_sector_dim)
            throw ValidationError("many-body: sector dimension ~" + std::to_string(full / 2) + " exceeds the limit " + std::to_string(max_sector_dim));
        const FockBasis basis(p.N, p.M, std::numeric_limits<std::size_t>::max());
        const auto sector = project_sector(basis, parity);
        require(sector.size() <= max_sector_dim, "many-body: sector dimension " + std::to_string(sector.size()) + " exceeds the limit");
        auto parts = build_hamiltonian_parts(basis, sector);
        free_phase_ = (0.5 * p.kbar) * parts.free_diag; // H_free / kbar
        Eigen::MatrixXd v1 = (0.5 * p.kbar) * parts.hop;
        if (p.epsilon != 0.0) v1 -= (p.kbar * p.epsilon / (2.0 * (p.N - 1))) * parts.pair;
        auto eig = symmetric_eigen(v1);
        v1_values_ = std::move(eig.values);
        v1_vectors_ = std::move(eig.vectors);
        // Q = W^T exp(-i H_free / kbar) W, real and imaginary parts.
        const Eigen::ArrayXd c = free_phase_.array().cos(), s = -free_phase_.array().sin();
        Eigen::MatrixXd tmp = v1_vectors_.transpose() * c.matrix().asDiagonal();
        q_re_.noalias() = tmp * v1_vectors_;
        tmp = v1_vectors_.transpose() * s.matrix().asDiagonal();
        q_im_.noalias() = tmp * v1_vectors_;
    }

    const ManyBodyParams& params() const { return p_; }
    std::size_t dim() const { return static_cast<std::size_t>(free_phase_.size()); }
    const Eigen::VectorXd& free_phase() const { return free_phase_; }

    /// U(K) as a dense complex matrix.
    Eigen::MatrixXcd floquet(double K) const
    {
        Eigen::MatrixXd C, S;
        kick_parts(K, C, S);
        Eigen::MatrixXcd U(C.rows(), C.cols());
        for (Eigen::Index j = 0; j < U.cols(); ++j) {
            const cplx d = std::polar(1.0, -free_phase_(j));
            for (Eigen::Index i = 0; i < U.rows(); ++i) U(i, j) = cplx(C(i, j), S(i, j)) * d;
        }
        return U;
    }

    QuasienergySpectrum quasienergies(double K, QuasienergyRoute route = QuasienergyRoute::symmetric_real) const
    {
        QuasienergySpectrum out;
        out.K = K;
        out.dim = dim();
        if (route == QuasienergyRoute::general) {
            out.quasienergies = general_unitary_quasienergies(floquet(K));
            return out;
        }
        // In the eigenbasis W of V, W^T U W = exp(-i K Lambda / kbar) Q, which is
        // similar to the complex symmetric unitary exp(-i K Lambda / 2 kbar) Q exp(-i K Lambda / 2 kbar).
        const Eigen::Index n = q_re_.rows();
        const Eigen::ArrayXd a = (0.5 * K / p_.kbar) * v1_values_.array();
        Eigen::MatrixXd X(n, n), Y(n, n);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i) {
                const double th = a(i) + a(j);
                const double c = std::cos(th), s = std::sin(th);
                X(i, j) = c * q_re_(i, j) + s * q_im_(i, j);
                Y(i, j) = c * q_im_(i, j) - s * q_re_(i, j);
            }
        out.quasienergies = symmetric_unitary_quasienergies(X, Y);
        return out;
    }

private:
    /// exp(-i K V1 / kbar) = C + i S, both real symmetric.
    void kick_parts(double K, Eigen::MatrixXd& C, Eigen::MatrixXd& S) const
    {
        const Eigen::ArrayXd ph = (K / p_.kbar) * v1_values_.array();
        const Eigen::MatrixXd Wc = v1_vectors_ * ph.cos().matrix().asDiagonal();
        C.noalias() = Wc * v1_vectors_.transpose();
        const Eigen::MatrixXd Ws = v1_vectors_ * (-ph.sin()).matrix().asDiagonal();
        S.noalias() = Ws * v1_vectors_.transpose();
    }

    ManyBodyParams p_;
    Eigen::VectorXd free_phase_;
    Eigen::VectorXd v1_values_; ///< eigenvalues of V / K
    Eigen::MatrixXd v1_vectors_;
    Eigen::MatrixXd q_re_, q_im_;
};

struct RScanRow {
    double K = 0.0;
    double r = 0.0;
    std::size_t dim = 0;
    std::optional<double> r_next; ///< same K at cutoff M + 2
    bool converged = false;
    double r_stderr = 0.0;
    Eigen::VectorXd quasienergies; ///< filled when RScanConfig::keep_spectra
};

struct RScanConfig {
    bool check_convergence = true;
    double convergence_tol = 0.005;
    std::size_t max_sector_dim = default_max_sector_dim;
    int threads = 1; ///< K values run concurrently; each holds several dense matrices
    bool keep_spectra = false;
};

/// Mean level-spacing ratio of the even-sector spectrum on a grid of K.
inline std::vector<RScanRow> r_vs_K_scan(const ManyBodyParams& base, const std::vector<double>& K_grid, const RScanConfig& cfg = {})
{
    require(!K_grid.empty(), "r_vs_K_scan: K grid is empty");
    for (double K : K_grid) require(std::isfinite(K) && K >= 0.0, "r_vs_K_scan: K values must be finite and >= 0");
    const ManyBodyFloquet model(base, Parity::even, cfg.max_sector_dim);
    std::optional<ManyBodyFloquet> bigger;
    if (cfg.check_convergence) {
        auto p2 = base;
        p2.M += 2;
        bigger.emplace(p2, Parity::even, cfg.max_sector_dim);
    }
    std::vector<RScanRow> rows(K_grid.size());
    parallel_for(
        K_grid.size(),
        [&](std::size_t i) {
            RScanRow row;
            row.K = K_grid[i];
            row.dim = model.dim();
            auto q = model.quasienergies(row.K).quasienergies;
            const auto ratio = level_spacing_ratio_detail(std::vector<double>(q.data(), q.data() + q.size()));
            row.r = ratio.r;
            row.r_stderr = ratio.stderr_r;
            if (cfg.keep_spectra) row.quasienergies = std::move(q);
            if (bigger) {
                row.r_next = level_spacing_ratio(bigger->quasienergies(row.K).quasienergies);
                row.converged = std::abs(*row.r_next - row.r) < cfg.convergence_tol;
            }
            rows[i] = row;
        },
        cfg.threads);
    for (const auto& row : rows)
        if (row.r_next && !row.converged)
            warn("r_vs_K_scan: K=" + std::to_string(row.K) + " not converged in M (|r(M+2) - r(M)| = " + std::to_string(std::abs(*row.r_next - row.r)) + ")");
    return rows;
}

} // namespace rotordyn
