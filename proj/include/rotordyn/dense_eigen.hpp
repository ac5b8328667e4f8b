#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#ifndef lapack_complex_float
#define lapack_complex_float std::complex<float>
#endif
#ifndef lapack_complex_double
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include "rotordyn/errors.hpp"

namespace rotordyn {

/// Real symmetric eigendecomposition (LAPACK dsyevd). Eigenvalues ascending;
/// `vectors` holds the eigenvectors as columns.
struct SymmetricEigen {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

inline SymmetricEigen symmetric_eigen(const Eigen::MatrixXd& A, bool want_vectors = true)
{
    require(A.rows() == A.cols(), "symmetric_eigen: matrix must be square");
    const auto n = static_cast<lapack_int>(A.rows());
    SymmetricEigen out;
    out.vectors = A;
    out.values.resize(n);
    if (n == 0) return out;
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', 'U', n, out.vectors.data(), n, out.values.data());
    if (info != 0) throw NumericalError("dsyevd failed with info=" + std::to_string(info));
    if (!want_vectors) out.vectors.resize(0, 0);
    return out;
}

/// Eigenvalues of a general complex matrix (LAPACK zgeev, no vectors).
inline Eigen::VectorXcd general_eigenvalues(const Eigen::MatrixXcd& A)
{
    require(A.rows() == A.cols(), "general_eigenvalues: matrix must be square");
    const auto n = static_cast<lapack_int>(A.rows());
    Eigen::MatrixXcd work = A;
    Eigen::VectorXcd w(n);
    if (n == 0) return w;
    std::complex<double> dummy{};
    const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n, work.data(), n, w.data(), &dummy, 1, &dummy, 1);
    if (info != 0) throw NumericalError("zgeev failed with info=" + std::to_string(info));
    return w;
}

} // namespace rotordyn
