#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace asvd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when an iterative numerical routine fails to converge or produces
/// non-finite output.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Thin SVD W = U diag(sigma) V^T with k = min(rows, cols).
///
/// sigma is sorted descending. Each column of U is sign-normalized so that its
/// largest-magnitude entry is positive (first such entry on ties), and the
/// matching column of V is flipped with it. Repeated calls on the same matrix
/// produce bitwise-identical factors.
struct SvdFactorization {
    Matrix u;      // rows x k
    Vector sigma;  // k
    Matrix v;      // cols x k

    Eigen::Index rank_capacity() const { return sigma.size(); }
    Matrix reconstruct() const;
};

/// One-sided Jacobi sweeps before svd() gives up.
inline constexpr int kSvdMaxSweeps = 80;

SvdFactorization svd(const Matrix& w);

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
struct SymmetricEigen {
    Vector values;
    Matrix vectors;  // columns are eigenvectors
};

/// Rejects input whose asymmetry max|H - H^T| exceeds 1e-8 (scaled by
/// max(1, max|H|)).
SymmetricEigen symmetric_eigendecomposition(const Matrix& h);

/// a.b / (|a||b|). Returns 0 when either vector has norm below 1e-12.
double cosine_similarity(const Vector& a, const Vector& b);

double frobenius_norm(const Matrix& w);

bool all_finite(const Matrix& w);

/// Frobenius inner product sum_ij a_ij b_ij.
double frobenius_inner(const Matrix& a, const Matrix& b);

}  // namespace asvd
