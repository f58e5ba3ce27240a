#include "asvd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace asvd {

namespace {

// Removes components along the first `count` columns of q, twice for
// numerical orthogonality.
void orthogonalize_against(Eigen::Ref<Vector> x, const Matrix& q, Eigen::Index count) {
    for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index c = 0; c < count; ++c) {
            x -= q.col(c).dot(x) * q.col(c);
        }
    }
}

struct JacobiResult {
    Matrix columns;  // A * V, mutually orthogonal columns
    Matrix v;
};

// Hestenes one-sided Jacobi on a tall (rows >= cols) matrix.
JacobiResult one_sided_jacobi(const Matrix& a) {
    const Eigen::Index n = a.cols();
    JacobiResult r{a, Matrix::Identity(n, n)};
    constexpr double tol = 1e-15;

    for (int sweep = 0; sweep < kSvdMaxSweeps; ++sweep) {
        bool rotated = false;
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double alpha = r.columns.col(i).squaredNorm();
                const double beta = r.columns.col(j).squaredNorm();
                const double gamma = r.columns.col(i).dot(r.columns.col(j));
                if (alpha == 0.0 || beta == 0.0) continue;
                if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (Matrix* m : {&r.columns, &r.v}) {
                    Vector ci = m->col(i);
                    Vector cj = m->col(j);
                    m->col(i) = c * ci - s * cj;
                    m->col(j) = s * ci + c * cj;
                }
            }
        }
        if (!rotated) return r;
    }
    throw NumericalError("svd: one-sided Jacobi did not converge within " +
                         std::to_string(kSvdMaxSweeps) + " sweeps");
}

// Builds a tall-matrix SVD from converged Jacobi columns: sort, normalize,
// and complete U to an orthonormal set where singular values vanish.
SvdFactorization tall_svd(const Matrix& a) {
    JacobiResult jr = one_sided_jacobi(a);
    const Eigen::Index m = a.rows();
    const Eigen::Index n = a.cols();

    std::vector<double> norms(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) norms[static_cast<std::size_t>(j)] = jr.columns.col(j).norm();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
        return norms[static_cast<std::size_t>(x)] > norms[static_cast<std::size_t>(y)];
    });

    SvdFactorization f{Matrix::Zero(m, n), Vector::Zero(n), Matrix::Zero(n, n)};
    Eigen::Index basis_cursor = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        const double sigma = norms[static_cast<std::size_t>(src)];
        f.sigma(k) = sigma;
        f.v.col(k) = jr.v.col(src);

        Vector u = jr.columns.col(src);
        orthogonalize_against(u, f.u, k);
        const double un = u.norm();
        if (sigma > 0.0 && un > 1e-3 * sigma) {
            f.u.col(k) = u / un;
            continue;
        }
        // Null direction: complete from the standard basis.
        bool placed = false;
        for (; basis_cursor < m && !placed; ++basis_cursor) {
            Vector e = Vector::Unit(m, basis_cursor);
            orthogonalize_against(e, f.u, k);
            const double en = e.norm();
            if (en > 0.5) {
                f.u.col(k) = e / en;
                placed = true;
            }
        }
        if (!placed) throw NumericalError("svd: failed to complete left singular basis");
    }
    return f;
}

void fix_signs(Matrix& u, Matrix& v) {
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
        Eigen::Index best = 0;
        double best_abs = -1.0;
        for (Eigen::Index r = 0; r < u.rows(); ++r) {
            const double a = std::abs(u(r, c));
            if (a > best_abs) {
                best_abs = a;
                best = r;
            }
        }
        if (u(best, c) < 0.0) {
            u.col(c) = -u.col(c);
            if (v.cols() > c) v.col(c) = -v.col(c);
        }
    }
}

}  // namespace

Matrix SvdFactorization::reconstruct() const {
    return u * sigma.asDiagonal() * v.transpose();
}

SvdFactorization svd(const Matrix& w) {
    if (w.rows() < 1 || w.cols() < 1) throw std::invalid_argument("svd: empty matrix");
    if (!all_finite(w)) throw std::invalid_argument("svd: non-finite input");

    SvdFactorization f;
    if (w.rows() >= w.cols()) {
        f = tall_svd(w);
    } else {
        SvdFactorization t = tall_svd(w.transpose());
        f.u = std::move(t.v);
        f.sigma = std::move(t.sigma);
        f.v = std::move(t.u);
    }
    fix_signs(f.u, f.v);
    if (!all_finite(f.u) || !all_finite(f.v) || !f.sigma.allFinite())
        throw NumericalError("svd: non-finite factors");
    return f;
}

SymmetricEigen symmetric_eigendecomposition(const Matrix& h) {
    if (h.rows() != h.cols()) throw std::invalid_argument("symmetric_eigendecomposition: matrix is not square");
    if (!all_finite(h)) throw std::invalid_argument("symmetric_eigendecomposition: non-finite input");
    if (h.size() > 0) {
        const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
        const double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-8 * scale)
            throw std::invalid_argument("symmetric_eigendecomposition: asymmetry " + std::to_string(asym) +
                                        " exceeds tolerance");
    }

    Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
    if (solver.info() != Eigen::Success) throw NumericalError("symmetric_eigendecomposition: solver failed");

    SymmetricEigen out{solver.eigenvalues().reverse(), solver.eigenvectors().rowwise().reverse()};
    Matrix no_partner(0, 0);
    fix_signs(out.vectors, no_partner);
    return out;
}

double cosine_similarity(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: length mismatch");
    const double na = a.norm();
    const double nb = b.norm();
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    const double c = a.dot(b) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

double frobenius_norm(const Matrix& w) {
    return w.norm();
}

bool all_finite(const Matrix& w) {
    return w.allFinite();
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("frobenius_inner: dimension mismatch");
    return a.cwiseProduct(b).sum();
}

}  // namespace asvd
