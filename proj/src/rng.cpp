#include "asvd/rng.hpp"

#include <cmath>
#include <numbers>

namespace asvd {

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng named_stream(std::uint64_t master_seed, std::string_view name) {
    // FNV-1a over the stream name, then mixed with the master seed.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return Rng(mix_seed(master_seed ^ mix_seed(h)));
}

double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vector gaussian_vector(Rng& rng, Eigen::Index n, double stddev) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = stddev * standard_normal(rng);
    return v;
}

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = stddev * standard_normal(rng);
    return m;
}

std::vector<Eigen::Index> shuffled_indices(Eigen::Index n, Rng& rng) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (Eigen::Index i = n - 1; i > 0; --i) {
        auto j = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(i + 1));
        if (j > i) j = i;
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    return idx;
}

Matrix random_orthogonal(Rng& rng, Eigen::Index n) {
    const Matrix g = gaussian_matrix(rng, n, n);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(n, n);
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < n; ++i)
        if (r(i, i) < 0.0) q.col(i) = -q.col(i);
    return q;
}

}  // namespace asvd
