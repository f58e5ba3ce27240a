#include "asvd/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace asvd {

RetentionConfig::RetentionConfig(double mrr, double trr) : mrr_(mrr), trr_(trr) {
    if (!(0.0 <= mrr && mrr <= trr && trr <= 1.0))
        throw std::invalid_argument("RetentionConfig: require 0 <= mrr <= trr <= 1 (got mrr=" +
                                    std::to_string(mrr) + ", trr=" + std::to_string(trr) + ")");
}

double allocate_rank(double importance, const RetentionConfig& config) {
    if (!(importance >= 0.0)) throw std::invalid_argument("allocate_rank: importance must be >= 0");
    const double r = config.mrr() + importance * (config.trr() - config.mrr());
    return std::clamp(r, 0.0, 1.0);
}

Eigen::Index retained_count(double fraction, Eigen::Index k) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("retained_count: fraction outside [0, 1]");
    // std::nearbyint honours the default FE_TONEAREST mode: ties go to even.
    const auto r = static_cast<Eigen::Index>(std::nearbyint(fraction * static_cast<double>(k)));
    return std::clamp<Eigen::Index>(r, 0, k);
}

SubspacePartition partition_by_count(const SvdFactorization& f, Eigen::Index r_count) {
    const Eigen::Index k = f.sigma.size();
    if (r_count < 0 || r_count > k) throw std::invalid_argument("partition: retained count outside [0, k]");
    SubspacePartition p;
    p.r_count = r_count;
    p.retained_fraction = k > 0 ? static_cast<double>(r_count) / static_cast<double>(k) : 0.0;
    p.u_high = f.u.leftCols(r_count);
    p.v_high = f.v.leftCols(r_count);
    p.u_low = f.u.rightCols(k - r_count);
    p.v_low = f.v.rightCols(k - r_count);
    p.sigma_high = f.sigma.head(r_count);
    return p;
}

SubspacePartition partition(const SvdFactorization& f, double fraction) {
    SubspacePartition p = partition_by_count(f, retained_count(fraction, f.sigma.size()));
    p.retained_fraction = fraction;
    return p;
}

Matrix project_gradient(const Matrix& grad, const SubspacePartition& p) {
    if (grad.rows() != p.rows() || grad.cols() != p.cols())
        throw std::invalid_argument("project_gradient: gradient is " + std::to_string(grad.rows()) + "x" +
                                    std::to_string(grad.cols()) + ", partition expects " +
                                    std::to_string(p.rows()) + "x" + std::to_string(p.cols()));
    if (p.r_count == 0) return grad;
    const Matrix core = p.u_high.transpose() * grad * p.v_high;
    return grad - p.u_high * core * p.v_high.transpose();
}

double interference(const Matrix& grad, const SubspacePartition& p) {
    if (grad.rows() != p.rows() || grad.cols() != p.cols())
        throw std::invalid_argument("interference: dimension mismatch");
    if (p.r_count == 0) return 0.0;
    return (p.u_high.transpose() * grad * p.v_high).norm();
}

}  // namespace asvd
