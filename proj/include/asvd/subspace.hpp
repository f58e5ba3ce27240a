#pragma once

#include "asvd/linalg.hpp"

namespace asvd {

/// Minimum and target retention ratios. The constructor enforces
/// 0 <= mrr <= trr <= 1.
class RetentionConfig {
public:
    static constexpr double kDefaultMrr = 0.1;
    static constexpr double kDefaultTrr = 0.8;

    RetentionConfig() = default;
    RetentionConfig(double mrr, double trr);

    double mrr() const { return mrr_; }
    double trr() const { return trr_; }

    RetentionConfig halved() const { return RetentionConfig(mrr_ / 2.0, trr_ / 2.0); }

private:
    double mrr_ = kDefaultMrr;
    double trr_ = kDefaultTrr;
};

/// mrr + importance * (trr - mrr), clamped to [0, 1].
double allocate_rank(double importance, const RetentionConfig& config);

/// Number of retained directions for a fraction of k: round-half-to-even of
/// fraction * k, clamped to [0, k].
Eigen::Index retained_count(double fraction, Eigen::Index k);

/// Split of a weight's singular vectors into the retained (high) block and
/// the trainable (low) block.
struct SubspacePartition {
    Matrix u_high;  // d_O x r_count
    Matrix v_high;  // d_I x r_count
    Matrix u_low;   // d_O x (k - r_count)
    Matrix v_low;   // d_I x (k - r_count)
    Vector sigma_high;
    double retained_fraction = 0.0;
    Eigen::Index r_count = 0;

    Eigen::Index rows() const { return u_high.rows(); }
    Eigen::Index cols() const { return v_high.rows(); }
};

SubspacePartition partition(const SvdFactorization& f, double fraction);

/// Partition with an explicit retained count (used by the fixed-budget
/// schedule and the theory experiments).
SubspacePartition partition_by_count(const SvdFactorization& f, Eigen::Index r_count);

/// grad - U_h U_h^T grad V_h V_h^T.
Matrix project_gradient(const Matrix& grad, const SubspacePartition& p);

/// |U_h^T g V_h|_F, the component of g inside the retained bilinear block.
double interference(const Matrix& grad, const SubspacePartition& p);

}  // namespace asvd
