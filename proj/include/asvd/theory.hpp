#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "asvd/linalg.hpp"
#include "asvd/network.hpp"
#include "asvd/rng.hpp"
#include "asvd/subspace.hpp"

namespace asvd {

/// Hessian of a task loss at theta_star together with its per-layer blocks
/// (in flatten() order) and their spectra.
struct HessianBundle {
    Matrix h;
    std::vector<Eigen::Index> block_sizes;
    std::vector<Matrix> blocks;
    std::vector<SymmetricEigen> block_eigen;  // eigenvalues descending
    SymmetricEigen full_eigen;
    Vector theta_star;

    double lambda_max() const { return full_eigen.values.size() ? full_eigen.values(0) : 0.0; }
};

/// Finite-difference step for Hessians built from analytic gradients.
inline constexpr double kHessianStep = 1e-4;

using GradientFn = std::function<Vector(const Vector&)>;
using LossFn = std::function<double(const Vector&)>;

/// Column i = (g(theta + h e_i) - g(theta - h e_i)) / 2h, then symmetrized.
Matrix hessian_from_gradient(const GradientFn& grad, const Vector& theta, double step = kHessianStep);

/// Symmetrizes h, slices blocks and decomposes everything.
HessianBundle make_bundle(Matrix h, std::vector<Eigen::Index> block_sizes, Vector theta_star);

/// Hessian of the mean batch loss at the network's current weights, blocks
/// by layer. Rejects relu layers (the loss is not twice differentiable).
HessianBundle exact_hessian(const Network& net, const Batch& batch, LossKind loss);

/// Damped Newton iterations on the exact Hessian until the gradient norm is
/// at most `tolerance`. Throws NumericalError if that does not happen.
Network converge_to_optimum(const Network& net, const Batch& batch, LossKind loss, double tolerance = 1e-9,
                            int max_iterations = 200);

/// Regression batch labelled by a random teacher network, plus a start point
/// near the teacher. The teacher attains zero loss, so damped Newton from the
/// start converges to an exact optimum.
struct RealizableInstance {
    Network teacher;
    Network start;
    Batch batch;
};

RealizableInstance realizable_instance(std::uint64_t seed, int input_dim, int width, int output_dim,
                                       Activation activation, int samples, double perturbation = 0.02);

struct SecondOrderCheck {
    double exact_delta = 0.0;           // L(theta + d) - L(theta)
    double quadratic_prediction = 0.0;  // d^T H d / 2
    double relative_error = 0.0;
    double gradient_norm = 0.0;
};

/// Gradient norm above which a point does not count as an optimum.
inline constexpr double kOptimumGradientTolerance = 1e-6;

SecondOrderCheck second_order_check(const LossFn& loss, const Matrix& h, const Vector& theta, const Vector& delta,
                                    double gradient_norm);

/// Compares the exact loss change against the quadratic model. Rejects
/// inputs whose gradient norm exceeds kOptimumGradientTolerance.
SecondOrderCheck second_order_forgetting_check(const Network& net_at_optimum, const Batch& batch, LossKind loss,
                                               const Vector& delta);

struct RayleighCheck {
    double quadratic_form = 0.0;
    double bound = 0.0;  // lambda_max |d|^2
    double slack = 0.0;  // bound - quadratic_form
    bool holds = true;   // quadratic_form <= bound + 1e-9
};

RayleighCheck rayleigh_bound_check(const HessianBundle& h, const Vector& delta);

/// |off-block part|_F / |block-diagonal part|_F.
double block_diagonal_measure(const HessianBundle& h);

/// max over d in range(projector), |d|^2 = c, of d^T H d / 2. A projector of
/// rank zero yields 0.
double equal_norm_worst_case(const Matrix& h, const Matrix& projector, double c);

/// Same, with the allowed subspace given by an orthonormal basis.
double equal_norm_worst_case_basis(const Matrix& h, const Matrix& basis, double c);

struct BoundReport {
    double update_norm_sq = 0.0;  // c
    double bound_full = 0.0;
    double bound_fixed = 0.0;
    double bound_adaptive = 0.0;
    double realized_full = 0.0;
    double realized_fixed = 0.0;
    double realized_adaptive = 0.0;
    std::vector<Eigen::Index> fixed_cuts;
    std::vector<Eigen::Index> adaptive_cuts;
    bool ordering_satisfied = false;
    bool strict = false;
    bool bounds_valid = false;
    std::string status;  // "strict", "non-strict" or "violated"

    nlohmann::json to_json() const;
    static BoundReport from_json(const nlohmann::json& j);
};

/// Evaluates the three forgetting bounds from block spectra and the realized
/// equal-norm worst case for each strategy's allowed update subspace.
/// Per block, fixed retains retained_count(fixed_fraction, d_l) top
/// eigendirections and adaptive retains
/// retained_count(allocate_rank(importance_l), d_l).
BoundReport bound_hierarchy_experiment(const HessianBundle& h, std::span<const double> importance,
                                       const RetentionConfig& retention, double fixed_fraction, double c);

/// Block-diagonal instance whose block curvature increases with importance.
struct ConstructedInstance {
    HessianBundle bundle;
    std::vector<double> importance;  // normalized
    double fixed_fraction = 0.0;
    /// The construction places a strictly larger adaptive cut on the most
    /// important block than the fixed cut, so the ordering must be strict.
    bool guarantees_strict = false;
};

/// Draws importance scores, computes cuts, then builds block spectra
/// lambda_i = tau_l * rho^(i - 1 - k_l) with tau_l increasing in importance,
/// so the eigenvalue just past each adaptive cut is tau_l. The fixed fraction
/// is allocate_rank(1.0), the retention of an average-importance layer.
ConstructedInstance construct_premise_instance(Rng& rng, int blocks, Eigen::Index block_dim,
                                               const RetentionConfig& retention);

/// Pearson correlation between normalized importance and per-block top
/// Hessian eigenvalue. Reported as a diagnostic only.
double importance_curvature_correlation(std::span<const double> importance, const HessianBundle& h);

void write_bound_csv(std::ostream& out, std::span<const BoundReport> reports);

}  // namespace asvd
