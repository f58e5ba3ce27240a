#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asvd/network.hpp"
#include "asvd/subspace.hpp"
#include "asvd/tasks.hpp"

namespace asvd {

struct SpectrumStats {
    std::size_t layer = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double median = 0.0;
};

SpectrumStats singular_value_stats(const Vector& sigma);
std::vector<SpectrumStats> spectrum_stats(const Network& net);

/// scale * noise_sigma * |sqrt(m) - sqrt(n)|: the asymptotic smallest
/// singular value of an m x n matrix with iid entries of stddev noise_sigma.
double marchenko_pastur_threshold(Eigen::Index m, Eigen::Index n, double noise_sigma, double scale = 1.0);

/// median(sigma) / sqrt(max(m, n)).
double estimate_noise_sigma(const Vector& sigma, Eigen::Index m, Eigen::Index n);

struct NoiseClassification {
    double noise_sigma = 0.0;
    bool noise_sigma_estimated = false;
    double threshold = 0.0;
    Eigen::Index above = 0;  // classified signal
    Eigen::Index below = 0;  // classified noise
    double fraction_above = 0.0;
    /// Set when >= 99% of values exceed the threshold: the matrix looks
    /// full-rank under the iid-noise model.
    std::string note;
};

NoiseClassification classify_spectrum(const Matrix& w, std::optional<double> noise_sigma = std::nullopt,
                                      double scale = 1.0);

/// Best rank-k approximation sum_{i<k} sigma_i u_i v_i^T.
Matrix truncated_reconstruction(const SvdFactorization& f, Eigen::Index k);

struct PruneSpec {
    std::vector<std::size_t> layers;  // empty selects every layer
    std::optional<double> fraction;   // in (0, 1]
    std::optional<Eigen::Index> count;

    Eigen::Index retained_for(Eigen::Index k) const;
};

struct PruneResult {
    Network pruned;
    std::vector<double> before;
    std::vector<double> after;
    std::vector<double> delta;  // after - before, per task
    double mean_before = 0.0;
    double mean_after = 0.0;
};

/// Replaces the selected layers with truncated reconstructions and
/// re-evaluates every task. The input network is not modified.
PruneResult prune_low_rank(const Network& net, const PruneSpec& spec, std::span<const TaskData> tasks);

struct DirectionNorms {
    Vector sigma;
    Vector mean_abs_projection;  // mean over samples of |v_i^T x|
};

/// For layer `layer`, the mean of |v_i^T x| over the columns of layer_inputs,
/// ordered by descending sigma_i. Since u_i is a unit vector this equals the
/// norm of (u_i v_i^T) x.
DirectionNorms direction_activation_norms(const Network& net, std::size_t layer, const Matrix& layer_inputs);

void write_stats_csv(std::ostream& out, std::span<const SpectrumStats> stats);
void write_direction_csv(std::ostream& out, const DirectionNorms& norms);

}  // namespace asvd
