#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "asvd/linalg.hpp"

namespace asvd {

using Rng = std::mt19937_64;

/// Derives an independent generator from a master seed and a stream name
/// ("data", "init", "batching", ...). Changing how one stream is consumed
/// never perturbs another.
Rng named_stream(std::uint64_t master_seed, std::string_view name);

/// SplitMix64 finalizer, used for seed derivation.
std::uint64_t mix_seed(std::uint64_t x);

/// Standard normal draw via Box-Muller. Implemented here rather than with
/// std::normal_distribution so generated data is identical across standard
/// library implementations.
double standard_normal(Rng& rng);

/// Uniform in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

Vector gaussian_vector(Rng& rng, Eigen::Index n, double stddev = 1.0);
Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev = 1.0);

/// Fisher-Yates permutation of 0..n-1 driven by uniform01 draws.
std::vector<Eigen::Index> shuffled_indices(Eigen::Index n, Rng& rng);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
Matrix random_orthogonal(Rng& rng, Eigen::Index n);

}  // namespace asvd
