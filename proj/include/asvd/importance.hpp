#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asvd/linalg.hpp"
#include "asvd/network.hpp"

namespace asvd {

inline constexpr std::size_t kDefaultImportanceSamples = 128;

/// Paired layer inputs X_i and linear outputs Y_i = W X_i, one sample per
/// column.
struct ActivationBatch {
    std::size_t layer_index = 0;
    Matrix inputs;
    Matrix outputs;
};

/// Mean cosine similarity between each input column and its output column.
/// Returns nullopt when the layer is not square (the cosine is undefined);
/// callers substitute the neutral score 1.0.
std::optional<double> layer_importance(const ActivationBatch& batch);

struct ImportanceProfile {
    std::vector<double> raw;
    std::vector<double> normalized;
    /// Layers whose score was substituted with 1.0 because W is not square.
    std::vector<std::size_t> neutral_layers;
    /// Set when the raw scores could not be normalized and the uniform
    /// profile was used instead.
    bool uniform_fallback = false;
    std::string warning;
};

/// Scales raw so that the normalized scores average one. A zero sum yields
/// all ones; a negative sum falls back to all ones and sets a warning.
ImportanceProfile normalize(std::span<const double> raw);

ImportanceProfile uniform_profile(std::size_t layer_count);

/// Captures X and Y for every layer on the first sample_count columns of
/// samples and scores each layer. Used with the previous task's data.
ImportanceProfile profile_for_task(const Network& net, const Matrix& samples, std::size_t sample_count);

}  // namespace asvd
