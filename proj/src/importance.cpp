#include "asvd/importance.hpp"

#include <numeric>
#include <stdexcept>

namespace asvd {

std::optional<double> layer_importance(const ActivationBatch& batch) {
    if (batch.inputs.cols() < 1 || batch.inputs.cols() != batch.outputs.cols())
        throw std::invalid_argument("layer_importance: inputs and outputs need the same positive sample count");
    if (batch.inputs.rows() != batch.outputs.rows()) return std::nullopt;
    double total = 0.0;
    for (Eigen::Index i = 0; i < batch.inputs.cols(); ++i)
        total += cosine_similarity(batch.inputs.col(i), batch.outputs.col(i));
    return total / static_cast<double>(batch.inputs.cols());
}

ImportanceProfile uniform_profile(std::size_t layer_count) {
    if (layer_count == 0) throw std::invalid_argument("uniform_profile: need at least one layer");
    ImportanceProfile p;
    p.raw.assign(layer_count, 1.0);
    p.normalized.assign(layer_count, 1.0);
    return p;
}

ImportanceProfile normalize(std::span<const double> raw) {
    if (raw.empty()) throw std::invalid_argument("normalize: need at least one layer");
    ImportanceProfile p;
    p.raw.assign(raw.begin(), raw.end());
    const double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
    const auto L = static_cast<double>(raw.size());
    if (sum > 0.0) {
        p.normalized.reserve(raw.size());
        for (double r : raw) p.normalized.push_back(r * L / sum);
        return p;
    }
    p.normalized.assign(raw.size(), 1.0);
    p.uniform_fallback = true;
    if (sum < 0.0) p.warning = "importance scores have negative mean; using uniform profile";
    return p;
}

ImportanceProfile profile_for_task(const Network& net, const Matrix& samples, std::size_t sample_count) {
    if (sample_count == 0) throw std::invalid_argument("profile_for_task: sample count must be positive");
    if (samples.cols() < static_cast<Eigen::Index>(sample_count))
        throw std::invalid_argument("profile_for_task: data source has " + std::to_string(samples.cols()) +
                                    " samples, need " + std::to_string(sample_count));
    const ForwardResult fr = net.forward(Matrix(samples.leftCols(static_cast<Eigen::Index>(sample_count))));

    std::vector<double> raw;
    std::vector<std::size_t> neutral;
    raw.reserve(net.layer_count());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const ActivationBatch batch{l, fr.capture[l].inputs, fr.capture[l].linear_outputs};
        if (auto score = layer_importance(batch)) {
            raw.push_back(*score);
        } else {
            raw.push_back(1.0);
            neutral.push_back(l);
        }
    }
    ImportanceProfile p = normalize(raw);
    p.neutral_layers = std::move(neutral);
    return p;
}

}  // namespace asvd
