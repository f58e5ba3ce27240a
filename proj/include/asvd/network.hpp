#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "asvd/linalg.hpp"
#include "asvd/rng.hpp"

namespace asvd {

enum class Activation : std::uint8_t { identity = 0, tanh = 1, relu = 2 };

enum class LossKind { softmax_cross_entropy, mean_squared_error };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);
std::string_view to_string(LossKind k);
LossKind loss_kind_from_string(std::string_view s);

struct LayerSpec {
    Eigen::Index input_dim = 0;
    Eigen::Index output_dim = 0;
    Activation activation = Activation::tanh;
};

struct Layer {
    Matrix weight;  // output_dim x input_dim
    Activation activation = Activation::identity;

    LayerSpec spec() const { return {weight.cols(), weight.rows(), activation}; }
};

/// Mini-batch of samples stored column-wise. Classification batches carry
/// integer labels, regression batches carry a target matrix.
struct Batch {
    Matrix inputs;            // d_in x N
    std::vector<int> labels;  // N, classification
    Matrix targets;           // d_out x N, regression

    Eigen::Index size() const { return inputs.cols(); }
};

/// Per-layer record of X^(l) and the linear output Y^(l) = W^(l) X^(l),
/// one sample per column.
struct LayerCapture {
    Matrix inputs;
    Matrix linear_outputs;
};

struct ForwardResult {
    Matrix prediction;  // d_out x N, after the last layer's activation
    std::vector<LayerCapture> capture;
};

struct SingleForward {
    Vector prediction;
    std::vector<LayerCapture> capture;
};

/// Stack of bias-free dense layers.
class Network {
public:
    Network() = default;
    explicit Network(std::vector<Layer> layers);

    /// Gaussian init with stddev init_scale / sqrt(fan_in).
    static Network random(const std::vector<LayerSpec>& specs, Rng& rng, double init_scale = 1.0);

    std::size_t layer_count() const { return layers_.size(); }
    const Layer& layer(std::size_t l) const { return layers_.at(l); }
    Layer& layer(std::size_t l) { return layers_.at(l); }
    const std::vector<Layer>& layers() const { return layers_; }

    Eigen::Index input_dim() const;
    Eigen::Index output_dim() const;
    Eigen::Index parameter_count() const;

    /// Parameter offset of layer l inside the flattened vector.
    Eigen::Index parameter_offset(std::size_t l) const;

    /// theta = [vec(W1); vec(W2); ...], each vec in row-major order.
    Vector flatten() const;
    /// Same architecture with weights taken from theta.
    Network unflatten(const Vector& theta) const;

    ForwardResult forward(const Matrix& inputs) const;
    SingleForward forward(const Vector& x) const;

    friend bool operator==(const Network& a, const Network& b);

private:
    void validate() const;

    std::vector<Layer> layers_;
};

double loss(const Network& net, const Batch& batch, LossKind kind);

/// Loss on a prediction matrix; mean over samples.
double loss_of_prediction(const Matrix& prediction, const Batch& batch, LossKind kind);

struct GradientResult {
    double loss = 0.0;
    std::vector<Matrix> gradients;  // one per layer, shaped like the weight
};

/// Exact gradients of the mean batch loss.
GradientResult backward(const Network& net, const Batch& batch, LossKind kind);

/// Central differences (L(theta + eps e_i) - L(theta - eps e_i)) / 2 eps for
/// every coordinate; epsilon must lie in [1e-7, 1e-3].
std::vector<Matrix> finite_difference_gradient(const Network& net, const Batch& batch, LossKind kind, double epsilon);

/// Concatenates per-layer matrices in the flatten() ordering.
Vector flatten_layers(const std::vector<Matrix>& per_layer);
std::vector<Matrix> unflatten_like(const Network& net, const Vector& theta);

}  // namespace asvd
