#include "asvd/network.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace asvd {

namespace {

Matrix activate(const Matrix& z, Activation a) {
    switch (a) {
        case Activation::identity: return z;
        case Activation::tanh: return z.array().tanh().matrix();
        case Activation::relu: return z.cwiseMax(0.0);
    }
    throw std::logic_error("unknown activation");
}

// Derivative of the activation, expressed through the pre-activation z and
// the activation output y.
Matrix activation_derivative(const Matrix& z, const Matrix& y, Activation a) {
    switch (a) {
        case Activation::identity: return Matrix::Ones(z.rows(), z.cols());
        case Activation::tanh: return (1.0 - y.array().square()).matrix();
        case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
    }
    throw std::logic_error("unknown activation");
}

void check_batch(const Network& net, const Batch& batch, LossKind kind) {
    if (batch.size() == 0) throw std::invalid_argument("batch is empty");
    if (batch.inputs.rows() != net.input_dim())
        throw std::invalid_argument("batch input dim " + std::to_string(batch.inputs.rows()) +
                                    " does not match network input dim " + std::to_string(net.input_dim()));
    if (kind == LossKind::softmax_cross_entropy) {
        if (static_cast<Eigen::Index>(batch.labels.size()) != batch.size())
            throw std::invalid_argument("classification batch needs one label per sample");
        for (int y : batch.labels)
            if (y < 0 || y >= net.output_dim()) throw std::invalid_argument("label out of range");
    } else {
        if (batch.targets.rows() != net.output_dim() || batch.targets.cols() != batch.size())
            throw std::invalid_argument("regression targets have wrong shape");
    }
}

// Column-wise log-softmax.
Matrix log_softmax(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        const double m = logits.col(c).maxCoeff();
        const double lse = m + std::log((logits.col(c).array() - m).exp().sum());
        out.col(c) = logits.col(c).array() - lse;
    }
    return out;
}

}  // namespace

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::tanh: return "tanh";
        case Activation::relu: return "relu";
    }
    return "?";
}

Activation activation_from_string(std::string_view s) {
    if (s == "identity") return Activation::identity;
    if (s == "tanh") return Activation::tanh;
    if (s == "relu") return Activation::relu;
    throw std::invalid_argument("unknown activation '" + std::string(s) + "'");
}

std::string_view to_string(LossKind k) {
    return k == LossKind::softmax_cross_entropy ? "softmax_cross_entropy" : "mean_squared_error";
}

LossKind loss_kind_from_string(std::string_view s) {
    if (s == "softmax_cross_entropy") return LossKind::softmax_cross_entropy;
    if (s == "mean_squared_error") return LossKind::mean_squared_error;
    throw std::invalid_argument("unknown loss '" + std::string(s) + "'");
}

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) {
    validate();
}

void Network::validate() const {
    if (layers_.empty()) throw std::invalid_argument("network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const Matrix& w = layers_[l].weight;
        if (w.rows() < 1 || w.cols() < 1) throw std::invalid_argument("layer " + std::to_string(l) + " is empty");
        if (!w.allFinite()) throw std::invalid_argument("layer " + std::to_string(l) + " has non-finite weights");
        if (l > 0 && layers_[l - 1].weight.rows() != w.cols())
            throw std::invalid_argument("layer " + std::to_string(l) + " input dim does not match previous output dim");
    }
}

Network Network::random(const std::vector<LayerSpec>& specs, Rng& rng, double init_scale) {
    std::vector<Layer> layers;
    layers.reserve(specs.size());
    for (const LayerSpec& s : specs) {
        if (s.input_dim < 1 || s.output_dim < 1) throw std::invalid_argument("layer dims must be positive");
        const double stddev = init_scale / std::sqrt(static_cast<double>(s.input_dim));
        layers.push_back({gaussian_matrix(rng, s.output_dim, s.input_dim, stddev), s.activation});
    }
    return Network(std::move(layers));
}

Eigen::Index Network::input_dim() const { return layers_.front().weight.cols(); }
Eigen::Index Network::output_dim() const { return layers_.back().weight.rows(); }

Eigen::Index Network::parameter_count() const {
    Eigen::Index n = 0;
    for (const Layer& l : layers_) n += l.weight.size();
    return n;
}

Eigen::Index Network::parameter_offset(std::size_t l) const {
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < l; ++i) off += layers_.at(i).weight.size();
    return off;
}

Vector Network::flatten() const {
    std::vector<Matrix> ws;
    ws.reserve(layers_.size());
    for (const Layer& l : layers_) ws.push_back(l.weight);
    return flatten_layers(ws);
}

Network Network::unflatten(const Vector& theta) const {
    std::vector<Matrix> ws = unflatten_like(*this, theta);
    std::vector<Layer> layers = layers_;
    for (std::size_t l = 0; l < layers.size(); ++l) layers[l].weight = std::move(ws[l]);
    return Network(std::move(layers));
}

Vector flatten_layers(const std::vector<Matrix>& per_layer) {
    Eigen::Index n = 0;
    for (const Matrix& m : per_layer) n += m.size();
    Vector theta(n);
    Eigen::Index k = 0;
    for (const Matrix& m : per_layer)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) theta(k++) = m(r, c);
    return theta;
}

std::vector<Matrix> unflatten_like(const Network& net, const Vector& theta) {
    if (theta.size() != net.parameter_count())
        throw std::invalid_argument("unflatten: parameter vector has length " + std::to_string(theta.size()) +
                                    ", expected " + std::to_string(net.parameter_count()));
    std::vector<Matrix> out;
    out.reserve(net.layer_count());
    Eigen::Index k = 0;
    for (const Layer& l : net.layers()) {
        Matrix m(l.weight.rows(), l.weight.cols());
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = theta(k++);
        out.push_back(std::move(m));
    }
    return out;
}

ForwardResult Network::forward(const Matrix& inputs) const {
    if (inputs.rows() != input_dim())
        throw std::invalid_argument("forward: input dim " + std::to_string(inputs.rows()) + " != " +
                                    std::to_string(input_dim()));
    ForwardResult r;
    r.capture.reserve(layers_.size());
    Matrix a = inputs;
    for (const Layer& l : layers_) {
        Matrix z = l.weight * a;
        Matrix next = activate(z, l.activation);
        r.capture.push_back({std::move(a), std::move(z)});
        a = std::move(next);
    }
    r.prediction = std::move(a);
    return r;
}

SingleForward Network::forward(const Vector& x) const {
    ForwardResult fr = forward(Matrix(x));
    return {fr.prediction.col(0), std::move(fr.capture)};
}

bool operator==(const Network& a, const Network& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t l = 0; l < a.layers_.size(); ++l) {
        const Layer& x = a.layers_[l];
        const Layer& y = b.layers_[l];
        if (x.activation != y.activation || x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols())
            return false;
        if (x.weight != y.weight) return false;
    }
    return true;
}

double loss_of_prediction(const Matrix& prediction, const Batch& batch, LossKind kind) {
    const double n = static_cast<double>(batch.size());
    if (kind == LossKind::softmax_cross_entropy) {
        const Matrix lp = log_softmax(prediction);
        double total = 0.0;
        for (Eigen::Index c = 0; c < lp.cols(); ++c) total -= lp(batch.labels[static_cast<std::size_t>(c)], c);
        return total / n;
    }
    return (prediction - batch.targets).squaredNorm() / n;
}

double loss(const Network& net, const Batch& batch, LossKind kind) {
    check_batch(net, batch, kind);
    return loss_of_prediction(net.forward(batch.inputs).prediction, batch, kind);
}

GradientResult backward(const Network& net, const Batch& batch, LossKind kind) {
    check_batch(net, batch, kind);
    const ForwardResult fr = net.forward(batch.inputs);
    const double n = static_cast<double>(batch.size());

    GradientResult g;
    Matrix d_out;  // dL/d(prediction)
    if (kind == LossKind::softmax_cross_entropy) {
        const Matrix lp = log_softmax(fr.prediction);
        double total = 0.0;
        d_out = lp.array().exp().matrix();
        for (Eigen::Index c = 0; c < lp.cols(); ++c) {
            const int y = batch.labels[static_cast<std::size_t>(c)];
            total -= lp(y, c);
            d_out(y, c) -= 1.0;
        }
        g.loss = total / n;
        d_out /= n;
    } else {
        const Matrix resid = fr.prediction - batch.targets;
        g.loss = resid.squaredNorm() / n;
        d_out = (2.0 / n) * resid;
    }

    const std::size_t L = net.layer_count();
    g.gradients.resize(L);
    Matrix d_a = std::move(d_out);
    for (std::size_t i = L; i-- > 0;) {
        const Layer& layer = net.layer(i);
        const LayerCapture& cap = fr.capture[i];
        const Matrix& y = (i + 1 < L) ? fr.capture[i + 1].inputs : fr.prediction;
        const Matrix d_z = d_a.cwiseProduct(activation_derivative(cap.linear_outputs, y, layer.activation));
        g.gradients[i] = d_z * cap.inputs.transpose();
        if (i > 0) d_a = layer.weight.transpose() * d_z;
    }
    return g;
}

std::vector<Matrix> finite_difference_gradient(const Network& net, const Batch& batch, LossKind kind, double epsilon) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-3))
        throw std::invalid_argument("finite_difference_gradient: epsilon must lie in [1e-7, 1e-3]");
    check_batch(net, batch, kind);
    Vector theta = net.flatten();
    Vector grad(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double saved = theta(i);
        theta(i) = saved + epsilon;
        const double up = loss(net.unflatten(theta), batch, kind);
        theta(i) = saved - epsilon;
        const double down = loss(net.unflatten(theta), batch, kind);
        theta(i) = saved;
        grad(i) = (up - down) / (2.0 * epsilon);
    }
    return unflatten_like(net, grad);
}

}  // namespace asvd
