#pragma once

// Reference computations used only by tests. Each one is written from the
// definition with plain loops or a different Eigen routine, and shares no
// code path with the library function it checks.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "asvd/network.hpp"

namespace oracle {

using asvd::Matrix;
using asvd::Vector;

inline double act(asvd::Activation a, double z) {
    switch (a) {
        case asvd::Activation::identity: return z;
        case asvd::Activation::tanh: return std::tanh(z);
        case asvd::Activation::relu: return z > 0.0 ? z : 0.0;
    }
    return z;
}

/// Forward pass with explicit loops over a std::vector copy of the weights.
inline std::vector<double> forward(const asvd::Network& net, const std::vector<double>& x) {
    std::vector<double> h = x;
    for (const asvd::Layer& layer : net.layers()) {
        const auto rows = static_cast<std::size_t>(layer.weight.rows());
        const auto cols = static_cast<std::size_t>(layer.weight.cols());
        std::vector<double> z(rows, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols; ++j)
                s += layer.weight(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * h[j];
            z[i] = act(layer.activation, s);
        }
        h = std::move(z);
    }
    return h;
}

inline std::vector<double> column(const Matrix& m, Eigen::Index c) {
    std::vector<double> v(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, c);
    return v;
}

/// Mean loss over samples, from the definitions.
inline double loss(const asvd::Network& net, const asvd::Batch& batch, asvd::LossKind kind) {
    double total = 0.0;
    for (Eigen::Index n = 0; n < batch.inputs.cols(); ++n) {
        const std::vector<double> z = forward(net, column(batch.inputs, n));
        if (kind == asvd::LossKind::mean_squared_error) {
            for (std::size_t i = 0; i < z.size(); ++i) {
                const double d = z[i] - batch.targets(static_cast<Eigen::Index>(i), n);
                total += d * d;
            }
        } else {
            double m = z[0];
            for (double v : z) m = std::max(m, v);
            double s = 0.0;
            for (double v : z) s += std::exp(v - m);
            total += m + std::log(s) - z[static_cast<std::size_t>(batch.labels[static_cast<std::size_t>(n)])];
        }
    }
    return total / static_cast<double>(batch.inputs.cols());
}

/// Central differences of oracle::loss over every weight.
inline std::vector<Matrix> fd_gradient(const asvd::Network& net, const asvd::Batch& batch, asvd::LossKind kind,
                                       double eps) {
    std::vector<Matrix> grads;
    asvd::Network work = net;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Matrix g(net.layer(l).weight.rows(), net.layer(l).weight.cols());
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
            for (Eigen::Index j = 0; j < g.cols(); ++j) {
                const double saved = work.layer(l).weight(i, j);
                work.layer(l).weight(i, j) = saved + eps;
                const double up = oracle::loss(work, batch, kind);
                work.layer(l).weight(i, j) = saved - eps;
                const double down = oracle::loss(work, batch, kind);
                work.layer(l).weight(i, j) = saved;
                g(i, j) = (up - down) / (2.0 * eps);
            }
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

/// Singular values from Eigen's two-sided Jacobi SVD, descending.
inline Vector singular_values(const Matrix& w) {
    return Eigen::JacobiSVD<Matrix>(w).singularValues();
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

}  // namespace oracle
