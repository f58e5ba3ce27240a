#include "asvd/spectrum.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace asvd {

namespace {

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SpectrumStats singular_value_stats(const Vector& sigma) {
    if (sigma.size() == 0) throw std::invalid_argument("singular_value_stats: empty spectrum");
    SpectrumStats s;
    s.min = sigma.minCoeff();
    s.max = sigma.maxCoeff();
    s.mean = sigma.mean();
    s.median = median_of(std::vector<double>(sigma.data(), sigma.data() + sigma.size()));
    return s;
}

std::vector<SpectrumStats> spectrum_stats(const Network& net) {
    std::vector<SpectrumStats> out;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const Matrix& w = net.layer(l).weight;
        SpectrumStats s = singular_value_stats(svd(w).sigma);
        s.layer = l;
        s.rows = w.rows();
        s.cols = w.cols();
        out.push_back(s);
    }
    return out;
}

double marchenko_pastur_threshold(Eigen::Index m, Eigen::Index n, double noise_sigma, double scale) {
    if (m < 1 || n < 1) throw std::invalid_argument("marchenko_pastur_threshold: dims must be positive");
    if (!(noise_sigma > 0.0)) throw std::invalid_argument("marchenko_pastur_threshold: noise_sigma must be positive");
    return scale * noise_sigma * std::abs(std::sqrt(static_cast<double>(m)) - std::sqrt(static_cast<double>(n)));
}

double estimate_noise_sigma(const Vector& sigma, Eigen::Index m, Eigen::Index n) {
    if (sigma.size() == 0) throw std::invalid_argument("estimate_noise_sigma: empty spectrum");
    const double med = median_of(std::vector<double>(sigma.data(), sigma.data() + sigma.size()));
    return med / std::sqrt(static_cast<double>(std::max(m, n)));
}

NoiseClassification classify_spectrum(const Matrix& w, std::optional<double> noise_sigma, double scale) {
    const Vector sigma = svd(w).sigma;
    NoiseClassification c;
    c.noise_sigma_estimated = !noise_sigma.has_value();
    c.noise_sigma = noise_sigma ? *noise_sigma : estimate_noise_sigma(sigma, w.rows(), w.cols());
    if (!(c.noise_sigma > 0.0)) {
        // A zero matrix has no noise scale; everything sits at the origin.
        c.below = sigma.size();
        return c;
    }
    c.threshold = marchenko_pastur_threshold(w.rows(), w.cols(), c.noise_sigma, scale);
    for (Eigen::Index i = 0; i < sigma.size(); ++i) (sigma(i) >= c.threshold ? c.above : c.below) += 1;
    c.fraction_above = static_cast<double>(c.above) / static_cast<double>(sigma.size());
    if (c.fraction_above >= 0.99)
        c.note = "all but <1% of singular values exceed the noise edge; the matrix looks full-rank under the iid model";
    return c;
}

Matrix truncated_reconstruction(const SvdFactorization& f, Eigen::Index k) {
    if (k < 0 || k > f.sigma.size()) throw std::invalid_argument("truncated_reconstruction: rank outside [0, k]");
    return f.u.leftCols(k) * f.sigma.head(k).asDiagonal() * f.v.leftCols(k).transpose();
}

Eigen::Index PruneSpec::retained_for(Eigen::Index k) const {
    if (fraction.has_value() == count.has_value())
        throw std::invalid_argument("PruneSpec: set exactly one of fraction or count");
    if (fraction) {
        if (!(*fraction > 0.0 && *fraction <= 1.0)) throw std::invalid_argument("PruneSpec: fraction must lie in (0, 1]");
        return std::max<Eigen::Index>(1, retained_count(*fraction, k));
    }
    if (*count < 1) throw std::invalid_argument("PruneSpec: count must be positive");
    return std::min(*count, k);
}

PruneResult prune_low_rank(const Network& net, const PruneSpec& spec, std::span<const TaskData> tasks) {
    std::vector<std::size_t> layers = spec.layers;
    if (layers.empty())
        for (std::size_t l = 0; l < net.layer_count(); ++l) layers.push_back(l);

    PruneResult r;
    r.pruned = net;
    for (std::size_t l : layers) {
        if (l >= net.layer_count()) throw std::invalid_argument("PruneSpec: layer index out of range");
        const SvdFactorization f = svd(net.layer(l).weight);
        r.pruned.layer(l).weight = truncated_reconstruction(f, spec.retained_for(f.sigma.size()));
    }
    for (const TaskData& t : tasks) {
        r.before.push_back(evaluate(net, t));
        r.after.push_back(evaluate(r.pruned, t));
        r.delta.push_back(r.after.back() - r.before.back());
    }
    if (!tasks.empty()) {
        const auto n = static_cast<double>(tasks.size());
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            r.mean_before += r.before[i] / n;
            r.mean_after += r.after[i] / n;
        }
    }
    return r;
}

DirectionNorms direction_activation_norms(const Network& net, std::size_t layer, const Matrix& layer_inputs) {
    if (layer >= net.layer_count()) throw std::invalid_argument("direction_activation_norms: layer out of range");
    const Matrix& w = net.layer(layer).weight;
    if (layer_inputs.rows() != w.cols()) throw std::invalid_argument("direction_activation_norms: input dim mismatch");
    if (layer_inputs.cols() == 0) throw std::invalid_argument("direction_activation_norms: no samples");
    const SvdFactorization f = svd(w);
    const Matrix proj = f.v.transpose() * layer_inputs;  // k x N
    DirectionNorms d;
    d.sigma = f.sigma;
    d.mean_abs_projection = proj.cwiseAbs().rowwise().mean();
    return d;
}

void write_stats_csv(std::ostream& out, std::span<const SpectrumStats> stats) {
    out << "layer,rows,cols,min,max,mean,median\r\n";
    for (const SpectrumStats& s : stats)
        out << s.layer << ',' << s.rows << ',' << s.cols << ',' << num(s.min) << ',' << num(s.max) << ','
            << num(s.mean) << ',' << num(s.median) << "\r\n";
}

void write_direction_csv(std::ostream& out, const DirectionNorms& norms) {
    out << "direction,sigma,mean_abs_projection\r\n";
    for (Eigen::Index i = 0; i < norms.sigma.size(); ++i)
        out << i << ',' << num(norms.sigma(i)) << ',' << num(norms.mean_abs_projection(i)) << "\r\n";
}

}  // namespace asvd
