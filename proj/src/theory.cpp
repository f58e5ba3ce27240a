#include "asvd/theory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace asvd {

Matrix hessian_from_gradient(const GradientFn& grad, const Vector& theta, double step) {
    const Eigen::Index p = theta.size();
    Matrix h(p, p);
    Vector x = theta;
    for (Eigen::Index i = 0; i < p; ++i) {
        const double saved = x(i);
        x(i) = saved + step;
        const Vector up = grad(x);
        x(i) = saved - step;
        const Vector down = grad(x);
        x(i) = saved;
        h.col(i) = (up - down) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
}

HessianBundle make_bundle(Matrix h, std::vector<Eigen::Index> block_sizes, Vector theta_star) {
    if (h.rows() != h.cols()) throw std::invalid_argument("make_bundle: Hessian must be square");
    const Eigen::Index total = std::accumulate(block_sizes.begin(), block_sizes.end(), Eigen::Index{0});
    if (total != h.rows()) throw std::invalid_argument("make_bundle: block sizes do not sum to the Hessian size");
    HessianBundle b;
    b.h = 0.5 * (h + h.transpose());
    b.block_sizes = std::move(block_sizes);
    b.theta_star = std::move(theta_star);
    Eigen::Index off = 0;
    for (Eigen::Index sz : b.block_sizes) {
        Matrix block = b.h.block(off, off, sz, sz);
        b.block_eigen.push_back(symmetric_eigendecomposition(block));
        b.blocks.push_back(std::move(block));
        off += sz;
    }
    b.full_eigen = symmetric_eigendecomposition(b.h);
    return b;
}

HessianBundle exact_hessian(const Network& net, const Batch& batch, LossKind loss) {
    for (const Layer& l : net.layers())
        if (l.activation == Activation::relu)
            throw std::invalid_argument("exact_hessian: relu layers are not twice differentiable");
    const GradientFn grad = [&](const Vector& theta) {
        return flatten_layers(backward(net.unflatten(theta), batch, loss).gradients);
    };
    const Vector theta = net.flatten();
    std::vector<Eigen::Index> sizes;
    for (const Layer& l : net.layers()) sizes.push_back(l.weight.size());
    return make_bundle(hessian_from_gradient(grad, theta), std::move(sizes), theta);
}

Network converge_to_optimum(const Network& net, const Batch& batch, LossKind loss, double tolerance,
                            int max_iterations) {
    Network cur = net;
    double damping = 1e-6;
    for (int it = 0; it < max_iterations; ++it) {
        const GradientResult g = backward(cur, batch, loss);
        const Vector grad = flatten_layers(g.gradients);
        if (grad.norm() <= tolerance) return cur;
        const HessianBundle hb = exact_hessian(cur, batch, loss);
        const Vector theta = cur.flatten();
        // Levenberg-style damping; accept only loss-decreasing steps.
        for (int attempt = 0; attempt < 60; ++attempt) {
            Matrix a = hb.h;
            a.diagonal().array() += damping;
            const Vector stepv = a.ldlt().solve(grad);
            Network trial = cur.unflatten(theta - stepv);
            if (loss_of_prediction(trial.forward(batch.inputs).prediction, batch, loss) <= g.loss) {
                cur = std::move(trial);
                damping = std::max(damping * 0.3, 1e-12);
                break;
            }
            damping *= 10.0;
        }
    }
    const double gn = flatten_layers(backward(cur, batch, loss).gradients).norm();
    if (gn <= tolerance) return cur;
    throw NumericalError("converge_to_optimum: gradient norm " + std::to_string(gn) + " after " +
                         std::to_string(max_iterations) + " iterations");
}

RealizableInstance realizable_instance(std::uint64_t seed, int input_dim, int width, int output_dim,
                                       Activation activation, int samples, double perturbation) {
    if (input_dim < 1 || width < 1 || output_dim < 1 || samples < 1)
        throw std::invalid_argument("realizable_instance: sizes must be positive");
    const std::vector<LayerSpec> specs = {{input_dim, width, activation},
                                          {width, width, activation},
                                          {width, output_dim, Activation::identity}};
    Rng init = named_stream(seed, "theory/teacher");
    RealizableInstance inst;
    inst.teacher = Network::random(specs, init);
    Rng data = named_stream(seed, "theory/inputs");
    inst.batch.inputs = gaussian_matrix(data, input_dim, samples);
    inst.batch.targets = inst.teacher.forward(inst.batch.inputs).prediction;
    Rng noise = named_stream(seed, "theory/start");
    const Vector theta = inst.teacher.flatten();
    inst.start = inst.teacher.unflatten(theta + gaussian_vector(noise, theta.size(), perturbation));
    return inst;
}

SecondOrderCheck second_order_check(const LossFn& loss, const Matrix& h, const Vector& theta, const Vector& delta,
                                    double gradient_norm) {
    if (delta.size() != theta.size() || h.rows() != theta.size())
        throw std::invalid_argument("second_order_check: dimension mismatch");
    SecondOrderCheck c;
    c.gradient_norm = gradient_norm;
    c.exact_delta = loss(theta + delta) - loss(theta);
    c.quadratic_prediction = 0.5 * delta.dot(h * delta);
    const double diff = std::abs(c.exact_delta - c.quadratic_prediction);
    const double denom = std::abs(c.exact_delta);
    c.relative_error = denom > 0.0 ? diff / denom : diff;
    return c;
}

SecondOrderCheck second_order_forgetting_check(const Network& net, const Batch& batch, LossKind loss,
                                               const Vector& delta) {
    const double gn = flatten_layers(backward(net, batch, loss).gradients).norm();
    if (gn > kOptimumGradientTolerance)
        throw std::invalid_argument("second_order_forgetting_check: not at an optimum (gradient norm " +
                                    std::to_string(gn) + ")");
    const HessianBundle hb = exact_hessian(net, batch, loss);
    const LossFn lf = [&](const Vector& theta) { return asvd::loss(net.unflatten(theta), batch, loss); };
    return second_order_check(lf, hb.h, hb.theta_star, delta, gn);
}

RayleighCheck rayleigh_bound_check(const HessianBundle& h, const Vector& delta) {
    if (delta.size() != h.h.rows()) throw std::invalid_argument("rayleigh_bound_check: dimension mismatch");
    RayleighCheck r;
    r.quadratic_form = delta.dot(h.h * delta);
    r.bound = h.lambda_max() * delta.squaredNorm();
    r.slack = r.bound - r.quadratic_form;
    r.holds = r.quadratic_form <= r.bound + 1e-9;
    return r;
}

double block_diagonal_measure(const HessianBundle& h) {
    Matrix diag_part = Matrix::Zero(h.h.rows(), h.h.cols());
    Eigen::Index off = 0;
    for (Eigen::Index sz : h.block_sizes) {
        diag_part.block(off, off, sz, sz) = h.h.block(off, off, sz, sz);
        off += sz;
    }
    const double d = diag_part.norm();
    const double o = (h.h - diag_part).norm();
    if (d == 0.0) return o == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return o / d;
}

double equal_norm_worst_case_basis(const Matrix& h, const Matrix& basis, double c) {
    if (basis.cols() == 0) return 0.0;
    if (basis.rows() != h.rows()) throw std::invalid_argument("equal_norm_worst_case: basis dimension mismatch");
    const Matrix restricted = basis.transpose() * h * basis;
    const SymmetricEigen e = symmetric_eigendecomposition(0.5 * (restricted + restricted.transpose()));
    return 0.5 * c * e.values(0);
}

double equal_norm_worst_case(const Matrix& h, const Matrix& projector, double c) {
    if (projector.rows() != h.rows() || projector.cols() != h.cols())
        throw std::invalid_argument("equal_norm_worst_case: projector dimension mismatch");
    const SymmetricEigen pe = symmetric_eigendecomposition(0.5 * (projector + projector.transpose()));
    Eigen::Index rank = 0;
    while (rank < pe.values.size() && pe.values(rank) > 0.5) ++rank;
    return equal_norm_worst_case_basis(h, pe.vectors.leftCols(rank), c);
}

namespace {

// Eigenvalue just past a cut of k retained directions; 0 when nothing is left.
double lambda_after_cut(const SymmetricEigen& e, Eigen::Index k) {
    return k < e.values.size() ? e.values(k) : 0.0;
}

Matrix allowed_basis(const HessianBundle& h, const std::vector<Eigen::Index>& cuts) {
    Eigen::Index cols = 0;
    for (std::size_t l = 0; l < cuts.size(); ++l) cols += h.block_sizes[l] - cuts[l];
    Matrix q = Matrix::Zero(h.h.rows(), cols);
    Eigen::Index row = 0;
    Eigen::Index col = 0;
    for (std::size_t l = 0; l < cuts.size(); ++l) {
        const Eigen::Index sz = h.block_sizes[l];
        const Eigen::Index free = sz - cuts[l];
        q.block(row, col, sz, free) = h.block_eigen[l].vectors.rightCols(free);
        row += sz;
        col += free;
    }
    return q;
}

}  // namespace

BoundReport bound_hierarchy_experiment(const HessianBundle& h, std::span<const double> importance,
                                       const RetentionConfig& retention, double fixed_fraction, double c) {
    if (importance.size() != h.block_sizes.size())
        throw std::invalid_argument("bound_hierarchy_experiment: one importance score per block required");
    if (!(c >= 0.0)) throw std::invalid_argument("bound_hierarchy_experiment: c must be non-negative");

    BoundReport r;
    r.update_norm_sq = c;
    double fixed_max = 0.0;
    double adaptive_max = 0.0;
    for (std::size_t l = 0; l < h.block_sizes.size(); ++l) {
        const Eigen::Index d = h.block_sizes[l];
        const Eigen::Index kf = retained_count(fixed_fraction, d);
        const Eigen::Index ka = retained_count(allocate_rank(std::max(0.0, importance[l]), retention), d);
        r.fixed_cuts.push_back(kf);
        r.adaptive_cuts.push_back(ka);
        fixed_max = std::max(fixed_max, lambda_after_cut(h.block_eigen[l], kf));
        adaptive_max = std::max(adaptive_max, lambda_after_cut(h.block_eigen[l], ka));
    }
    r.bound_full = 0.5 * h.lambda_max() * c;
    r.bound_fixed = 0.5 * fixed_max * c;
    r.bound_adaptive = 0.5 * adaptive_max * c;

    r.realized_full = equal_norm_worst_case_basis(h.h, Matrix::Identity(h.h.rows(), h.h.cols()), c);
    r.realized_fixed = equal_norm_worst_case_basis(h.h, allowed_basis(h, r.fixed_cuts), c);
    r.realized_adaptive = equal_norm_worst_case_basis(h.h, allowed_basis(h, r.adaptive_cuts), c);

    const double tol = 1e-12 * std::max(1.0, std::abs(r.bound_full));
    r.ordering_satisfied = r.bound_adaptive <= r.bound_fixed + tol && r.bound_fixed <= r.bound_full + tol;
    r.strict = r.bound_adaptive < r.bound_fixed - tol && r.bound_fixed < r.bound_full - tol;
    r.bounds_valid = r.realized_full <= r.bound_full + 1e-9 && r.realized_fixed <= r.bound_fixed + 1e-9 &&
                     r.realized_adaptive <= r.bound_adaptive + 1e-9;
    r.status = !r.ordering_satisfied ? "violated" : (r.strict ? "strict" : "non-strict");
    return r;
}

ConstructedInstance construct_premise_instance(Rng& rng, int blocks, Eigen::Index block_dim,
                                               const RetentionConfig& retention) {
    if (blocks < 1 || block_dim < 1) throw std::invalid_argument("construct_premise_instance: empty instance");
    std::vector<double> raw;
    for (int l = 0; l < blocks; ++l) raw.push_back(0.2 + 0.8 * uniform01(rng));
    const double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
    ConstructedInstance inst;
    for (double v : raw) inst.importance.push_back(v * blocks / sum);
    inst.fixed_fraction = allocate_rank(1.0, retention);

    std::vector<std::size_t> by_importance(static_cast<std::size_t>(blocks));
    std::iota(by_importance.begin(), by_importance.end(), std::size_t{0});
    std::stable_sort(by_importance.begin(), by_importance.end(),
                     [&](std::size_t a, std::size_t b) { return inst.importance[a] < inst.importance[b]; });
    std::vector<double> taus;
    for (int l = 0; l < blocks; ++l) taus.push_back(0.5 + 0.5 * uniform01(rng));
    std::sort(taus.begin(), taus.end());
    std::vector<double> tau(static_cast<std::size_t>(blocks));
    for (std::size_t rank = 0; rank < by_importance.size(); ++rank) tau[by_importance[rank]] = taus[rank];
    const double rho = 0.2 + 0.4 * uniform01(rng);

    const Eigen::Index fixed_cut = retained_count(inst.fixed_fraction, block_dim);
    Eigen::Index max_cut = 0;
    const Eigen::Index p = block_dim * blocks;
    Matrix h = Matrix::Zero(p, p);
    for (int l = 0; l < blocks; ++l) {
        const Eigen::Index k = retained_count(allocate_rank(inst.importance[static_cast<std::size_t>(l)], retention),
                                              block_dim);
        max_cut = std::max(max_cut, k);
        Vector lambda(block_dim);
        for (Eigen::Index i = 0; i < block_dim; ++i)
            lambda(i) = tau[static_cast<std::size_t>(l)] * std::pow(rho, static_cast<double>(i - k));
        const Matrix q = random_orthogonal(rng, block_dim);
        h.block(l * block_dim, l * block_dim, block_dim, block_dim) = q * lambda.asDiagonal() * q.transpose();
    }
    inst.guarantees_strict = max_cut > fixed_cut && fixed_cut >= 1 && fixed_cut < block_dim;
    inst.bundle = make_bundle(std::move(h), std::vector<Eigen::Index>(static_cast<std::size_t>(blocks), block_dim),
                              Vector::Zero(p));
    return inst;
}

double importance_curvature_correlation(std::span<const double> importance, const HessianBundle& h) {
    if (importance.size() != h.block_eigen.size() || importance.size() < 2)
        throw std::invalid_argument("importance_curvature_correlation: need one score per block and >= 2 blocks");
    const auto n = static_cast<double>(importance.size());
    std::vector<double> top;
    for (const SymmetricEigen& e : h.block_eigen) top.push_back(e.values(0));
    const double mi = std::accumulate(importance.begin(), importance.end(), 0.0) / n;
    const double mt = std::accumulate(top.begin(), top.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < top.size(); ++i) {
        sxy += (importance[i] - mi) * (top[i] - mt);
        sxx += (importance[i] - mi) * (importance[i] - mi);
        syy += (top[i] - mt) * (top[i] - mt);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

nlohmann::json BoundReport::to_json() const {
    return {{"update_norm_sq", update_norm_sq},
            {"bound_full", bound_full},
            {"bound_fixed", bound_fixed},
            {"bound_adaptive", bound_adaptive},
            {"realized_full", realized_full},
            {"realized_fixed", realized_fixed},
            {"realized_adaptive", realized_adaptive},
            {"fixed_cuts", fixed_cuts},
            {"adaptive_cuts", adaptive_cuts},
            {"ordering_satisfied", ordering_satisfied},
            {"strict", strict},
            {"bounds_valid", bounds_valid},
            {"status", status}};
}

BoundReport BoundReport::from_json(const nlohmann::json& j) {
    BoundReport r;
    r.update_norm_sq = j.at("update_norm_sq").get<double>();
    r.bound_full = j.at("bound_full").get<double>();
    r.bound_fixed = j.at("bound_fixed").get<double>();
    r.bound_adaptive = j.at("bound_adaptive").get<double>();
    r.realized_full = j.at("realized_full").get<double>();
    r.realized_fixed = j.at("realized_fixed").get<double>();
    r.realized_adaptive = j.at("realized_adaptive").get<double>();
    r.fixed_cuts = j.at("fixed_cuts").get<std::vector<Eigen::Index>>();
    r.adaptive_cuts = j.at("adaptive_cuts").get<std::vector<Eigen::Index>>();
    r.ordering_satisfied = j.at("ordering_satisfied").get<bool>();
    r.strict = j.at("strict").get<bool>();
    r.bounds_valid = j.at("bounds_valid").get<bool>();
    r.status = j.at("status").get<std::string>();
    return r;
}

void write_bound_csv(std::ostream& out, std::span<const BoundReport> reports) {
    auto num = [](double v) {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    };
    out << "trial,bound_full,bound_fixed,bound_adaptive,realized_full,realized_fixed,realized_adaptive,status\r\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const BoundReport& r = reports[i];
        out << i << ',' << num(r.bound_full) << ',' << num(r.bound_fixed) << ',' << num(r.bound_adaptive) << ','
            << num(r.realized_full) << ',' << num(r.realized_fixed) << ',' << num(r.realized_adaptive) << ','
            << r.status << "\r\n";
    }
}

}  // namespace asvd
