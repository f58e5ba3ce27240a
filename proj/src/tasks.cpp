#include "asvd/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "asvd/rng.hpp"

namespace asvd {

namespace {

std::string stream_name(int task_id, const char* split) {
    return "data/task" + std::to_string(task_id) + "/" + split;
}

Matrix plane_rotation(int dim, double angle) {
    Matrix r = Matrix::Identity(dim, dim);
    for (int p = 0; 2 * p + 1 < dim; ++p) {
        const double a = angle * static_cast<double>(p + 1);
        const double c = std::cos(a);
        const double s = std::sin(a);
        r(2 * p, 2 * p) = c;
        r(2 * p, 2 * p + 1) = -s;
        r(2 * p + 1, 2 * p) = s;
        r(2 * p + 1, 2 * p + 1) = c;
    }
    return r;
}

Matrix class_means(const TaskStreamSpec& spec) {
    Rng rng = named_stream(spec.seed, "data/means");
    Matrix means(spec.dimension, spec.classes);
    for (int c = 0; c < spec.classes; ++c) {
        Vector m = gaussian_vector(rng, spec.dimension);
        means.col(c) = spec.separation * m / m.norm();
    }
    return means;
}

// Balanced labels 0,1,..,C-1,0,1,.. with Gaussian clusters around `means`,
// followed by an input-space transform.
Batch mixture_split(const TaskStreamSpec& spec, const Matrix& means, const Matrix& transform, Rng& rng, int n) {
    Batch b;
    b.inputs.resize(spec.dimension, n);
    b.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int y = i % spec.classes;
        b.labels[static_cast<std::size_t>(i)] = y;
        const Vector x = means.col(y) + gaussian_vector(rng, spec.dimension, spec.noise);
        b.inputs.col(i) = transform * x;
    }
    return b;
}

Matrix permutation_matrix(const std::vector<int>& perm) {
    const auto n = static_cast<Eigen::Index>(perm.size());
    Matrix p = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) p(i, perm[static_cast<std::size_t>(i)]) = 1.0;
    return p;
}

std::vector<TaskData> generate_classification(const TaskStreamSpec& spec) {
    const Matrix means = class_means(spec);
    std::vector<TaskData> tasks;
    Rng perm_rng = named_stream(spec.seed, "data/permutations");
    for (int t = 1; t <= spec.task_count; ++t) {
        Matrix transform;
        if (spec.family == TaskFamily::rotated_gaussians) {
            transform = plane_rotation(spec.dimension,
                                       2.0 * std::numbers::pi * static_cast<double>(t - 1) / spec.task_count);
        } else {
            std::vector<int> perm(static_cast<std::size_t>(spec.dimension));
            std::iota(perm.begin(), perm.end(), 0);
            const std::vector<Eigen::Index> drawn = shuffled_indices(spec.dimension, perm_rng);
            if (t > 1) std::copy(drawn.begin(), drawn.end(), perm.begin());
            transform = permutation_matrix(perm);
        }
        Rng train_rng = named_stream(spec.seed, stream_name(t, "train"));
        Rng test_rng = named_stream(spec.seed, stream_name(t, "test"));
        TaskData td;
        td.task_id = t;
        td.kind = TaskKind::classification;
        td.class_count = spec.classes;
        td.train = mixture_split(spec, means, transform, train_rng, spec.train_samples);
        td.test = mixture_split(spec, means, transform, test_rng, spec.test_samples);
        tasks.push_back(std::move(td));
    }
    return tasks;
}

std::vector<TaskData> generate_regression(const TaskStreamSpec& spec) {
    Rng basis_rng = named_stream(spec.seed, "data/basis");
    const Matrix rotation = random_orthogonal(basis_rng, spec.dimension);
    const int block = std::max(1, spec.dimension / spec.task_count);
    std::vector<TaskData> tasks;
    for (int t = 1; t <= spec.task_count; ++t) {
        Matrix basis(spec.dimension, block);
        for (int j = 0; j < block; ++j) basis.col(j) = rotation.col(((t - 1) * block + j) % spec.dimension);
        Rng coef_rng = named_stream(spec.seed, "data/task" + std::to_string(t) + "/weight");
        const Matrix a = gaussian_matrix(coef_rng, spec.target_dim, block);
        const Matrix w = a * basis.transpose();

        auto split = [&](const char* name, int n) {
            Rng rng = named_stream(spec.seed, stream_name(t, name));
            Batch b;
            b.inputs = gaussian_matrix(rng, spec.dimension, n);
            b.targets = w * b.inputs + gaussian_matrix(rng, spec.target_dim, n, spec.noise);
            return b;
        };
        TaskData td;
        td.task_id = t;
        td.kind = TaskKind::regression;
        td.target_dim = spec.target_dim;
        td.train = split("train", spec.train_samples);
        td.test = split("test", spec.test_samples);
        tasks.push_back(std::move(td));
    }
    return tasks;
}

void put_number(std::ostream& out, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
}

}  // namespace

std::string_view to_string(TaskFamily f) {
    switch (f) {
        case TaskFamily::rotated_gaussians: return "rotated_gaussians";
        case TaskFamily::permuted_features: return "permuted_features";
        case TaskFamily::subspace_regression: return "subspace_regression";
    }
    return "?";
}

TaskFamily task_family_from_string(std::string_view s) {
    if (s == "rotated_gaussians") return TaskFamily::rotated_gaussians;
    if (s == "permuted_features") return TaskFamily::permuted_features;
    if (s == "subspace_regression") return TaskFamily::subspace_regression;
    throw std::invalid_argument("unknown task family '" + std::string(s) + "'");
}

void TaskStreamSpec::validate() const {
    if (task_count < 1) throw std::invalid_argument("task_count must be >= 1");
    if (train_samples < 1 || test_samples < 1) throw std::invalid_argument("sample counts must be positive");
    if (dimension < 1) throw std::invalid_argument("dimension must be positive");
    if (!(noise >= 0.0)) throw std::invalid_argument("noise must be non-negative");
    if (kind() == TaskKind::classification && classes < 2) throw std::invalid_argument("classes must be >= 2");
    if (kind() == TaskKind::regression && target_dim < 1) throw std::invalid_argument("target_dim must be positive");
    if (!(separation > 0.0)) throw std::invalid_argument("separation must be positive");
}

TaskKind TaskStreamSpec::kind() const {
    return family == TaskFamily::subspace_regression ? TaskKind::regression : TaskKind::classification;
}

int TaskStreamSpec::output_dim() const {
    return kind() == TaskKind::classification ? classes : target_dim;
}

LossKind TaskData::loss_kind() const {
    return kind == TaskKind::classification ? LossKind::softmax_cross_entropy : LossKind::mean_squared_error;
}

std::vector<TaskData> generate(const TaskStreamSpec& spec) {
    spec.validate();
    return spec.kind() == TaskKind::classification ? generate_classification(spec) : generate_regression(spec);
}

double evaluate_batch(const Network& net, const Batch& batch, TaskKind kind) {
    if (batch.size() == 0) throw std::invalid_argument("evaluate: empty batch");
    const Matrix pred = net.forward(batch.inputs).prediction;
    if (kind == TaskKind::regression) return (pred - batch.targets).squaredNorm() / static_cast<double>(batch.size());
    Eigen::Index hits = 0;
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
        Eigen::Index arg = 0;
        pred.col(c).maxCoeff(&arg);
        if (arg == batch.labels[static_cast<std::size_t>(c)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(batch.size());
}

double evaluate(const Network& net, const TaskData& task) {
    return evaluate_batch(net, task.test, task.kind);
}

Batch select_columns(const Batch& batch, std::span<const Eigen::Index> idx) {
    Batch out;
    const auto n = static_cast<Eigen::Index>(idx.size());
    out.inputs.resize(batch.inputs.rows(), n);
    const bool has_labels = !batch.labels.empty();
    const bool has_targets = batch.targets.size() > 0;
    if (has_targets) out.targets.resize(batch.targets.rows(), n);
    if (has_labels) out.labels.resize(idx.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index src = idx[static_cast<std::size_t>(i)];
        out.inputs.col(i) = batch.inputs.col(src);
        if (has_targets) out.targets.col(i) = batch.targets.col(src);
        if (has_labels) out.labels[static_cast<std::size_t>(i)] = batch.labels[static_cast<std::size_t>(src)];
    }
    return out;
}

Batch concatenate(std::span<const Batch> batches) {
    if (batches.empty()) throw std::invalid_argument("concatenate: nothing to join");
    Eigen::Index n = 0;
    for (const Batch& b : batches) n += b.size();
    Batch out;
    out.inputs.resize(batches.front().inputs.rows(), n);
    const bool has_targets = batches.front().targets.size() > 0;
    if (has_targets) out.targets.resize(batches.front().targets.rows(), n);
    Eigen::Index at = 0;
    for (const Batch& b : batches) {
        out.inputs.middleCols(at, b.size()) = b.inputs;
        if (has_targets) out.targets.middleCols(at, b.size()) = b.targets;
        out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
        at += b.size();
    }
    return out;
}

void write_tasks_csv(std::ostream& out, std::span<const TaskData> tasks) {
    if (tasks.empty()) return;
    const TaskData& first = tasks.front();
    out << "task_id,split";
    if (first.kind == TaskKind::classification) {
        out << ",label";
    } else {
        for (int j = 0; j < first.target_dim; ++j) out << ",y" << j;
    }
    for (Eigen::Index j = 0; j < first.train.inputs.rows(); ++j) out << ",x" << j;
    out << "\n";
    for (const TaskData& t : tasks) {
        for (const auto& [name, batch] : {std::pair<const char*, const Batch*>{"train", &t.train}, {"test", &t.test}}) {
            for (Eigen::Index i = 0; i < batch->size(); ++i) {
                out << t.task_id << ',' << name;
                if (t.kind == TaskKind::classification) {
                    out << ',' << batch->labels[static_cast<std::size_t>(i)];
                } else {
                    for (Eigen::Index j = 0; j < batch->targets.rows(); ++j) {
                        out << ',';
                        put_number(out, batch->targets(j, i));
                    }
                }
                for (Eigen::Index j = 0; j < batch->inputs.rows(); ++j) {
                    out << ',';
                    put_number(out, batch->inputs(j, i));
                }
                out << '\n';
            }
        }
    }
}

}  // namespace asvd
