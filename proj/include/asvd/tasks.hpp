#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "asvd/network.hpp"

namespace asvd {

enum class TaskFamily { rotated_gaussians, permuted_features, subspace_regression };

std::string_view to_string(TaskFamily f);
TaskFamily task_family_from_string(std::string_view s);

enum class TaskKind { classification, regression };

/// Parameters of a synthetic task sequence. generate() is a pure function of
/// this struct.
struct TaskStreamSpec {
    TaskFamily family = TaskFamily::rotated_gaussians;
    int task_count = 5;
    int train_samples = 1000;
    int test_samples = 500;
    int dimension = 16;
    double noise = 1.0;
    std::uint64_t seed = 0;
    int classes = 4;        // classification families
    int target_dim = 4;     // subspace_regression
    double separation = 3.0;  // norm of class means

    void validate() const;
    TaskKind kind() const;
    int output_dim() const;
};

struct TaskData {
    int task_id = 0;  // 1-based
    TaskKind kind = TaskKind::classification;
    int class_count = 0;
    int target_dim = 0;
    Batch train;
    Batch test;

    LossKind loss_kind() const;
};

/// rotated_gaussians: task t rotates the shared class means by 2*pi*(t-1)/T,
///   coordinate plane (2p, 2p+1) turning at frequency p+1 so the orbit of a
///   mean spans many directions.
/// permuted_features: one seeded Gaussian-mixture problem; task t applies a
///   seeded permutation of input coordinates (identity for t = 1).
/// subspace_regression: y = A_t B_t^T x + noise with B_t an orthonormal basis
///   of a task-specific block of a seeded rotation of the input space.
std::vector<TaskData> generate(const TaskStreamSpec& spec);

/// Accuracy (fraction of argmax hits) for classification, mean squared error
/// for regression, on the test split.
double evaluate(const Network& net, const TaskData& task);
double evaluate_batch(const Network& net, const Batch& batch, TaskKind kind);

/// Columns sample_indices of batch, in order.
Batch select_columns(const Batch& batch, std::span<const Eigen::Index> sample_indices);
Batch concatenate(std::span<const Batch> batches);

/// CSV with header task_id,split,label|y0..,x0..; one row per sample.
void write_tasks_csv(std::ostream& out, std::span<const TaskData> tasks);

}  // namespace asvd
