#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "asvd/importance.hpp"
#include "asvd/metrics.hpp"
#include "asvd/network.hpp"
#include "asvd/subspace.hpp"
#include "asvd/tasks.hpp"

namespace asvd {

enum class TrainerKind {
    adaptive_svd,            // importance-weighted retention, projected updates
    fixed_rank,              // the same retained fraction for every layer
    fixed_budget,            // retain the top (i-1)/T fraction at task i
    seq_full,                // plain sequential fine-tuning
    no_projection_ablation,  // restore the recorded high triplets after each free update
    joint_multitask,         // at task t, train on the union of tasks 1..t
};

std::string_view to_string(TrainerKind k);
TrainerKind trainer_kind_from_string(std::string_view s);

/// True for the trainers whose every applied update is projected.
bool is_projected(TrainerKind k);

enum class OptimizerKind { sgd, sgd_momentum };

std::string_view to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(std::string_view s);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::sgd_momentum;
    double learning_rate = 0.05;
    double momentum = 0.9;
    int epochs_per_task = 5;
    int batch_size = 32;

    void validate() const;
};

enum class ImportanceSplit { train, test };

struct TrainerConfig {
    TrainerKind kind = TrainerKind::adaptive_svd;
    OptimizerConfig optimizer;
    RetentionConfig retention;
    double fixed_fraction = 0.5;  // fixed_rank only
    std::size_t importance_samples = kDefaultImportanceSamples;
    ImportanceSplit importance_split = ImportanceSplit::train;
    /// Check the interference bound every n-th step (1 = every step).
    int invariant_check_interval = 1;
    /// Track <P_U G_prev P_V, dW> against the previous task's gradient.
    bool track_first_order = true;

    void validate() const;
};

/// Bound on |U_h^T dW V_h|_F for every applied step of a projected trainer.
inline constexpr double kInterferenceTolerance = 1e-8;

class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

class InvariantViolation : public std::runtime_error {
public:
    explicit InvariantViolation(const std::string& what) : std::runtime_error(what) {}
};

struct ContinualResult {
    Network net;
    AccuracyMatrix accuracy;
    std::vector<TaskDiagnostics> tasks;
    std::vector<std::string> warnings;
    double interference_max = 0.0;
    /// max over steps of |sum_l <P_U G_prev P_V, dW>_F|.
    double first_order_max = 0.0;
    long long parameter_count_before = 0;
    long long parameter_count_after = 0;
    std::vector<double> suite_before;
    std::vector<std::vector<double>> suite_after;  // per task
};

/// weight - project_gradient(step, p).
Matrix apply_projected_step(const Matrix& weight, const Matrix& step, const SubspacePartition& p);

/// Runs the task sequence in the given order. Row t of the accuracy matrix is
/// filled after the t-th task of `tasks`. `suite` is an optional set of
/// held-out tasks evaluated before training and after every task. All
/// mini-batch sampling draws from the "batching" stream of `seed`.
ContinualResult train_continual(Network net, std::span<const TaskData> tasks, const TrainerConfig& config,
                                std::uint64_t seed, std::span<const TaskData> suite = {});

/// Packs a result into a report (metrics finalized, wall clock left at 0).
RunReport make_run_report(const ContinualResult& result, const TrainerConfig& config, std::uint64_t seed,
                          std::vector<int> task_order, nlohmann::json config_echo);

struct HalvedRetentionComparison {
    RunReport base;
    RunReport halved;
};

/// Runs adaptive_svd with the configured mrr/trr and again with both halved.
HalvedRetentionComparison run_ablation_halved_retention(const Network& init, std::span<const TaskData> tasks,
                                                        const TrainerConfig& base, std::uint64_t seed);

}  // namespace asvd
