#include "asvd/continual.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "asvd/rng.hpp"

namespace asvd {

std::string_view to_string(TrainerKind k) {
    switch (k) {
        case TrainerKind::adaptive_svd: return "adaptive_svd";
        case TrainerKind::fixed_rank: return "fixed_rank";
        case TrainerKind::fixed_budget: return "fixed_budget";
        case TrainerKind::seq_full: return "seq_full";
        case TrainerKind::no_projection_ablation: return "no_projection_ablation";
        case TrainerKind::joint_multitask: return "joint_multitask";
    }
    return "?";
}

TrainerKind trainer_kind_from_string(std::string_view s) {
    for (TrainerKind k : {TrainerKind::adaptive_svd, TrainerKind::fixed_rank, TrainerKind::fixed_budget,
                          TrainerKind::seq_full, TrainerKind::no_projection_ablation, TrainerKind::joint_multitask})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown trainer '" + std::string(s) + "'");
}

bool is_projected(TrainerKind k) {
    return k == TrainerKind::adaptive_svd || k == TrainerKind::fixed_rank || k == TrainerKind::fixed_budget;
}

std::string_view to_string(OptimizerKind k) {
    return k == OptimizerKind::sgd ? "sgd" : "sgd_momentum";
}

OptimizerKind optimizer_kind_from_string(std::string_view s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "sgd_momentum") return OptimizerKind::sgd_momentum;
    throw std::invalid_argument("unknown optimizer '" + std::string(s) + "'");
}

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
    if (epochs_per_task < 1) throw std::invalid_argument("epochs_per_task must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
}

void TrainerConfig::validate() const {
    optimizer.validate();
    if (!(fixed_fraction >= 0.0 && fixed_fraction <= 1.0)) throw std::invalid_argument("fixed_fraction must lie in [0, 1]");
    if (importance_samples == 0) throw std::invalid_argument("importance_samples must be positive");
    if (invariant_check_interval < 1) throw std::invalid_argument("invariant_check_interval must be >= 1");
}

Matrix apply_projected_step(const Matrix& weight, const Matrix& step, const SubspacePartition& p) {
    if (weight.rows() != step.rows() || weight.cols() != step.cols())
        throw std::invalid_argument("apply_projected_step: step shape does not match weight");
    return weight - project_gradient(step, p);
}

namespace {

struct LayerPlan {
    std::optional<SubspacePartition> partition;
    Matrix retained_part;  // U_h diag(sigma_h) V_h^T, for no_projection_ablation
    Matrix first_order_ref;  // P_U G_prev P_V
};

double effective_importance(double normalized) {
    // Normalized scores can be negative when individual cosines are; the
    // allocation formula needs a non-negative score.
    return std::max(0.0, normalized);
}

// Restores the recorded top-r triplets: keep W's own tail beyond rank r and
// put back the frozen high block.
Matrix restore_high_triplets(const Matrix& w, const LayerPlan& plan) {
    const SubspacePartition& p = *plan.partition;
    if (p.r_count == 0) return w;
    const SvdFactorization f = svd(w);
    const Eigen::Index k = f.sigma.size();
    const Eigen::Index tail = k - p.r_count;
    Matrix out = plan.retained_part;
    if (tail > 0)
        out += f.u.rightCols(tail) * f.sigma.tail(tail).asDiagonal() * f.v.rightCols(tail).transpose();
    return out;
}

class ContinualRunner {
public:
    ContinualRunner(Network net, std::span<const TaskData> tasks, const TrainerConfig& config, std::uint64_t seed,
                    std::span<const TaskData> suite)
        : tasks_(tasks), suite_(suite), config_(config), batching_(named_stream(seed, "batching")) {
        result_.net = std::move(net);
    }

    ContinualResult run() {
        config_.validate();
        if (tasks_.empty()) throw std::invalid_argument("train_continual: empty task stream");
        for (const TaskData& t : tasks_) check_dims(t);
        for (const TaskData& t : suite_) check_dims(t);

        const int T = static_cast<int>(tasks_.size());
        result_.accuracy = AccuracyMatrix(T);
        result_.parameter_count_before = result_.net.parameter_count();
        for (const TaskData& s : suite_) result_.suite_before.push_back(evaluate(result_.net, s));

        for (int t = 1; t <= T; ++t) {
            TaskDiagnostics diag;
            diag.task_id = tasks_[static_cast<std::size_t>(t - 1)].task_id;
            plan_task(t, diag);
            train_task(t, diag);
            for (int j = 1; j <= t; ++j)
                result_.accuracy.set(t, j, evaluate(result_.net, tasks_[static_cast<std::size_t>(j - 1)]));
            std::vector<double> suite_scores;
            for (const TaskData& s : suite_) suite_scores.push_back(evaluate(result_.net, s));
            result_.suite_after.push_back(std::move(suite_scores));
            result_.tasks.push_back(std::move(diag));
        }
        result_.parameter_count_after = result_.net.parameter_count();
        return std::move(result_);
    }

private:
    void check_dims(const TaskData& t) const {
        if (t.train.inputs.rows() != result_.net.input_dim())
            throw std::invalid_argument("train_continual: task input dim does not match the network");
        const Eigen::Index out = t.kind == TaskKind::classification ? t.class_count : t.target_dim;
        if (out != result_.net.output_dim())
            throw std::invalid_argument("train_continual: task output dim does not match the network");
    }

    std::vector<double> fractions_for_task(int t, TaskDiagnostics& diag) {
        const std::size_t L = result_.net.layer_count();
        const int T = static_cast<int>(tasks_.size());
        switch (config_.kind) {
            case TrainerKind::fixed_rank:
                return std::vector<double>(L, config_.fixed_fraction);
            case TrainerKind::fixed_budget:
                return std::vector<double>(L, static_cast<double>(t - 1) / static_cast<double>(T));
            case TrainerKind::adaptive_svd:
            case TrainerKind::no_projection_ablation: {
                ImportanceProfile profile;
                if (t == 1) {
                    profile = uniform_profile(L);
                } else {
                    const TaskData& prev = tasks_[static_cast<std::size_t>(t - 2)];
                    const Matrix& source =
                        config_.importance_split == ImportanceSplit::train ? prev.train.inputs : prev.test.inputs;
                    const std::size_t n =
                        std::min<std::size_t>(config_.importance_samples, static_cast<std::size_t>(source.cols()));
                    profile = profile_for_task(result_.net, source, n);
                }
                if (!profile.warning.empty())
                    result_.warnings.push_back("task " + std::to_string(t) + ": " + profile.warning);
                diag.importance_raw = profile.raw;
                diag.importance_normalized = profile.normalized;
                std::vector<double> fr;
                for (double imp : profile.normalized)
                    fr.push_back(allocate_rank(effective_importance(imp), config_.retention));
                return fr;
            }
            case TrainerKind::seq_full:
            case TrainerKind::joint_multitask:
                return {};
        }
        return {};
    }

    void plan_task(int t, TaskDiagnostics& diag) {
        plans_.assign(result_.net.layer_count(), LayerPlan{});
        const std::vector<double> fractions = fractions_for_task(t, diag);
        if (fractions.empty()) return;

        std::optional<GradientResult> prev_grad;
        if (is_projected(config_.kind) && config_.track_first_order && t >= 2) {
            const TaskData& prev = tasks_[static_cast<std::size_t>(t - 2)];
            prev_grad = backward(result_.net, prev.train, prev.loss_kind());
        }

        for (std::size_t l = 0; l < plans_.size(); ++l) {
            const Matrix& w = result_.net.layer(l).weight;
            const SvdFactorization f = svd(w);
            LayerPlan& plan = plans_[l];
            plan.partition = partition(f, fractions[l]);
            const SubspacePartition& p = *plan.partition;
            if (config_.kind == TrainerKind::no_projection_ablation)
                plan.retained_part = p.u_high * p.sigma_high.asDiagonal() * p.v_high.transpose();
            if (prev_grad && p.r_count > 0) {
                const Matrix& g = prev_grad->gradients[l];
                plan.first_order_ref = p.u_high * (p.u_high.transpose() * g * p.v_high) * p.v_high.transpose();
            }
            LayerAllocation a;
            a.importance = diag.importance_normalized.empty() ? 1.0 : diag.importance_normalized[l];
            a.fraction = fractions[l];
            a.retained = p.r_count;
            a.capacity = f.sigma.size();
            diag.allocations.push_back(a);
        }
    }

    Batch training_set(int t) const {
        if (config_.kind != TrainerKind::joint_multitask) return tasks_[static_cast<std::size_t>(t - 1)].train;
        std::vector<Batch> parts;
        for (int j = 1; j <= t; ++j) parts.push_back(tasks_[static_cast<std::size_t>(j - 1)].train);
        return concatenate(parts);
    }

    void train_task(int t, TaskDiagnostics& diag) {
        const TaskData& task = tasks_[static_cast<std::size_t>(t - 1)];
        const LossKind loss_kind = task.loss_kind();
        const Batch data = training_set(t);
        const OptimizerConfig& opt = config_.optimizer;
        const bool projected = is_projected(config_.kind);
        const bool use_momentum = opt.kind == OptimizerKind::sgd_momentum;

        // Optimizer state starts from zero at every task boundary.
        std::vector<Matrix> velocity;
        for (const Layer& l : result_.net.layers()) velocity.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));

        const Eigen::Index n = data.size();
        const Eigen::Index bs = std::min<Eigen::Index>(opt.batch_size, n);
        for (int epoch = 0; epoch < opt.epochs_per_task; ++epoch) {
            const std::vector<Eigen::Index> order = shuffled_indices(n, batching_);
            for (Eigen::Index start = 0; start < n; start += bs) {
                const Eigen::Index len = std::min(bs, n - start);
                const Batch mb = select_columns(data, std::span(order).subspan(static_cast<std::size_t>(start),
                                                                               static_cast<std::size_t>(len)));
                GradientResult g = backward(result_.net, mb, loss_kind);
                if (!std::isfinite(g.loss))
                    throw TrainingError("non-finite loss at task " + std::to_string(t) + ", epoch " +
                                        std::to_string(epoch) + ", step " + std::to_string(diag.steps));

                double first_order = 0.0;
                const bool check = (diag.steps % config_.invariant_check_interval) == 0;
                for (std::size_t l = 0; l < result_.net.layer_count(); ++l) {
                    Matrix& w = result_.net.layer(l).weight;
                    const LayerPlan& plan = plans_[l];
                    Matrix grad = std::move(g.gradients[l]);
                    if (projected) grad = project_gradient(grad, *plan.partition);
                    Matrix step;
                    if (use_momentum) {
                        velocity[l] = opt.momentum * velocity[l] + grad;
                        step = opt.learning_rate * velocity[l];
                    } else {
                        step = opt.learning_rate * grad;
                    }
                    if (projected) {
                        const Matrix delta = project_gradient(step, *plan.partition);
                        if (check) {
                            const double inter = interference(delta, *plan.partition);
                            result_.interference_max = std::max(result_.interference_max, inter);
                            if (inter > kInterferenceTolerance)
                                throw InvariantViolation("interference " + std::to_string(inter) + " at task " +
                                                         std::to_string(t) + ", layer " + std::to_string(l));
                        }
                        if (plan.first_order_ref.size() > 0) first_order += frobenius_inner(plan.first_order_ref, delta);
                        w -= delta;
                    } else {
                        w -= step;
                        if (config_.kind == TrainerKind::no_projection_ablation) w = restore_high_triplets(w, plan);
                    }
                }
                result_.first_order_max = std::max(result_.first_order_max, std::abs(first_order));
                diag.final_train_loss = g.loss;
                ++diag.steps;
            }
        }
    }

    std::span<const TaskData> tasks_;
    std::span<const TaskData> suite_;
    TrainerConfig config_;
    Rng batching_;
    std::vector<LayerPlan> plans_;
    ContinualResult result_;
};

}  // namespace

ContinualResult train_continual(Network net, std::span<const TaskData> tasks, const TrainerConfig& config,
                                std::uint64_t seed, std::span<const TaskData> suite) {
    return ContinualRunner(std::move(net), tasks, config, seed, suite).run();
}

RunReport make_run_report(const ContinualResult& result, const TrainerConfig& config, std::uint64_t seed,
                          std::vector<int> task_order, nlohmann::json config_echo) {
    RunReport r;
    r.config = std::move(config_echo);
    r.trainer = std::string(to_string(config.kind));
    r.seed = seed;
    r.task_order = std::move(task_order);
    r.accuracy_matrix = result.accuracy;
    r.ability_before = result.suite_before;
    r.ability_after = result.suite_after;
    if (!result.suite_before.empty())
        for (const auto& after : result.suite_after) r.ability_deltas.push_back(suite_delta(result.suite_before, after));
    r.interference_max = result.interference_max;
    r.first_order_max = result.first_order_max;
    r.parameter_count_before = result.parameter_count_before;
    r.parameter_count_after = result.parameter_count_after;
    r.tasks = result.tasks;
    r.warnings = result.warnings;
    r.finalize_metrics();
    return r;
}

HalvedRetentionComparison run_ablation_halved_retention(const Network& init, std::span<const TaskData> tasks,
                                                        const TrainerConfig& base, std::uint64_t seed) {
    TrainerConfig a = base;
    a.kind = TrainerKind::adaptive_svd;
    TrainerConfig b = a;
    b.retention = a.retention.halved();
    std::vector<int> order;
    for (const TaskData& t : tasks) order.push_back(t.task_id);
    const nlohmann::json echo_a = {{"mrr", a.retention.mrr()}, {"trr", a.retention.trr()}};
    const nlohmann::json echo_b = {{"mrr", b.retention.mrr()}, {"trr", b.retention.trr()}};
    return {make_run_report(train_continual(init, tasks, a, seed), a, seed, order, echo_a),
            make_run_report(train_continual(init, tasks, b, seed), b, seed, order, echo_b)};
}

}  // namespace asvd
