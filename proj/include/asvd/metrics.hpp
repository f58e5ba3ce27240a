#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace asvd {

/// Lower-triangular record a[t][j]: metric on task j after finishing task t,
/// with 1 <= j <= t <= T. Accessors are 1-based to match the usual notation.
class AccuracyMatrix {
public:
    AccuracyMatrix() = default;
    explicit AccuracyMatrix(int task_count);

    int task_count() const { return task_count_; }
    void set(int t, int j, double value);
    double at(int t, int j) const;
    bool has(int t, int j) const;
    /// Row t fully populated.
    bool row_complete(int t) const;
    bool complete() const { return task_count_ > 0 && row_complete(task_count_); }
    std::vector<double> row(int t) const;

    nlohmann::json to_json() const;
    static AccuracyMatrix from_json(const nlohmann::json& j);

    friend bool operator==(const AccuracyMatrix&, const AccuracyMatrix&) = default;

private:
    void check(int t, int j) const;

    int task_count_ = 0;
    std::vector<std::vector<std::optional<double>>> rows_;
};

/// Mean of the last row.
double average_accuracy(const AccuracyMatrix& m);

/// (1/t) * sum_{i<t} (a[t][i] - a[i][i]). The normalization is 1/t, not
/// 1/(t-1), so results stay comparable with published BWT numbers. t = 1
/// gives 0 (empty sum).
double backward_transfer(const AccuracyMatrix& m, int t);

/// Mean of after[i] - before[i].
double suite_delta(std::span<const double> before, std::span<const double> after);

struct LayerAllocation {
    double importance = 1.0;
    double fraction = 0.0;
    long long retained = 0;
    long long capacity = 0;
};

struct TaskDiagnostics {
    int task_id = 0;
    std::vector<double> importance_raw;
    std::vector<double> importance_normalized;
    std::vector<LayerAllocation> allocations;
    double final_train_loss = 0.0;
    long long steps = 0;
};

struct RunReport {
    nlohmann::json config;  // fully resolved experiment config
    std::string trainer;
    std::uint64_t seed = 0;
    std::vector<int> task_order;
    AccuracyMatrix accuracy_matrix;
    double aa = 0.0;
    double bwt = 0.0;
    std::vector<double> ability_before;
    std::vector<std::vector<double>> ability_after;  // per task
    std::vector<double> ability_deltas;              // per task
    double interference_max = 0.0;
    double first_order_max = 0.0;
    long long parameter_count_before = 0;
    long long parameter_count_after = 0;
    std::vector<TaskDiagnostics> tasks;
    std::vector<std::string> warnings;
    double wall_clock_seconds = 0.0;

    /// Fills aa and bwt from the accuracy matrix.
    void finalize_metrics();

    nlohmann::json to_json() const;
    static RunReport from_json(const nlohmann::json& j);
};

/// Canonical serialization: two-space indented JSON with a trailing newline.
std::string dump_report(const RunReport& r);

/// Header plus one row per report: run_id,trainer,seed,task_order,aa,bwt,...
void write_summary_csv(std::ostream& out, std::span<const RunReport> reports, std::span<const std::string> run_ids);

/// RFC-4180 quoting of a single field.
std::string csv_field(const std::string& s);

}  // namespace asvd
