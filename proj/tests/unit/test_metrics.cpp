#include <gtest/gtest.h>

#include <sstream>

#include "asvd/metrics.hpp"
#include "metric_fixtures.hpp"

using namespace asvd;

namespace {

AccuracyMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    AccuracyMatrix m(static_cast<int>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t j = 0; j < rows[t].size(); ++j)
            m.set(static_cast<int>(t) + 1, static_cast<int>(j) + 1, rows[t][j]);
    return m;
}

}  // namespace

TEST(AverageAccuracy, Examples) {
    EXPECT_NEAR(average_accuracy(from_rows({{0.9}, {0.8, 0.6}})), 0.7, 1e-15);
    EXPECT_DOUBLE_EQ(average_accuracy(from_rows({{1.0}, {1.0, 1.0}, {1.0, 1.0, 1.0}})), 1.0);
    EXPECT_DOUBLE_EQ(average_accuracy(from_rows({{0.42}})), 0.42);
}

TEST(AverageAccuracy, RejectsIncompleteMatrix) {
    AccuracyMatrix m(2);
    m.set(1, 1, 0.5);
    m.set(2, 1, 0.5);
    EXPECT_THROW(average_accuracy(m), std::invalid_argument);
}

TEST(AverageAccuracy, PermutationInvariantInLastRow) {
    const double a = average_accuracy(from_rows({{0.1}, {0.2, 0.3}, {0.9, 0.4, 0.6}}));
    const double b = average_accuracy(from_rows({{0.1}, {0.2, 0.3}, {0.6, 0.9, 0.4}}));
    EXPECT_NEAR(a, b, 1e-15);
}

TEST(BackwardTransfer, HandExample) {
    const AccuracyMatrix m = from_rows({{0.9}, {0.6, 0.7}, {0.5, 0.7, 0.8}});
    EXPECT_NEAR(backward_transfer(m, 3), -0.4 / 3.0, 1e-12);
    EXPECT_NEAR(backward_transfer(m, 3), -0.1333, 1e-4);
    EXPECT_EQ(backward_transfer(m, 1), 0.0);
}

TEST(BackwardTransfer, UniformImprovementUsesOneOverT) {
    for (int T = 2; T <= 6; ++T) {
        std::vector<std::vector<double>> rows;
        for (int t = 1; t <= T; ++t) {
            std::vector<double> row;
            for (int i = 1; i <= t; ++i) row.push_back(i == t ? 0.5 : 0.6);
            rows.push_back(row);
        }
        EXPECT_NEAR(backward_transfer(from_rows(rows), T), 0.1 * (T - 1) / T, 1e-12);
    }
}

TEST(BackwardTransfer, DiagonalPreservingIsZero) {
    EXPECT_EQ(backward_transfer(from_rows({{0.3}, {0.3, 0.8}, {0.3, 0.8, 0.5}}), 3), 0.0);
}

TEST(Metrics, FixturesMatchHandComputation) {
    for (const fixture::MetricCase& c : fixture::metric_cases()) {
        const AccuracyMatrix m = from_rows(c.rows);
        EXPECT_NEAR(average_accuracy(m), c.aa, 1e-12);
        EXPECT_NEAR(backward_transfer(m, m.task_count()), c.bwt, 1e-12);
    }
}

TEST(SuiteDelta, Examples) {
    const std::vector<double> before = {0.5, 0.5}, after = {0.6, 0.8};
    EXPECT_NEAR(suite_delta(before, after), 0.2, 1e-15);
    EXPECT_EQ(suite_delta(before, before), 0.0);
    const std::vector<double> one_b = {0.3}, one_a = {0.1};
    EXPECT_DOUBLE_EQ(suite_delta(one_b, one_a), 0.1 - 0.3);
    EXPECT_THROW(suite_delta(before, one_a), std::invalid_argument);
}

TEST(AccuracyMatrix, IndexingRules) {
    AccuracyMatrix m(3);
    EXPECT_THROW(m.set(1, 2, 0.5), std::out_of_range);
    EXPECT_THROW(m.set(0, 1, 0.5), std::out_of_range);
    EXPECT_THROW(m.at(2, 1), std::logic_error);
    m.set(2, 1, 0.25);
    EXPECT_TRUE(m.has(2, 1));
    EXPECT_EQ(m.at(2, 1), 0.25);
}

TEST(RunReport, JsonRoundTrip) {
    RunReport r;
    r.config = {{"a", 1}};
    r.trainer = "adaptive_svd";
    r.seed = 3;
    r.task_order = {2, 1};
    r.accuracy_matrix = from_rows({{0.9}, {0.1 + 0.2, 0.7}});
    r.finalize_metrics();
    r.ability_before = {0.5};
    r.ability_after = {{0.4}, {0.3}};
    r.ability_deltas = {-0.1, -0.2};
    r.interference_max = 1e-17;
    r.first_order_max = 3.3e-18;
    r.parameter_count_before = r.parameter_count_after = 42;
    TaskDiagnostics d;
    d.task_id = 1;
    d.importance_raw = {0.1, 1.0 / 3.0};
    d.importance_normalized = {0.2, 1.8};
    d.allocations = {{0.2, 0.24, 2, 8}};
    r.tasks = {d};
    r.warnings = {"w"};
    r.wall_clock_seconds = 1.5;

    EXPECT_NEAR(r.aa, (0.1 + 0.2 + 0.7) / 2.0, 1e-12);
    const RunReport back = RunReport::from_json(nlohmann::json::parse(dump_report(r)));
    EXPECT_EQ(dump_report(back), dump_report(r));
    EXPECT_EQ(back.accuracy_matrix, r.accuracy_matrix);
    EXPECT_EQ(back.tasks[0].importance_raw[1], 1.0 / 3.0);
}

TEST(SummaryCsv, QuotingAndHeader) {
    EXPECT_EQ(csv_field("plain"), "plain");
    EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");

    RunReport r;
    r.trainer = "seq_full";
    r.task_order = {1, 2};
    r.accuracy_matrix = from_rows({{1.0}, {0.5, 1.0}});
    r.finalize_metrics();
    std::ostringstream out;
    const std::vector<RunReport> reports = {r};
    const std::vector<std::string> ids = {"id,with comma"};
    write_summary_csv(out, reports, ids);
    const std::string text = out.str();
    EXPECT_EQ(text.substr(0, text.find("\r\n")),
              "run_id,trainer,seed,task_order,aa,bwt,interference_max,first_order_max,ability_delta_final");
    EXPECT_NE(text.find("\r\n\"id,with comma\",seq_full,0,1 2,0.75,"), std::string::npos) << text;
}
