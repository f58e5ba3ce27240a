#include "asvd/metrics.hpp"

#include <charconv>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace asvd {

using nlohmann::json;

AccuracyMatrix::AccuracyMatrix(int task_count) : task_count_(task_count) {
    if (task_count < 1) throw std::invalid_argument("AccuracyMatrix: task_count must be >= 1");
    rows_.resize(static_cast<std::size_t>(task_count));
    for (int t = 1; t <= task_count; ++t) rows_[static_cast<std::size_t>(t - 1)].resize(static_cast<std::size_t>(t));
}

void AccuracyMatrix::check(int t, int j) const {
    if (t < 1 || t > task_count_ || j < 1 || j > t)
        throw std::out_of_range("AccuracyMatrix: index (" + std::to_string(t) + ", " + std::to_string(j) +
                                ") outside lower triangle of size " + std::to_string(task_count_));
}

void AccuracyMatrix::set(int t, int j, double value) {
    check(t, j);
    rows_[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(j - 1)] = value;
}

bool AccuracyMatrix::has(int t, int j) const {
    check(t, j);
    return rows_[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(j - 1)].has_value();
}

double AccuracyMatrix::at(int t, int j) const {
    check(t, j);
    const auto& v = rows_[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(j - 1)];
    if (!v) throw std::logic_error("AccuracyMatrix: entry (" + std::to_string(t) + ", " + std::to_string(j) + ") unset");
    return *v;
}

bool AccuracyMatrix::row_complete(int t) const {
    if (t < 1 || t > task_count_) return false;
    for (const auto& v : rows_[static_cast<std::size_t>(t - 1)])
        if (!v) return false;
    return true;
}

std::vector<double> AccuracyMatrix::row(int t) const {
    std::vector<double> out;
    for (int j = 1; j <= t; ++j) out.push_back(at(t, j));
    return out;
}

json AccuracyMatrix::to_json() const {
    json rows = json::array();
    for (const auto& r : rows_) {
        json row = json::array();
        for (const auto& v : r) row.push_back(v ? json(*v) : json(nullptr));
        rows.push_back(std::move(row));
    }
    return rows;
}

AccuracyMatrix AccuracyMatrix::from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw std::invalid_argument("accuracy_matrix must be a non-empty array");
    AccuracyMatrix m(static_cast<int>(j.size()));
    for (std::size_t t = 0; t < j.size(); ++t) {
        if (!j[t].is_array() || j[t].size() != t + 1)
            throw std::invalid_argument("accuracy_matrix row " + std::to_string(t + 1) + " has wrong length");
        for (std::size_t c = 0; c <= t; ++c)
            if (!j[t][c].is_null()) m.set(static_cast<int>(t + 1), static_cast<int>(c + 1), j[t][c].get<double>());
    }
    return m;
}

double average_accuracy(const AccuracyMatrix& m) {
    if (!m.complete()) throw std::invalid_argument("average_accuracy: last row of the accuracy matrix is incomplete");
    const std::vector<double> last = m.row(m.task_count());
    return std::accumulate(last.begin(), last.end(), 0.0) / static_cast<double>(last.size());
}

double backward_transfer(const AccuracyMatrix& m, int t) {
    if (t < 1 || t > m.task_count()) throw std::invalid_argument("backward_transfer: t out of range");
    if (t == 1) return 0.0;
    double sum = 0.0;
    for (int i = 1; i <= t - 1; ++i) sum += m.at(t, i) - m.at(i, i);
    return sum / static_cast<double>(t);
}

double suite_delta(std::span<const double> before, std::span<const double> after) {
    if (before.size() != after.size()) throw std::invalid_argument("suite_delta: length mismatch");
    if (before.empty()) throw std::invalid_argument("suite_delta: empty suite");
    double sum = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) sum += after[i] - before[i];
    return sum / static_cast<double>(before.size());
}

void RunReport::finalize_metrics() {
    aa = average_accuracy(accuracy_matrix);
    bwt = backward_transfer(accuracy_matrix, accuracy_matrix.task_count());
}

namespace {

json task_diag_to_json(const TaskDiagnostics& d) {
    json alloc = json::array();
    for (const LayerAllocation& a : d.allocations)
        alloc.push_back({{"importance", a.importance},
                         {"fraction", a.fraction},
                         {"retained", a.retained},
                         {"capacity", a.capacity}});
    return {{"task_id", d.task_id},
            {"importance_raw", d.importance_raw},
            {"importance_normalized", d.importance_normalized},
            {"allocations", alloc},
            {"final_train_loss", d.final_train_loss},
            {"steps", d.steps}};
}

TaskDiagnostics task_diag_from_json(const json& j) {
    TaskDiagnostics d;
    d.task_id = j.at("task_id").get<int>();
    d.importance_raw = j.at("importance_raw").get<std::vector<double>>();
    d.importance_normalized = j.at("importance_normalized").get<std::vector<double>>();
    for (const json& a : j.at("allocations"))
        d.allocations.push_back({a.at("importance").get<double>(), a.at("fraction").get<double>(),
                                 a.at("retained").get<long long>(), a.at("capacity").get<long long>()});
    d.final_train_loss = j.at("final_train_loss").get<double>();
    d.steps = j.at("steps").get<long long>();
    return d;
}

}  // namespace

json RunReport::to_json() const {
    json tasks_json = json::array();
    for (const TaskDiagnostics& d : tasks) tasks_json.push_back(task_diag_to_json(d));
    return {{"format", "asvd.run_report"},
            {"format_version", 1},
            {"config", config},
            {"trainer", trainer},
            {"seed", seed},
            {"task_order", task_order},
            {"accuracy_matrix", accuracy_matrix.to_json()},
            {"aa", aa},
            {"bwt", bwt},
            {"ability_before", ability_before},
            {"ability_after", ability_after},
            {"ability_deltas", ability_deltas},
            {"interference_max", interference_max},
            {"first_order_max", first_order_max},
            {"parameter_count_before", parameter_count_before},
            {"parameter_count_after", parameter_count_after},
            {"tasks", tasks_json},
            {"warnings", warnings},
            {"wall_clock_seconds", wall_clock_seconds}};
}

RunReport RunReport::from_json(const json& j) {
    if (j.value("format", "") != "asvd.run_report") throw std::invalid_argument("not a run report");
    if (j.at("format_version").get<int>() != 1) throw std::invalid_argument("unsupported run report version");
    RunReport r;
    r.config = j.at("config");
    r.trainer = j.at("trainer").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.task_order = j.at("task_order").get<std::vector<int>>();
    r.accuracy_matrix = AccuracyMatrix::from_json(j.at("accuracy_matrix"));
    r.aa = j.at("aa").get<double>();
    r.bwt = j.at("bwt").get<double>();
    r.ability_before = j.at("ability_before").get<std::vector<double>>();
    r.ability_after = j.at("ability_after").get<std::vector<std::vector<double>>>();
    r.ability_deltas = j.at("ability_deltas").get<std::vector<double>>();
    r.interference_max = j.at("interference_max").get<double>();
    r.first_order_max = j.at("first_order_max").get<double>();
    r.parameter_count_before = j.at("parameter_count_before").get<long long>();
    r.parameter_count_after = j.at("parameter_count_after").get<long long>();
    for (const json& t : j.at("tasks")) r.tasks.push_back(task_diag_from_json(t));
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    return r;
}

std::string dump_report(const RunReport& r) {
    return r.to_json().dump(2) + "\n";
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

namespace {

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

void write_summary_csv(std::ostream& out, std::span<const RunReport> reports, std::span<const std::string> run_ids) {
    if (reports.size() != run_ids.size()) throw std::invalid_argument("write_summary_csv: one run id per report");
    out << "run_id,trainer,seed,task_order,aa,bwt,interference_max,first_order_max,ability_delta_final\r\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const RunReport& r = reports[i];
        std::string order;
        for (std::size_t k = 0; k < r.task_order.size(); ++k) {
            if (k) order += ' ';
            order += std::to_string(r.task_order[k]);
        }
        out << csv_field(run_ids[i]) << ',' << csv_field(r.trainer) << ',' << r.seed << ',' << csv_field(order) << ','
            << num(r.aa) << ',' << num(r.bwt) << ',' << num(r.interference_max) << ',' << num(r.first_order_max) << ','
            << (r.ability_deltas.empty() ? std::string() : num(r.ability_deltas.back())) << "\r\n";
    }
}

}  // namespace asvd
