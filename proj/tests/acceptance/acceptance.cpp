// One line per acceptance criterion: "criterion N: PASS|FAIL <measurements>".
// Exit status is 0 only if every criterion passes.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "asvd/commands.hpp"
#include "asvd/config.hpp"
#include "asvd/continual.hpp"
#include "asvd/metrics.hpp"
#include "asvd/spectrum.hpp"
#include "asvd/subspace.hpp"
#include "asvd/theory.hpp"
#include "constructions.hpp"
#include "metric_fixtures.hpp"
#include "oracles.hpp"

using namespace asvd;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("asvd_acceptance_" + name);
    fs::remove_all(p);
    return p;
}

Outcome projection_exactness() {
    const auto t0 = Clock::now();
    Rng rng = named_stream(1001, "acceptance/projection");
    double worst_inter = 0.0, worst_idem = 0.0;
    const int pairs = 10000;
    for (int i = 0; i < pairs; ++i) {
        const Eigen::Index m = 1 + static_cast<Eigen::Index>(uniform01(rng) * 12);
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(uniform01(rng) * 12);
        const SubspacePartition p = partition(svd(gaussian_matrix(rng, m, n)), uniform01(rng));
        const Matrix g = gaussian_matrix(rng, m, n, 0.1 + 10.0 * uniform01(rng));
        const Matrix pg = project_gradient(g, p);
        worst_inter = std::max(worst_inter, interference(pg, p));
        worst_idem = std::max(worst_idem, (project_gradient(pg, p) - pg).norm());
    }
    const double secs = seconds_since(t0);
    return {worst_inter <= 1e-10 && worst_idem <= 1e-10 && secs < 10.0,
            std::to_string(pairs) + " pairs, max interference " + fmt("%.3g", worst_inter) + ", max idempotence " +
                fmt("%.3g", worst_idem) + ", " + fmt("%.2f", secs) + " s"};
}

Outcome gradient_oracle() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    int nets = 0;
    for (Activation act : {Activation::identity, Activation::tanh, Activation::relu}) {
        for (LossKind kind : {LossKind::softmax_cross_entropy, LossKind::mean_squared_error}) {
            Rng rng = named_stream(1002, std::string("acceptance/grad/") + std::string(to_string(act)) + "/" +
                                             std::string(to_string(kind)));
            for (int s = 0; s < 20; ++s, ++nets) {
                const Network net = Network::random({{5, 6, act}, {6, 6, act}, {6, 3, Activation::identity}}, rng);
                Batch b;
                b.inputs = gaussian_matrix(rng, 5, 8);
                if (kind == LossKind::mean_squared_error) {
                    b.targets = gaussian_matrix(rng, 3, 8);
                } else {
                    for (int i = 0; i < 8; ++i) b.labels.push_back(i % 3);
                }
                const std::vector<Matrix> analytic = backward(net, b, kind).gradients;
                const std::vector<Matrix> numeric = oracle::fd_gradient(net, b, kind, 1e-6);
                double num = 0.0, den = 0.0;
                for (std::size_t l = 0; l < analytic.size(); ++l) {
                    num += (analytic[l] - numeric[l]).squaredNorm();
                    den += numeric[l].squaredNorm();
                }
                worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-12));
            }
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-5 && secs < 30.0, std::to_string(nets) + " nets, max relative error " + fmt("%.3g", worst) +
                                              ", " + fmt("%.2f", secs) + " s"};
}

struct RunTable {
    int exit_code = -1;
    double seconds = 0.0;
    std::vector<RunReport> reports;
};

RunTable run_main_experiment() {
    RunTable t;
    const fs::path out = scratch("main");
    RunOptions o;
    o.config = fs::path(ASVD_SOURCE_DIR) / "configs" / "rotated_gaussians.json";
    o.output_dir = out;
    std::ostringstream sout, serr;
    const auto t0 = Clock::now();
    t.exit_code = cmd_run(o, sout, serr);
    t.seconds = seconds_since(t0);
    if (t.exit_code != kExitOk) {
        std::cerr << serr.str();
        return t;
    }
    for (const auto& entry : fs::directory_iterator(out / "reports"))
        t.reports.push_back(RunReport::from_json(json::parse(slurp(entry.path()))));
    fs::remove_all(out);
    return t;
}

std::string label_of(const RunReport& r) {
    return r.trainer == "adaptive_svd" && r.config.contains("retention") &&
                   r.config["retention"]["trr"].get<double>() < 0.8 - 1e-12
               ? "adaptive_svd_halved"
               : r.trainer;
}

Outcome first_order_noninterference(const RunTable& t) {
    if (t.exit_code != kExitOk) return {false, "run failed with exit " + std::to_string(t.exit_code)};
    double worst = 0.0, worst_inter = 0.0;
    int runs = 0;
    std::map<std::uint64_t, int> seeds;
    for (const RunReport& r : t.reports) {
        if (r.trainer != "adaptive_svd") continue;
        worst = std::max(worst, r.first_order_max);
        worst_inter = std::max(worst_inter, r.interference_max);
        ++seeds[r.seed];
        ++runs;
    }
    return {runs > 0 && seeds.size() == 3 && worst <= 1e-8 && worst_inter <= 1e-8,
            std::to_string(runs) + " adaptive runs over " + std::to_string(seeds.size()) +
                " seeds, max |<P_U G_prev P_V, dW>| " + fmt("%.3g", worst) + ", max interference " +
                fmt("%.3g", worst_inter)};
}

Outcome second_order() {
    // Quadratic instances: a linear MSE layer fitted exactly.
    double worst_quad = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        Rng rng = named_stream(1004 + s, "acceptance/quadratic");
        const Network net({Layer{gaussian_matrix(rng, 3, 4), Activation::identity}});
        Batch b;
        b.inputs = gaussian_matrix(rng, 4, 30);
        b.targets = net.layer(0).weight * b.inputs;
        const Vector d = gaussian_vector(rng, 12, 0.1);
        const SecondOrderCheck c = second_order_forgetting_check(net, b, LossKind::mean_squared_error, d);
        worst_quad = std::max(worst_quad, std::abs(c.exact_delta - c.quadratic_prediction));
    }
    // Tanh networks at an exact optimum: relative error over 5 halvings.
    bool monotone = true;
    std::string sweep;
    for (std::uint64_t s = 0; s < 3; ++s) {
        const RealizableInstance inst = realizable_instance(1004 + s, 6, 6, 2, Activation::tanh, 200);
        const Network opt = converge_to_optimum(inst.start, inst.batch, LossKind::mean_squared_error);
        Rng rng = named_stream(1004 + s, "acceptance/tanh-direction");
        Vector dir = gaussian_vector(rng, opt.parameter_count());
        dir /= dir.norm();
        double prev = 0.0;
        double norm = 1e-2;
        for (int k = 0; k <= 5; ++k, norm /= 2.0) {
            const double rel =
                second_order_forgetting_check(opt, inst.batch, LossKind::mean_squared_error, norm * dir).relative_error;
            if (k > 0 && rel > prev * 1.05) monotone = false;
            if (s == 0) sweep += (k ? " " : "") + fmt("%.2e", rel);
            prev = rel;
        }
    }
    return {worst_quad <= 1e-10 && monotone,
            "quadratic max |dL - dQ| " + fmt("%.3g", worst_quad) + "; tanh relative errors [" + sweep + "]" +
                (monotone ? " monotone in all 3 instances" : " NOT monotone")};
}

Outcome bound_hierarchy() {
    Rng rng = named_stream(1005, "acceptance/hierarchy");
    const RetentionConfig ret(0.1, 0.8);
    int ordered = 0, strict_needed = 0, strict_hit = 0, valid = 0;
    const int trials = 50;
    for (int i = 0; i < trials; ++i) {
        const ConstructedInstance inst = construct_premise_instance(rng, 3, 8, ret);
        const BoundReport r = bound_hierarchy_experiment(inst.bundle, inst.importance, ret, inst.fixed_fraction, 1.0);
        if (r.ordering_satisfied) ++ordered;
        if (r.bounds_valid) ++valid;
        if (inst.guarantees_strict) {
            ++strict_needed;
            if (r.strict) ++strict_hit;
        }
    }
    return {ordered == trials && valid == trials && strict_hit == strict_needed,
            std::to_string(trials) + " instances, ordering " + std::to_string(ordered) + "/" + std::to_string(trials) +
                ", strict " + std::to_string(strict_hit) + "/" + std::to_string(strict_needed) +
                " guaranteed, realized <= bound " + std::to_string(valid) + "/" + std::to_string(trials)};
}

Outcome rayleigh() {
    Rng rng = named_stream(1006, "acceptance/rayleigh");
    int violations = 0;
    double worst_equality = 0.0;
    const int trials = 1000;
    for (int i = 0; i < trials; ++i) {
        const Eigen::Index p = 2 + static_cast<Eigen::Index>(uniform01(rng) * 14);
        const Matrix g = gaussian_matrix(rng, p, p);
        const HessianBundle hb = make_bundle(g + g.transpose(), {p}, Vector::Zero(p));
        if (!rayleigh_bound_check(hb, gaussian_vector(rng, p, 0.1 + 5.0 * uniform01(rng))).holds) ++violations;
        worst_equality = std::max(worst_equality, std::abs(rayleigh_bound_check(hb, hb.full_eigen.vectors.col(0)).slack));
    }
    return {violations == 0 && worst_equality <= 1e-8,
            std::to_string(trials) + " trials, " + std::to_string(violations) +
                " violations, max |slack| at top eigenvector " + fmt("%.3g", worst_equality)};
}

Outcome forgetting_ordering(const RunTable& t) {
    if (t.exit_code != kExitOk) return {false, "run failed with exit " + std::to_string(t.exit_code)};
    std::map<std::string, std::pair<double, double>> sums;  // aa, bwt
    std::map<std::string, int> counts;
    std::map<std::uint64_t, std::pair<double, double>> per_seed;  // adaptive, halved
    for (const RunReport& r : t.reports) {
        const std::string label = label_of(r);
        sums[label].first += r.aa;
        sums[label].second += r.bwt;
        ++counts[label];
        if (label == "adaptive_svd") per_seed[r.seed].first += r.aa;
        if (label == "adaptive_svd_halved") per_seed[r.seed].second += r.aa;
    }
    auto mean_aa = [&](const std::string& l) { return sums[l].first / std::max(1, counts[l]); };
    auto mean_bwt = [&](const std::string& l) { return sums[l].second / std::max(1, counts[l]); };
    int wins = 0;
    for (const auto& [seed, v] : per_seed)
        if (v.first > v.second) ++wins;
    const bool complete = counts["adaptive_svd"] == 9 && counts["seq_full"] == 9 &&
                          counts["no_projection_ablation"] == 9 && counts["adaptive_svd_halved"] == 9;
    const bool pass = complete && mean_aa("adaptive_svd") > mean_aa("seq_full") &&
                      mean_aa("adaptive_svd") > mean_aa("no_projection_ablation") &&
                      mean_bwt("adaptive_svd") > mean_bwt("seq_full") && 2 * wins > static_cast<int>(per_seed.size()) &&
                      t.seconds < 300.0;
    return {pass, "AA adaptive " + fmt("%.4f", mean_aa("adaptive_svd")) + " seq_full " +
                      fmt("%.4f", mean_aa("seq_full")) + " no_projection " +
                      fmt("%.4f", mean_aa("no_projection_ablation")) + " halved " +
                      fmt("%.4f", mean_aa("adaptive_svd_halved")) + "; BWT adaptive " +
                      fmt("%.4f", mean_bwt("adaptive_svd")) + " seq_full " + fmt("%.4f", mean_bwt("seq_full")) +
                      "; default beats halved in " + std::to_string(wins) + "/" + std::to_string(per_seed.size()) +
                      " seeds; " + fmt("%.1f", t.seconds) + " s"};
}

Outcome degenerate_equivalence() {
    bool identical = true;
    for (std::uint64_t seed : {0, 1, 2}) {
        TaskStreamSpec s;
        s.seed = seed;
        const auto tasks = generate(s);
        const Network init = make_network(NetworkConfig{}, s.dimension, s.output_dim(), seed);
        TrainerConfig seq;
        seq.kind = TrainerKind::seq_full;
        TrainerConfig zero;
        zero.kind = TrainerKind::adaptive_svd;
        zero.retention = RetentionConfig(0.0, 0.0);
        const ContinualResult a = train_continual(init, tasks, seq, seed);
        const ContinualResult b = train_continual(init, tasks, zero, seed);
        identical = identical && a.net == b.net && a.accuracy == b.accuracy;
    }
    return {identical, identical ? "final weights and accuracy matrices bitwise equal for 3 seeds"
                                 : "trajectories differ"};
}

Outcome low_rank_validation() {
    const TaskData task = construct::low_rank_task(1009, 16, 3);
    const Network net = construct::trained_on(task, 1009);
    const std::vector<TaskData> tasks = {task};
    auto delta_at = [&](Eigen::Index k) {
        PruneSpec spec;
        spec.layers = {0};
        spec.count = k;
        return prune_low_rank(net, spec, tasks);
    };
    const PruneResult at = delta_at(3);
    const PruneResult below = delta_at(1);
    const double d_at = at.mean_after - at.mean_before;
    const double d_below = below.mean_after - below.mean_before;
    return {std::abs(d_at) < 0.01 && d_below < d_at,
            "accuracy " + fmt("%.4f", at.mean_before) + "; delta at intrinsic rank 3: " + fmt("%+.4f", d_at) +
                ", at rank 1: " + fmt("%+.4f", d_below)};
}

Outcome eckart_young() {
    Rng rng = named_stream(1010, "acceptance/eckart-young");
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Eigen::Index m = 1 + static_cast<Eigen::Index>(uniform01(rng) * 15);
        const Eigen::Index n = 1 + static_cast<Eigen::Index>(uniform01(rng) * 15);
        const Matrix w = gaussian_matrix(rng, m, n);
        const SvdFactorization f = svd(w);
        const Vector ref = oracle::singular_values(w);
        const Eigen::Index k = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(ref.size() + 1));
        const double resid = (w - truncated_reconstruction(f, k)).norm();
        worst = std::max(worst, std::abs(resid - ref.tail(ref.size() - k).norm()));
    }
    return {worst <= 1e-8, "100 matrices, max |residual - tail norm| " + fmt("%.3g", worst)};
}

Outcome metric_formulas() {
    double worst = 0.0;
    const auto cases = fixture::metric_cases();
    for (const fixture::MetricCase& c : cases) {
        AccuracyMatrix m(static_cast<int>(c.rows.size()));
        for (std::size_t t = 0; t < c.rows.size(); ++t)
            for (std::size_t j = 0; j < c.rows[t].size(); ++j)
                m.set(static_cast<int>(t) + 1, static_cast<int>(j) + 1, c.rows[t][j]);
        worst = std::max(worst, std::abs(average_accuracy(m) - c.aa));
        worst = std::max(worst, std::abs(backward_transfer(m, m.task_count()) - c.bwt));
    }
    return {worst <= 1e-12, std::to_string(cases.size()) + " fixtures, max error " + fmt("%.3g", worst)};
}

Outcome determinism() {
    const json cfg = {{"schema_version", 1},
                      {"tasks", {{"task_count", 3}, {"train_samples", 300}, {"test_samples", 200}}},
                      {"trainers", {"adaptive_svd", "seq_full", "no_projection_ablation"}},
                      {"halved_retention_ablation", true},
                      {"seeds", {3, 4}},
                      {"permutations", 2},
                      {"suite", {{"task_count", 2}, {"train_samples", 50}, {"test_samples", 100}}}};
    const fs::path dir = scratch("determinism");
    fs::create_directories(dir);
    std::ofstream(dir / "config.json") << cfg.dump(2);
    auto once = [&](const std::string& name) {
        RunOptions o;
        o.config = dir / "config.json";
        o.output_dir = dir / name;
        std::ostringstream out, err;
        return cmd_run(o, out, err);
    };
    if (once("a") != kExitOk || once("b") != kExitOk) return {false, "cmd_run failed"};
    int compared = 0, differing = 0;
    for (const auto& entry : fs::directory_iterator(dir / "a" / "reports")) {
        json a = json::parse(slurp(entry.path()));
        json b = json::parse(slurp(dir / "b" / "reports" / entry.path().filename()));
        a.erase("wall_clock_seconds");
        b.erase("wall_clock_seconds");
        ++compared;
        if (a.dump(2) != b.dump(2)) ++differing;
    }
    const bool summaries = slurp(dir / "a" / "summary.csv") == slurp(dir / "b" / "summary.csv");
    fs::remove_all(dir);
    return {compared == 16 && differing == 0 && summaries,
            std::to_string(compared) + " reports compared, " + std::to_string(differing) + " differ; summary.csv " +
                (summaries ? "identical" : "differs")};
}

}  // namespace

int main() {
    const RunTable main_run = run_main_experiment();
    const std::vector<std::function<Outcome()>> criteria = {
        projection_exactness,
        gradient_oracle,
        [&] { return first_order_noninterference(main_run); },
        second_order,
        bound_hierarchy,
        rayleigh,
        [&] { return forgetting_ordering(main_run); },
        degenerate_equivalence,
        low_rank_validation,
        eckart_young,
        metric_formulas,
        determinism,
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << "criterion " << i + 1 << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
