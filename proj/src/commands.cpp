#include "asvd/commands.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "asvd/checkpoint.hpp"
#include "asvd/config.hpp"
#include "asvd/continual.hpp"
#include "asvd/importance.hpp"
#include "asvd/metrics.hpp"
#include "asvd/spectrum.hpp"
#include "asvd/theory.hpp"

namespace asvd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kHalvedLabel = "adaptive_svd_halved";

// Files and directories this tool owns inside an output directory.
const char* const kOwnedEntries[] = {"config.json", "reports", "checkpoints", "summary.csv", "comparison.csv",
                                     "theory_report.json", "bounds.csv", "spectrum.csv", "noise.csv",
                                     "prune.json", "pruned.ckpt", "directions.csv"};

std::string num(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

// Writes next to the destination, then renames over it.
void write_file_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    write_file(tmp, content);
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// False when the directory holds files and overwriting was not requested.
bool prepare_output(const fs::path& dir, bool overwrite, std::ostream& err) {
    if (fs::exists(dir) && !fs::is_directory(dir)) {
        err << "error: output path " << dir.string() << " exists and is not a directory\n";
        return false;
    }
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!overwrite) {
            err << "error: output directory " << dir.string() << " is not empty; pass --overwrite to replace it\n";
            return false;
        }
        for (const char* name : kOwnedEntries) fs::remove_all(dir / name);
    }
    fs::create_directories(dir);
    return true;
}

fs::path resolve_output(const std::optional<fs::path>& flag, const std::string& configured, const std::string& prefix,
                        const fs::path& source) {
    if (flag) return *flag;
    if (!configured.empty()) return configured;
    return default_output_root() / (prefix + source.stem().string());
}

std::string order_string(const std::vector<int>& order) {
    std::string s;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(order[i]);
    }
    return s;
}

struct RunCell {
    std::uint64_t seed = 0;
    std::size_t order_index = 0;
    std::vector<int> order;
    std::map<std::string, std::pair<double, double>> metrics;  // label -> (aa, bwt)
};

void write_comparison_csv(std::ostream& out, const std::vector<RunCell>& cells, const std::vector<std::string>& labels) {
    out << "seed,order_index,task_order";
    for (const std::string& l : labels) out << ',' << csv_field("aa_" + l) << ',' << csv_field("bwt_" + l);
    out << "\r\n";
    for (const RunCell& c : cells) {
        out << c.seed << ',' << c.order_index << ',' << csv_field(order_string(c.order));
        for (const std::string& l : labels) {
            const auto& m = c.metrics.at(l);
            out << ',' << num(m.first) << ',' << num(m.second);
        }
        out << "\r\n";
    }
}

int run_experiment(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& out) {
    const json echo = cfg.to_json();
    write_file(dir / "config.json", echo.dump(2) + "\n");
    fs::create_directories(dir / "reports");
    fs::create_directories(dir / "checkpoints");

    std::vector<std::pair<std::string, TrainerConfig>> runs;
    for (TrainerKind k : cfg.trainers) runs.emplace_back(std::string(to_string(k)), cfg.trainer_config(k));
    if (cfg.halved_retention_ablation) {
        TrainerConfig h = cfg.trainer_config(TrainerKind::adaptive_svd);
        h.retention = h.retention.halved();
        runs.emplace_back(kHalvedLabel, h);
    }
    std::vector<std::string> labels;
    for (const auto& r : runs) labels.push_back(r.first);

    std::vector<RunReport> reports;
    std::vector<std::string> ids;
    std::vector<RunCell> cells;
    for (std::uint64_t seed : cfg.seeds) {
        const TaskStreamSpec spec = cfg.task_spec_for_seed(seed);
        const std::vector<TaskData> all = generate(spec);
        std::vector<TaskData> suite;
        if (const auto s = cfg.suite_spec_for_seed(seed)) suite = generate(*s);
        const Network init = make_network(cfg.network, spec.dimension, spec.output_dim(), seed);

        const auto orders = cfg.orders_for_seed(seed);
        for (std::size_t o = 0; o < orders.size(); ++o) {
            std::vector<TaskData> ordered;
            for (int id : orders[o]) ordered.push_back(all[static_cast<std::size_t>(id - 1)]);
            RunCell cell{seed, o, orders[o], {}};
            for (const auto& [label, tc] : runs) {
                const auto start = std::chrono::steady_clock::now();
                const ContinualResult result = train_continual(init, ordered, tc, seed, suite);
                RunReport report = make_run_report(result, tc, seed, orders[o], echo);
                report.trainer = label;
                report.wall_clock_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

                const std::string id = label + "_s" + std::to_string(seed) + "_o" + std::to_string(o);
                write_file(dir / "reports" / (id + ".json"), dump_report(report));
                save_checkpoint(result.net, dir / "checkpoints" / (id + ".ckpt"));
                out << id << ": aa=" << num(report.aa) << " bwt=" << num(report.bwt)
                    << " interference_max=" << num(report.interference_max) << "\n";
                for (const std::string& w : report.warnings) out << "  warning: " << w << "\n";
                cell.metrics[label] = {report.aa, report.bwt};
                reports.push_back(std::move(report));
                ids.push_back(id);
            }
            cells.push_back(std::move(cell));
        }
    }

    std::ostringstream summary;
    write_summary_csv(summary, reports, ids);
    write_file_atomic(dir / "summary.csv", summary.str());
    std::ostringstream comparison;
    write_comparison_csv(comparison, cells, labels);
    write_file_atomic(dir / "comparison.csv", comparison.str());

    std::map<std::string, std::pair<double, int>> aa_by_label;
    for (const RunReport& r : reports) {
        aa_by_label[r.trainer].first += r.aa;
        aa_by_label[r.trainer].second += 1;
    }
    for (const std::string& l : labels)
        out << "mean aa " << l << " = " << num(aa_by_label[l].first / aa_by_label[l].second) << "\n";
    out << "wrote " << reports.size() << " reports to " << dir.string() << "\n";
    return kExitOk;
}

// Wraps a command body so every failure maps to one exit code and one line.
template <class F>
int guarded(std::ostream& err, F body) {
    try {
        return body();
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what() << "\n";
        return kExitInput;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return kExitInput;
    } catch (const InvariantViolation& e) {
        err << "invariant violation: " << e.what() << "\n";
        return kExitFailure;
    } catch (const TrainingError& e) {
        err << "training failed: " << e.what() << "\n";
        return kExitFailure;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitFailure;
    } catch (const fs::filesystem_error& e) {
        err << "file system error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }
}

// Symmetric Gaussian matrix with entries of unit scale.
Matrix random_symmetric(Rng& rng, Eigen::Index n) {
    const Matrix g = gaussian_matrix(rng, n, n);
    return 0.5 * (g + g.transpose());
}

json theory_rayleigh(const TheoryConfig& t, Rng& rng, bool& passed) {
    int violations = 0;
    int equality_failures = 0;
    double min_slack = std::numeric_limits<double>::infinity();
    for (int i = 0; i < t.rayleigh_trials; ++i) {
        const Eigen::Index n = t.rayleigh_dim;
        const HessianBundle hb = make_bundle(random_symmetric(rng, n), {n}, Vector::Zero(n));
        const Vector d = gaussian_vector(rng, n);
        const RayleighCheck r = rayleigh_bound_check(hb, d);
        if (!r.holds) ++violations;
        min_slack = std::min(min_slack, r.slack);
        const RayleighCheck top = rayleigh_bound_check(hb, hb.full_eigen.vectors.col(0));
        if (std::abs(top.slack) > 1e-8) ++equality_failures;
    }
    passed = violations == 0 && equality_failures == 0;
    return {{"trials", t.rayleigh_trials},
            {"violations", violations},
            {"equality_failures", equality_failures},
            {"min_slack", t.rayleigh_trials > 0 ? json(min_slack) : json(nullptr)},
            {"passed", passed}};
}

json theory_network(const ExperimentConfig& cfg, std::uint64_t seed, bool& passed) {
    const TheoryConfig& t = cfg.theory;
    const RealizableInstance inst = realizable_instance(seed, t.network_dimension, t.network_width, 2,
                                                        cfg.network.activation, 200);
    const Batch& batch = inst.batch;
    const Network opt = converge_to_optimum(inst.start, batch, LossKind::mean_squared_error);

    const HessianBundle hb = exact_hessian(opt, batch, LossKind::mean_squared_error);
    const ImportanceProfile prof = profile_for_task(opt, batch.inputs, kDefaultImportanceSamples);
    const BoundReport rep = bound_hierarchy_experiment(hb, prof.normalized, cfg.retention,
                                                       allocate_rank(1.0, cfg.retention), t.update_norm_sq);

    Rng rng = named_stream(seed, "theory/network");
    Vector dir = gaussian_vector(rng, hb.h.rows());
    dir /= dir.norm();
    json errors = json::array();
    std::vector<double> rel;
    double norm = 1e-2;
    for (int k = 0; k <= 5; ++k, norm /= 2.0) {
        const SecondOrderCheck c = second_order_forgetting_check(opt, batch, LossKind::mean_squared_error,
                                                                 norm * dir);
        rel.push_back(c.relative_error);
        errors.push_back({{"norm", norm}, {"exact", c.exact_delta}, {"quadratic", c.quadratic_prediction},
                          {"relative_error", c.relative_error}});
    }
    bool monotone = true;
    for (std::size_t k = 1; k < rel.size(); ++k)
        if (rel[k] > rel[k - 1] * 1.05) monotone = false;
    const RayleighCheck top = rayleigh_bound_check(hb, hb.full_eigen.vectors.col(0));
    const RayleighCheck rnd = rayleigh_bound_check(hb, dir);
    passed = monotone && rnd.holds && std::abs(top.slack) <= 1e-8;

    return {{"parameters", hb.h.rows()},
            {"lambda_max", hb.lambda_max()},
            {"block_top_eigenvalues", [&] {
                 json a = json::array();
                 for (const SymmetricEigen& e : hb.block_eigen) a.push_back(e.values(0));
                 return a;
             }()},
            {"importance", prof.normalized},
            {"importance_curvature_correlation", importance_curvature_correlation(prof.normalized, hb)},
            {"off_block_ratio", block_diagonal_measure(hb)},
            {"hierarchy", rep.to_json()},
            {"second_order", errors},
            {"second_order_monotone", monotone},
            {"rayleigh_top_slack", top.slack},
            {"rayleigh_random_holds", rnd.holds},
            {"passed", passed},
            {"note", "the hierarchy on a trained network is a diagnostic; its bounds assume block-diagonal curvature"}};
}

void write_noise_csv(std::ostream& out, const std::vector<NoiseClassification>& rows, const Network& net) {
    out << "layer,rows,cols,noise_sigma,noise_sigma_estimated,threshold,above,below,fraction_above,note\r\n";
    for (std::size_t l = 0; l < rows.size(); ++l) {
        const NoiseClassification& c = rows[l];
        out << l << ',' << net.layer(l).weight.rows() << ',' << net.layer(l).weight.cols() << ',' << num(c.noise_sigma)
            << ',' << (c.noise_sigma_estimated ? "true" : "false") << ',' << num(c.threshold) << ',' << c.above << ','
            << c.below << ',' << num(c.fraction_above) << ',' << csv_field(c.note) << "\r\n";
    }
}

}  // namespace

fs::path default_output_root() {
    const char* env = std::getenv(kOutputRootEnv);
    if (env && *env) return fs::path(env);
    return fs::path("runs");
}

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ExperimentConfig cfg = load_config(options.config);
        const fs::path dir = resolve_output(options.output_dir, cfg.output_dir, "", options.config);
        if (!prepare_output(dir, options.overwrite, err)) return static_cast<int>(kExitInput);
        return run_experiment(cfg, dir, out);
    });
}

int cmd_theory(const TheoryOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ExperimentConfig cfg = load_config(options.config);
        require_smooth_theory(cfg);
        const fs::path dir = resolve_output(options.output_dir, cfg.output_dir, "theory-", options.config);
        if (!prepare_output(dir, options.overwrite, err)) return static_cast<int>(kExitInput);
        const TheoryConfig& t = cfg.theory;
        const std::uint64_t seed = cfg.seeds.front();

        Rng rng = named_stream(seed, "theory/hierarchy");
        std::vector<BoundReport> reports;
        int strict = 0, non_strict = 0, violated = 0, invalid = 0, missed_strict = 0;
        for (int i = 0; i < t.hierarchy_trials; ++i) {
            const ConstructedInstance inst = construct_premise_instance(rng, t.blocks, t.block_dim, cfg.retention);
            BoundReport r = bound_hierarchy_experiment(inst.bundle, inst.importance, cfg.retention, inst.fixed_fraction,
                                                       t.update_norm_sq);
            if (r.status == "strict") ++strict;
            else if (r.status == "non-strict") ++non_strict;
            else ++violated;
            if (!r.bounds_valid) ++invalid;
            if (inst.guarantees_strict && !r.strict) ++missed_strict;
            reports.push_back(std::move(r));
        }
        const bool hierarchy_ok = violated == 0 && invalid == 0 && missed_strict == 0;

        Rng rrng = named_stream(seed, "theory/rayleigh");
        bool rayleigh_ok = true;
        const json rayleigh = theory_rayleigh(t, rrng, rayleigh_ok);

        bool network_ok = true;
        json network = nullptr;
        if (t.network_hessian) network = theory_network(cfg, seed, network_ok);

        json rep_list = json::array();
        for (const BoundReport& r : reports) rep_list.push_back(r.to_json());
        const bool passed = hierarchy_ok && rayleigh_ok && network_ok;
        const json report = {{"format", "asvd.theory_report"},
                             {"version", 1},
                             {"config", cfg.to_json()},
                             {"hierarchy",
                              {{"trials", t.hierarchy_trials},
                               {"strict", strict},
                               {"non_strict", non_strict},
                               {"violated", violated},
                               {"invalid_bounds", invalid},
                               {"missed_strict", missed_strict},
                               {"passed", hierarchy_ok},
                               {"reports", rep_list}}},
                             {"rayleigh", rayleigh},
                             {"network", network},
                             {"passed", passed}};
        write_file(dir / "theory_report.json", report.dump(2) + "\n");
        std::ostringstream csv;
        write_bound_csv(csv, reports);
        write_file_atomic(dir / "bounds.csv", csv.str());

        out << "hierarchy: " << t.hierarchy_trials << " trials, " << strict << " strict, " << non_strict
            << " non-strict, " << violated << " violated, " << invalid << " bound violations: "
            << (hierarchy_ok ? "PASS" : "FAIL") << "\n";
        out << "rayleigh: " << t.rayleigh_trials << " trials, " << rayleigh.at("violations").get<int>()
            << " violations: " << (rayleigh_ok ? "PASS" : "FAIL") << "\n";
        if (t.network_hessian)
            out << "network hessian: second-order and rayleigh checks " << (network_ok ? "PASS" : "FAIL")
                << ", hierarchy " << network.at("hierarchy").at("status").get<std::string>() << " (diagnostic)\n";
        return static_cast<int>(passed ? kExitOk : kExitFailure);
    });
}

int cmd_spectrum(const SpectrumOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Network net = load_checkpoint(options.checkpoint);
        const bool prune = options.prune_fraction || options.prune_count;
        if (options.prune_fraction && options.prune_count)
            throw SchemaError("--prune", "give either a fraction or a count, not both");
        std::optional<ExperimentConfig> cfg;
        if (options.config) cfg = load_config(*options.config);
        if (prune && !cfg) throw SchemaError("--config", "pruning needs a config to regenerate the evaluation tasks");
        if (!(options.mp_scale > 0.0)) throw SchemaError("--mp-scale", "must be positive");
        if (options.noise_sigma && !(*options.noise_sigma > 0.0))
            throw SchemaError("--noise-sigma", "must be positive");

        const fs::path dir = resolve_output(options.output_dir, "", "spectrum-", options.checkpoint);
        if (!prepare_output(dir, options.overwrite, err)) return static_cast<int>(kExitInput);

        const std::vector<SpectrumStats> stats = spectrum_stats(net);
        std::ostringstream csv;
        write_stats_csv(csv, stats);
        write_file_atomic(dir / "spectrum.csv", csv.str());
        out << "spectrum: " << stats.size() << " layers\n";

        if (options.mp_threshold) {
            std::vector<NoiseClassification> rows;
            for (std::size_t l = 0; l < net.layer_count(); ++l) {
                rows.push_back(classify_spectrum(net.layer(l).weight, options.noise_sigma, options.mp_scale));
                const NoiseClassification& c = rows.back();
                out << "layer " << l << ": threshold " << num(c.threshold) << ", " << c.above << " above, " << c.below
                    << " below (noise sigma " << num(c.noise_sigma)
                    << (c.noise_sigma_estimated ? ", median estimate" : ", given") << ")";
                if (!c.note.empty()) out << "; " << c.note;
                out << "\n";
            }
            std::ostringstream ncsv;
            write_noise_csv(ncsv, rows, net);
            write_file_atomic(dir / "noise.csv", ncsv.str());
        }

        if (prune) {
            PruneSpec ps;
            ps.layers = options.prune_layers;
            ps.fraction = options.prune_fraction;
            if (options.prune_count) ps.count = static_cast<Eigen::Index>(*options.prune_count);
            const std::vector<TaskData> tasks = generate(cfg->task_spec_for_seed(options.seed));
            const PruneResult pr = [&] {
                try {
                    return prune_low_rank(net, ps, tasks);
                } catch (const std::invalid_argument& e) {
                    throw SchemaError("--prune", e.what());
                }
            }();
            const json j = {{"checkpoint", options.checkpoint.string()},
                            {"layers", options.prune_layers},
                            {"fraction", ps.fraction ? json(*ps.fraction) : json(nullptr)},
                            {"count", ps.count ? json(*ps.count) : json(nullptr)},
                            {"seed", options.seed},
                            {"before", pr.before},
                            {"after", pr.after},
                            {"delta", pr.delta},
                            {"mean_before", pr.mean_before},
                            {"mean_after", pr.mean_after},
                            {"mean_delta", pr.mean_after - pr.mean_before}};
            write_file(dir / "prune.json", j.dump(2) + "\n");
            save_checkpoint(pr.pruned, dir / "pruned.ckpt");
            out << "prune: mean metric " << num(pr.mean_before) << " -> " << num(pr.mean_after) << " (delta "
                << num(pr.mean_after - pr.mean_before) << ")\n";
        }
        return static_cast<int>(kExitOk);
    });
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
            continue;
        }
        if (ch == '"') {
            quoted = true;
            any = true;
        } else if (ch == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (ch == '\r' || ch == '\n') {
            if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            field += ch;
            any = true;
        }
    }
    if (quoted) throw FormatError("unterminated quoted field in CSV");
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

int cmd_report(const ReportOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (options.inputs.empty()) throw SchemaError("inputs", "no summaries given");
        std::vector<std::string> header;
        std::vector<std::vector<std::string>> rows;
        for (fs::path p : options.inputs) {
            if (fs::is_directory(p)) p /= "summary.csv";
            auto table = parse_csv(read_file(p));
            if (table.empty()) throw FormatError(p.string() + " is empty");
            if (header.empty()) header = table.front();
            else if (table.front() != header) throw FormatError(p.string() + " has a different header");
            for (std::size_t i = 1; i < table.size(); ++i) {
                if (table[i].size() != header.size())
                    throw FormatError(p.string() + " row " + std::to_string(i) + " has the wrong field count");
                rows.push_back(std::move(table[i]));
            }
        }
        std::ostringstream merged;
        auto emit = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) merged << (i ? "," : "") << csv_field(r[i]);
            merged << "\r\n";
        };
        emit(header);
        for (const auto& r : rows) emit(r);
        if (!options.output) {
            out << merged.str();
            return static_cast<int>(kExitOk);
        }
        write_file_atomic(*options.output, merged.str());

        auto column = [&](const std::string& name) -> std::optional<std::size_t> {
            for (std::size_t i = 0; i < header.size(); ++i)
                if (header[i] == name) return i;
            return std::nullopt;
        };
        const auto trainer = column("trainer");
        const auto aa = column("aa");
        const auto bwt = column("bwt");
        if (trainer && aa && bwt) {
            std::map<std::string, std::tuple<double, double, int>> acc;
            for (const auto& r : rows) {
                auto& [sa, sb, n] = acc[r[*trainer]];
                sa += std::stod(r[*aa]);
                sb += std::stod(r[*bwt]);
                ++n;
            }
            for (const auto& [name, v] : acc) {
                const auto& [sa, sb, n] = v;
                out << name << ": runs=" << n << " aa=" << num(sa / n) << " bwt=" << num(sb / n) << "\n";
            }
        }
        out << "merged " << rows.size() << " rows into " << options.output->string() << "\n";
        return static_cast<int>(kExitOk);
    });
}

}  // namespace asvd
