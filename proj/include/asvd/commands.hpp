#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace asvd {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,  // invariant breach, non-finite loss or a failed check
    kExitInput = 2,    // schema, format or I/O problem, output collision
};

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "ASVD_OUTPUT_ROOT";

/// $ASVD_OUTPUT_ROOT when set and non-empty, otherwise "runs".
std::filesystem::path default_output_root();

struct RunOptions {
    std::filesystem::path config;
    std::optional<std::filesystem::path> output_dir;  // overrides the config
    bool overwrite = false;
};

/// Per run (seed x task order x trainer): reports/<id>.json and
/// checkpoints/<id>.ckpt. Then summary.csv, comparison.csv and the resolved
/// config.json.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

struct TheoryOptions {
    std::filesystem::path config;
    std::optional<std::filesystem::path> output_dir;
    bool overwrite = false;
};

/// theory_report.json and bounds.csv (one row per hierarchy trial).
int cmd_theory(const TheoryOptions& options, std::ostream& out, std::ostream& err);

struct SpectrumOptions {
    std::filesystem::path checkpoint;
    std::optional<std::filesystem::path> output_dir;
    bool overwrite = false;
    bool mp_threshold = false;
    double mp_scale = 1.0;
    std::optional<double> noise_sigma;
    std::optional<double> prune_fraction;
    std::optional<long long> prune_count;
    std::vector<std::size_t> prune_layers;  // empty selects every layer
    /// Config and seed that regenerate the evaluation tasks for pruning.
    std::optional<std::filesystem::path> config;
    std::uint64_t seed = 0;
};

/// spectrum.csv with one row per layer; prune.json when pruning is requested.
int cmd_spectrum(const SpectrumOptions& options, std::ostream& out, std::ostream& err);

struct ReportOptions {
    std::vector<std::filesystem::path> inputs;  // summary.csv files or run directories
    std::optional<std::filesystem::path> output;
};

/// Concatenates summaries that share a header and prints per-trainer means.
int cmd_report(const ReportOptions& options, std::ostream& out, std::ostream& err);

/// Minimal RFC-4180 reader: quoted fields, doubled quotes, CRLF or LF.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace asvd
