#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "asvd/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Continual learning with importance-weighted SVD subspace projection"};
    app.require_subcommand(1);
    app.footer(std::string("Output directories default to $") + asvd::kOutputRootEnv +
               "/<name> (or runs/<name>).\nExit status: 0 success, 1 failed check or invariant breach, "
               "2 input error.");

    asvd::RunOptions run;
    std::string run_out;
    auto* run_cmd = app.add_subcommand("run", "Train every configured trainer, seed and task order");
    run_cmd->add_option("config", run.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("-o,--out", run_out, "Output directory (overrides output_dir)");
    run_cmd->add_flag("--overwrite", run.overwrite, "Replace results in a non-empty output directory");

    asvd::TheoryOptions theory;
    std::string theory_out;
    auto* theory_cmd = app.add_subcommand("theory", "Forgetting-bound hierarchy and Rayleigh checks");
    theory_cmd->add_option("config", theory.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    theory_cmd->add_option("-o,--out", theory_out, "Output directory");
    theory_cmd->add_flag("--overwrite", theory.overwrite, "Replace results in a non-empty output directory");

    asvd::SpectrumOptions spectrum;
    std::string spectrum_out;
    std::string spectrum_config;
    double prune_fraction = 0.0;
    long long prune_count = 0;
    auto* spectrum_cmd = app.add_subcommand("spectrum", "Singular-value statistics of a checkpoint");
    spectrum_cmd->add_option("checkpoint", spectrum.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    spectrum_cmd->add_option("-o,--out", spectrum_out, "Output directory");
    spectrum_cmd->add_flag("--overwrite", spectrum.overwrite, "Replace results in a non-empty output directory");
    spectrum_cmd->add_flag("--mp-threshold", spectrum.mp_threshold, "Classify singular values against the MP edge");
    spectrum_cmd->add_option("--mp-scale", spectrum.mp_scale, "Multiplier on the MP threshold")->capture_default_str();
    spectrum_cmd->add_option("--noise-sigma", spectrum.noise_sigma, "Noise level (default: median estimate)");
    auto* pf = spectrum_cmd->add_option("--prune-fraction", prune_fraction, "Keep this fraction of directions");
    auto* pc = spectrum_cmd->add_option("--prune-count", prune_count, "Keep this many directions");
    pf->excludes(pc);
    spectrum_cmd->add_option("--layers", spectrum.prune_layers, "Layers to prune (default: all)")->delimiter(',');
    spectrum_cmd->add_option("--config", spectrum_config, "Config that regenerates the evaluation tasks");
    spectrum_cmd->add_option("--seed", spectrum.seed, "Seed for the evaluation tasks")->capture_default_str();

    asvd::ReportOptions report;
    std::vector<std::string> report_inputs;
    std::string report_out;
    auto* report_cmd = app.add_subcommand("report", "Merge summary CSVs");
    report_cmd->add_option("inputs", report_inputs, "summary.csv files or run directories")->required();
    report_cmd->add_option("-o,--out", report_out, "Merged CSV (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    if (*run_cmd) {
        if (!run_out.empty()) run.output_dir = run_out;
        return asvd::cmd_run(run, std::cout, std::cerr);
    }
    if (*theory_cmd) {
        if (!theory_out.empty()) theory.output_dir = theory_out;
        return asvd::cmd_theory(theory, std::cout, std::cerr);
    }
    if (*spectrum_cmd) {
        if (!spectrum_out.empty()) spectrum.output_dir = spectrum_out;
        if (!spectrum_config.empty()) spectrum.config = spectrum_config;
        if (*pf) spectrum.prune_fraction = prune_fraction;
        if (*pc) spectrum.prune_count = prune_count;
        return asvd::cmd_spectrum(spectrum, std::cout, std::cerr);
    }
    for (const std::string& s : report_inputs) report.inputs.emplace_back(s);
    if (!report_out.empty()) report.output = report_out;
    return asvd::cmd_report(report, std::cout, std::cerr);
}
