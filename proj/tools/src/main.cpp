#include <iostream>

#include <CLI11.hpp>

#include "rgess/cli/commands.hpp"

using namespace rgess;
using namespace rgess::cli;

int main(int argc, char** argv) {
    CLI::App app{"Regional generalized elliptical slice sampling experiments"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run an experiment from a config file or preset name");
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output;
    run->add_option("config", config_path, "Config file, or the name of a shipped preset")->required();
    run->add_option("--set", overrides, "Override a config key (key=value); repeatable");
    run->add_option("-o,--output", output, "Output directory (overrides output.dir)");

    auto* report = app.add_subcommand("report", "Recompute diagnostics from a run directory");
    std::string report_dir;
    std::optional<std::size_t> window;
    report->add_option("dir", report_dir, "Run output directory")->required();
    report->add_option("--window", window, "Rejection-rate window in recorded iterations");

    auto* fit = app.add_subcommand("fit", "Fit a mixture to a CSV of samples");
    std::string samples_path, scheme = "em_gmm";
    std::optional<double> fixed_dof;
    FitOptions fopt;
    fit->add_option("samples", samples_path, "CSV with one sample per row")->required();
    fit->add_option("--scheme", scheme, "em_gmm | vi_gmm | sa_gmm | em_tmm")->capture_default_str();
    fit->add_option("--components,-m", fopt.components, "Number of mixture components")->required();
    fit->add_option("--reg-radius", fopt.reg_radius, "Added to every covariance")->capture_default_str();
    fit->add_option("--seed", fopt.seed, "Seed for k-means++ initialization")->capture_default_str();
    fit->add_option("--dof", fixed_dof, "Hold every t component at this dof");
    fit->add_option("--max-iters", fopt.em_max_iters, "EM/VI iteration cap")->capture_default_str();
    fit->add_option("--tol", fopt.em_tol, "EM/VI convergence tolerance")->capture_default_str();
    fit->add_option("--init", fopt.init_mixture, "sa_gmm: starting mixture (mixtures CSV, last snapshot)");
    fit->add_option("--steps", fopt.sa_steps, "sa_gmm: number of updates")->capture_default_str();
    fit->add_option("--sa-c", fopt.sa_c, "sa_gmm: learning-rate numerator")->capture_default_str();
    fit->add_option("--sa-n0", fopt.sa_n0, "sa_gmm: learning-rate offset")->capture_default_str();
    fit->add_option("-o,--output", fopt.output, "Output mixtures CSV")->capture_default_str();

    app.add_subcommand("presets", "List the shipped presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    if (*run) {
        if (!output.empty()) overrides.push_back("output.dir=" + output);
        return cmd_run_file(config_path, overrides, std::cout, std::cerr);
    }
    if (*report) return cmd_report(report_dir, window, std::cout, std::cerr);
    if (*fit) {
        try {
            fopt.scheme = parse_adaptation_scheme(scheme);
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return kExitConfig;
        }
        fopt.fixed_dof = fixed_dof;
        return cmd_fit(samples_path, fopt, std::cout, std::cerr);
    }
    for (const auto& name : preset_names()) std::cout << name << "\n";
    return kExitOk;
}
