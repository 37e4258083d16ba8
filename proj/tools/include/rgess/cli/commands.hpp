#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <rgess/adaptation.hpp>
#include <rgess/diagnostics.hpp>
#include <rgess/samplers.hpp>
#include <rgess/targets.hpp>

#include "rgess/cli/config.hpp"

namespace rgess::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

struct LoadedTarget {
    TargetDensity density;
    std::optional<Dataset> data;  ///< logistic targets only
};

LoadedTarget load_target(const TargetSpec& spec);

/// One row of summary.csv / report.csv.
struct SummaryRow {
    std::string metric;
    std::size_t index = 0;
    double value = 0.0;
};

/// Diagnostics that can be recomputed from the written files alone.
std::vector<SummaryRow> summarize(const Traces& traces, const std::vector<MixtureSnapshot>& history,
                                  const ExperimentConfig& config, const std::optional<Dataset>& data);

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);

/// Validates, runs, and writes trace.csv, mixtures.csv, summary.csv,
/// run_info.csv and config.cfg into config.output_dir.
int cmd_run(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

/// Loads `config_path` (or the named preset), applies overrides, then cmd_run.
int cmd_run_file(const std::string& config_path, const std::vector<std::string>& overrides, std::ostream& out,
                 std::ostream& err);

/// Recomputes summary.csv's content from the files in `dir` into report.csv.
int cmd_report(const std::filesystem::path& dir, std::optional<std::size_t> window, std::ostream& out,
               std::ostream& err);

struct FitOptions {
    AdaptationScheme scheme = AdaptationScheme::em_gmm;
    std::size_t components = 1;
    double reg_radius = 0.0;
    std::uint64_t seed = 1;
    std::optional<double> fixed_dof;
    std::size_t em_max_iters = 200;
    double em_tol = 1e-6;
    /// SA only: starting mixture (last snapshot of a mixtures CSV) and steps.
    std::filesystem::path init_mixture;
    std::size_t sa_steps = 1;
    double sa_c = 0.5;
    double sa_n0 = 10.0;
    std::filesystem::path output = "fit.csv";
};

/// Reads whitespace-trimmed comma-separated vectors, one per line, with an
/// optional non-numeric header line.
std::vector<Eigen::VectorXd> read_samples_csv(const std::filesystem::path& path);

int cmd_fit(const std::filesystem::path& samples_csv, const FitOptions& options, std::ostream& out,
            std::ostream& err);

/// Directory holding the shipped presets.
std::filesystem::path preset_dir();
std::vector<std::string> preset_names();

}  // namespace rgess::cli
