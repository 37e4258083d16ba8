#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include <rgess/runner.hpp>

namespace rgess::cli {

/// Malformed or inconsistent configuration (exit code 1).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class TargetKind { gauss_mix, logistic, logistic_synth, litter };

std::string_view to_string(TargetKind k);
TargetKind parse_target_kind(std::string_view s);

struct TargetSpec {
    TargetKind kind = TargetKind::gauss_mix;
    // logistic (covtype-style CSV)
    std::filesystem::path path;
    std::size_t n_select = 4000;
    std::size_t n_features = 9;
    bool header = false;
    // logistic and logistic_synth
    double train_fraction = 0.75;
    std::uint64_t data_seed = 1;
    // logistic_synth
    std::size_t synth_n = 4000;
    Eigen::VectorXd beta_star;
};

struct ReportOptions {
    std::size_t window = 20;
    std::vector<Eigen::VectorXd> modes;
    double mode_radius = 9.486832980505138;  // 3 sqrt(10)
};

struct ExperimentConfig {
    RunConfig run;
    double init_cov_scale = 1.0;
    std::optional<Eigen::VectorXd> ess_prior_mean;
    double ess_prior_cov_scale = 1.0;
    TargetSpec target;
    std::filesystem::path output_dir = "rgess-out";
    ReportOptions report;
};

/// Flat `key = value` text; `#` starts a comment. Unknown or repeated keys
/// are errors.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key in canonical order; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// Applies one `key=value` assignment on top of a parsed config.
void apply_override(ExperimentConfig& config, std::string_view assignment);

/// All keys the parser accepts, in canonical order.
std::vector<std::string> config_keys();

std::size_t target_dim(const ExperimentConfig& config);

/// RunConfig with the derived fields (init covariance, ESS prior, report
/// window) filled in.
RunConfig make_run_config(const ExperimentConfig& config);

/// Checks everything that can be checked without running: value ranges,
/// kernel/adaptation pairing, dimensions, input paths. Throws ConfigError.
void validate_config(const ExperimentConfig& config);

}  // namespace rgess::cli
