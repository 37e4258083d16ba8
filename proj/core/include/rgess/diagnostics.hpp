#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "rgess/distributions.hpp"
#include "rgess/targets.hpp"

namespace rgess {

struct TraceRecord {
    std::size_t chain = 0;
    std::size_t iteration = 0;
    Eigen::VectorXd point;
    std::size_t rejections = 0;
    std::size_t region = 0;

    bool operator==(const TraceRecord&) const = default;
};

/// One trace per chain, records in increasing iteration order.
using Traces = std::vector<std::vector<TraceRecord>>;

struct MixtureSnapshot {
    std::size_t iteration = 0;
    MixtureModel mixture;
};

struct ModeSpec {
    std::vector<Eigen::VectorXd> centers;
    double radius = 1.0;
};

/// Mean rejection count over all chains in consecutive blocks of `window`
/// recorded iterations. A trailing partial block gets its own entry.
std::vector<double> rejection_rate_series(const Traces& traces, std::size_t window);

/// Fraction of rows where I{logistic(beta . x) > 0.5} equals the label.
double accuracy(const Eigen::VectorXd& beta_hat, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
double accuracy(const Eigen::VectorXd& beta_hat, const Dataset& data);

/// Per-mode fraction of records with iteration > burn_in that lie within
/// `radius` of that mode's center.
std::vector<double> mode_coverage(const Traces& traces, const ModeSpec& modes, std::size_t burn_in);

/// Mean of records with iteration > burn_in, keeping every `thinning`-th
/// record of each chain, pooled over chains.
Eigen::VectorXd posterior_mean(const Traces& traces, std::size_t burn_in, std::size_t thinning = 1);

/// Shortest decimal that reads back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

void write_trace_csv(const Traces& traces, const std::filesystem::path& path);
Traces read_trace_csv(const std::filesystem::path& path);

void write_mixtures_csv(const std::vector<MixtureSnapshot>& history, const std::filesystem::path& path);
std::vector<MixtureSnapshot> read_mixtures_csv(const std::filesystem::path& path);

/// Writes the trace to `path` and the mixture history to `mixtures_path`.
void write_trace_csv(const Traces& traces, const std::vector<MixtureSnapshot>& history,
                     const std::filesystem::path& path, const std::filesystem::path& mixtures_path);

}  // namespace rgess
