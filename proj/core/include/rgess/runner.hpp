#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rgess/adaptation.hpp"
#include "rgess/diagnostics.hpp"
#include "rgess/distributions.hpp"
#include "rgess/samplers.hpp"

namespace rgess {

/// `gess` is tmrgess with a single t component.
enum class Kernel { ess, gmrgess, tmrgess, regional_mh, mh, gess };

std::string_view to_string(Kernel k);
Kernel parse_kernel(std::string_view s);

struct RunConfig {
    std::size_t chains = 1;
    std::size_t iterations = 100;
    std::size_t burn_in = 0;
    /// Record every `thinning`-th iteration.
    std::size_t thinning = 1;
    /// Kernel steps per chain per iteration; the record keeps the last point
    /// and the summed rejections.
    std::size_t steps_per_iteration = 1;
    Kernel kernel = Kernel::gmrgess;
    AdaptationConfig adaptation;
    /// Starting points are drawn from N(init_mean, init_cov).
    Eigen::VectorXd init_mean;
    Eigen::MatrixXd init_cov;
    std::uint64_t master_seed = 1;
    std::size_t max_shrink = 1000;
    bool weighted_regions = false;
    /// Random-walk proposal covariance is mh_proposal_scale * I.
    double mh_proposal_scale = 1.0;
    /// Prior for plain ESS; the likelihood is log pi - log prior. Defaults to N(0, I).
    std::optional<Gaussian> ess_prior;
    /// Window for the summary's rejection-rate series, in recorded iterations.
    std::size_t summary_window = 20;
    /// Replaces the derived per-chain seeds when set (one per chain).
    std::optional<std::vector<std::uint64_t>> chain_seeds;
    /// Worker count; 0 reads RGESS_THREADS (default 1).
    std::size_t threads = 0;

    /// Throws std::invalid_argument on inconsistent settings.
    void validate(std::size_t target_dim) const;
};

struct RunSummary {
    std::vector<double> rejection_rates;
    double mean_rejections = 0.0;
    /// Fraction of recorded steps with zero rejections.
    double acceptance_rate = 0.0;
    std::size_t adaptations = 0;
    std::size_t sa_skipped = 0;
    std::size_t reseeded_components = 0;
    std::size_t dof_failures = 0;
    std::size_t capped_steps = 0;
};

struct RunResult {
    Traces traces;
    /// Sampling mixture in force from each listed iteration on; starts at 0.
    std::vector<MixtureSnapshot> mixture_history;
    RunSummary summary;
};

RunResult run(const RunConfig& config, const TargetDensity& target);

std::vector<Eigen::VectorXd> pooled_snapshot(const std::vector<ChainState>& chains);

/// Worker count from RGESS_THREADS, at least 1.
std::size_t default_thread_count();

}  // namespace rgess
