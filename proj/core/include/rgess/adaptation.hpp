#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rgess/distributions.hpp"
#include "rgess/random.hpp"

namespace rgess {

enum class AdaptationScheme { none, em_gmm, vi_gmm, sa_gmm, em_tmm };

std::string_view to_string(AdaptationScheme s);
/// Parses "none", "em_gmm", "vi_gmm", "sa_gmm", "em_tmm".
AdaptationScheme parse_adaptation_scheme(std::string_view s);

/// r_n = c / (n0 + n).
struct LearningRateSchedule {
    double c = 0.5;
    double n0 = 10.0;

    double rate(std::size_t n) const { return c / (n0 + static_cast<double>(n)); }
};

/// Dirichlet(alpha0) x Normal-Wishart(m0, beta0, W0, nu0) prior for the
/// variational fit. Unset fields are data-dependent defaults: m0 = sample
/// mean, nu0 = D + 2. W0 = w0_scale * I / D.
struct ViHyperparams {
    double alpha0 = 1.0;
    double beta0 = 1.0;
    double w0_scale = 1.0;
    std::optional<double> nu0;
    std::optional<Eigen::VectorXd> m0;
};

struct AdaptationConfig {
    AdaptationScheme scheme = AdaptationScheme::none;
    std::size_t components = 1;
    std::size_t interval = 20;
    double reg_radius = 0.0;
    LearningRateSchedule learning_rate;
    std::size_t em_max_iters = 200;
    double em_tol = 1e-6;
    ViHyperparams vi;
    /// Holds every t component at this dof instead of estimating it.
    std::optional<double> fixed_dof;
    /// Starting dof for estimated t components.
    double initial_dof = 10.0;

    void validate() const;
};

struct FitResult {
    MixtureModel mixture;
    bool converged = false;
    std::size_t iterations_used = 0;
    /// Final objective: penalized log-likelihood (EM) or evidence lower bound (VI).
    double objective = 0.0;
    /// Objective after every iteration; non-decreasing up to round-off.
    std::vector<double> objective_trace;
    std::size_t reseeded_components = 0;
    std::size_t dof_failures = 0;
};

using SampleSet = std::span<const Eigen::VectorXd>;

/// Maximum-likelihood Gaussian mixture by EM with k-means++ seeding.
FitResult em_gmm_fit(SampleSet samples, std::size_t components, const AdaptationConfig& config, Rng& rng);

/// Variational Bayes Gaussian mixture (Dirichlet / Normal-Wishart conjugate
/// priors, mean-field coordinate ascent). Returns the posterior-expected mixture.
FitResult vi_gmm_fit(SampleSet samples, std::size_t components, const AdaptationConfig& config, Rng& rng);

/// Student's t mixture by EM with latent precision scales; dof held at
/// config.fixed_dof or estimated per component on [kMinDof, kMaxDof].
FitResult em_tmm_fit(SampleSet samples, std::size_t components, const AdaptationConfig& config, Rng& rng);

inline constexpr double kMinDof = 0.1;
inline constexpr double kMaxDof = 200.0;

/// Raw stochastic-approximation direction for a Gaussian mixture, i.e. the
/// Monte Carlo estimate of the (projected, for weights) ascent direction of
/// (1/K) sum_k log f(X_k; phi).
struct SaDirection {
    std::vector<double> weights;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
};

SaDirection sa_gmm_direction(const MixtureModel& current, SampleSet samples);

struct SaUpdateResult {
    MixtureModel mixture;
    bool skipped = false;  ///< non-finite update; `mixture` is the input
};

/// One step phi <- phi + rate * direction, then weight clipping to
/// [kSaWeightFloor, 1] with renormalization and covariance repair.
SaUpdateResult sa_gmm_update(const MixtureModel& current, SampleSet samples, double rate);

inline constexpr double kSaWeightFloor = 1e-6;

/// Dispatches on config.scheme (EM_GMM, VI_GMM, EM_TMM). SA is an update,
/// not a fit; asking for it here throws.
FitResult fit_mixture(SampleSet samples, const AdaptationConfig& config, Rng& rng);

/// Adds r * I to every covariance / scale matrix.
MixtureModel regularized(const MixtureModel& m, double r);

/// Chooses `k` distinct-where-possible seed indices by k-means++ D^2 sampling.
std::vector<std::size_t> kmeans_pp_seeds(SampleSet samples, std::size_t k, Rng& rng);

}  // namespace rgess
