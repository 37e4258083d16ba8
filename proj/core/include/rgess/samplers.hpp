#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "rgess/distributions.hpp"
#include "rgess/random.hpp"

namespace rgess {

using LogFunction = std::function<double(const Eigen::VectorXd&)>;

/// Unnormalized log target over R^dim. May return -inf outside its support.
struct TargetDensity {
    std::size_t dim = 0;
    LogFunction log_pi;
};

struct ChainState {
    Eigen::VectorXd point;
    std::size_t region = 0;
    std::size_t rejections_last_step = 0;
    std::uint64_t rng_seed = 0;
};

struct StepOutcome {
    ChainState next;
    std::size_t rejections = 0;
    double angle_final = 0.0;  ///< accepted ellipse angle; 0 for MH-type kernels
};

/// One proposal inside an elliptical slice step: the bracket it was drawn
/// from and the angle drawn.
struct BracketEvent {
    double theta_min;
    double theta_max;
    double theta;
    bool accepted;
};

struct SliceOptions {
    /// Shrinkage cap per step; hitting it returns the current point with
    /// rejections == max_shrink.
    std::size_t max_shrink = 1000;
    bool weighted_regions = false;
    /// When set, every proposal of the step is appended here.
    std::vector<BracketEvent>* bracket_log = nullptr;
};

/// Elliptical slice sampling for pi(x) ∝ L(x) N(x; mean, cov).
StepOutcome ess_step(const ChainState& state, const Gaussian& prior,
                     const LogFunction& log_likelihood, Rng& rng,
                     const SliceOptions& opts = {});

/// Regional generalized ESS with Gaussian-mixture pseudo-priors.
StepOutcome gmrgess_step(const ChainState& state, const MixtureModel& mixture,
                         const TargetDensity& target, Rng& rng,
                         const SliceOptions& opts = {});

/// Regional generalized ESS with Student's-t-mixture pseudo-priors. With a
/// single component this is the GESS baseline.
StepOutcome tmrgess_step(const ChainState& state, const MixtureModel& mixture,
                         const TargetDensity& target, Rng& rng,
                         const SliceOptions& opts = {});

/// Independence MH whose proposal is the component owning the current region.
StepOutcome regional_mh_step(const ChainState& state, const MixtureModel& mixture,
                             const TargetDensity& target, Rng& rng,
                             bool weighted_regions = false);

/// Random-walk MH with a N(x, proposal_cov) proposal.
StepOutcome mh_step(const ChainState& state, const Eigen::MatrixXd& proposal_cov,
                    const TargetDensity& target, Rng& rng);

/// Same as above with a pre-factored proposal (mean ignored).
StepOutcome mh_step(const ChainState& state, const Gaussian& proposal,
                    const TargetDensity& target, Rng& rng);

/// log R_i(x_to) - log R_j(x_from), with R_m(x) = pi(x) / f_m(x): the log of
/// the regional acceptance ratio for a move x_from (in S_i) -> x_to (in S_j).
double regional_log_ratio(const MixtureModel& mixture, const TargetDensity& target,
                          const Eigen::VectorXd& x_from, std::size_t i,
                          const Eigen::VectorXd& x_to, std::size_t j);

/// Shape/rate of the inverse-gamma scale draw for a t pseudo-prior at x:
/// alpha = (D + nu) / 2, beta = (nu + mahalanobis^2) / 2.
InverseGammaParams tmrgess_scale_params(const StudentT& component, const Eigen::VectorXd& x);

}  // namespace rgess
