#include "rgess/samplers.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

namespace rgess {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_finite_start(double log_value, const char* who) {
    if (!std::isfinite(log_value)) {
        throw std::domain_error(std::string(who) + ": log target is not finite at the current point");
    }
}

void require_dim(const Eigen::VectorXd& x, Eigen::Index d, const char* who) {
    if (x.size() != d) throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

// Angle-bracket shrinkage on the ellipse through x and v centered at
// `center`. `accept(x')` returns the region of x' when it is inside the
// slice, or nullopt to reject.
template <typename Accept>
StepOutcome shrink_on_ellipse(const ChainState& state, const Eigen::VectorXd& center,
                              const Eigen::VectorXd& v, double theta, Rng& rng,
                              const SliceOptions& opts, Accept&& accept) {
    const Eigen::VectorXd x0 = state.point - center;
    const Eigen::VectorXd v0 = v - center;
    double theta_min = theta - kTwoPi;
    double theta_max = theta;

    StepOutcome out;
    out.next = state;
    for (std::size_t rejections = 0;; ++rejections) {
        if (rejections >= opts.max_shrink) {
            out.rejections = opts.max_shrink;
            out.angle_final = 0.0;
            out.next.rejections_last_step = out.rejections;
            return out;
        }
        Eigen::VectorXd proposal = x0 * std::cos(theta) + v0 * std::sin(theta) + center;
        const std::optional<std::size_t> region = accept(proposal);
        if (opts.bracket_log != nullptr) {
            opts.bracket_log->push_back({theta_min, theta_max, theta, region.has_value()});
        }
        if (region) {
            out.next.point = std::move(proposal);
            out.next.region = *region;
            out.rejections = rejections;
            out.next.rejections_last_step = rejections;
            out.angle_final = theta;
            return out;
        }
        if (theta < 0.0) {
            theta_min = theta;
        } else {
            theta_max = theta;
        }
        theta = uniform(rng, theta_min, theta_max);
    }
}

// Shared body of the two regional kernels once the auxiliary draw is known.
StepOutcome regional_slice(const ChainState& state, const MixtureModel& mixture,
                           const TargetDensity& target, std::size_t current_region,
                           double log_pi_x, const Eigen::VectorXd& v, Rng& rng,
                           const SliceOptions& opts) {
    const double theta = uniform(rng, 0.0, kTwoPi);
    const double log_u = std::log(uniform_open_closed(rng));
    const Eigen::VectorXd& center = mixture.mean(current_region);
    return shrink_on_ellipse(
        state, center, v, theta, rng, opts,
        [&](const Eigen::VectorXd& proposal) -> std::optional<std::size_t> {
            const double log_pi_prop = target.log_pi(proposal);
            if (!(log_pi_prop > -std::numeric_limits<double>::infinity()) ||
                std::isnan(log_pi_prop)) {
                return std::nullopt;
            }
            const std::size_t j = mixture.region(proposal, opts.weighted_regions);
            // log R_I(x') > log R_J(x) + log u
            const double lhs = log_pi_prop - mixture.component_log_density(current_region, proposal);
            const double rhs = log_pi_x - mixture.component_log_density(j, state.point) + log_u;
            if (lhs > rhs) return j;
            return std::nullopt;
        });
}

}  // namespace

StepOutcome ess_step(const ChainState& state, const Gaussian& prior,
                     const LogFunction& log_likelihood, Rng& rng, const SliceOptions& opts) {
    require_dim(state.point, prior.dim(), "ess_step");
    const double log_l = log_likelihood(state.point);
    require_finite_start(log_l, "ess_step");

    const Eigen::VectorXd v = prior.sample(rng);
    const double log_y = log_l + std::log(uniform_open_closed(rng));
    const double theta = uniform(rng, 0.0, kTwoPi);
    const std::size_t region = state.region;
    return shrink_on_ellipse(state, prior.mean(), v, theta, rng, opts,
                             [&](const Eigen::VectorXd& proposal) -> std::optional<std::size_t> {
                                 if (log_likelihood(proposal) > log_y) return region;
                                 return std::nullopt;
                             });
}

StepOutcome gmrgess_step(const ChainState& state, const MixtureModel& mixture,
                         const TargetDensity& target, Rng& rng, const SliceOptions& opts) {
    if (mixture.kind() != ComponentKind::gaussian) {
        throw std::invalid_argument("gmrgess_step: mixture components must be Gaussian");
    }
    require_dim(state.point, mixture.dim(), "gmrgess_step");
    const double log_pi_x = target.log_pi(state.point);
    require_finite_start(log_pi_x, "gmrgess_step");

    const std::size_t current = mixture.region(state.point, opts.weighted_regions);
    const Eigen::VectorXd v = mixture.gaussians()[current].sample(rng);
    return regional_slice(state, mixture, target, current, log_pi_x, v, rng, opts);
}

InverseGammaParams tmrgess_scale_params(const StudentT& component, const Eigen::VectorXd& x) {
    const double d = static_cast<double>(component.dim());
    const double nu = component.dof();
    return {0.5 * (d + nu), 0.5 * (nu + component.mahalanobis_sq(x))};
}

StepOutcome tmrgess_step(const ChainState& state, const MixtureModel& mixture,
                         const TargetDensity& target, Rng& rng, const SliceOptions& opts) {
    if (mixture.kind() != ComponentKind::student_t) {
        throw std::invalid_argument("tmrgess_step: mixture components must be Student's t");
    }
    require_dim(state.point, mixture.dim(), "tmrgess_step");
    const double log_pi_x = target.log_pi(state.point);
    require_finite_start(log_pi_x, "tmrgess_step");

    const std::size_t current = mixture.region(state.point, opts.weighted_regions);
    const StudentT& component = mixture.student_ts()[current];
    const double s = sample_inverse_gamma(tmrgess_scale_params(component, state.point), rng);
    const Eigen::VectorXd v = component.gaussian_core().sample_scaled(rng, s);
    return regional_slice(state, mixture, target, current, log_pi_x, v, rng, opts);
}

namespace {

Eigen::VectorXd draw_component(const MixtureModel& mixture, std::size_t m, Rng& rng) {
    if (mixture.kind() == ComponentKind::gaussian) return mixture.gaussians()[m].sample(rng);
    return mixture.student_ts()[m].sample(rng);
}

}  // namespace

StepOutcome regional_mh_step(const ChainState& state, const MixtureModel& mixture,
                             const TargetDensity& target, Rng& rng, bool weighted_regions) {
    require_dim(state.point, mixture.dim(), "regional_mh_step");
    const double log_pi_x = target.log_pi(state.point);
    require_finite_start(log_pi_x, "regional_mh_step");

    const std::size_t i = mixture.region(state.point, weighted_regions);
    Eigen::VectorXd proposal = draw_component(mixture, i, rng);
    const double log_u = std::log(uniform_open_closed(rng));

    StepOutcome out;
    out.next = state;
    out.next.region = i;
    const double log_pi_prop = target.log_pi(proposal);
    if (log_pi_prop > -std::numeric_limits<double>::infinity()) {
        const std::size_t j = mixture.region(proposal, weighted_regions);
        // log [pi(x') f_J(x)] - log [pi(x) f_I(x')]
        const double log_ratio = log_pi_prop + mixture.component_log_density(j, state.point)
                                 - log_pi_x - mixture.component_log_density(i, proposal);
        if (log_u < log_ratio) {
            out.next.point = std::move(proposal);
            out.next.region = j;
            out.next.rejections_last_step = 0;
            return out;
        }
    }
    out.rejections = 1;
    out.next.rejections_last_step = 1;
    return out;
}

StepOutcome mh_step(const ChainState& state, const Gaussian& proposal,
                    const TargetDensity& target, Rng& rng) {
    require_dim(state.point, proposal.dim(), "mh_step");
    const double log_pi_x = target.log_pi(state.point);
    require_finite_start(log_pi_x, "mh_step");

    Eigen::VectorXd candidate = state.point + proposal.chol() * standard_normal_vector(rng, proposal.dim());
    const double log_u = std::log(uniform_open_closed(rng));
    StepOutcome out;
    out.next = state;
    const double log_pi_cand = target.log_pi(candidate);
    if (log_u < log_pi_cand - log_pi_x) {
        out.next.point = std::move(candidate);
        out.next.rejections_last_step = 0;
        return out;
    }
    out.rejections = 1;
    out.next.rejections_last_step = 1;
    return out;
}

StepOutcome mh_step(const ChainState& state, const Eigen::MatrixXd& proposal_cov,
                    const TargetDensity& target, Rng& rng) {
    const Gaussian proposal(Eigen::VectorXd::Zero(proposal_cov.rows()), proposal_cov);
    return mh_step(state, proposal, target, rng);
}

double regional_log_ratio(const MixtureModel& mixture, const TargetDensity& target,
                          const Eigen::VectorXd& x_from, std::size_t i,
                          const Eigen::VectorXd& x_to, std::size_t j) {
    const double log_r_i_to = target.log_pi(x_to) - mixture.component_log_density(i, x_to);
    const double log_r_j_from = target.log_pi(x_from) - mixture.component_log_density(j, x_from);
    return log_r_i_to - log_r_j_from;
}

}  // namespace rgess
