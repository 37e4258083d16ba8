#include "rgess/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>

namespace rgess {

namespace {

bool is_regional(Kernel k) {
    return k == Kernel::gmrgess || k == Kernel::tmrgess || k == Kernel::regional_mh || k == Kernel::gess;
}

bool wants_student(const RunConfig& c) {
    return c.kernel == Kernel::tmrgess || c.kernel == Kernel::gess ||
           (c.kernel == Kernel::regional_mh && c.adaptation.scheme == AdaptationScheme::em_tmm);
}

// M = 1 fit of the starting points. With too few points for a nonsingular
// covariance the starting distribution's covariance is used instead.
MixtureModel initial_mixture(const RunConfig& c, const std::vector<Eigen::VectorXd>& starts) {
    const auto dim = c.init_mean.size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& s : starts) mean += s;
    mean /= static_cast<double>(starts.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& s : starts) cov += (s - mean) * (s - mean).transpose();
    cov /= static_cast<double>(starts.size());
    if (static_cast<Eigen::Index>(starts.size()) <= dim) cov = c.init_cov;
    cov = regularize_cov(cov, c.adaptation.reg_radius);
    if (wants_student(c)) {
        const double nu = c.adaptation.fixed_dof.value_or(c.adaptation.initial_dof);
        return MixtureModel({1.0}, {StudentT::repaired(mean, cov, nu)});
    }
    return MixtureModel({1.0}, {Gaussian::repaired(mean, cov)});
}

struct ChainWork {
    ChainState state;
    Rng rng;
    std::vector<TraceRecord> trace;
    std::size_t capped = 0;
    std::exception_ptr error;
};

}  // namespace

std::string_view to_string(Kernel k) {
    switch (k) {
        case Kernel::ess: return "ess";
        case Kernel::gmrgess: return "gmrgess";
        case Kernel::tmrgess: return "tmrgess";
        case Kernel::regional_mh: return "regional_mh";
        case Kernel::mh: return "mh";
        case Kernel::gess: return "gess";
    }
    return "ess";
}

Kernel parse_kernel(std::string_view s) {
    for (auto k : {Kernel::ess, Kernel::gmrgess, Kernel::tmrgess, Kernel::regional_mh, Kernel::mh, Kernel::gess}) {
        if (to_string(k) == s) return k;
    }
    throw std::invalid_argument("unknown kernel '" + std::string(s) + "'");
}

std::size_t default_thread_count() {
    const char* env = std::getenv("RGESS_THREADS");
    if (env == nullptr) return 1;
    std::size_t n = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec != std::errc() || ptr != s.data() + s.size() || n == 0) return 1;
    return n;
}

void RunConfig::validate(std::size_t target_dim) const {
    if (chains < 1) throw std::invalid_argument("run.chains must be >= 1");
    if (iterations < 1) throw std::invalid_argument("run.iterations must be >= 1");
    if (burn_in >= iterations) throw std::invalid_argument("run.burn_in must be < run.iterations");
    if (thinning < 1) throw std::invalid_argument("run.thinning must be >= 1");
    if (steps_per_iteration < 1) throw std::invalid_argument("run.steps_per_iteration must be >= 1");
    if (max_shrink < 1) throw std::invalid_argument("run.max_shrink must be >= 1");
    if (summary_window < 1) throw std::invalid_argument("report.window must be >= 1");
    if (!(mh_proposal_scale > 0.0)) throw std::invalid_argument("mh.proposal_scale must be > 0");
    if (static_cast<std::size_t>(init_mean.size()) != target_dim) {
        throw std::invalid_argument("init.mean has dimension " + std::to_string(init_mean.size()) +
                                    ", target has " + std::to_string(target_dim));
    }
    if (init_cov.rows() != init_mean.size() || init_cov.cols() != init_mean.size()) {
        throw std::invalid_argument("init covariance shape does not match init.mean");
    }
    try {
        Gaussian check(init_mean, init_cov);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("init distribution: ") + e.what());
    }
    if (ess_prior && static_cast<std::size_t>(ess_prior->dim()) != target_dim) {
        throw std::invalid_argument("ESS prior dimension does not match the target");
    }
    if (chain_seeds && chain_seeds->size() != chains) {
        throw std::invalid_argument("chain_seeds must hold one seed per chain");
    }
    adaptation.validate();

    using S = AdaptationScheme;
    const S s = adaptation.scheme;
    const auto mismatch = [&] {
        return std::invalid_argument("kernel '" + std::string(to_string(kernel)) + "' cannot be used with adaptation '" +
                                     std::string(to_string(s)) + "'");
    };
    switch (kernel) {
        case Kernel::ess:
        case Kernel::mh:
            if (s != S::none) throw mismatch();
            break;
        case Kernel::gmrgess:
            if (s == S::em_tmm) throw mismatch();
            break;
        case Kernel::tmrgess:
            if (s != S::none && s != S::em_tmm) throw mismatch();
            break;
        case Kernel::gess:
            if (s != S::none && s != S::em_tmm) throw mismatch();
            if (adaptation.components != 1) throw std::invalid_argument("kernel 'gess' requires adaptation.components = 1");
            break;
        case Kernel::regional_mh:
            break;
    }
    if (s != S::none && chains < adaptation.components) {
        throw std::invalid_argument("run.chains (" + std::to_string(chains) +
                                    ") must be >= adaptation.components (" + std::to_string(adaptation.components) +
                                    "): each fit uses one point per chain");
    }
}

std::vector<Eigen::VectorXd> pooled_snapshot(const std::vector<ChainState>& chains) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(chains.size());
    for (const auto& c : chains) out.push_back(c.point);
    return out;
}

RunResult run(const RunConfig& config, const TargetDensity& target) {
    config.validate(target.dim);
    const std::size_t K = config.chains;
    const std::size_t N = config.iterations;
    const auto& acfg = config.adaptation;

    std::vector<ChainWork> work(K);
    const Gaussian init(config.init_mean, config.init_cov);
    for (std::size_t k = 0; k < K; ++k) {
        const std::uint64_t seed = config.chain_seeds ? (*config.chain_seeds)[k] : split_seed(config.master_seed, k + 1);
        work[k].rng.seed(seed);
        work[k].state.rng_seed = seed;
        work[k].state.point = init.sample(work[k].rng);
    }

    RunResult result;
    std::optional<MixtureModel> mixture;
    auto refresh_regions = [&] {
        for (auto& w : work) w.state.region = mixture->region(w.state.point, config.weighted_regions);
    };
    if (is_regional(config.kernel)) {
        std::vector<Eigen::VectorXd> starts;
        for (const auto& w : work) starts.push_back(w.state.point);
        mixture = initial_mixture(config, starts);
        refresh_regions();
        result.mixture_history.push_back({0, *mixture});
    }

    const Gaussian ess_prior = config.ess_prior.value_or(
        Gaussian(Eigen::VectorXd::Zero(config.init_mean.size()),
                 Eigen::MatrixXd::Identity(config.init_mean.size(), config.init_mean.size())));
    const LogFunction ess_log_likelihood = [&](const Eigen::VectorXd& x) {
        return target.log_pi(x) - ess_prior.log_density(x);
    };
    const Gaussian mh_proposal(Eigen::VectorXd::Zero(config.init_mean.size()),
                               config.mh_proposal_scale *
                                   Eigen::MatrixXd::Identity(config.init_mean.size(), config.init_mean.size()));
    const bool slice_kernel = config.kernel != Kernel::mh && config.kernel != Kernel::regional_mh;

    const bool adapting = is_regional(config.kernel) && acfg.scheme != AdaptationScheme::none;
    const std::size_t first_adapt = std::max(acfg.interval, 2 * acfg.components);
    auto is_barrier = [&](std::size_t n) { return adapting && n % acfg.interval == 0 && n >= first_adapt; };

    Rng adapt_rng(split_seed(config.master_seed, 0));
    std::optional<MixtureModel> sa_state;
    std::size_t sa_steps = 0;

    auto adapt = [&](std::size_t n) {
        std::vector<ChainState> states;
        for (const auto& w : work) states.push_back(w.state);
        const auto samples = pooled_snapshot(states);
        try {
            if (acfg.scheme == AdaptationScheme::sa_gmm) {
                if (!sa_state) {
                    AdaptationConfig init_cfg = acfg;
                    init_cfg.scheme = AdaptationScheme::em_gmm;
                    init_cfg.reg_radius = 0.0;
                    const FitResult fit = em_gmm_fit(samples, acfg.components, init_cfg, adapt_rng);
                    result.summary.reseeded_components += fit.reseeded_components;
                    sa_state = fit.mixture;
                } else {
                    const SaUpdateResult up = sa_gmm_update(*sa_state, samples, acfg.learning_rate.rate(++sa_steps));
                    if (up.skipped) ++result.summary.sa_skipped;
                    sa_state = up.mixture;
                }
                mixture = regularized(*sa_state, acfg.reg_radius);
            } else {
                const FitResult fit = fit_mixture(samples, acfg, adapt_rng);
                result.summary.reseeded_components += fit.reseeded_components;
                result.summary.dof_failures += fit.dof_failures;
                mixture = fit.mixture;
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("adaptation at iteration " + std::to_string(n) + ": " + e.what());
        }
        ++result.summary.adaptations;
        refresh_regions();
        result.mixture_history.push_back({n, *mixture});
    };

    SliceOptions opts;
    opts.max_shrink = config.max_shrink;
    opts.weighted_regions = config.weighted_regions;

    auto step = [&](ChainState& state, Rng& rng) -> StepOutcome {
        switch (config.kernel) {
            case Kernel::ess: return ess_step(state, ess_prior, ess_log_likelihood, rng, opts);
            case Kernel::gmrgess: return gmrgess_step(state, *mixture, target, rng, opts);
            case Kernel::tmrgess:
            case Kernel::gess: return tmrgess_step(state, *mixture, target, rng, opts);
            case Kernel::regional_mh: return regional_mh_step(state, *mixture, target, rng, config.weighted_regions);
            case Kernel::mh: return mh_step(state, mh_proposal, target, rng);
        }
        throw std::logic_error("unhandled kernel");
    };

    auto advance_chain = [&](std::size_t k, std::size_t first, std::size_t last) {
        ChainWork& w = work[k];
        std::size_t n = first;
        try {
            for (; n <= last; ++n) {
                std::size_t rejections = 0;
                for (std::size_t s = 0; s < config.steps_per_iteration; ++s) {
                    StepOutcome out = step(w.state, w.rng);
                    rejections += out.rejections;
                    if (slice_kernel && out.rejections >= config.max_shrink) ++w.capped;
                    w.state = std::move(out.next);
                }
                w.state.rejections_last_step = rejections;
                if (n % config.thinning == 0) {
                    w.trace.push_back({k, n, w.state.point, rejections, w.state.region});
                }
            }
        } catch (const std::exception& e) {
            w.error = std::make_exception_ptr(
                std::runtime_error("chain " + std::to_string(k) + ", iteration " + std::to_string(n) + ": " + e.what()));
        }
    };

    const std::size_t threads = std::min(config.threads ? config.threads : default_thread_count(), K);
    auto advance_all = [&](std::size_t first, std::size_t last) {
        if (threads <= 1) {
            for (std::size_t k = 0; k < K; ++k) advance_chain(k, first, last);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < threads; ++t) {
                pool.emplace_back([&] {
                    for (std::size_t k = next++; k < K; k = next++) advance_chain(k, first, last);
                });
            }
            for (auto& th : pool) th.join();
        }
        for (const auto& w : work) {
            if (w.error) std::rethrow_exception(w.error);
        }
    };

    for (std::size_t n = 1; n <= N;) {
        if (is_barrier(n)) adapt(n);
        std::size_t last = n;
        while (last < N && !is_barrier(last + 1)) ++last;
        advance_all(n, last);
        n = last + 1;
    }

    result.traces.reserve(K);
    for (auto& w : work) {
        result.summary.capped_steps += w.capped;
        result.traces.push_back(std::move(w.trace));
    }
    if (!result.traces.front().empty()) {
        result.summary.rejection_rates = rejection_rate_series(result.traces, config.summary_window);
        double total = 0.0;
        std::size_t records = 0, accepted = 0;
        for (const auto& t : result.traces) {
            for (const auto& r : t) {
                total += static_cast<double>(r.rejections);
                accepted += r.rejections == 0 ? 1 : 0;
                ++records;
            }
        }
        result.summary.mean_rejections = total / static_cast<double>(records);
        result.summary.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(records);
    }
    return result;
}

}  // namespace rgess
