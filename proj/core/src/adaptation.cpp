#include "rgess/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/tools/roots.hpp>

namespace rgess {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
// Responsibility mass below which a component is considered empty.
constexpr double kEmptyMass = 1e-8;
// EM covariance penalty, relative to the mean per-coordinate sample variance.
// Keeps singleton components finite without visibly moving the MLE.
constexpr double kCovPenalty = 1e-8;

struct Data {
    Eigen::MatrixXd x;  // D x K, one sample per column
    Eigen::Index dim = 0;
    Eigen::Index count = 0;
};

Data pack(SampleSet samples, std::size_t components, const char* who) {
    if (components == 0) {
        throw std::invalid_argument(std::string(who) + ": need at least one component");
    }
    if (samples.size() < components) {
        throw std::invalid_argument(std::string(who) + ": fewer samples than components");
    }
    Data d;
    d.dim = samples.front().size();
    d.count = static_cast<Eigen::Index>(samples.size());
    if (d.dim == 0) throw std::invalid_argument(std::string(who) + ": zero-dimensional samples");
    d.x.resize(d.dim, d.count);
    for (Eigen::Index k = 0; k < d.count; ++k) {
        const auto& s = samples[static_cast<std::size_t>(k)];
        if (s.size() != d.dim) {
            throw std::invalid_argument(std::string(who) + ": inconsistent sample dimensions");
        }
        if (!s.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite sample");
        d.x.col(k) = s;
    }
    return d;
}

bool all_identical(const Data& d) {
    for (Eigen::Index k = 1; k < d.count; ++k) {
        if (d.x.col(k) != d.x.col(0)) return false;
    }
    return true;
}

Eigen::MatrixXd population_cov(const Data& d) {
    const Eigen::VectorXd mean = d.x.rowwise().mean();
    const Eigen::MatrixXd c = d.x.colwise() - mean;
    return (c * c.transpose()) / static_cast<double>(d.count);
}

double cov_penalty(const Data& d) {
    const double scale = population_cov(d).diagonal().mean();
    return kCovPenalty * (scale > 0.0 ? scale : 1.0);
}

// Floor used where a covariance must be proportional to reg_radius * I but
// reg_radius is zero.
double spherical_floor(double reg_radius) { return std::max(reg_radius, kPsdJitter); }

MixtureModel degenerate_surrogate(const Data& d, std::size_t m, const AdaptationConfig& cfg,
                                  bool student) {
    const Eigen::VectorXd point = d.x.col(0);
    const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d.dim, d.dim) * spherical_floor(cfg.reg_radius);
    std::vector<double> w(m, 1.0 / static_cast<double>(m));
    if (student) {
        const double nu = cfg.fixed_dof.value_or(cfg.initial_dof);
        return MixtureModel(std::move(w), std::vector<StudentT>(m, StudentT(point, cov, nu)));
    }
    return MixtureModel(std::move(w), std::vector<Gaussian>(m, Gaussian(point, cov)));
}

FitResult degenerate_result(const Data& d, std::size_t m, const AdaptationConfig& cfg, bool student) {
    return FitResult{degenerate_surrogate(d, m, cfg, student), true, 0, 0.0, {}, 0, 0};
}

void normalize_weights(std::vector<double>& w) {
    double sum = 0.0;
    for (double x : w) sum += x;
    for (double& x : w) x /= sum;
}

// Log-domain responsibilities. `log_terms` is K x M holding log w_m + log f_m(x_k);
// it is overwritten with normalized responsibilities. Returns sum_k log f(x_k).
double normalize_responsibilities(Eigen::MatrixXd& log_terms) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < log_terms.rows(); ++k) {
        const double lse = log_sum_exp(log_terms.row(k).transpose());
        total += lse;
        log_terms.row(k) = (log_terms.row(k).array() - lse).exp();
    }
    return total;
}

double max_abs_change(const std::vector<double>& w0, const std::vector<double>& w1,
                      const std::vector<Eigen::VectorXd>& mu0, const std::vector<Eigen::VectorXd>& mu1,
                      const std::vector<Eigen::MatrixXd>& s0, const std::vector<Eigen::MatrixXd>& s1) {
    double change = 0.0;
    for (std::size_t m = 0; m < w0.size(); ++m) {
        change = std::max(change, std::abs(w0[m] - w1[m]));
        change = std::max(change, (mu0[m] - mu1[m]).cwiseAbs().maxCoeff());
        change = std::max(change, (s0[m] - s1[m]).cwiseAbs().maxCoeff());
    }
    return change;
}

struct Params {
    std::vector<double> weights;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    std::vector<double> dofs;  // t mixtures only
};

Params kmeans_pp_init(const Data& d, std::size_t m, Rng& rng) {
    std::vector<Eigen::VectorXd> samples;
    samples.reserve(static_cast<std::size_t>(d.count));
    for (Eigen::Index k = 0; k < d.count; ++k) samples.emplace_back(d.x.col(k));
    const auto seeds = kmeans_pp_seeds(samples, m, rng);
    const Eigen::MatrixXd base = Gaussian::repaired(Eigen::VectorXd::Zero(d.dim), population_cov(d)).cov();

    // One hard assignment to the nearest seed gives starting weights, means
    // and covariances.
    std::vector<std::vector<Eigen::Index>> members(m);
    for (Eigen::Index k = 0; k < d.count; ++k) {
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            const double d2 = (d.x.col(k) - samples[seeds[i]]).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = i;
            }
        }
        members[best].push_back(k);
    }
    Params p;
    for (std::size_t i = 0; i < m; ++i) {
        const auto n = static_cast<Eigen::Index>(members[i].size());
        p.weights.push_back(static_cast<double>(std::max<Eigen::Index>(n, 1)));
        if (n < 2) {
            p.means.push_back(samples[seeds[i]]);
            p.covs.push_back(base);
            continue;
        }
        Eigen::MatrixXd block(d.dim, n);
        for (Eigen::Index c = 0; c < n; ++c) block.col(c) = d.x.col(members[i][static_cast<std::size_t>(c)]);
        const Eigen::VectorXd mean = block.rowwise().mean();
        const Eigen::MatrixXd centered = block.colwise() - mean;
        p.means.push_back(mean);
        const Eigen::MatrixXd floor = Eigen::MatrixXd::Identity(d.dim, d.dim) * cov_penalty(d);
        p.covs.push_back(
            Gaussian::repaired(mean, centered * centered.transpose() / static_cast<double>(n) + floor).cov());
    }
    normalize_weights(p.weights);
    return p;
}

// Filled in before return; MixtureModel has no default constructor.
FitResult placeholder_result(Eigen::Index dim) {
    FitResult r{MixtureModel({1.0}, {Gaussian(Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim))}),
                false, 0, 0.0, {}, 0, 0};
    return r;
}

}  // namespace

// ------------------------------------------------------------------ config

std::string_view to_string(AdaptationScheme s) {
    switch (s) {
        case AdaptationScheme::none: return "none";
        case AdaptationScheme::em_gmm: return "em_gmm";
        case AdaptationScheme::vi_gmm: return "vi_gmm";
        case AdaptationScheme::sa_gmm: return "sa_gmm";
        case AdaptationScheme::em_tmm: return "em_tmm";
    }
    return "none";
}

AdaptationScheme parse_adaptation_scheme(std::string_view s) {
    for (auto scheme : {AdaptationScheme::none, AdaptationScheme::em_gmm, AdaptationScheme::vi_gmm,
                        AdaptationScheme::sa_gmm, AdaptationScheme::em_tmm}) {
        if (to_string(scheme) == s) return scheme;
    }
    throw std::invalid_argument("unknown adaptation scheme '" + std::string(s) + "'");
}

void AdaptationConfig::validate() const {
    if (components < 1) throw std::invalid_argument("adaptation.components must be >= 1");
    if (interval < 1) throw std::invalid_argument("adaptation.interval must be >= 1");
    if (!(reg_radius >= 0.0)) throw std::invalid_argument("adaptation.reg_radius must be >= 0");
    if (!(learning_rate.c > 0.0)) throw std::invalid_argument("adaptation.sa_c must be > 0");
    if (!(learning_rate.n0 >= 1.0)) throw std::invalid_argument("adaptation.sa_n0 must be >= 1");
    if (em_max_iters < 1) throw std::invalid_argument("adaptation.em_max_iters must be >= 1");
    if (!(em_tol > 0.0)) throw std::invalid_argument("adaptation.em_tol must be > 0");
    if (fixed_dof && !(*fixed_dof > 0.0)) throw std::invalid_argument("adaptation.fixed_dof must be > 0");
    if (!(initial_dof >= kMinDof && initial_dof <= kMaxDof)) {
        throw std::invalid_argument("adaptation.initial_dof must lie in [0.1, 200]");
    }
    if (!(vi.alpha0 > 0.0) || !(vi.beta0 > 0.0) || !(vi.w0_scale > 0.0)) {
        throw std::invalid_argument("adaptation.vi_* hyperparameters must be positive");
    }
}

// ---------------------------------------------------------------- k-means++

std::vector<std::size_t> kmeans_pp_seeds(SampleSet samples, std::size_t k, Rng& rng) {
    if (samples.size() < k || k == 0) throw std::invalid_argument("kmeans_pp_seeds: bad k");
    const std::size_t n = samples.size();
    std::vector<std::size_t> seeds;
    seeds.push_back(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (seeds.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], (samples[i] - samples[seeds.back()]).squaredNorm());
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = uniform01(rng) * total;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                target -= d2[i];
                if (target < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
        }
        seeds.push_back(pick);
    }
    return seeds;
}

// --------------------------------------------------------------------- EM

FitResult em_gmm_fit(SampleSet samples, std::size_t m, const AdaptationConfig& cfg, Rng& rng) {
    const Data d = pack(samples, m, "em_gmm_fit");
    if (all_identical(d)) return degenerate_result(d, m, cfg, false);

    const double eps = cov_penalty(d);
    Params p = kmeans_pp_init(d, m, rng);
    const auto K = d.count;
    const auto M = static_cast<Eigen::Index>(m);

    FitResult res = placeholder_result(d.dim);
    Eigen::MatrixXd resp(K, M);

    auto e_step = [&](const std::vector<Gaussian>& comps) {
        for (Eigen::Index j = 0; j < M; ++j) {
            const auto& g = comps[static_cast<std::size_t>(j)];
            const double lw = std::log(p.weights[static_cast<std::size_t>(j)]);
            for (Eigen::Index k = 0; k < K; ++k) resp(k, j) = lw + g.log_density(d.x.col(k));
        }
        double ll = normalize_responsibilities(resp);
        for (const auto& g : comps) {
            ll -= 0.5 * eps * g.chol().triangularView<Eigen::Lower>().solve(
                                   Eigen::MatrixXd::Identity(d.dim, d.dim)).squaredNorm();
        }
        return ll;
    };
    auto components = [&] {
        std::vector<Gaussian> comps;
        for (std::size_t j = 0; j < m; ++j) comps.push_back(Gaussian::repaired(p.means[j], p.covs[j]));
        return comps;
    };

    std::vector<Gaussian> comps = components();
    for (std::size_t it = 0; it < cfg.em_max_iters; ++it) {
        res.objective_trace.push_back(e_step(comps));

        Params next = p;
        for (Eigen::Index j = 0; j < M; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const double nj = resp.col(j).sum();
            if (nj < kEmptyMass) {
                const auto pick = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(K)) % K;
                next.means[ju] = d.x.col(pick);
                next.covs[ju] = Eigen::MatrixXd::Identity(d.dim, d.dim) * spherical_floor(cfg.reg_radius);
                next.weights[ju] = 1.0 / static_cast<double>(K);
                ++res.reseeded_components;
                continue;
            }
            next.weights[ju] = nj / static_cast<double>(K);
            next.means[ju] = d.x * resp.col(j) / nj;
            const Eigen::MatrixXd c = d.x.colwise() - next.means[ju];
            Eigen::MatrixXd s = (c * resp.col(j).asDiagonal() * c.transpose()) / nj;
            s.diagonal().array() += eps / nj;
            next.covs[ju] = 0.5 * (s + s.transpose());
        }
        normalize_weights(next.weights);
        const double change = max_abs_change(p.weights, next.weights, p.means, next.means, p.covs, next.covs);
        p = std::move(next);
        comps = components();
        res.iterations_used = it + 1;
        if (change < cfg.em_tol) {
            res.converged = true;
            break;
        }
    }
    res.objective_trace.push_back(e_step(comps));
    res.objective = res.objective_trace.back();

    std::vector<Gaussian> out;
    for (std::size_t j = 0; j < m; ++j) {
        out.push_back(Gaussian::repaired(p.means[j], regularize_cov(p.covs[j], cfg.reg_radius)));
    }
    res.mixture = MixtureModel(p.weights, std::move(out));
    return res;
}

// ----------------------------------------------------------------- EM (t)

namespace {

// Maximizer over [kMinDof, kMaxDof] of the dof part of the EM objective:
// solves -psi(nu/2) + log(nu/2) + 1 + c = 0, clamping to the bounds when the
// (monotone decreasing) left side does not change sign. nullopt on failure.
std::optional<double> solve_dof(double c) {
    using boost::math::digamma;
    auto f = [c](double nu) { return -digamma(0.5 * nu) + std::log(0.5 * nu) + 1.0 + c; };
    const double lo = f(kMinDof);
    const double hi = f(kMaxDof);
    if (!std::isfinite(lo) || !std::isfinite(hi)) return std::nullopt;
    if (hi >= 0.0) return kMaxDof;
    if (lo <= 0.0) return kMinDof;
    boost::uintmax_t max_iter = 200;
    try {
        const auto [a, b] = boost::math::tools::toms748_solve(
            f, kMinDof, kMaxDof, lo, hi, boost::math::tools::eps_tolerance<double>(40), max_iter);
        const double nu = 0.5 * (a + b);
        if (!std::isfinite(nu)) return std::nullopt;
        return nu;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace

FitResult em_tmm_fit(SampleSet samples, std::size_t m, const AdaptationConfig& cfg, Rng& rng) {
    const Data d = pack(samples, m, "em_tmm_fit");
    if (all_identical(d)) return degenerate_result(d, m, cfg, true);

    using boost::math::digamma;
    const double eps = cov_penalty(d);
    const double dim = static_cast<double>(d.dim);
    Params p = kmeans_pp_init(d, m, rng);
    p.dofs.assign(m, cfg.fixed_dof.value_or(cfg.initial_dof));
    const auto K = d.count;
    const auto M = static_cast<Eigen::Index>(m);

    FitResult res = placeholder_result(d.dim);
    Eigen::MatrixXd tau(K, M);
    Eigen::MatrixXd u(K, M);

    auto components = [&] {
        std::vector<StudentT> comps;
        for (std::size_t j = 0; j < m; ++j) comps.push_back(StudentT::repaired(p.means[j], p.covs[j], p.dofs[j]));
        return comps;
    };
    auto e_step = [&](const std::vector<StudentT>& comps) {
        for (Eigen::Index j = 0; j < M; ++j) {
            const auto& t = comps[static_cast<std::size_t>(j)];
            const double lw = std::log(p.weights[static_cast<std::size_t>(j)]);
            for (Eigen::Index k = 0; k < K; ++k) {
                const Eigen::VectorXd xk = d.x.col(k);
                tau(k, j) = lw + t.log_density(xk);
                u(k, j) = (t.dof() + dim) / (t.dof() + t.mahalanobis_sq(xk));
            }
        }
        double ll = normalize_responsibilities(tau);
        for (const auto& t : comps) {
            ll -= 0.5 * eps * t.chol().triangularView<Eigen::Lower>().solve(
                                   Eigen::MatrixXd::Identity(d.dim, d.dim)).squaredNorm();
        }
        return ll;
    };

    std::vector<StudentT> comps = components();
    for (std::size_t it = 0; it < cfg.em_max_iters; ++it) {
        res.objective_trace.push_back(e_step(comps));

        Params next = p;
        for (Eigen::Index j = 0; j < M; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const double nj = tau.col(j).sum();
            if (nj < kEmptyMass) {
                const auto pick = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(K)) % K;
                next.means[ju] = d.x.col(pick);
                next.covs[ju] = Eigen::MatrixXd::Identity(d.dim, d.dim) * spherical_floor(cfg.reg_radius);
                next.weights[ju] = 1.0 / static_cast<double>(K);
                ++res.reseeded_components;
                continue;
            }
            const Eigen::VectorXd tu = tau.col(j).cwiseProduct(u.col(j));
            next.weights[ju] = nj / static_cast<double>(K);
            next.means[ju] = d.x * tu / tu.sum();
            const Eigen::MatrixXd c = d.x.colwise() - next.means[ju];
            Eigen::MatrixXd s = (c * tu.asDiagonal() * c.transpose()) / nj;
            s.diagonal().array() += eps / nj;
            next.covs[ju] = 0.5 * (s + s.transpose());

            if (!cfg.fixed_dof) {
                const double nu_old = p.dofs[ju];
                double acc = 0.0;
                for (Eigen::Index k = 0; k < K; ++k) {
                    acc += tau(k, j) * (std::log(u(k, j)) - u(k, j));
                }
                const double c_term = acc / nj + digamma(0.5 * (nu_old + dim)) - std::log(0.5 * (nu_old + dim));
                if (const auto nu = solve_dof(c_term)) {
                    next.dofs[ju] = *nu;
                } else {
                    ++res.dof_failures;
                }
            }
        }
        normalize_weights(next.weights);
        double change = max_abs_change(p.weights, next.weights, p.means, next.means, p.covs, next.covs);
        for (std::size_t j = 0; j < m; ++j) change = std::max(change, std::abs(next.dofs[j] - p.dofs[j]));
        p = std::move(next);
        comps = components();
        res.iterations_used = it + 1;
        if (change < cfg.em_tol) {
            res.converged = true;
            break;
        }
    }
    res.objective_trace.push_back(e_step(comps));
    res.objective = res.objective_trace.back();

    std::vector<StudentT> out;
    for (std::size_t j = 0; j < m; ++j) {
        out.push_back(StudentT::repaired(p.means[j], regularize_cov(p.covs[j], cfg.reg_radius), p.dofs[j]));
    }
    res.mixture = MixtureModel(p.weights, std::move(out));
    return res;
}

// --------------------------------------------------------------------- VI

namespace {

double log_wishart_norm(const Eigen::MatrixXd& w, double nu) {
    // ln B(W, nu)
    const double dim = static_cast<double>(w.rows());
    Eigen::LLT<Eigen::MatrixXd> llt(w);
    const double log_det_w = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
    double acc = 0.5 * nu * dim * std::numbers::ln2 + 0.25 * dim * (dim - 1.0) * std::log(std::numbers::pi);
    for (Eigen::Index i = 1; i <= w.rows(); ++i) acc += std::lgamma(0.5 * (nu + 1.0 - static_cast<double>(i)));
    return -0.5 * nu * log_det_w - acc;
}

double log_dirichlet_norm(const Eigen::VectorXd& alpha) {
    return std::lgamma(alpha.sum()) - alpha.unaryExpr([](double a) { return std::lgamma(a); }).sum();
}

double log_det_spd(const Eigen::MatrixXd& a) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    return 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

}  // namespace

FitResult vi_gmm_fit(SampleSet samples, std::size_t m, const AdaptationConfig& cfg, Rng& rng) {
    const Data d = pack(samples, m, "vi_gmm_fit");
    if (all_identical(d)) return degenerate_result(d, m, cfg, false);

    using boost::math::digamma;
    const auto K = d.count;
    const auto M = static_cast<Eigen::Index>(m);
    const auto D = d.dim;
    const double dim = static_cast<double>(D);

    const double alpha0 = cfg.vi.alpha0;
    const double beta0 = cfg.vi.beta0;
    const double nu0 = cfg.vi.nu0.value_or(dim + 2.0);
    if (!(nu0 > dim - 1.0)) throw std::invalid_argument("vi_gmm_fit: nu0 must exceed D - 1");
    const Eigen::VectorXd m0 = cfg.vi.m0.value_or(Eigen::VectorXd(d.x.rowwise().mean()));
    if (m0.size() != D) throw std::invalid_argument("vi_gmm_fit: m0 dimension mismatch");
    const Eigen::MatrixXd w0 = Eigen::MatrixXd::Identity(D, D) * (cfg.vi.w0_scale / dim);
    const Eigen::MatrixXd w0_inv = w0.inverse();
    const double log_b0 = log_wishart_norm(w0, nu0);

    // Hard k-means++ assignment as the starting responsibilities.
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(K, M);
    {
        std::vector<Eigen::VectorXd> pts;
        for (Eigen::Index k = 0; k < K; ++k) pts.emplace_back(d.x.col(k));
        const auto seeds = kmeans_pp_seeds(pts, m, rng);
        for (Eigen::Index k = 0; k < K; ++k) {
            Eigen::Index best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < M; ++j) {
                const double dd = (pts[static_cast<std::size_t>(k)] - pts[seeds[static_cast<std::size_t>(j)]]).squaredNorm();
                if (dd < best_d) {
                    best_d = dd;
                    best = j;
                }
            }
            r(k, best) = 1.0;
        }
    }

    Eigen::VectorXd alpha(M), beta(M), nu(M);
    std::vector<Eigen::VectorXd> mk(m);
    std::vector<Eigen::MatrixXd> wk(m), wk_inv(m);
    Eigen::VectorXd e_log_pi(M), e_log_lambda(M);

    FitResult res = placeholder_result(D);

    auto variational_m_step_and_bound = [&]() {
        const Eigen::VectorXd nk = r.colwise().sum().transpose();
        std::vector<Eigen::VectorXd> xbar(m);
        std::vector<Eigen::MatrixXd> sk(m);
        for (Eigen::Index j = 0; j < M; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            if (nk[j] > 1e-12) {
                xbar[ju] = d.x * r.col(j) / nk[j];
                const Eigen::MatrixXd c = d.x.colwise() - xbar[ju];
                sk[ju] = (c * r.col(j).asDiagonal() * c.transpose()) / nk[j];
            } else {
                xbar[ju] = m0;
                sk[ju] = Eigen::MatrixXd::Zero(D, D);
            }
            alpha[j] = alpha0 + nk[j];
            beta[j] = beta0 + nk[j];
            nu[j] = nu0 + nk[j];
            mk[ju] = (beta0 * m0 + nk[j] * xbar[ju]) / beta[j];
            const Eigen::VectorXd diff = xbar[ju] - m0;
            Eigen::MatrixXd winv = w0_inv + nk[j] * sk[ju] + (beta0 * nk[j] / (beta0 + nk[j])) * diff * diff.transpose();
            wk_inv[ju] = 0.5 * (winv + winv.transpose());
            wk[ju] = wk_inv[ju].llt().solve(Eigen::MatrixXd::Identity(D, D));
            wk[ju] = 0.5 * (wk[ju] + wk[ju].transpose());
        }
        const double dig_alpha_sum = digamma(alpha.sum());
        for (Eigen::Index j = 0; j < M; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            e_log_pi[j] = digamma(alpha[j]) - dig_alpha_sum;
            double s = dim * std::numbers::ln2 + log_det_spd(wk[ju]);
            for (Eigen::Index i = 1; i <= D; ++i) s += digamma(0.5 * (nu[j] + 1.0 - static_cast<double>(i)));
            e_log_lambda[j] = s;
        }

        // Evidence lower bound, evaluated at (r, q(pi, mu, Lambda)).
        double e_log_px = 0.0, e_log_pmu = 0.0, e_log_qmu = 0.0, trace_w0 = 0.0;
        for (Eigen::Index j = 0; j < M; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const Eigen::VectorXd dx = xbar[ju] - mk[ju];
            const Eigen::VectorXd dm = mk[ju] - m0;
            e_log_px += 0.5 * nk[j] * (e_log_lambda[j] - dim / beta[j] - nu[j] * (sk[ju] * wk[ju]).trace()
                                       - nu[j] * dx.dot(wk[ju] * dx) - dim * kLog2Pi);
            e_log_pmu += 0.5 * (dim * std::log(beta0 / (2.0 * std::numbers::pi)) + e_log_lambda[j]
                                - dim * beta0 / beta[j] - beta0 * nu[j] * dm.dot(wk[ju] * dm));
            trace_w0 += nu[j] * (w0_inv * wk[ju]).trace();
            const double entropy = -log_wishart_norm(wk[ju], nu[j]) - 0.5 * (nu[j] - dim - 1.0) * e_log_lambda[j]
                                   + 0.5 * nu[j] * dim;
            e_log_qmu += 0.5 * e_log_lambda[j] + 0.5 * dim * std::log(beta[j] / (2.0 * std::numbers::pi))
                         - 0.5 * dim - entropy;
        }
        e_log_pmu += static_cast<double>(M) * log_b0 + 0.5 * (nu0 - dim - 1.0) * e_log_lambda.sum() - 0.5 * trace_w0;
        const double e_log_pz = (r * e_log_pi).sum();
        const double e_log_ppi = log_dirichlet_norm(Eigen::VectorXd::Constant(M, alpha0))
                                 + (alpha0 - 1.0) * e_log_pi.sum();
        const double e_log_qz = r.unaryExpr([](double v) { return v > 0.0 ? v * std::log(v) : 0.0; }).sum();
        const double e_log_qpi = ((alpha.array() - 1.0) * e_log_pi.array()).sum() + log_dirichlet_norm(alpha);
        return e_log_px + e_log_pz + e_log_ppi + e_log_pmu - e_log_qz - e_log_qpi - e_log_qmu;
    };

    auto e_step = [&]() {
        Eigen::MatrixXd log_rho(K, M);
        for (Eigen::Index j = 0; j < M; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const double base = e_log_pi[j] + 0.5 * e_log_lambda[j] - 0.5 * dim * kLog2Pi - 0.5 * dim / beta[j];
            for (Eigen::Index k = 0; k < K; ++k) {
                const Eigen::VectorXd dx = d.x.col(k) - mk[ju];
                log_rho(k, j) = base - 0.5 * nu[j] * dx.dot(wk[ju] * dx);
            }
        }
        normalize_responsibilities(log_rho);
        r = log_rho;
    };

    double previous = -std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < cfg.em_max_iters; ++it) {
        const double bound = variational_m_step_and_bound();
        res.objective_trace.push_back(bound);
        res.iterations_used = it + 1;
        if (std::abs(bound - previous) < cfg.em_tol) {
            res.converged = true;
            break;
        }
        previous = bound;
        e_step();
    }
    if (!res.converged) {
        // Leave q consistent with the final responsibilities.
        res.objective_trace.push_back(variational_m_step_and_bound());
    }
    res.objective = res.objective_trace.back();

    std::vector<double> weights(m);
    std::vector<Gaussian> comps;
    for (Eigen::Index j = 0; j < M; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        weights[ju] = alpha[j] / alpha.sum();
        const double denom = nu[j] > dim + 1.0 ? nu[j] - dim - 1.0 : nu[j];
        comps.push_back(Gaussian::repaired(mk[ju], regularize_cov(wk_inv[ju] / denom, cfg.reg_radius)));
    }
    normalize_weights(weights);
    res.mixture = MixtureModel(std::move(weights), std::move(comps));
    return res;
}

// --------------------------------------------------------------------- SA

SaDirection sa_gmm_direction(const MixtureModel& current, SampleSet samples) {
    if (current.kind() != ComponentKind::gaussian) {
        throw std::invalid_argument("sa_gmm_direction: mixture must be Gaussian");
    }
    if (samples.empty()) throw std::invalid_argument("sa_gmm_direction: no samples");
    const auto& comps = current.gaussians();
    const std::size_t m = current.size();
    const double K = static_cast<double>(samples.size());
    const double M = static_cast<double>(m);

    SaDirection dir;
    dir.weights.assign(m, 0.0);
    for (const auto& g : comps) {
        dir.means.push_back(Eigen::VectorXd::Zero(g.dim()));
        dir.covs.push_back(Eigen::MatrixXd::Zero(g.dim(), g.dim()));
    }
    std::vector<Eigen::MatrixXd> precisions;
    for (const auto& g : comps) {
        precisions.push_back(g.cov().llt().solve(Eigen::MatrixXd::Identity(g.dim(), g.dim())));
    }

    Eigen::VectorXd log_n(static_cast<Eigen::Index>(m));
    Eigen::VectorXd log_terms(static_cast<Eigen::Index>(m));
    double ratio_total = 0.0;
    for (const auto& x : samples) {
        if (x.size() != current.dim()) throw std::invalid_argument("sa_gmm_direction: dimension mismatch");
        for (std::size_t j = 0; j < m; ++j) {
            const auto ji = static_cast<Eigen::Index>(j);
            log_n[ji] = comps[j].log_density(x);
            log_terms[ji] = std::log(current.weights()[j]) + log_n[ji];
        }
        const double log_f = log_sum_exp(log_terms);
        for (std::size_t j = 0; j < m; ++j) {
            const auto ji = static_cast<Eigen::Index>(j);
            const double ratio = std::exp(log_n[ji] - log_f);            // N_j / f
            const double resp = std::exp(log_terms[ji] - log_f);         // w_j N_j / f
            ratio_total += ratio;
            dir.weights[j] += ratio / K;
            const Eigen::VectorXd diff = x - comps[j].mean();
            dir.means[j] += resp * (precisions[j] * diff) / K;
            dir.covs[j] += resp * (diff * diff.transpose() - comps[j].cov()) / K;
        }
    }
    const double centering = ratio_total / (M * K);
    for (double& w : dir.weights) w -= centering;
    return dir;
}

SaUpdateResult sa_gmm_update(const MixtureModel& current, SampleSet samples, double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("sa_gmm_update: rate must be positive");
    const SaDirection dir = sa_gmm_direction(current, samples);
    const auto& comps = current.gaussians();
    const std::size_t m = current.size();

    std::vector<double> weights(m);
    std::vector<Eigen::VectorXd> means(m);
    std::vector<Eigen::MatrixXd> covs(m);
    bool finite = true;
    for (std::size_t j = 0; j < m; ++j) {
        weights[j] = current.weights()[j] + rate * dir.weights[j];
        means[j] = comps[j].mean() + rate * dir.means[j];
        covs[j] = comps[j].cov() + rate * dir.covs[j];
        finite = finite && std::isfinite(weights[j]) && means[j].allFinite() && covs[j].allFinite();
    }
    if (!finite) return {current, true};
    for (double& w : weights) w = std::clamp(w, kSaWeightFloor, 1.0);
    normalize_weights(weights);

    std::vector<Gaussian> out;
    try {
        for (std::size_t j = 0; j < m; ++j) {
            out.push_back(Gaussian::repaired(means[j], 0.5 * (covs[j] + covs[j].transpose())));
        }
    } catch (const std::exception&) {
        return {current, true};
    }
    return {MixtureModel(std::move(weights), std::move(out)), false};
}

// --------------------------------------------------------------- dispatch

FitResult fit_mixture(SampleSet samples, const AdaptationConfig& cfg, Rng& rng) {
    switch (cfg.scheme) {
        case AdaptationScheme::em_gmm: return em_gmm_fit(samples, cfg.components, cfg, rng);
        case AdaptationScheme::vi_gmm: return vi_gmm_fit(samples, cfg.components, cfg, rng);
        case AdaptationScheme::em_tmm: return em_tmm_fit(samples, cfg.components, cfg, rng);
        case AdaptationScheme::sa_gmm:
        case AdaptationScheme::none: break;
    }
    throw std::invalid_argument("fit_mixture: scheme '" + std::string(to_string(cfg.scheme)) +
                                "' is not a batch fitter");
}

MixtureModel regularized(const MixtureModel& mix, double r) {
    if (mix.kind() == ComponentKind::gaussian) {
        std::vector<Gaussian> out;
        for (const auto& g : mix.gaussians()) out.push_back(Gaussian::repaired(g.mean(), regularize_cov(g.cov(), r)));
        return MixtureModel(mix.weights(), std::move(out));
    }
    std::vector<StudentT> out;
    for (const auto& t : mix.student_ts()) {
        out.push_back(StudentT::repaired(t.mean(), regularize_cov(t.scale(), r), t.dof()));
    }
    return MixtureModel(mix.weights(), std::move(out));
}

}  // namespace rgess
