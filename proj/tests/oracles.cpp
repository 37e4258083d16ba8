#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>
#include <optional>

#include <rgess/adaptation.hpp>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace oracle {

double ks_pvalue(std::vector<double> samples, const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    const double sn = std::sqrt(n);
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    double p = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
        p += term;
        if (std::abs(term) < 1e-16) break;
    }
    return std::clamp(p, 0.0, 1.0);
}

double normal_cdf(double x, double mean, double sd) {
    return boost::math::cdf(boost::math::normal_distribution<>(mean, sd), x);
}

double student_t_cdf(double x, double dof, double loc, double scale) {
    return boost::math::cdf(boost::math::students_t_distribution<>(dof), (x - loc) / scale);
}

NelderMeadResult nelder_mead_max(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                                 double step, std::size_t max_iters, double tol) {
    const auto n = x0.size();
    std::vector<Eigen::VectorXd> pts{x0};
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd p = x0;
        p[i] += step;
        pts.push_back(p);
    }
    // Minimize -f.
    auto g = [&](const Eigen::VectorXd& x) {
        const double v = f(x);
        return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
    };
    std::vector<double> vals;
    for (const auto& p : pts) vals.push_back(g(p));
    std::vector<std::size_t> idx(pts.size());
    for (std::size_t it = 0; it < max_iters; ++it) {
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
        const auto best = idx.front(), worst = idx.back(), second = idx[idx.size() - 2];
        if (std::abs(vals[worst] - vals[best]) <= tol * (1.0 + std::abs(vals[best]))) {
            double spread = 0.0;
            for (const auto& p : pts) spread = std::max(spread, (p - pts[best]).cwiseAbs().maxCoeff());
            if (spread < 1e-9) break;
        }
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i + 1 < idx.size(); ++i) centroid += pts[idx[i]];
        centroid /= static_cast<double>(n);
        const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
        const double fr = g(xr);
        if (fr < vals[best]) {
            const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
            const double fe = g(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
        } else if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
        } else {
            const bool outside = fr < vals[worst];
            const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                               : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
            const double fc = g(xc);
            if (fc < (outside ? fr : vals[worst])) {
                pts[worst] = xc;
                vals[worst] = fc;
            } else {
                for (std::size_t i = 1; i < idx.size(); ++i) {
                    pts[idx[i]] = pts[best] + 0.5 * (pts[idx[i]] - pts[best]);
                    vals[idx[i]] = g(pts[idx[i]]);
                }
            }
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    return {pts[best], -vals[best]};
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& counts) {
    Eigen::MatrixXd p = counts;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double s = p.row(i).sum();
        if (s > 0.0) {
            p.row(i) /= s;
        } else {
            p.row(i).setZero();
            p(i, i) = 1.0;
        }
    }
    return p;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition) {
    const auto n = transition.rows();
    Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
    for (int it = 0; it < 100000; ++it) {
        const Eigen::RowVectorXd next = pi * transition;
        const double change = (next - pi).cwiseAbs().sum();
        pi = next / next.sum();
        if (change < 1e-14) break;
    }
    return pi.transpose();
}

double total_variation(const Eigen::VectorXd& p, const Eigen::VectorXd& q) { return 0.5 * (p - q).cwiseAbs().sum(); }

std::size_t Grid1d::bin(double x) const {
    const double pos = std::round((x - lo) / width());
    if (pos <= 0.0) return 0;
    if (pos >= static_cast<double>(bins - 1)) return bins - 1;
    return static_cast<std::size_t>(pos);
}

Eigen::VectorXd Grid1d::masses(const std::function<double(double)>& cdf) const {
    Eigen::VectorXd m(static_cast<Eigen::Index>(bins));
    double prev = 0.0;
    for (std::size_t i = 0; i < bins; ++i) {
        const double upper = i + 1 == bins ? 1.0 : cdf(center(i) + 0.5 * width());
        m[static_cast<Eigen::Index>(i)] = upper - prev;
        prev = upper;
    }
    return m;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                            double h) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd a = x, b = x;
        a[i] += h;
        b[i] -= h;
        g[i] = (f(a) - f(b)) / (2.0 * h);
    }
    return g;
}

double stationarity_tv(const Step1d& step, const Grid1d& grid, const std::function<double(double)>& target_cdf,
                       std::size_t steps_per_chain, std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(grid.bins);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t b = 0; b < grid.bins; ++b) {
        rgess::Rng rng(rgess::split_seed(seed, b));
        rgess::ChainState state;
        state.point = Eigen::VectorXd::Constant(1, grid.center(b));
        std::size_t from = grid.bin(state.point[0]);
        for (std::size_t s = 0; s < steps_per_chain; ++s) {
            state = step(state, rng).next;
            const std::size_t to = grid.bin(state.point[0]);
            counts(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to)) += 1.0;
            from = to;
        }
    }
    const Eigen::VectorXd pi = stationary_distribution(normalize_rows(counts));
    return total_variation(pi, grid.masses(target_cdf));
}

double Bimodal1d::log_pi(double x) {
    const double a = std::log(0.4) + std::log(boost::math::pdf(boost::math::normal_distribution<>(-4.0, 1.0), x));
    const double b = std::log(0.6) + std::log(boost::math::pdf(boost::math::normal_distribution<>(3.0, 1.5), x));
    const double hi = std::max(a, b);
    if (!std::isfinite(hi)) return hi;
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double Bimodal1d::cdf(double x) { return 0.4 * normal_cdf(x, -4.0, 1.0) + 0.6 * normal_cdf(x, 3.0, 1.5); }

rgess::TargetDensity Bimodal1d::target() {
    return {1, [](const Eigen::VectorXd& x) { return log_pi(x[0]); }};
}

rgess::MixtureModel Bimodal1d::gaussian_bank() {
    return rgess::MixtureModel({0.5, 0.5}, {rgess::Gaussian(Eigen::VectorXd::Constant(1, -3.5), Eigen::MatrixXd::Constant(1, 1, 2.25)),
                                            rgess::Gaussian(Eigen::VectorXd::Constant(1, 3.5), Eigen::MatrixXd::Constant(1, 1, 4.0))});
}

rgess::MixtureModel Bimodal1d::student_bank() {
    return rgess::MixtureModel({0.5, 0.5}, {rgess::StudentT(Eigen::VectorXd::Constant(1, -3.5), Eigen::MatrixXd::Constant(1, 1, 2.25), 5.0),
                                            rgess::StudentT(Eigen::VectorXd::Constant(1, 3.5), Eigen::MatrixXd::Constant(1, 1, 4.0), 5.0)});
}

std::vector<Eigen::VectorXd> draw_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, std::size_t n,
                                           rgess::Rng& rng) {
    const rgess::Gaussian g(mean, cov);
    std::vector<Eigen::VectorXd> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(g.sample(rng));
    return out;
}

namespace {

// (1/K) sum_k log sum_j w_j N(x_k; mu_j, S_j), evaluated from scratch.
double mc_log_objective(const std::vector<double>& w, const std::vector<Eigen::VectorXd>& mu,
                        const std::vector<Eigen::MatrixXd>& s, const std::vector<Eigen::VectorXd>& xs) {
    double total = 0.0;
    for (const auto& x : xs) {
        double f = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double d = static_cast<double>(x.size());
            const Eigen::VectorXd diff = x - mu[j];
            const double quad = diff.dot(s[j].inverse() * diff);
            f += w[j] * std::exp(-0.5 * quad) / std::sqrt(std::pow(2.0 * std::numbers::pi, d) * s[j].determinant());
        }
        total += std::log(f);
    }
    return total / static_cast<double>(xs.size());
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

}  // namespace

double sa_direction_fd_error(std::uint64_t seed) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    rgess::Rng rng(seed);
    std::vector<double> w{0.35, 0.65};
    std::vector<VectorXd> mu{draw_gaussian(VectorXd::Zero(2), MatrixXd::Identity(2, 2), 1, rng)[0],
                             draw_gaussian(VectorXd::Constant(2, 2.0), MatrixXd::Identity(2, 2), 1, rng)[0]};
    std::vector<MatrixXd> s(2, MatrixXd(2, 2));
    s[0] << 1.5, 0.4, 0.4, 1.0;
    s[1] << 0.8, -0.2, -0.2, 2.0;
    const auto xs = draw_gaussian(VectorXd::Constant(2, 1.0), 2.0 * MatrixXd::Identity(2, 2), 20, rng);

    const rgess::MixtureModel m(w, {rgess::Gaussian(mu[0], s[0]), rgess::Gaussian(mu[1], s[1])});
    const rgess::SaDirection dir = rgess::sa_gmm_direction(m, xs);
    const double h = 1e-5;
    double worst = 0.0;

    std::vector<double> gw(2);
    for (std::size_t j = 0; j < 2; ++j) {
        auto wp = w, wm = w;
        wp[j] += h;
        wm[j] -= h;
        gw[j] = (mc_log_objective(wp, mu, s, xs) - mc_log_objective(wm, mu, s, xs)) / (2 * h);
    }
    const double centre = 0.5 * (gw[0] + gw[1]);
    for (std::size_t j = 0; j < 2; ++j) {
        worst = std::max(worst, rel_err(dir.weights[j], gw[j] - centre));
        for (Eigen::Index a = 0; a < 2; ++a) {
            auto mp = mu, mm = mu;
            mp[j][a] += h;
            mm[j][a] -= h;
            const double g = (mc_log_objective(w, mp, s, xs) - mc_log_objective(w, mm, s, xs)) / (2 * h);
            worst = std::max(worst, rel_err(dir.means[j][a], g));
        }
        MatrixXd grad(2, 2);
        for (Eigen::Index a = 0; a < 2; ++a) {
            for (Eigen::Index b = a; b < 2; ++b) {
                auto sp = s, sm = s;
                sp[j](a, b) += h;
                sm[j](a, b) -= h;
                if (a != b) {
                    sp[j](b, a) += h;
                    sm[j](b, a) -= h;
                }
                double g = (mc_log_objective(w, mu, sp, xs) - mc_log_objective(w, mu, sm, xs)) / (2 * h);
                if (a != b) g *= 0.5;
                grad(a, b) = g;
                grad(b, a) = g;
            }
        }
        const MatrixXd natural = 2.0 * s[j] * grad * s[j];
        for (Eigen::Index a = 0; a < 2; ++a) {
            for (Eigen::Index b = 0; b < 2; ++b) worst = std::max(worst, rel_err(dir.covs[j](a, b), natural(a, b)));
        }
    }
    return worst;
}

OutlierFixture OutlierFixture::make() {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    rgess::Rng rng(12);
    OutlierFixture f;
    f.points = draw_gaussian(VectorXd::Zero(2), MatrixXd::Identity(2, 2), 100, rng);
    const auto b = draw_gaussian((VectorXd(2) << 10.0, 0.0).finished(), MatrixXd::Identity(2, 2), 100, rng);
    f.points.insert(f.points.end(), b.begin(), b.end());
    f.outlier_a = (VectorXd(2) << 40.0, 40.0).finished();
    f.outlier_b = (VectorXd(2) << 40.3, 40.4).finished();
    f.points.push_back(f.outlier_a);
    f.points.push_back(f.outlier_b);
    return f;
}

bool OutlierFixture::em_isolates_outliers() const {
    rgess::AdaptationConfig cfg;
    std::optional<rgess::FitResult> best;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        rgess::Rng rng(seed);
        rgess::FitResult fit = rgess::em_gmm_fit(points, 3, cfg, rng);
        if (!best || fit.objective > best->objective) best = std::move(fit);
    }
    for (std::size_t j = 0; j < 3; ++j) {
        const auto& m = best->mixture.mean(j);
        if ((m - outlier_a).norm() < 1.0 && (m - outlier_b).norm() < 1.0) return true;
    }
    return false;
}

double OutlierFixture::sa_min_outlier_distance(std::size_t steps) const {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    rgess::MixtureModel sa({0.5, 0.5}, {rgess::Gaussian(VectorXd::Zero(2), MatrixXd::Identity(2, 2)),
                                        rgess::Gaussian((VectorXd(2) << 10.0, 0.0).finished(), MatrixXd::Identity(2, 2))});
    const rgess::LearningRateSchedule schedule;
    for (std::size_t n = 1; n <= steps; ++n) sa = rgess::sa_gmm_update(sa, points, schedule.rate(n)).mixture;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < sa.size(); ++j) {
        d = std::min({d, (sa.mean(j) - outlier_a).norm(), (sa.mean(j) - outlier_b).norm()});
    }
    return d;
}

}  // namespace oracle
