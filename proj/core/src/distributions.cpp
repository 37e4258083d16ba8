#include "rgess/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rgess {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void require_square(const Eigen::MatrixXd& a, const char* who) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument(std::string(who) + ": matrix is not square");
    }
}

bool is_symmetric(const Eigen::MatrixXd& a) {
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return ((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale);
}

}  // namespace

// ---------------------------------------------------------------- Gaussian

Gaussian::Gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
    require_square(cov_, "Gaussian");
    if (cov_.rows() != mean_.size() || mean_.size() == 0) {
        throw std::invalid_argument("Gaussian: mean/covariance dimension mismatch");
    }
    if (!mean_.allFinite() || !cov_.allFinite()) {
        throw std::invalid_argument("Gaussian: non-finite parameters");
    }
    if (!is_symmetric(cov_)) {
        throw std::invalid_argument("Gaussian: covariance is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(cov_);
    if (llt.info() != Eigen::Success) {
        throw std::domain_error("Gaussian: covariance is not positive definite");
    }
    chol_ = llt.matrixL();
    log_det_ = 2.0 * chol_.diagonal().array().log().sum();
    if (!std::isfinite(log_det_)) {
        throw std::domain_error("Gaussian: degenerate covariance");
    }
}

Gaussian Gaussian::repaired(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
    require_square(cov, "Gaussian::repaired");
    Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
    try {
        return Gaussian(mean, sym);
    } catch (const std::domain_error&) {
        return Gaussian(std::move(mean), nearest_psd(sym));
    }
}

double Gaussian::mahalanobis_sq(const Eigen::VectorXd& x) const {
    if (x.size() != mean_.size()) {
        throw std::invalid_argument("Gaussian: dimension mismatch");
    }
    const Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
    return z.squaredNorm();
}

double Gaussian::log_density(const Eigen::VectorXd& x) const {
    const double q = mahalanobis_sq(x);
    return -0.5 * (static_cast<double>(dim()) * kLog2Pi + log_det_ + q);
}

Eigen::VectorXd Gaussian::sample(Rng& rng) const {
    return mean_ + chol_ * standard_normal_vector(rng, dim());
}

Eigen::VectorXd Gaussian::sample_scaled(Rng& rng, double scale) const {
    return mean_ + std::sqrt(scale) * (chol_ * standard_normal_vector(rng, dim()));
}

// ---------------------------------------------------------------- StudentT

StudentT::StudentT(Gaussian base, double dof) : base_(std::move(base)), dof_(dof) {
    if (!(dof_ > 0.0) || !std::isfinite(dof_)) {
        throw std::invalid_argument("StudentT: degrees of freedom must be positive and finite");
    }
    const double d = static_cast<double>(base_.dim());
    log_norm_ = std::lgamma(0.5 * (dof_ + d)) - std::lgamma(0.5 * dof_)
                - 0.5 * d * std::log(dof_ * std::numbers::pi) - 0.5 * base_.log_det();
}

StudentT::StudentT(Eigen::VectorXd mean, Eigen::MatrixXd scale, double dof)
    : StudentT(Gaussian(std::move(mean), std::move(scale)), dof) {}

StudentT StudentT::repaired(Eigen::VectorXd mean, Eigen::MatrixXd scale, double dof) {
    return StudentT(Gaussian::repaired(std::move(mean), std::move(scale)), dof);
}

double StudentT::log_density(const Eigen::VectorXd& x) const {
    const double q = base_.mahalanobis_sq(x);
    const double d = static_cast<double>(dim());
    return log_norm_ - 0.5 * (dof_ + d) * std::log1p(q / dof_);
}

Eigen::VectorXd StudentT::sample(Rng& rng) const {
    const double s = sample_inverse_gamma({0.5 * dof_, 0.5 * dof_}, rng);
    return base_.sample_scaled(rng, s);
}

double sample_inverse_gamma(const InverseGammaParams& p, Rng& rng) {
    if (!(p.alpha > 0.0) || !(p.beta > 0.0)) {
        throw std::invalid_argument("inverse gamma: alpha and beta must be positive");
    }
    // 1/Gamma(alpha, rate beta) = beta / Gamma(alpha, 1).
    double g = 0.0;
    do {
        g = gamma_unit(rng, p.alpha);
    } while (!(g > 0.0));
    return p.beta / g;
}

// ------------------------------------------------------------ MixtureModel

namespace {

void check_weights(const std::vector<double>& w, std::size_t m) {
    if (w.empty() || w.size() != m) {
        throw std::invalid_argument("MixtureModel: need one weight per component (M >= 1)");
    }
    double sum = 0.0;
    for (double x : w) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw std::invalid_argument("MixtureModel: weights must be finite and nonnegative");
        }
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-10) {
        throw std::invalid_argument("MixtureModel: weights must sum to 1");
    }
}

template <typename C>
void check_component_dims(const std::vector<C>& c) {
    for (const auto& comp : c) {
        if (comp.dim() != c.front().dim()) {
            throw std::invalid_argument("MixtureModel: components differ in dimension");
        }
    }
}

}  // namespace

MixtureModel::MixtureModel(std::vector<double> weights, std::vector<Gaussian> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
    check_weights(weights_, gaussians().size());
    check_component_dims(gaussians());
}

MixtureModel::MixtureModel(std::vector<double> weights, std::vector<StudentT> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
    check_weights(weights_, student_ts().size());
    check_component_dims(student_ts());
}

ComponentKind MixtureModel::kind() const {
    return components_.index() == 0 ? ComponentKind::gaussian : ComponentKind::student_t;
}

Eigen::Index MixtureModel::dim() const {
    return std::visit([](const auto& c) { return c.front().dim(); }, components_);
}

const std::vector<Gaussian>& MixtureModel::gaussians() const {
    if (const auto* g = std::get_if<std::vector<Gaussian>>(&components_)) return *g;
    throw std::logic_error("MixtureModel: components are not Gaussian");
}

const std::vector<StudentT>& MixtureModel::student_ts() const {
    if (const auto* t = std::get_if<std::vector<StudentT>>(&components_)) return *t;
    throw std::logic_error("MixtureModel: components are not Student's t");
}

const Eigen::VectorXd& MixtureModel::mean(std::size_t m) const {
    return std::visit([m](const auto& c) -> const Eigen::VectorXd& { return c.at(m).mean(); },
                      components_);
}

const Eigen::MatrixXd& MixtureModel::cov(std::size_t m) const {
    if (kind() == ComponentKind::gaussian) return gaussians().at(m).cov();
    return student_ts().at(m).scale();
}

double MixtureModel::dof(std::size_t m) const {
    if (kind() == ComponentKind::gaussian) return std::numeric_limits<double>::infinity();
    return student_ts().at(m).dof();
}

void MixtureModel::check_dims(const char* who, const Eigen::VectorXd& x) const {
    if (x.size() != dim()) {
        throw std::invalid_argument(std::string(who) + ": dimension mismatch");
    }
}

double MixtureModel::component_log_density(std::size_t m, const Eigen::VectorXd& x) const {
    return std::visit([&](const auto& c) { return c.at(m).log_density(x); }, components_);
}

double MixtureModel::log_density(const Eigen::VectorXd& x) const {
    check_dims("MixtureModel::log_density", x);
    Eigen::VectorXd terms(static_cast<Eigen::Index>(size()));
    for (std::size_t m = 0; m < size(); ++m) {
        terms[static_cast<Eigen::Index>(m)] = std::log(weights_[m]) + component_log_density(m, x);
    }
    return log_sum_exp(terms);
}

std::size_t MixtureModel::region(const Eigen::VectorXd& x, bool weighted) const {
    check_dims("MixtureModel::region", x);
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < size(); ++m) {
        double v = component_log_density(m, x);
        if (weighted) v += std::log(weights_[m]);
        if (v > best_value) {
            best_value = v;
            best = m;
        }
    }
    return best;
}

std::size_t region_assign(const MixtureModel& m, const Eigen::VectorXd& x, bool weighted) {
    return m.region(x, weighted);
}

// ------------------------------------------------------- covariance hygiene

Eigen::MatrixXd regularize_cov(const Eigen::MatrixXd& cov, double r) {
    require_square(cov, "regularize_cov");
    if (!(r >= 0.0)) throw std::invalid_argument("regularize_cov: radius must be nonnegative");
    Eigen::MatrixXd out = cov;
    out.diagonal().array() += r;
    return out;
}

Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& a) {
    require_square(a, "nearest_psd");
    if (!a.allFinite()) throw std::invalid_argument("nearest_psd: non-finite entries");
    const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("nearest_psd: eigendecomposition failed");
    }
    const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd out = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    out = 0.5 * (out + out.transpose());
    out.diagonal().array() += kPsdJitter;
    return out;
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
    if (v.size() == 0) return -std::numeric_limits<double>::infinity();
    const double mx = v.maxCoeff();
    if (!std::isfinite(mx)) return mx;
    return mx + std::log((v.array() - mx).exp().sum());
}

}  // namespace rgess
