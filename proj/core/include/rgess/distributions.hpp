#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rgess/random.hpp"

namespace rgess {

/// Multivariate normal with a cached lower Cholesky factor of the covariance.
///
/// The constructor rejects asymmetric or non-positive-definite covariances.
/// Use `Gaussian::repaired` when the covariance comes out of an estimator and
/// may have drifted out of the PD cone.
class Gaussian {
public:
    Gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);

    /// Symmetrizes `cov`; on Cholesky failure replaces it with
    /// `nearest_psd(cov)` and retries once. Throws if the retry fails too.
    static Gaussian repaired(Eigen::VectorXd mean, Eigen::MatrixXd cov);

    Eigen::Index dim() const { return mean_.size(); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& cov() const { return cov_; }
    const Eigen::MatrixXd& chol() const { return chol_; }
    double log_det() const { return log_det_; }

    double mahalanobis_sq(const Eigen::VectorXd& x) const;
    double log_density(const Eigen::VectorXd& x) const;

    /// mean + chol * z with z ~ N(0, I).
    Eigen::VectorXd sample(Rng& rng) const;
    /// Draw from N(mean, scale * cov).
    Eigen::VectorXd sample_scaled(Rng& rng, double scale) const;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    Eigen::MatrixXd chol_;
    double log_det_ = 0.0;
};

/// Multivariate Student's t with location, scale matrix and degrees of freedom.
class StudentT {
public:
    StudentT(Eigen::VectorXd mean, Eigen::MatrixXd scale, double dof);
    static StudentT repaired(Eigen::VectorXd mean, Eigen::MatrixXd scale, double dof);

    Eigen::Index dim() const { return base_.dim(); }
    const Eigen::VectorXd& mean() const { return base_.mean(); }
    const Eigen::MatrixXd& scale() const { return base_.cov(); }
    const Eigen::MatrixXd& chol() const { return base_.chol(); }
    double dof() const { return dof_; }

    double mahalanobis_sq(const Eigen::VectorXd& x) const { return base_.mahalanobis_sq(x); }
    double log_density(const Eigen::VectorXd& x) const;

    /// Scale-mixture draw: s ~ InvGamma(dof/2, dof/2), then N(mean, s * scale).
    Eigen::VectorXd sample(Rng& rng) const;

    /// The Gaussian N(mean, scale) sharing this component's factorization.
    const Gaussian& gaussian_core() const { return base_; }

private:
    StudentT(Gaussian base, double dof);

    Gaussian base_;
    double dof_;
    double log_norm_ = 0.0;
};

struct InverseGammaParams {
    double alpha;  ///< shape
    double beta;   ///< rate; density is proportional to s^(-alpha-1) exp(-beta/s)
};

double sample_inverse_gamma(const InverseGammaParams& p, Rng& rng);

enum class ComponentKind { gaussian, student_t };

/// Finite mixture of homogeneous components: all Gaussian or all Student's t.
class MixtureModel {
public:
    MixtureModel(std::vector<double> weights, std::vector<Gaussian> components);
    MixtureModel(std::vector<double> weights, std::vector<StudentT> components);

    ComponentKind kind() const;
    std::size_t size() const { return weights_.size(); }
    Eigen::Index dim() const;
    const std::vector<double>& weights() const { return weights_; }

    const std::vector<Gaussian>& gaussians() const;
    const std::vector<StudentT>& student_ts() const;

    const Eigen::VectorXd& mean(std::size_t m) const;
    /// Covariance for Gaussian components, scale matrix for t components.
    const Eigen::MatrixXd& cov(std::size_t m) const;
    /// Degrees of freedom of component m; +infinity for Gaussian components.
    double dof(std::size_t m) const;

    /// log f_m(x), without the mixture weight.
    double component_log_density(std::size_t m, const Eigen::VectorXd& x) const;
    /// log sum_m w_m f_m(x), via log-sum-exp.
    double log_density(const Eigen::VectorXd& x) const;

    /// Index of the region containing x: argmax_m f_m(x), or argmax_m w_m f_m(x)
    /// when `weighted`. Ties go to the lowest index.
    std::size_t region(const Eigen::VectorXd& x, bool weighted = false) const;

private:
    void check_dims(const char* who, const Eigen::VectorXd& x) const;

    std::vector<double> weights_;
    std::variant<std::vector<Gaussian>, std::vector<StudentT>> components_;
};

std::size_t region_assign(const MixtureModel& m, const Eigen::VectorXd& x, bool weighted = false);

/// cov + r * I.
Eigen::MatrixXd regularize_cov(const Eigen::MatrixXd& cov, double r);

inline constexpr double kPsdJitter = 1e-10;

/// Frobenius-nearest PSD matrix to the symmetric part of `a` (eigenvalues
/// clipped at zero) plus kPsdJitter * I so a Cholesky factorization exists.
Eigen::MatrixXd nearest_psd(const Eigen::MatrixXd& a);

/// log(sum(exp(v))) without overflow; -inf for an all -inf input.
double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

}  // namespace rgess
