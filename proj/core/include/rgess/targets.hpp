#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "rgess/distributions.hpp"
#include "rgess/samplers.hpp"

namespace rgess {

// ------------------------------------------------------------ Gaussian mixture

/// The four-mode benchmark: equal weights, means (25,50), (5,5), (50,5),
/// (50,50), covariances 10 I.
MixtureModel gauss_mix_model();
double gauss_mix_log_density(const Eigen::VectorXd& x);
TargetDensity gauss_mix_target();

// ---------------------------------------------------------------- logistic

struct Dataset {
    Eigen::MatrixXd train_x;  ///< n_train x D, standardized
    Eigen::VectorXd train_y;  ///< 0/1 labels
    Eigen::MatrixXd test_x;   ///< standardized with the training statistics
    Eigen::VectorXd test_y;
    Eigen::VectorXd feature_mean;
    Eigen::VectorXd feature_sd;
};

class LogisticTarget {
public:
    LogisticTarget(Eigen::MatrixXd design, Eigen::VectorXd labels);

    std::size_t dim() const { return static_cast<std::size_t>(design_.cols()); }
    const Eigen::MatrixXd& design() const { return design_; }
    const Eigen::VectorXd& labels() const { return labels_; }
    /// design^T labels, so that sum_n y_n (beta . x_n) is one dot product.
    const Eigen::VectorXd& design_t_labels() const { return xty_; }

private:
    Eigen::MatrixXd design_;
    Eigen::VectorXd labels_;
    Eigen::VectorXd xty_;
};

/// sum_n y_n log p_n + (1 - y_n) log(1 - p_n), p_n = logistic(beta . x_n).
double logistic_log_likelihood(const Eigen::VectorXd& beta, const LogisticTarget& data);
Eigen::VectorXd logistic_log_likelihood_gradient(const Eigen::VectorXd& beta, const LogisticTarget& data);

/// Flat prior: the log target is the log-likelihood.
TargetDensity logistic_target(LogisticTarget data);

/// Reads a covtype-style CSV (class in the last column), keeps the two most
/// frequent classes (smaller label -> 0), draws `n_select` rows, keeps the
/// first `n_features` columns, splits and standardizes.
Dataset load_covtype(const std::filesystem::path& path, std::size_t n_select, std::size_t n_features,
                     double train_fraction, std::uint64_t seed, bool header = false);

/// x ~ N(0, I), y ~ Bernoulli(logistic(beta_star . x)), then split and
/// standardized like load_covtype.
Dataset synthetic_logistic(std::size_t n, const Eigen::VectorXd& beta_star, double train_fraction,
                           std::uint64_t seed);

/// Shuffles rows with `seed`, splits by `train_fraction`, standardizes.
Dataset split_and_standardize(Eigen::MatrixXd x, Eigen::VectorXd y, double train_fraction, std::uint64_t seed);

// ------------------------------------------------------------------ litter

struct LitterCell {
    int n;      ///< litter size
    int x;      ///< dead fetuses
    int count;  ///< number of litters
};

struct LitterTarget {
    std::vector<LitterCell> observations;  ///< cells with count > 0
    std::vector<double> log_binom;         ///< log C(n, x) per cell

    static constexpr std::size_t dim = 3;
    int count(int n, int x) const;
    int total_litters() const;
};

/// The mouse fetal-death table: litter sizes 1..18, dead counts 0..9.
LitterTarget embedded_litter_data();

double logistic(double t);

/// Two-binomial mixture log-likelihood at (logit gamma, logit mu, logit v).
double litter_log_likelihood(const Eigen::VectorXd& params, const LitterTarget& data);

TargetDensity litter_target(LitterTarget data);

}  // namespace rgess
