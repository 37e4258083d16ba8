#include "rgess/targets.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rgess {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(logistic(t)) = -log1p(exp(-t)), evaluated without overflow.
double log_logistic(double t) {
    return t >= 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
}

}  // namespace

double logistic(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// ---------------------------------------------------------- Gaussian mixture

MixtureModel gauss_mix_model() {
    const Eigen::MatrixXd cov = 10.0 * Eigen::MatrixXd::Identity(2, 2);
    std::vector<Gaussian> comps;
    for (const auto& [a, b] : std::array<std::pair<double, double>, 4>{{{25, 50}, {5, 5}, {50, 5}, {50, 50}}}) {
        comps.emplace_back(Eigen::Vector2d(a, b), cov);
    }
    return MixtureModel({0.25, 0.25, 0.25, 0.25}, std::move(comps));
}

double gauss_mix_log_density(const Eigen::VectorXd& x) {
    static const MixtureModel model = gauss_mix_model();
    if (x.size() != 2) throw std::invalid_argument("gauss_mix_log_density: expected a 2-vector");
    if (!x.allFinite()) return kNegInf;
    return model.log_density(x);
}

TargetDensity gauss_mix_target() { return {2, [](const Eigen::VectorXd& x) { return gauss_mix_log_density(x); }}; }

// ------------------------------------------------------------------ logistic

LogisticTarget::LogisticTarget(Eigen::MatrixXd design, Eigen::VectorXd labels)
    : design_(std::move(design)), labels_(std::move(labels)) {
    if (design_.rows() != labels_.size()) throw std::invalid_argument("LogisticTarget: row/label count mismatch");
    if (design_.cols() == 0) throw std::invalid_argument("LogisticTarget: no features");
    for (double y : labels_) {
        if (y != 0.0 && y != 1.0) throw std::invalid_argument("LogisticTarget: labels must be 0 or 1");
    }
    xty_ = design_.transpose() * labels_;
}

double logistic_log_likelihood(const Eigen::VectorXd& beta, const LogisticTarget& data) {
    if (beta.size() != data.design().cols()) {
        throw std::invalid_argument("logistic_log_likelihood: dimension mismatch");
    }
    if (!beta.allFinite()) return kNegInf;
    // y log p + (1 - y) log(1 - p) = y eta - softplus(eta)
    const Eigen::ArrayXd eta = (data.design() * beta).array();
    // 1 + exp(-|eta|) lies in (1, 2], where log is accurate to round-off and vectorizes.
    const double softplus = (eta.max(0.0) + (1.0 + (-eta.abs()).exp()).log()).sum();
    return beta.dot(data.design_t_labels()) - softplus;
}

Eigen::VectorXd logistic_log_likelihood_gradient(const Eigen::VectorXd& beta, const LogisticTarget& data) {
    if (beta.size() != data.design().cols()) {
        throw std::invalid_argument("logistic_log_likelihood_gradient: dimension mismatch");
    }
    const Eigen::VectorXd eta = data.design() * beta;
    const Eigen::VectorXd resid = data.labels() - eta.unaryExpr([](double t) { return logistic(t); });
    return data.design().transpose() * resid;
}

TargetDensity logistic_target(LogisticTarget data) {
    auto shared = std::make_shared<const LogisticTarget>(std::move(data));
    return {shared->dim(), [shared](const Eigen::VectorXd& b) { return logistic_log_likelihood(b, *shared); }};
}

Dataset split_and_standardize(Eigen::MatrixXd x, Eigen::VectorXd y, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
        throw std::invalid_argument("train_fraction must lie in (0, 1]");
    }
    if (x.rows() != y.size() || x.rows() == 0) throw std::invalid_argument("split_and_standardize: bad shapes");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(split_seed(seed, 1));
    std::shuffle(order.begin(), order.end(), rng);

    const auto n = x.rows();
    const auto n_train = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::llround(train_fraction * static_cast<double>(n))), 1, n);
    Dataset d;
    d.train_x.resize(n_train, x.cols());
    d.train_y.resize(n_train);
    d.test_x.resize(n - n_train, x.cols());
    d.test_y.resize(n - n_train);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto src = order[static_cast<std::size_t>(i)];
        if (i < n_train) {
            d.train_x.row(i) = x.row(src);
            d.train_y[i] = y[src];
        } else {
            d.test_x.row(i - n_train) = x.row(src);
            d.test_y[i - n_train] = y[src];
        }
    }
    d.feature_mean = d.train_x.colwise().mean().transpose();
    d.feature_sd = ((d.train_x.rowwise() - d.feature_mean.transpose()).array().square().colwise().mean())
                       .sqrt()
                       .transpose();
    for (auto& s : d.feature_sd) {
        if (!(s > 0.0)) s = 1.0;
    }
    auto standardize = [&](Eigen::MatrixXd& m) {
        m = (m.rowwise() - d.feature_mean.transpose()).array().rowwise() / d.feature_sd.transpose().array();
    };
    standardize(d.train_x);
    standardize(d.test_x);
    return d;
}

Dataset load_covtype(const std::filesystem::path& path, std::size_t n_select, std::size_t n_features,
                     double train_fraction, std::uint64_t seed, bool header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    if (n_features == 0) throw std::invalid_argument("load_covtype: n_features must be >= 1");

    std::vector<std::vector<double>> rows;
    std::vector<long> classes;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    if (header) {
        std::getline(in, line);
        ++line_no;
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> fields;
        std::size_t start = 0;
        while (true) {
            const auto end = line.find(',', start);
            const auto token = std::string_view(line).substr(start, end == std::string::npos ? end : end - start);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
            if (ec != std::errc() || ptr != token.data() + token.size()) {
                throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) + ", column " +
                                         std::to_string(fields.size() + 1) + ": cannot parse '" +
                                         std::string(token) + "'");
            }
            fields.push_back(v);
            if (end == std::string::npos) break;
            start = end + 1;
        }
        if (width == 0) width = fields.size();
        if (fields.size() != width) {
            throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(width) + " columns, found " + std::to_string(fields.size()));
        }
        if (width < n_features + 1) {
            throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) +
                                     ": fewer columns than n_features + class");
        }
        classes.push_back(std::lround(fields.back()));
        fields.pop_back();
        rows.push_back(std::move(fields));
    }

    std::map<long, std::size_t> freq;
    for (long c : classes) ++freq[c];
    if (freq.size() < 2) throw std::runtime_error(path.string() + ": need at least two classes");
    std::vector<std::pair<long, std::size_t>> by_count(freq.begin(), freq.end());
    std::stable_sort(by_count.begin(), by_count.end(), [](auto& a, auto& b) { return a.second > b.second; });
    const long zero_class = std::min(by_count[0].first, by_count[1].first);
    const long one_class = std::max(by_count[0].first, by_count[1].first);

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] == zero_class || classes[i] == one_class) kept.push_back(i);
    }
    if (kept.size() < n_select) {
        throw std::runtime_error(path.string() + ": only " + std::to_string(kept.size()) +
                                 " rows in the two majority classes, need " + std::to_string(n_select));
    }
    Rng rng(split_seed(seed, 0));
    std::shuffle(kept.begin(), kept.end(), rng);
    kept.resize(n_select);

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n_select), static_cast<Eigen::Index>(n_features));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n_select));
    for (std::size_t r = 0; r < n_select; ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        for (std::size_t c = 0; c < n_features; ++c) x(row, static_cast<Eigen::Index>(c)) = rows[kept[r]][c];
        y[row] = classes[kept[r]] == one_class ? 1.0 : 0.0;
    }
    return split_and_standardize(std::move(x), std::move(y), train_fraction, seed);
}

Dataset synthetic_logistic(std::size_t n, const Eigen::VectorXd& beta_star, double train_fraction,
                           std::uint64_t seed) {
    if (n == 0 || beta_star.size() == 0) throw std::invalid_argument("synthetic_logistic: empty problem");
    Rng rng(split_seed(seed, 0));
    const auto rows = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd x(rows, beta_star.size());
    Eigen::VectorXd y(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        x.row(i) = standard_normal_vector(rng, beta_star.size()).transpose();
        y[i] = uniform01(rng) < logistic(x.row(i).dot(beta_star)) ? 1.0 : 0.0;
    }
    return split_and_standardize(std::move(x), std::move(y), train_fraction, seed);
}

// -------------------------------------------------------------------- litter

namespace {

// Rows are litter sizes 1..18; columns are dead counts 0..9. Blank cells are 0.
constexpr std::array<std::array<int, 10>, 18> kLitterTable{{
    {7, 0, 0, 0, 0, 0, 0, 0, 0, 0},
    {7, 0, 0, 0, 0, 0, 0, 0, 0, 0},
    {6, 0, 0, 0, 0, 0, 0, 0, 0, 0},
    {5, 2, 1, 0, 0, 0, 0, 0, 0, 0},
    {8, 2, 1, 0, 1, 1, 0, 0, 0, 0},
    {8, 0, 0, 0, 0, 0, 0, 0, 0, 0},
    {4, 4, 2, 1, 0, 0, 0, 0, 0, 0},
    {7, 7, 1, 0, 0, 0, 0, 0, 0, 0},
    {8, 9, 7, 1, 1, 0, 0, 0, 0, 0},
    {22, 17, 2, 0, 1, 0, 0, 1, 1, 0},
    {30, 18, 9, 1, 2, 0, 1, 0, 1, 0},
    {54, 27, 12, 2, 1, 0, 2, 1, 0, 0},
    {46, 30, 8, 4, 1, 1, 0, 1, 0, 0},
    {43, 21, 13, 3, 1, 0, 0, 1, 0, 1},
    {22, 22, 5, 2, 1, 0, 0, 0, 0, 0},
    {6, 6, 3, 0, 1, 1, 0, 0, 0, 0},
    {0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
    {3, 0, 2, 1, 0, 0, 0, 0, 0, 0},
}};

double log_choose(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

int LitterTarget::count(int n, int x) const {
    for (const auto& c : observations) {
        if (c.n == n && c.x == x) return c.count;
    }
    return 0;
}

int LitterTarget::total_litters() const {
    int total = 0;
    for (const auto& c : observations) total += c.count;
    return total;
}

LitterTarget embedded_litter_data() {
    LitterTarget t;
    for (int n = 1; n <= 18; ++n) {
        for (int x = 0; x <= std::min(n, 9); ++x) {
            const int c = kLitterTable[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(x)];
            if (c > 0) {
                t.observations.push_back({n, x, c});
                t.log_binom.push_back(log_choose(n, x));
            }
        }
    }
    return t;
}

double litter_log_likelihood(const Eigen::VectorXd& params, const LitterTarget& data) {
    if (params.size() != 3) throw std::invalid_argument("litter_log_likelihood: expected a 3-vector");
    if (!params.allFinite()) return kNegInf;
    const double log_g = log_logistic(params[0]);
    const double log_1mg = log_logistic(-params[0]);
    const double log_mu = log_logistic(params[1]);
    const double log_1mmu = log_logistic(-params[1]);
    const double log_v = log_logistic(params[2]);
    const double log_1mv = log_logistic(-params[2]);
    double ll = 0.0;
    for (std::size_t i = 0; i < data.observations.size(); ++i) {
        const auto& c = data.observations[i];
        const double a = log_g + c.x * log_mu + (c.n - c.x) * log_1mmu;
        const double b = log_1mg + c.x * log_v + (c.n - c.x) * log_1mv;
        const double hi = std::max(a, b);
        ll += c.count * (data.log_binom[i] + hi + std::log1p(std::exp(std::min(a, b) - hi)));
    }
    return ll;
}

TargetDensity litter_target(LitterTarget data) {
    auto shared = std::make_shared<const LitterTarget>(std::move(data));
    return {LitterTarget::dim, [shared](const Eigen::VectorXd& p) { return litter_log_likelihood(p, *shared); }};
}

}  // namespace rgess
