#include <doctest.h>

#include <cmath>
#include <numbers>

#include <rgess/distributions.hpp>

#include "oracles.hpp"

using namespace rgess;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd fig2_cov() {
    MatrixXd c(2, 2);
    c << 10, 3, 3, 2;
    return c;
}

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace

TEST_CASE("gaussian log density closed forms") {
    const Gaussian g1(vec({0}), MatrixXd::Identity(1, 1));
    CHECK(g1.log_density(vec({0})) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-12));
    const Gaussian g2(vec({0, 0}), MatrixXd::Identity(2, 2));
    CHECK(g2.log_density(vec({1, 1})) == doctest::Approx(-std::log(2 * std::numbers::pi) - 1.0).epsilon(1e-12));
    const Gaussian g3(vec({0, 0}), fig2_cov());
    CHECK(g3.log_density(vec({0, 0})) ==
          doctest::Approx(-std::log(2 * std::numbers::pi) - 0.5 * std::log(11.0)).epsilon(1e-12));
    CHECK_THROWS_AS(g3.log_density(vec({0})), std::invalid_argument);
}

TEST_CASE("gaussian construction checks") {
    MatrixXd asym(2, 2);
    asym << 1, 0.5, 0.4, 1;
    CHECK_THROWS(Gaussian(vec({0, 0}), asym));
    MatrixXd indefinite(2, 2);
    indefinite << 1, 2, 2, 1;
    CHECK_THROWS_AS(Gaussian(vec({0, 0}), indefinite), std::domain_error);
    const Gaussian repaired = Gaussian::repaired(vec({0, 0}), indefinite);
    CHECK((repaired.chol() * repaired.chol().transpose() - repaired.cov()).cwiseAbs().maxCoeff() < 1e-8);
    const Gaussian g(vec({1, 2}), fig2_cov());
    const MatrixXd rec = g.chol() * g.chol().transpose();
    CHECK(((rec - g.cov()).array().abs() <= 1e-8 * g.cov().array().abs().max(1e-300)).all());
}

TEST_CASE("gaussian sampling") {
    SUBCASE("identity factor returns mean + z") {
        const Gaussian g(vec({1, -1}), MatrixXd::Identity(2, 2));
        Rng a(42), b(42);
        const VectorXd z = standard_normal_vector(b, 2);
        CHECK((g.sample(a) - (g.mean() + z)).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("moments") {
        Rng rng(7);
        const Gaussian g(vec({0, 0}), MatrixXd::Identity(2, 2));
        VectorXd sum = VectorXd::Zero(2);
        for (int i = 0; i < 10000; ++i) sum += g.sample(rng);
        CHECK((sum / 10000.0).cwiseAbs().maxCoeff() < 4.0 / 100.0);

        const Gaussian h(vec({0, 0}), fig2_cov());
        const auto draws = oracle::draw_gaussian(h.mean(), h.cov(), 10000, rng);
        double c01 = 0.0;
        VectorXd m = VectorXd::Zero(2);
        for (const auto& d : draws) m += d;
        m /= 10000.0;
        for (const auto& d : draws) c01 += (d[0] - m[0]) * (d[1] - m[1]);
        CHECK(std::abs(c01 / 9999.0 - 3.0) < 0.5);
    }
    SUBCASE("per-marginal KS") {
        Rng rng(11);
        const Gaussian h(vec({1, -2}), fig2_cov());
        std::vector<double> x0, x1;
        for (int i = 0; i < 10000; ++i) {
            const VectorXd d = h.sample(rng);
            x0.push_back(d[0]);
            x1.push_back(d[1]);
        }
        CHECK(oracle::ks_pvalue(x0, [](double x) { return oracle::normal_cdf(x, 1, std::sqrt(10.0)); }) > 0.001);
        CHECK(oracle::ks_pvalue(x1, [](double x) { return oracle::normal_cdf(x, -2, std::sqrt(2.0)); }) > 0.001);
    }
}

TEST_CASE("student t log density") {
    const StudentT near_gauss(vec({0}), MatrixXd::Identity(1, 1), 1e6);
    CHECK(std::abs(near_gauss.log_density(vec({0})) + 0.5 * std::log(2 * std::numbers::pi)) < 1e-4);
    const StudentT cauchy(vec({0}), MatrixXd::Identity(1, 1), 1.0);
    CHECK(cauchy.log_density(vec({0})) == doctest::Approx(std::log(1.0 / std::numbers::pi)).epsilon(1e-12));
    const StudentT t2(vec({0, 0}), MatrixXd::Identity(2, 2), 4.0);
    CHECK(t2.log_density(vec({0, 0})) > t2.log_density(vec({3, 3})));
    CHECK_THROWS(StudentT(vec({0}), MatrixXd::Identity(1, 1), 0.0));

    for (int d = 1; d <= 2; ++d) {
        const StudentT t(VectorXd::Zero(d), MatrixXd::Identity(d, d), 1e6);
        const Gaussian g(VectorXd::Zero(d), MatrixXd::Identity(d, d));
        for (int i = 0; i < 100; ++i) {
            VectorXd x = VectorXd::Constant(d, -3.0 + 6.0 * i / 99.0);
            if (d == 2) x[1] = 3.0 - 6.0 * ((i * 37) % 100) / 99.0;
            CHECK(std::abs(t.log_density(x) - g.log_density(x)) < 1e-4);
        }
    }
}

TEST_CASE("student t sampling") {
    Rng rng(3);
    const double nu = 10.0;
    const StudentT t(vec({2}), MatrixXd::Identity(1, 1), nu);
    std::vector<double> xs;
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
        xs.push_back(t.sample(rng)[0]);
        sum += xs.back();
    }
    CHECK(std::abs(sum / 10000.0 - 2.0) < 4.0 * std::sqrt(nu / ((nu - 2.0) * 10000.0)));
    CHECK(oracle::ks_pvalue(xs, [&](double x) { return oracle::student_t_cdf(x, nu, 2.0, 1.0); }) > 0.001);

    const StudentT big(vec({0}), MatrixXd::Identity(1, 1), 1e6);
    std::vector<double> ys;
    for (int i = 0; i < 100000; ++i) ys.push_back(big.sample(rng)[0]);
    std::sort(ys.begin(), ys.end());
    CHECK(std::abs(ys[95000] - 1.6448536) < 0.02 * 1.6448536);

    Rng a(99), b(99);
    CHECK(t.sample(a) == t.sample(b));
}

TEST_CASE("inverse gamma sampling") {
    Rng rng(5);
    const InverseGammaParams p{3.0, 2.0};
    double sum = 0.0;
    bool positive = true;
    for (int i = 0; i < 100000; ++i) {
        const double s = sample_inverse_gamma(p, rng);
        positive = positive && s > 0.0;
        sum += s;
    }
    const double sd = std::sqrt(4.0 / (4.0 * 1.0)) / std::sqrt(100000.0);
    CHECK(positive);
    CHECK(std::abs(sum / 100000.0 - 1.0) < 3.0 * sd);
    Rng a(8), b(8);
    CHECK(sample_inverse_gamma(p, a) == sample_inverse_gamma(p, b));
}

TEST_CASE("mixture log density") {
    const Gaussian g(vec({1, 2}), fig2_cov());
    const MixtureModel one({1.0}, {g});
    CHECK(one.log_density(vec({0.3, 0.1})) == g.log_density(vec({0.3, 0.1})));
    const MixtureModel twin({0.5, 0.5}, {g, g});
    CHECK(twin.log_density(vec({0.3, 0.1})) == doctest::Approx(g.log_density(vec({0.3, 0.1}))).epsilon(1e-14));
    CHECK_THROWS(MixtureModel({0.5, 0.4}, {g, g}));
    CHECK_THROWS(twin.log_density(vec({0})));

    SUBCASE("integrates to one") {
        const MixtureModel m1({0.3, 0.7}, {Gaussian(vec({-2}), MatrixXd::Identity(1, 1)),
                                           Gaussian(vec({3}), 2.0 * MatrixXd::Identity(1, 1))});
        double s1 = 0.0;
        for (double x = -20; x <= 20; x += 0.01) s1 += std::exp(m1.log_density(vec({x}))) * 0.01;
        CHECK(std::abs(s1 - 1.0) < 0.01);
        const MixtureModel m2({0.5, 0.5}, {Gaussian(vec({0, 0}), fig2_cov()), Gaussian(vec({5, 5}), MatrixXd::Identity(2, 2))});
        double s2 = 0.0;
        for (double x = -20; x <= 20; x += 0.1) {
            for (double y = -15; y <= 15; y += 0.1) s2 += std::exp(m2.log_density(vec({x, y}))) * 0.01;
        }
        CHECK(std::abs(s2 - 1.0) < 0.01);
    }
}

TEST_CASE("region assignment") {
    const MixtureModel one({1.0}, {Gaussian(vec({0}), MatrixXd::Identity(1, 1))});
    CHECK(one.region(vec({123})) == 0);
    const MixtureModel two({0.5, 0.5}, {Gaussian(vec({0}), MatrixXd::Identity(1, 1)),
                                        Gaussian(vec({10}), MatrixXd::Identity(1, 1))});
    CHECK(region_assign(two, vec({2})) == 0);
    CHECK(region_assign(two, vec({5})) == 0);
    CHECK(region_assign(two, vec({5.0001})) == 1);
    for (double x = -20; x <= 30; x += 0.37) CHECK(two.region(vec({x})) < 2);

    // Unweighted by default; weighted flag moves the boundary.
    const MixtureModel skew({0.99, 0.01}, {Gaussian(vec({0}), MatrixXd::Identity(1, 1)),
                                           Gaussian(vec({10}), MatrixXd::Identity(1, 1))});
    CHECK(skew.region(vec({5.3})) == 1);
    CHECK(skew.region(vec({5.3}), true) == 0);
}

TEST_CASE("regularize_cov") {
    MatrixXd a = fig2_cov();
    CHECK(regularize_cov(a, 0.0) == a);
    CHECK(regularize_cov(MatrixXd::Zero(2, 2), 1.0) == MatrixXd::Identity(2, 2));
    CHECK(regularize_cov(MatrixXd::Identity(2, 2), 0.5) == 1.5 * MatrixXd::Identity(2, 2));
}

TEST_CASE("nearest_psd") {
    const MatrixXd id = MatrixXd::Identity(2, 2);
    CHECK((nearest_psd(id) - id).cwiseAbs().maxCoeff() <= 2 * kPsdJitter);
    MatrixXd a(2, 2);
    a << 1, 2, 2, 1;
    MatrixXd expected(2, 2);
    expected << 1.5, 1.5, 1.5, 1.5;
    CHECK((nearest_psd(a) - expected - kPsdJitter * id).cwiseAbs().maxCoeff() < 1e-12);

    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + trial % 5;
        MatrixXd m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = uniform(rng, -3, 3);
        const MatrixXd p = nearest_psd(m);
        const MatrixXd shifted = p - kPsdJitter * MatrixXd::Identity(n, n);
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (shifted + shifted.transpose()));
        CHECK(eig.eigenvalues().minCoeff() >= -1e-9);
        CHECK((nearest_psd(p) - p).norm() <= 1e-8);
        CHECK_NOTHROW(Gaussian(VectorXd::Zero(n), p));
    }
    MatrixXd bad = id;
    bad(0, 1) = std::nan("");
    CHECK_THROWS(nearest_psd(bad));
}

TEST_CASE("log_sum_exp") {
    CHECK(log_sum_exp(vec({1000, 1000})) == doctest::Approx(1000 + std::log(2.0)));
    const double ninf = -std::numeric_limits<double>::infinity();
    CHECK(log_sum_exp(vec({ninf, ninf})) == ninf);
}
