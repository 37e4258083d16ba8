#include <doctest.h>

#include <limits>

#include <rgess/runner.hpp>
#include <rgess/targets.hpp>

#include "oracles.hpp"

using namespace rgess;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

RunConfig gauss_mix_config(Kernel kernel, AdaptationScheme scheme, std::size_t chains, std::size_t iterations) {
    RunConfig c;
    c.chains = chains;
    c.iterations = iterations;
    c.kernel = kernel;
    c.adaptation.scheme = scheme;
    c.adaptation.components = 2;
    c.adaptation.interval = 10;
    c.adaptation.reg_radius = 5.0;
    c.init_mean = VectorXd::Constant(2, 5.0);
    c.init_cov = 5.0 * MatrixXd::Identity(2, 2);
    c.master_seed = 42;
    return c;
}

const MixtureModel& mixture_at(const RunResult& r, std::size_t n) {
    const MixtureModel* m = nullptr;
    for (const auto& s : r.mixture_history) {
        if (s.iteration <= n) m = &s.mixture;
    }
    REQUIRE(m != nullptr);
    return *m;
}

}  // namespace

TEST_CASE("single-chain mh equals sequential steps") {
    RunConfig c = gauss_mix_config(Kernel::mh, AdaptationScheme::none, 1, 100);
    c.mh_proposal_scale = 3.0;
    const TargetDensity target = gauss_mix_target();
    const RunResult r = run(c, target);

    Rng rng(split_seed(c.master_seed, 1));
    ChainState s;
    s.point = Gaussian(c.init_mean, c.init_cov).sample(rng);
    const Gaussian proposal(VectorXd::Zero(2), 3.0 * MatrixXd::Identity(2, 2));
    REQUIRE(r.traces.size() == 1);
    REQUIRE(r.traces[0].size() == 100);
    for (std::size_t n = 1; n <= 100; ++n) {
        const StepOutcome out = mh_step(s, proposal, target, rng);
        s = out.next;
        CHECK(r.traces[0][n - 1].iteration == n);
        CHECK(r.traces[0][n - 1].point == s.point);
        CHECK(r.traces[0][n - 1].rejections == out.rejections);
    }
    CHECK(r.mixture_history.empty());
}

TEST_CASE("traces do not depend on the thread count") {
    const TargetDensity target = gauss_mix_target();
    for (auto [kernel, scheme] : {std::pair{Kernel::gmrgess, AdaptationScheme::em_gmm},
                                  std::pair{Kernel::tmrgess, AdaptationScheme::em_tmm},
                                  std::pair{Kernel::gmrgess, AdaptationScheme::sa_gmm}}) {
        RunConfig c = gauss_mix_config(kernel, scheme, 8, 60);
        c.threads = 1;
        const RunResult one = run(c, target);
        c.threads = 3;
        const RunResult three = run(c, target);
        CHECK(one.traces == three.traces);
        REQUIRE(one.mixture_history.size() == three.mixture_history.size());
        for (std::size_t i = 0; i < one.mixture_history.size(); ++i) {
            CHECK(one.mixture_history[i].iteration == three.mixture_history[i].iteration);
            CHECK(one.mixture_history[i].mixture.weights() == three.mixture_history[i].mixture.weights());
        }
    }
}

TEST_CASE("perturbing one chain's seed changes only that chain") {
    const TargetDensity target = gauss_mix_target();
    RunConfig c = gauss_mix_config(Kernel::mh, AdaptationScheme::none, 5, 40);
    c.chain_seeds = std::vector<std::uint64_t>{11, 12, 13, 14, 15};
    const RunResult base = run(c, target);
    (*c.chain_seeds)[2] = 99;
    const RunResult changed = run(c, target);
    for (std::size_t k = 0; k < 5; ++k) {
        if (k == 2) CHECK(base.traces[k] != changed.traces[k]);
        else CHECK(base.traces[k] == changed.traces[k]);
    }
}

TEST_CASE("adaptation barriers and mixture snapshots") {
    const TargetDensity target = gauss_mix_target();
    RunConfig c = gauss_mix_config(Kernel::gmrgess, AdaptationScheme::em_gmm, 10, 95);
    c.adaptation.components = 8;
    c.adaptation.interval = 5;
    const RunResult r = run(c, target);
    std::vector<std::size_t> stamps;
    for (const auto& s : r.mixture_history) stamps.push_back(s.iteration);
    std::vector<std::size_t> expected{0};
    for (std::size_t n = 20; n <= 95; n += 5) expected.push_back(n);
    CHECK(stamps == expected);
    CHECK(r.summary.adaptations == expected.size() - 1);

    for (const auto& trace : r.traces) {
        for (const auto& rec : trace) CHECK(rec.region == mixture_at(r, rec.iteration).region(rec.point));
    }
}

TEST_CASE("rejection bookkeeping matches the raw trace") {
    const TargetDensity target = gauss_mix_target();
    RunConfig c = gauss_mix_config(Kernel::tmrgess, AdaptationScheme::em_tmm, 4, 50);
    c.summary_window = 7;
    c.steps_per_iteration = 2;
    const RunResult r = run(c, target);
    std::vector<double> recomputed;
    for (std::size_t start = 0; start < 50; start += 7) {
        double total = 0.0;
        std::size_t count = 0;
        for (const auto& t : r.traces) {
            for (std::size_t i = start; i < std::min<std::size_t>(start + 7, 50); ++i, ++count) {
                total += static_cast<double>(t[i].rejections);
            }
        }
        recomputed.push_back(total / static_cast<double>(count));
    }
    CHECK(r.summary.rejection_rates == recomputed);
}

TEST_CASE("thinning and pooled snapshots") {
    const TargetDensity target = gauss_mix_target();
    RunConfig c = gauss_mix_config(Kernel::regional_mh, AdaptationScheme::vi_gmm, 3, 40);
    c.thinning = 4;
    const RunResult r = run(c, target);
    for (const auto& t : r.traces) {
        REQUIRE(t.size() == 10);
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i].iteration == 4 * (i + 1));
    }

    std::vector<ChainState> states(3);
    for (std::size_t k = 0; k < 3; ++k) states[k].point = VectorXd::Constant(2, static_cast<double>(k));
    const auto snap = pooled_snapshot(states);
    REQUIRE(snap.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(snap[k] == states[k].point);
    CHECK(pooled_snapshot({states[1]}) == std::vector<VectorXd>{states[1].point});
}

TEST_CASE("plain ess and gess run") {
    const TargetDensity target = gauss_mix_target();
    RunConfig c = gauss_mix_config(Kernel::ess, AdaptationScheme::none, 2, 30);
    c.ess_prior = Gaussian(VectorXd::Constant(2, 25.0), 400.0 * MatrixXd::Identity(2, 2));
    const RunResult e = run(c, target);
    CHECK(e.traces[0].size() == 30);

    RunConfig g = gauss_mix_config(Kernel::gess, AdaptationScheme::em_tmm, 4, 30);
    g.adaptation.components = 1;
    const RunResult r = run(g, target);
    for (const auto& s : r.mixture_history) CHECK(s.mixture.size() == 1);
}

TEST_CASE("configuration errors are reported before any work") {
    const TargetDensity target = gauss_mix_target();
    CHECK_THROWS_AS(run(gauss_mix_config(Kernel::tmrgess, AdaptationScheme::em_gmm, 2, 10), target), std::invalid_argument);
    CHECK_THROWS_AS(run(gauss_mix_config(Kernel::gmrgess, AdaptationScheme::em_tmm, 2, 10), target), std::invalid_argument);
    CHECK_THROWS_AS(run(gauss_mix_config(Kernel::gess, AdaptationScheme::em_tmm, 2, 10), target), std::invalid_argument);
    CHECK_THROWS_AS(run(gauss_mix_config(Kernel::mh, AdaptationScheme::em_gmm, 2, 10), target), std::invalid_argument);
    RunConfig c = gauss_mix_config(Kernel::mh, AdaptationScheme::none, 2, 10);
    c.burn_in = 10;
    CHECK_THROWS_AS(run(c, target), std::invalid_argument);
    c = gauss_mix_config(Kernel::mh, AdaptationScheme::none, 2, 10);
    c.init_mean = VectorXd::Zero(3);
    CHECK_THROWS_AS(run(c, target), std::invalid_argument);
    CHECK_THROWS_WITH_AS(run(gauss_mix_config(Kernel::gmrgess, AdaptationScheme::em_gmm, 1, 10), target),
                         doctest::Contains("run.chains"), std::invalid_argument);
    c = gauss_mix_config(Kernel::mh, AdaptationScheme::none, 0, 10);
    CHECK_THROWS_AS(run(c, target), std::invalid_argument);

    for (auto k : {Kernel::ess, Kernel::gmrgess, Kernel::tmrgess, Kernel::regional_mh, Kernel::mh, Kernel::gess}) {
        CHECK(parse_kernel(to_string(k)) == k);
    }
    CHECK_THROWS(parse_kernel("hmc"));
}

TEST_CASE("a chain that starts outside the support aborts the run") {
    const TargetDensity box{2, [](const VectorXd& x) {
                                return x[0] > 100.0 ? 0.0 : -std::numeric_limits<double>::infinity();
                            }};
    RunConfig c = gauss_mix_config(Kernel::mh, AdaptationScheme::none, 3, 10);
    CHECK_THROWS_WITH_AS(run(c, box), doctest::Contains("chain 0, iteration 1"), std::runtime_error);
}
