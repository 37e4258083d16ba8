#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include <rgess/samplers.hpp>
#include <rgess/targets.hpp>

using namespace rgess;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ChainState start_at(const VectorXd& x) {
    ChainState s;
    s.point = x;
    return s;
}

MixtureModel student_bank(const MixtureModel& g, double dof) {
    std::vector<StudentT> ts;
    for (std::size_t m = 0; m < g.size(); ++m) ts.emplace_back(g.mean(m), g.cov(m), dof);
    return MixtureModel(g.weights(), ts);
}

}  // namespace

static void BM_EssStep(benchmark::State& state) {
    const auto d = state.range(0);
    const Gaussian prior(VectorXd::Zero(d), MatrixXd::Identity(d, d));
    const LogFunction log_lik = [](const VectorXd& x) { return -0.5 * (x.array() - 1.0).square().sum(); };
    Rng rng(1);
    ChainState s = start_at(VectorXd::Zero(d));
    for (auto _ : state) {
        s = ess_step(s, prior, log_lik, rng).next;
        benchmark::DoNotOptimize(s.point.data());
    }
}
BENCHMARK(BM_EssStep)->Arg(2)->Arg(9)->Arg(50);

static void BM_GmrgessGaussMix(benchmark::State& state) {
    const MixtureModel mix = gauss_mix_model();
    const TargetDensity target = gauss_mix_target();
    Rng rng(2);
    ChainState s = start_at(mix.mean(0));
    s.region = mix.region(s.point);
    for (auto _ : state) {
        s = gmrgess_step(s, mix, target, rng).next;
        benchmark::DoNotOptimize(s.point.data());
    }
}
BENCHMARK(BM_GmrgessGaussMix);

static void BM_TmrgessGaussMix(benchmark::State& state) {
    const MixtureModel mix = student_bank(gauss_mix_model(), 5.0);
    const TargetDensity target = gauss_mix_target();
    Rng rng(3);
    ChainState s = start_at(mix.mean(0));
    s.region = mix.region(s.point);
    for (auto _ : state) {
        s = tmrgess_step(s, mix, target, rng).next;
        benchmark::DoNotOptimize(s.point.data());
    }
}
BENCHMARK(BM_TmrgessGaussMix);

static void BM_LogisticLogLikelihood(benchmark::State& state) {
    VectorXd beta_star(9);
    beta_star << 1, -0.8, 0.6, -0.5, 0.4, -0.3, 0.25, -0.2, 0.1;
    const Dataset data = synthetic_logistic(static_cast<std::size_t>(state.range(0)), beta_star, 0.75, 7);
    const LogisticTarget target(data.train_x, data.train_y);
    const VectorXd beta = VectorXd::Constant(9, 0.1);
    for (auto _ : state) benchmark::DoNotOptimize(logistic_log_likelihood(beta, target));
    state.SetItemsProcessed(state.iterations() * data.train_x.rows());
}
BENCHMARK(BM_LogisticLogLikelihood)->Arg(4000)->Arg(40000);

static void BM_LitterLogLikelihood(benchmark::State& state) {
    const LitterTarget data = embedded_litter_data();
    VectorXd p(3);
    p << 3.1, -2.8, -0.1;
    for (auto _ : state) benchmark::DoNotOptimize(litter_log_likelihood(p, data));
}
BENCHMARK(BM_LitterLogLikelihood);
BENCHMARK_MAIN();
