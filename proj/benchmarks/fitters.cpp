#include <benchmark/benchmark.h>

#include <vector>

#include <Eigen/Dense>

#include <rgess/adaptation.hpp>

using namespace rgess;
using Eigen::VectorXd;

namespace {

std::vector<VectorXd> clustered_points(std::size_t n, Eigen::Index d) {
    Rng rng(5);
    std::vector<VectorXd> xs;
    for (std::size_t i = 0; i < n; ++i) {
        VectorXd x = standard_normal_vector(rng, d);
        x[0] += (i % 4) * 8.0;
        xs.push_back(x);
    }
    return xs;
}

}  // namespace

static void BM_EmGmmFit(benchmark::State& state) {
    const auto xs = clustered_points(static_cast<std::size_t>(state.range(0)), 2);
    AdaptationConfig cfg;
    for (auto _ : state) {
        Rng rng(1);
        benchmark::DoNotOptimize(em_gmm_fit(xs, 4, cfg, rng).objective);
    }
}
BENCHMARK(BM_EmGmmFit)->Arg(50)->Arg(1000);

static void BM_EmTmmFit(benchmark::State& state) {
    const auto xs = clustered_points(static_cast<std::size_t>(state.range(0)), 2);
    AdaptationConfig cfg;
    for (auto _ : state) {
        Rng rng(1);
        benchmark::DoNotOptimize(em_tmm_fit(xs, 4, cfg, rng).objective);
    }
}
BENCHMARK(BM_EmTmmFit)->Arg(50)->Arg(1000);

static void BM_ViGmmFit(benchmark::State& state) {
    const auto xs = clustered_points(static_cast<std::size_t>(state.range(0)), 2);
    AdaptationConfig cfg;
    for (auto _ : state) {
        Rng rng(1);
        benchmark::DoNotOptimize(vi_gmm_fit(xs, 4, cfg, rng).objective);
    }
}
BENCHMARK(BM_ViGmmFit)->Arg(50)->Arg(1000);

static void BM_SaUpdate(benchmark::State& state) {
    const auto xs = clustered_points(50, 2);
    AdaptationConfig cfg;
    Rng rng(1);
    const MixtureModel start = em_gmm_fit(xs, 4, cfg, rng).mixture;
    for (auto _ : state) benchmark::DoNotOptimize(sa_gmm_update(start, xs, 0.05).skipped);
}
BENCHMARK(BM_SaUpdate);
