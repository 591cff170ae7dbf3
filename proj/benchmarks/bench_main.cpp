#include "gpcopula/dnorm.hpp"
#include "gpcopula/exceedance.hpp"
#include "gpcopula/gpd.hpp"
#include "gpcopula/simulation.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <cstdint>
#include <vector>

namespace {

gpc::GeneratorSpec spec_for(gpc::GeneratorFamily family, std::size_t dim) {
    gpc::GeneratorSpec spec;
    spec.family = family;
    spec.dim = dim;
    if (family == gpc::GeneratorFamily::logistic) spec.p = 2.5;
    if (family == gpc::GeneratorFamily::husler_reiss) {
        spec.sigma.assign(dim * dim, 0.5);
        for (std::size_t i = 0; i < dim; ++i) spec.sigma[i * dim + i] = 1.0;
    }
    return spec;
}

void bm_sample_generator(benchmark::State& state, gpc::GeneratorFamily family) {
    const auto spec = spec_for(family, 4);
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::uint64_t seed = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(gpc::sample_generator(spec, n, seed++));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void bm_eval_dnorm_mc(benchmark::State& state) {
    const gpc::DNormHandle handle(spec_for(gpc::GeneratorFamily::husler_reiss, 4),
                                  {static_cast<std::size_t>(state.range(0)), 7});
    const std::vector<double> x{1.0, 2.0, 0.5, 1.5};
    for (auto _ : state) {
        benchmark::DoNotOptimize(gpc::eval_dnorm(handle, x));
    }
}

void bm_eval_dnorm_closed(benchmark::State& state) {
    const gpc::DNormHandle handle(spec_for(gpc::GeneratorFamily::logistic, 4));
    const std::vector<double> x{1.0, 2.0, 0.5, 1.5};
    for (auto _ : state) {
        benchmark::DoNotOptimize(gpc::eval_dnorm(handle, x));
    }
}

void bm_dual_inclusion_exclusion(benchmark::State& state) {
    const gpc::DNormHandle handle(spec_for(gpc::GeneratorFamily::husler_reiss,
                                           static_cast<std::size_t>(state.range(0))),
                                  {20000, 7});
    const std::vector<double> x(handle.dim(), 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gpc::dual_via_inclusion_exclusion(handle, x));
    }
}

void bm_simulate_copula_scale(benchmark::State& state) {
    gpc::GpdSampleConfig config;
    config.spec = spec_for(gpc::GeneratorFamily::constant_one, 2);
    config.margins = gpc::MarginKind::copula_scale;
    config.n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        ++config.seed;
        benchmark::DoNotOptimize(gpc::simulate_copula_scale(config));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void bm_rank_transform(benchmark::State& state) {
    gpc::GpdSampleConfig config;
    config.spec = spec_for(gpc::GeneratorFamily::logistic, 4);
    config.n = static_cast<std::size_t>(state.range(0));
    config.seed = 5;
    const gpc::Matrix raw = gpc::simulate_simple_gpd(config);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gpc::rank_transform_columns(raw));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void bm_uniformity_scan(benchmark::State& state) {
    gpc::GpdSampleConfig config;
    config.spec = spec_for(gpc::GeneratorFamily::constant_one, 2);
    config.margins = gpc::MarginKind::copula_scale;
    config.n = static_cast<std::size_t>(state.range(0));
    config.seed = 5;
    const gpc::PseudoSample sample = gpc::simulate_copula_scale(config);
    const gpc::CopulaTarget target = gpc::make_copula_target({0.99, 0.99});
    for (auto _ : state) {
        benchmark::DoNotOptimize(gpc::conditional_uniformity_scan(sample, target));
    }
}

void bm_fit_gpd_mle(benchmark::State& state) {
    // Exact GPD excesses via the quantile function, shape 0.1.
    std::vector<double> excesses(static_cast<std::size_t>(state.range(0)));
    for (std::size_t i = 0; i < excesses.size(); ++i) {
        const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(excesses.size());
        excesses[i] = gpc::gpd_excess_quantile(2.0, 0.1, u);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(gpc::fit_gpd_mle(excesses));
    }
}

BENCHMARK_CAPTURE(bm_sample_generator, constant_one, gpc::GeneratorFamily::constant_one)
    ->Arg(10000);
BENCHMARK_CAPTURE(bm_sample_generator, permuted_spike, gpc::GeneratorFamily::permuted_spike)
    ->Arg(10000);
BENCHMARK_CAPTURE(bm_sample_generator, logistic, gpc::GeneratorFamily::logistic)->Arg(10000);
BENCHMARK_CAPTURE(bm_sample_generator, husler_reiss, gpc::GeneratorFamily::husler_reiss)
    ->Arg(10000);
BENCHMARK(bm_eval_dnorm_mc)->Arg(100000);
BENCHMARK(bm_eval_dnorm_closed);
BENCHMARK(bm_dual_inclusion_exclusion)->Arg(4)->Arg(8);
BENCHMARK(bm_simulate_copula_scale)->Arg(10000);
BENCHMARK(bm_rank_transform)->Arg(10000)->Arg(100000);
BENCHMARK(bm_uniformity_scan)->Arg(10000);
BENCHMARK(bm_fit_gpd_mle)->Arg(5000);

} // namespace

BENCHMARK_MAIN();
