#include "rap/glm.hpp"
#include "rap/lasso_cd.hpp"
#include "rap/rap.hpp"
#include "rap/simgen.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace rap;

namespace {

WeightedMoments moments_for(Index p, std::size_t n) {
    sim::RegimeSpec spec;
    spec.p = p;
    spec.duration = n;
    spec.seed = 11;
    const auto regime = sim::sample_regime(spec);
    WeightedMoments m(p, 0.99);
    for (const auto& s : regime.samples) m.update(s.x, s.y);
    return m;
}

void BM_LassoColdFit(benchmark::State& state) {
    const auto p = static_cast<Index>(state.range(0));
    const auto m = moments_for(p, 4 * static_cast<std::size_t>(p));
    const double lambda = 0.1 * lasso::lambda_max(m);
    for (auto _ : state) benchmark::DoNotOptimize(lasso::fit(m, lambda));
}
BENCHMARK(BM_LassoColdFit)->Arg(10)->Arg(50)->Arg(100)->Arg(200);

void BM_LassoWarmFit(benchmark::State& state) {
    const auto p = static_cast<Index>(state.range(0));
    const auto m = moments_for(p, 4 * static_cast<std::size_t>(p));
    const double lambda = 0.1 * lasso::lambda_max(m);
    const LassoFit warm = lasso::fit(m, lambda * 1.01);
    for (auto _ : state) benchmark::DoNotOptimize(lasso::fit(m, lambda, warm));
}
BENCHMARK(BM_LassoWarmFit)->Arg(10)->Arg(50)->Arg(100)->Arg(200);

// Steady-state cost of one filter step on a stationary stream.
void BM_RapStep(benchmark::State& state) {
    const auto p = static_cast<Index>(state.range(0));
    const bool exact = state.range(1) != 0;
    const FamilyKind family = state.range(2) != 0 ? FamilyKind::binomial : FamilyKind::gaussian;
    sim::RegimeSpec spec;
    spec.p = p;
    spec.rho = 0.3;
    spec.duration = 2000;
    spec.family = family;
    spec.seed = 5;
    const auto regime = sim::sample_regime(spec);
    RapOptions opts;
    opts.mode = exact ? GradientMode::exact : GradientMode::approximate;
    opts.warmup = static_cast<std::size_t>(p);
    opts.epsilon = 0.01;
    RapLearner learner(p, family == FamilyKind::binomial ? Family::binomial() : Family::gaussian(), opts);
    std::size_t i = 0;
    for (; i < 200; ++i) learner.step(regime.samples[i].x, regime.samples[i].y);
    for (auto _ : state) {
        const auto& s = regime.samples[i];
        benchmark::DoNotOptimize(learner.step(s.x, s.y));
        if (++i == regime.samples.size()) i = 200;
    }
}
BENCHMARK(BM_RapStep)
    ->Args({20, 1, 0})
    ->Args({20, 0, 0})
    ->Args({100, 1, 0})
    ->Args({100, 0, 0})
    ->Args({20, 1, 1})
    ->Args({20, 0, 1});

} // namespace

BENCHMARK_MAIN();
