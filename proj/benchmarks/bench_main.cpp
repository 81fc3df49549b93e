#include "rate/agents.hpp"
#include "rate/baselines.hpp"
#include "rate/metrics.hpp"

#include <random>

#include <benchmark/benchmark.h>
#include <fmt/format.h>

namespace {

rate::metrics::ScoreMatrix random_matrix(std::size_t segments, std::size_t systems) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> level(0, 4);
    rate::metrics::ScoreMatrix m;
    for (std::size_t k = 0; k < systems; ++k)
        m.systems.push_back(fmt::format("sys{}", k));
    for (std::size_t s = 0; s < segments; ++s) {
        m.segments.push_back(fmt::format("seg{}", s));
        std::vector<double> a(systems), h(systems);
        for (std::size_t k = 0; k < systems; ++k) {
            a[k] = level(rng) + 0.5 * (rng() % 2);
            h[k] = level(rng);
        }
        m.metric.push_back(std::move(a));
        m.human.push_back(std::move(h));
    }
    return m;
}

void BM_SegmentAccT(benchmark::State& state) {
    const auto m = random_matrix(static_cast<std::size_t>(state.range(0)), 8);
    for (auto _ : state)
        benchmark::DoNotOptimize(rate::metrics::segment_acc_t(m));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SegmentAccT)->Arg(100)->Arg(1000)->Arg(5000);

void BM_Spearman(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> d;
    std::vector<double> x(static_cast<std::size_t>(state.range(0))), y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = d(rng);
        y[i] = x[i] + d(rng);
    }
    for (auto _ : state)
        benchmark::DoNotOptimize(rate::metrics::spearman(x, y));
}
BENCHMARK(BM_Spearman)->Arg(50)->Arg(1000)->Arg(100000);

void BM_Calibrate(benchmark::State& state) {
    using rate::Outcome;
    const Outcome all[] = {Outcome::Win, Outcome::Tie, Outcome::Lose};
    for (auto _ : state)
        for (Outcome a : all)
            for (Outcome b : all)
                benchmark::DoNotOptimize(rate::calibrate(2.0, 2.0, {a, b}));
}
BENCHMARK(BM_Calibrate);

void BM_ParseMqmSpans(benchmark::State& state) {
    using namespace rate::baselines;
    std::vector<MqmError> errors;
    for (int i = 0; i < state.range(0); ++i)
        errors.push_back({static_cast<Severity>(i % 3), "accuracy/mistranslation", fmt::format("span {}", i)});
    const auto text = render_mqm_spans(errors);
    for (auto _ : state)
        benchmark::DoNotOptimize(parse_mqm_spans(text));
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseMqmSpans)->Arg(5)->Arg(50);

} // namespace

BENCHMARK_MAIN();
