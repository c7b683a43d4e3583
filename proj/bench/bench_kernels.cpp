// Serial vs OpenMP batch kernels on the reference-sized problem.

#include <benchmark/benchmark.h>

#include <numeric>

#include "pid/batch.hpp"
#include "pid/datasets.hpp"
#include "pid/models.hpp"
#include "pid/rng.hpp"

using namespace pid;

namespace {

struct Fixture {
    Dataset data;
    Model f;
    Model g;
    std::vector<std::uint64_t> indices;
    std::vector<FeatureVector> xs;
    std::vector<ConfidenceVector> fs;
    std::vector<ConfidenceVector> gs;

    Fixture() {
        data = gen_synthetic(GeneratorKind::blobs, 3, 8, 400, 4.0, 1);
        f = init_model(mlp_arch(8, {32}, 3, Activation::relu), derive_seed(1, "f"));
        g = init_model(mlp_arch(8, {64}, 3, Activation::tanh), derive_seed(1, "g"));
        indices.resize(data.examples.size());
        std::iota(indices.begin(), indices.end(), 0);
        for (const auto &e : data.examples) {
            xs.push_back(e.x);
            fs.push_back(forward(f, e.x));
            gs.push_back(forward(g, e.x));
        }
    }
};

const Fixture &fixture() {
    static const Fixture fx;
    return fx;
}

AttackSpec spec_for(AttackKind kind) {
    AttackSpec s;
    s.name = to_string(kind);
    s.kind = kind;
    s.cfg.epsilon = 0.1;
    s.cfg.step_size = 0.025;
    s.cfg.iterations = 10;
    s.cfg.random_init = true;
    s.cfg.query_budget = 200;
    s.cfg.seed = 7;
    return s;
}

template <bool Parallel>
void bm_craft(benchmark::State &state) {
    const auto &fx = fixture();
    const auto spec = spec_for(static_cast<AttackKind>(state.range(0)));
    const AttackModels models{&fx.f, &fx.g, &fx.f};
    for (auto _ : state) {
        auto out = Parallel ? craft_batch(spec, models, fx.data.examples, fx.indices)
                            : craft_batch_serial(spec, models, fx.data.examples, fx.indices);
        benchmark::DoNotOptimize(out);
    }
    state.SetLabel(spec.name);
    state.SetItemsProcessed(state.iterations() * fx.indices.size());
}

template <bool Parallel>
void bm_forward(benchmark::State &state) {
    const auto &fx = fixture();
    for (auto _ : state) {
        auto out = Parallel ? forward_batch(fx.f, fx.xs) : forward_batch_serial(fx.f, fx.xs);
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() * fx.xs.size());
}

template <bool Parallel>
void bm_score(benchmark::State &state) {
    const auto &fx = fixture();
    const auto metric = metric_from_id(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto out = Parallel ? score_batch(metric, fx.fs, fx.gs) : score_batch_serial(metric, fx.fs, fx.gs);
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() * fx.fs.size());
}

} // namespace

BENCHMARK(bm_craft<false>)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_craft<true>)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_forward<false>);
BENCHMARK(bm_forward<true>);
BENCHMARK(bm_score<false>)->DenseRange(1, 4);
BENCHMARK(bm_score<true>)->DenseRange(1, 4);

BENCHMARK_MAIN();
