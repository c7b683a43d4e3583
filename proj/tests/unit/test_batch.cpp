#include <doctest.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pid/batch.hpp"
#include "pid/error.hpp"
#include "support.hpp"

using namespace pid;

namespace {

struct Fixture {
    Dataset data;
    Model f, g, s;
    std::vector<std::uint64_t> indices;

    Fixture() {
        data = gen_synthetic(GeneratorKind::blobs, 3, 6, 30, 3.0, 5);
        TrainConfig cfg;
        cfg.epochs = 5;
        cfg.seed = 1;
        f = train(mlp_arch(6, {10}, 3, Activation::relu), data, cfg);
        cfg.seed = 2;
        g = train(mlp_arch(6, {12}, 3, Activation::tanh), data, cfg);
        cfg.seed = 3;
        s = train(mlp_arch(6, {10}, 3, Activation::relu), data, cfg);
        for (std::size_t i = 0; i < data.size(); ++i) indices.push_back(1000 + 7 * i);
    }
};

AttackSpec spec_for(AttackKind kind) {
    AttackSpec s;
    s.name = to_string(kind);
    s.kind = kind;
    s.cfg.epsilon = 0.1;
    s.cfg.step_size = 0.025;
    s.cfg.iterations = kind == AttackKind::fgsm ? 0 : 10;
    s.cfg.random_init = kind != AttackKind::fgsm;
    s.cfg.query_budget = 200;
    s.cfg.seed = 77;
    return s;
}

} // namespace

TEST_CASE("parallel kernels match the serial reference bit for bit") {
#ifdef _OPENMP
    omp_set_num_threads(4);
#endif
    const Fixture fx;
    const AttackModels models{&fx.f, &fx.g, &fx.s};
    for (auto kind : {AttackKind::fgsm, AttackKind::pgd, AttackKind::random_search, AttackKind::adaptive,
                      AttackKind::transfer}) {
        CAPTURE(to_string(kind));
        const auto spec = spec_for(kind);
        const auto par = craft_batch(spec, models, fx.data.examples, fx.indices);
        const auto ser = craft_batch_serial(spec, models, fx.data.examples, fx.indices);
        REQUIRE(par.size() == fx.data.size());
        CHECK(par == ser);
        for (std::size_t i = 0; i < par.size(); i += 17) {
            CHECK(par[i] == craft_one(spec, models, fx.data.examples[i], fx.indices[i]));
        }
    }

    std::vector<FeatureVector> xs;
    for (const auto &e : fx.data.examples) xs.push_back(e.x);
    const auto pf = forward_batch(fx.f, xs);
    const auto pg = forward_batch(fx.g, xs);
    CHECK(pf == forward_batch_serial(fx.f, xs));
    for (auto m : {Metric::label_confidence, Metric::confidence_gap, Metric::top_n_l1, Metric::full_l1}) {
        CHECK(score_batch(m, pf, pg, 2) == score_batch_serial(m, pf, pg, 2));
    }
}

TEST_CASE("per-sample randomness depends on the index, not the batch") {
    const Fixture fx;
    const AttackModels models{&fx.f, &fx.g, &fx.s};
    const auto spec = spec_for(AttackKind::pgd);
    const auto full = craft_batch(spec, models, fx.data.examples, fx.indices);
    const std::vector<Example> tail(fx.data.examples.begin() + 40, fx.data.examples.end());
    const std::vector<std::uint64_t> tail_idx(fx.indices.begin() + 40, fx.indices.end());
    const auto part = craft_batch(spec, models, tail, tail_idx);
    for (std::size_t i = 0; i < part.size(); ++i) {
        REQUIRE(part[i] == full[40 + i]);
    }
}

TEST_CASE("batch errors surface once") {
    const Fixture fx;
    const AttackModels no_aux{&fx.f, nullptr, nullptr};
    CHECK_THROWS_AS(craft_batch(spec_for(AttackKind::adaptive), no_aux, fx.data.examples, fx.indices), ParameterError);
    CHECK_THROWS_AS(craft_batch(spec_for(AttackKind::transfer), no_aux, fx.data.examples, fx.indices), ParameterError);
    const std::vector<std::uint64_t> short_idx(3, 0);
    CHECK_THROWS_AS(craft_batch(spec_for(AttackKind::pgd), no_aux, fx.data.examples, short_idx), ParameterError);
    const std::vector<ConfidenceVector> one{{0.5, 0.5}};
    const std::vector<ConfidenceVector> two{{0.5, 0.5}, {0.5, 0.5}};
    CHECK_THROWS_AS(score_batch(Metric::label_confidence, one, two), ParameterError);
    CHECK(parse_attack_kind("random_search") == AttackKind::random_search);
    CHECK_THROWS_AS(parse_attack_kind("square"), ParameterError);
}
