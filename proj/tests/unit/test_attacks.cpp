#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pid/attacks.hpp"
#include "pid/benchmark.hpp"
#include "pid/error.hpp"
#include "support.hpp"

using namespace pid;
using doctest::Approx;

namespace {

Model random_model(const Architecture &arch, std::uint64_t seed) {
    Model m = init_model(arch, seed);
    Rng rng(derive_seed(seed, "perturb"));
    for (auto &layer : m.layers) {
        for (auto &w : layer.weights) w = 3.0 * rng.uniform(-1.0, 1.0);
        for (auto &b : layer.bias) b = rng.uniform(-1.0, 1.0);
    }
    return m;
}

std::vector<double> random_x(Rng &rng, std::size_t d) {
    std::vector<double> x(d);
    for (auto &v : x) v = rng.uniform();
    return x;
}

AttackConfig pgd_cfg(double eps, std::uint64_t seed = 0) {
    AttackConfig c;
    c.epsilon = eps;
    c.step_size = eps > 0.0 ? eps / 4 : 0.025;
    c.iterations = 10;
    c.random_init = true;
    c.seed = seed;
    return c;
}

void require_inside(const AdversarialPair &p, double eps) {
    for (std::size_t i = 0; i < p.x_adv.size(); ++i) {
        REQUIRE(std::abs(p.x_adv[i] - p.x_clean[i]) <= eps + 1e-9);
        REQUIRE(p.x_adv[i] >= 0.0);
        REQUIRE(p.x_adv[i] <= 1.0);
    }
}

// Victims shared by the seeded attack-strength checks.
struct Victims {
    Dataset test_set;
    Model f;
    Model g;
};

const Victims &victims() {
    static const Victims v = [] {
        const auto full = gen_synthetic(GeneratorKind::blobs, 3, 8, 200, 3.0, 1);
        auto [tr, ca, te] = split(full, {0.6, 0.1, 0.3}, 1);
        ModelSpec fs;
        ModelSpec gs;
        gs.hidden = {64};
        gs.activation = Activation::tanh;
        gs.epochs = 10;
        return Victims{te, train(architecture_for(fs, 8, 3), tr, train_config_for(fs, derive_seed(1, "f"))),
                       train(architecture_for(gs, 8, 3), tr, train_config_for(gs, derive_seed(1, "g")))};
    }();
    return v;
}

} // namespace

TEST_CASE("zero budget leaves the input alone") {
    Rng rng(1);
    const Model f = random_model(mlp_arch(4, {5}, 3, Activation::tanh), 2);
    const Model g = random_model(linear_arch(4, 3), 3);
    for (int t = 0; t < 20; ++t) {
        const auto x = random_x(rng, 4);
        const std::size_t y = predicted_label(forward(f, x));
        CHECK(fgsm(f, x, y, 0.0).x_adv == x);
        CHECK(pgd(f, x, y, pgd_cfg(0.0)).x_adv == x);
        AttackConfig rs;
        rs.query_budget = 50;
        CHECK(random_search_attack(f, x, y, rs).x_adv == x);
        auto ac = pgd_cfg(0.0);
        CHECK(adaptive_joint_attack(f, g, x, y, (y + 1) % 3, ac).x_adv == x);
    }
}

TEST_CASE("zero gradient means no FGSM step") {
    Model m = init_model(linear_arch(2, 2), 0);
    m.layers[0].weights = {1000.0, 0.0, -1000.0, 0.0};
    m.layers[0].bias = {0.0, 0.0};
    const std::vector<double> x{0.8, 0.4};
    CHECK(fgsm(m, x, 0, 0.1).x_adv == x);
}

TEST_CASE("FGSM on a linear model follows the closed form") {
    Rng rng(4);
    for (int t = 0; t < 50; ++t) {
        const Model m = random_model(linear_arch(3, 2), 10 + t);
        const auto x = random_x(rng, 3);
        const std::size_t y = rng.below(2);
        const auto p = forward(m, x);
        std::vector<double> expected = x;
        for (std::size_t i = 0; i < 3; ++i) {
            double gi = 0.0;
            for (std::size_t o = 0; o < 2; ++o) gi += m.layers[0].w(o, i) * (p[o] - (o == y ? 1.0 : 0.0));
            expected[i] = std::clamp(x[i] + 0.1 * sign_of(gi), 0.0, 1.0);
        }
        REQUIRE(fgsm(m, x, y, 0.1).x_adv == expected);
    }
}

TEST_CASE("one PGD step without init is FGSM") {
    Rng rng(5);
    for (int t = 0; t < 200; ++t) {
        const Model m = random_model(mlp_arch(6, {7}, 4, t % 2 ? Activation::relu : Activation::tanh), 50 + t);
        const auto x = random_x(rng, 6);
        const std::size_t y = rng.below(4);
        const double eps = rng.uniform(0.0, 0.3);
        AttackConfig c;
        c.epsilon = eps;
        c.step_size = eps;
        c.iterations = 1;
        c.random_init = false;
        c.seed = t;
        if (eps == 0.0) c.iterations = 0;
        REQUIRE(pgd(m, x, y, c) == fgsm(m, x, y, eps));
    }
}

TEST_CASE("adaptive attack with lambda 0 is targeted PGD on f") {
    Rng rng(6);
    for (int t = 0; t < 100; ++t) {
        const Model f = random_model(mlp_arch(5, {6}, 3, Activation::relu), 80 + t);
        const Model g = random_model(linear_arch(5, 3), 180 + t);
        const auto x = random_x(rng, 5);
        const std::size_t y = rng.below(3);
        const std::size_t target = (y + 1 + rng.below(2)) % 3;
        AttackConfig c = pgd_cfg(0.15, 1000 + t);
        c.lambda = 0.0;
        const auto joint = adaptive_joint_attack(f, g, x, y, target, c);
        AttackConfig tc = c;
        tc.targeted = target;
        const auto targeted = pgd(f, x, y, tc);
        REQUIRE(joint.x_adv == targeted.x_adv);
    }
}

TEST_CASE("outputs respect the eps-ball and the box") {
    Rng rng(7);
    for (int t = 0; t < 400; ++t) {
        const Model f = random_model(mlp_arch(4, {5}, 3, Activation::tanh), 300 + t);
        const Model g = random_model(mlp_arch(4, {3}, 3, Activation::relu), 700 + t);
        auto x = random_x(rng, 4);
        if (t % 5 == 0) x[0] = 0.0;
        if (t % 7 == 0) x[1] = 1.0;
        const double eps = rng.uniform(0.0, 0.5);
        const std::size_t y = rng.below(3);
        require_inside(fgsm(f, x, y, eps), eps);
        auto c = pgd_cfg(eps, t);
        c.step_size = eps > 0.0 ? rng.uniform(0.01, 0.6) : 0.1;
        require_inside(pgd(f, x, y, c), eps);
        require_inside(adaptive_joint_attack(f, g, x, y, (y + 1) % 3, c), eps);
        AttackConfig rs;
        rs.epsilon = eps;
        rs.query_budget = 30;
        rs.seed = t;
        require_inside(random_search_attack(f, x, y, rs), eps);
    }
}

TEST_CASE("projection clamps the ball before the box") {
    std::vector<double> x{1.4, -0.3, 0.55, 0.2};
    const std::vector<double> x0{0.95, 0.05, 0.5, 0.2};
    project_linf(x, x0, 0.1);
    CHECK(x == std::vector<double>{1.0, 0.0, 0.55, 0.2});
}

TEST_CASE("random search stops at once on a misclassified input") {
    const Model m = random_model(linear_arch(3, 3), 4);
    Rng rng(8);
    const auto x = random_x(rng, 3);
    const std::size_t wrong = (predicted_label(forward(m, x)) + 1) % 3;
    AttackConfig c;
    c.epsilon = 0.2;
    c.query_budget = 1;
    RandomSearchStats st;
    const auto out = random_search_attack(m, x, wrong, c, &st);
    CHECK(out.succeeded);
    CHECK(out.x_adv == x);
    CHECK(st.queries == 1);
}

TEST_CASE("random search only queries scores and respects its budget") {
    const Model m = random_model(mlp_arch(6, {8}, 3, Activation::tanh), 12);
    Rng rng(9);
    for (int t = 0; t < 30; ++t) {
        const auto x = random_x(rng, 6);
        const std::size_t y = predicted_label(forward(m, x));
        std::size_t calls = 0;
        const ScoreOracle oracle = [&](std::span<const double> q) {
            ++calls;
            return forward(m, q);
        };
        AttackConfig c;
        c.epsilon = 0.05;
        c.query_budget = 40 + t;
        c.seed = t;
        RandomSearchStats st;
        const auto out = random_search_attack(oracle, x, y, c, &st);
        REQUIRE(calls == st.queries);
        REQUIRE(calls <= c.query_budget);
        REQUIRE(st.margin_trace.size() == calls);
        for (std::size_t i = 1; i < st.margin_trace.size(); ++i) {
            REQUIRE(st.margin_trace[i] <= st.margin_trace[i - 1]);
        }
        REQUIRE(classification_margin(forward(m, out.x_adv), y) == st.margin_trace.back());
        if (!out.succeeded) REQUIRE(calls == c.query_budget);
    }
}

TEST_CASE("PGD beats FGSM on a trained model") {
    const auto &v = victims();
    std::vector<AdversarialPair> f1, p10;
    for (std::size_t i = 0; i < v.test_set.size(); ++i) {
        const auto &e = v.test_set.examples[i];
        f1.push_back(fgsm(v.f, e.x, e.y_true, 0.1));
        p10.push_back(pgd(v.f, e.x, e.y_true, pgd_cfg(0.1, derive_seed(1, i))));
    }
    const double asr_fgsm = attack_success_rate(v.f, f1);
    const double asr_pgd = attack_success_rate(v.f, p10);
    CHECK(asr_pgd > asr_fgsm);
    // seeded pilot values
    CHECK(asr_fgsm == Approx(0.6500).epsilon(0.005));
    CHECK(asr_pgd == Approx(0.6611).epsilon(0.005));
}

TEST_CASE("random search fools the trained model at 2000 queries") {
    const auto &v = victims();
    std::vector<AdversarialPair> pairs;
    for (std::size_t i = 0; i < v.test_set.size(); ++i) {
        const auto &e = v.test_set.examples[i];
        AttackConfig c;
        c.epsilon = 0.1;
        c.query_budget = 2000;
        c.seed = derive_seed(1, i);
        pairs.push_back(random_search_attack(v.f, e.x, e.y_true, c));
    }
    const double asr = attack_success_rate(v.f, pairs);
    CHECK(asr >= 0.5);
    CHECK(asr == Approx(0.6833).epsilon(0.005));
}

TEST_CASE("joint attack raises auxiliary agreement") {
    const auto &v = victims();
    double conf_pgd = 0.0, conf_joint = 0.0;
    int n_pgd = 0, n_joint = 0;
    for (std::size_t i = 0; i < v.test_set.size(); ++i) {
        const auto &e = v.test_set.examples[i];
        const auto p = forward(v.f, e.x);
        if (predicted_label(p) != e.y_true) continue;
        const auto c = pgd_cfg(0.1, derive_seed(1, i));
        const auto plain = pgd(v.f, e.x, e.y_true, c);
        if (const auto l = predicted_label(forward(v.f, plain.x_adv)); l != e.y_true) {
            conf_pgd += forward(v.g, plain.x_adv)[l];
            ++n_pgd;
        }
        const auto joint = adaptive_joint_attack(v.f, v.g, e.x, e.y_true, runner_up_label(p, e.y_true), c);
        if (const auto l = predicted_label(forward(v.f, joint.x_adv)); l != e.y_true) {
            conf_joint += forward(v.g, joint.x_adv)[l];
            ++n_joint;
        }
    }
    REQUIRE(n_pgd > 0);
    REQUIRE(n_joint > 0);
    CHECK(conf_joint / n_joint > conf_pgd / n_pgd);
    // seeded pilot values
    CHECK(conf_pgd / n_pgd == Approx(0.4299).epsilon(0.005));
    CHECK(conf_joint / n_joint == Approx(0.4906).epsilon(0.005));
}

TEST_CASE("success rate counts") {
    Model id = init_model(linear_arch(2, 2), 0);
    id.layers[0].weights = {1.0, 0.0, 0.0, 1.0};
    id.layers[0].bias = {0.0, 0.0};
    auto pair = [](std::vector<double> x, std::size_t y) { return AdversarialPair{x, x, y, false}; };
    const std::vector<AdversarialPair> all{pair({1, 0}, 1), pair({0, 1}, 0)};
    const std::vector<AdversarialPair> none{pair({1, 0}, 0), pair({0, 1}, 1)};
    const std::vector<AdversarialPair> three{pair({1, 0}, 1), pair({0, 1}, 0), pair({0.9, 0.1}, 1), pair({0, 1}, 1)};
    CHECK(attack_success_rate(id, all) == 1.0);
    CHECK(attack_success_rate(id, none) == 0.0);
    CHECK(attack_success_rate(id, three) == 0.75);
    CHECK_THROWS_AS(attack_success_rate(id, std::vector<AdversarialPair>{}), ParameterError);
}

TEST_CASE("attack parameters are validated") {
    const Model m = random_model(linear_arch(2, 2), 1);
    const std::vector<double> x{0.5, 0.5};
    CHECK_THROWS_AS(fgsm(m, x, 0, -0.1), ParameterError);
    auto c = pgd_cfg(0.1);
    c.epsilon = -0.1;
    CHECK_THROWS_AS(pgd(m, x, 0, c), ParameterError);
    c = pgd_cfg(0.1);
    c.step_size = 0.0;
    CHECK_THROWS_AS(pgd(m, x, 0, c), ParameterError);
    c = pgd_cfg(0.1);
    c.targeted = 0;
    CHECK_THROWS_AS(pgd(m, x, 0, c), ParameterError);
    CHECK_THROWS_AS(pgd(m, std::vector<double>{0.5}, 0, pgd_cfg(0.1)), ParameterError);
    AttackConfig rs;
    rs.epsilon = 0.1;
    CHECK_THROWS_AS(random_search_attack(m, x, 0, rs), ParameterError);
    CHECK_THROWS_AS(adaptive_joint_attack(m, m, x, 0, 0, pgd_cfg(0.1)), ParameterError);
    CHECK(runner_up_label(std::vector<double>{0.5, 0.2, 0.3}, 0) == 2);
    CHECK(runner_up_label(std::vector<double>{0.4, 0.3, 0.3}, 0) == 1);
}

TEST_CASE("pair line layout") {
    const AdversarialPair p{{0.5, 0.25}, {0.6, 0.15}, 1, true};
    CHECK(format_adversarial_pair("pgd-3", p) ==
          "{\"id\":\"pgd-3\",\"y_true\":1,\"x_clean\":[0.5,0.25],\"x_adv\":[0.59999999999999998,0.14999999999999999],"
          "\"succeeded\":true}");
}
