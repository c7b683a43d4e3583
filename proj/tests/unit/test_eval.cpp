#include <doctest.h>

#include <cmath>

#include "pid/error.hpp"
#include "pid/eval.hpp"
#include "support.hpp"

using namespace pid;
using V = std::vector<double>;

namespace {

// Sizes up to 100 with ties drawn from a small grid half the time.
std::pair<V, V> random_instance(Rng &rng, bool ties) {
    V a(1 + rng.below(100)), c(1 + rng.below(100));
    auto draw = [&] { return ties ? static_cast<double>(rng.below(8)) / 8.0 : rng.uniform(); };
    for (auto &v : a) v = draw() + (ties ? 0.0 : 0.1);
    for (auto &v : c) v = draw();
    return {a, c};
}

} // namespace

TEST_CASE("auc examples") {
    CHECK(auc(V{0.9, 0.8, 0.7}, V{0.1, 0.2, 0.3}) == 1.0);
    CHECK(auc(V{0.5}, V{0.5}) == 0.5);
    CHECK(auc(V{0.8, 0.3}, V{0.5, 0.1}) == 0.75);
    CHECK(auc(V{0.1, 0.2}, V{0.8, 0.9}) == 0.0);
    CHECK_THROWS_AS(auc(V{}, V{0.1}), ParameterError);
    CHECK_THROWS_AS(auc_bruteforce(V{0.1}, V{}), ParameterError);
}

TEST_CASE("brute force examples") {
    CHECK(auc_bruteforce(V{0.8, 0.3}, V{0.5, 0.1}) == 0.75);
    const V same{0.3, 0.1, 0.3, 0.7, 0.2};
    CHECK(auc_bruteforce(same, same) == 0.5);
    CHECK(auc(same, same) == 0.5);
}

TEST_CASE("auc equals the pairwise oracle on random instances") {
    Rng rng(2);
    for (int t = 0; t < 200; ++t) {
        const auto [a, c] = random_instance(rng, t % 2 == 0);
        REQUIRE(std::abs(auc(a, c) - auc_bruteforce(a, c)) <= 1e-12);
        REQUIRE(std::abs(auc(a, c) + auc(c, a) - 1.0) <= 1e-12);
    }
}

TEST_CASE("auc is rank based") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        auto [a, c] = random_instance(rng, t % 2 == 0);
        const double base = auc(a, c);
        auto warp = [](V v) {
            for (auto &x : v) x = std::exp(3.0 * x) - 7.0;
            return v;
        };
        REQUIRE(auc(warp(a), warp(c)) == base);
    }
}

TEST_CASE("roc curve invariants and trapezoid area") {
    Rng rng(4);
    for (int t = 0; t < 200; ++t) {
        const auto [a, c] = random_instance(rng, t % 2 == 1);
        const auto roc = roc_curve(a, c);
        REQUIRE(roc.points.front() == RocPoint{0.0, 0.0});
        REQUIRE(roc.points.back() == RocPoint{1.0, 1.0});
        for (std::size_t i = 1; i < roc.points.size(); ++i) {
            REQUIRE(roc.points[i].fpr >= roc.points[i - 1].fpr);
            REQUIRE(roc.points[i].tpr >= roc.points[i - 1].tpr);
        }
        REQUIRE(std::abs(roc.auc - trapezoid_area(roc.points)) <= 1e-12);
        REQUIRE(std::abs(roc.auc - auc(a, c)) <= 1e-9);
    }
}

TEST_CASE("roc examples") {
    const auto sep = roc_curve(V{0.9, 0.8}, V{0.1, 0.2});
    CHECK(std::find(sep.points.begin(), sep.points.end(), RocPoint{0.0, 1.0}) != sep.points.end());
    CHECK(sep.auc == 1.0);

    const V same{0.1, 0.4, 0.4, 0.8};
    const auto diag = roc_curve(same, same);
    for (const auto &p : diag.points) CHECK(p.fpr == p.tpr);
    CHECK(diag.auc == 0.5);
}

TEST_CASE("score summary examples") {
    const auto one = score_distribution_summary(V{0.5}, 4);
    CHECK(one.counts == std::vector<std::size_t>{1});
    CHECK(one.bin_edges == V{0.5, 0.5});
    CHECK(one.mean == 0.5);
    CHECK(one.q50 == 0.5);

    const auto two = score_distribution_summary(V{0.0, 1.0}, 2);
    CHECK(two.counts == std::vector<std::size_t>{1, 1});
    CHECK(two.bin_edges == V{0.0, 0.5, 1.0});
    CHECK(two.q50 == 0.5);
    CHECK(two.q05 == doctest::Approx(0.05));

    CHECK_THROWS_AS(score_distribution_summary(V{}, 3), ParameterError);
    CHECK_THROWS_AS(score_distribution_summary(V{0.1}, 0), ParameterError);
}

TEST_CASE("uniform draws fill bins binomially") {
    Rng rng(5);
    V s(1000);
    for (auto &v : s) v = rng.uniform();
    const auto h = score_distribution_summary(s, 10);
    REQUIRE(h.counts.size() == 10);
    std::size_t total = 0;
    const double sigma = std::sqrt(1000 * 0.1 * 0.9);
    for (auto c : h.counts) {
        CHECK(std::abs(static_cast<double>(c) - 100.0) <= 5 * sigma);
        total += c;
    }
    CHECK(total == 1000);
    CHECK(h.mean == doctest::Approx(0.5).epsilon(0.05));
    CHECK(h.q05 < h.q50);
    CHECK(h.q50 < h.q95);
}

TEST_CASE("quantile interpolates") {
    const V s{1.0, 2.0, 3.0, 4.0, 5.0};
    CHECK(quantile(s, 0.0) == 1.0);
    CHECK(quantile(s, 1.0) == 5.0);
    CHECK(quantile(s, 0.5) == 3.0);
    CHECK(quantile(s, 0.125) == 1.5);
    CHECK_THROWS_AS(quantile(V{}, 0.5), ParameterError);
}
