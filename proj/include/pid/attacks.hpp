#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pid/attack_config.hpp"
#include "pid/datasets.hpp"
#include "pid/models.hpp"

namespace pid {

struct AdversarialPair {
    FeatureVector x_clean;
    FeatureVector x_adv;
    std::size_t y_true = 0;
    bool succeeded = false;  // the attacked model misclassifies x_adv

    bool operator==(const AdversarialPair &) const = default;
};

// Clamp into the eps-ball around x0 first, then into [0,1].
void project_linf(std::span<double> x, std::span<const double> x0, double epsilon);

// sign(0) == 0.
inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

AdversarialPair fgsm(const Model &m, std::span<const double> x, std::size_t y_true, double epsilon);

// Signed-gradient ascent on CE (or descent toward cfg.targeted) with
// projection after every step, optional uniform start in the eps-ball.
AdversarialPair pgd(const Model &m, std::span<const double> x, std::size_t y_true, const AttackConfig &cfg);

// Black-box access: only confidence vectors.
using ScoreOracle = std::function<ConfidenceVector(std::span<const double>)>;

struct RandomSearchStats {
    std::size_t queries = 0;
    std::vector<double> margin_trace;  // margin of the accepted iterate after each query
};

// f_y - max_{i != y} f_i.
double classification_margin(std::span<const double> p, std::size_t y_true);

// Random sign-patch search at the eps boundary; a proposal is kept only if
// it strictly lowers the margin. At most cfg.query_budget oracle calls.
AdversarialPair random_search_attack(const ScoreOracle &oracle, std::span<const double> x, std::size_t y_true,
                                     const AttackConfig &cfg, RandomSearchStats *stats = nullptr);
AdversarialPair random_search_attack(const Model &m, std::span<const double> x, std::size_t y_true,
                                     const AttackConfig &cfg, RandomSearchStats *stats = nullptr);

// PGD on CE(f(x+r), t) + lambda * CE(g(x+r), t). succeeded means both f and
// g predict t.
AdversarialPair adaptive_joint_attack(const Model &f, const Model &g, std::span<const double> x, std::size_t y_true,
                                      std::size_t target, const AttackConfig &cfg);

// Most confident class of p other than y_true (lowest index on ties). For a
// correctly classified input this is the second most likely class.
std::size_t runner_up_label(std::span<const double> p, std::size_t y_true);

double attack_success_rate(const Model &m, std::span<const AdversarialPair> pairs);

// {"id", "y_true", "x_clean", "x_adv", "succeeded"} on one line.
std::string format_adversarial_pair(const std::string &id, const AdversarialPair &pair);

} // namespace pid
