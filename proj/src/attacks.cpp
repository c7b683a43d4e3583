#include "pid/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pid/detector.hpp"
#include "pid/error.hpp"
#include "pid/rng.hpp"
#include "pid/text_format.hpp"

namespace pid {

void validate(const AttackConfig &cfg) {
    if (!(cfg.epsilon >= 0.0) || !std::isfinite(cfg.epsilon)) {
        throw ParameterError("attack epsilon must be >= 0");
    }
    if (cfg.iterations > 0 && !(cfg.step_size > 0.0)) {
        throw ParameterError("attack step_size must be > 0 when iterations > 0");
    }
    if (!std::isfinite(cfg.lambda) || cfg.lambda < 0.0) {
        throw ParameterError("attack lambda must be finite and >= 0");
    }
}

void project_linf(std::span<double> x, std::span<const double> x0, double epsilon) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = std::clamp(x[i], x0[i] - epsilon, x0[i] + epsilon);
        x[i] = std::clamp(x[i], 0.0, 1.0);
    }
}

namespace {

void check_input(const Model &m, std::span<const double> x, std::size_t y_true) {
    if (x.size() != m.input_dim()) {
        throw ParameterError("attack input has dimension " + std::to_string(x.size()) + ", model expects " +
                             std::to_string(m.input_dim()));
    }
    if (y_true >= m.num_classes()) {
        throw ParameterError("attack label out of range");
    }
}

bool misclassified(const Model &m, std::span<const double> x, std::size_t y_true) {
    return predicted_label(forward(m, x)) != y_true;
}

// Shared PGD loop. `direction(x)` returns the vector whose sign is the step.
template <typename Direction>
FeatureVector sign_descent(std::span<const double> x0, const AttackConfig &cfg, Direction &&direction) {
    FeatureVector x(x0.begin(), x0.end());
    if (cfg.random_init && cfg.epsilon > 0.0) {
        Rng rng(derive_seed(cfg.seed, "attack/init"));
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = x0[i] + rng.uniform(-cfg.epsilon, cfg.epsilon);
        }
        project_linf(x, x0, cfg.epsilon);
    }
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const std::vector<double> g = direction(x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += cfg.step_size * sign_of(g[i]);
        }
        project_linf(x, x0, cfg.epsilon);
    }
    return x;
}

} // namespace

AdversarialPair fgsm(const Model &m, std::span<const double> x, std::size_t y_true, double epsilon) {
    check_input(m, x, y_true);
    if (!(epsilon >= 0.0)) {
        throw ParameterError("fgsm epsilon must be >= 0");
    }
    const auto g = input_gradient(m, x, y_true, GradientSign::maximize);
    AdversarialPair out;
    out.x_clean.assign(x.begin(), x.end());
    out.x_adv = out.x_clean;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.x_adv[i] += epsilon * sign_of(g[i]);
    }
    project_linf(out.x_adv, x, epsilon);
    out.y_true = y_true;
    out.succeeded = misclassified(m, out.x_adv, y_true);
    return out;
}

AdversarialPair pgd(const Model &m, std::span<const double> x, std::size_t y_true, const AttackConfig &cfg) {
    validate(cfg);
    check_input(m, x, y_true);
    AdversarialPair out;
    if (cfg.targeted) {
        const std::size_t t = *cfg.targeted;
        if (t == y_true) {
            throw ParameterError("targeted label must differ from y_true");
        }
        if (t >= m.num_classes()) {
            throw ParameterError("targeted label out of range");
        }
        out.x_adv = sign_descent(x, cfg, [&](std::span<const double> xa) {
            return input_gradient(m, xa, t, GradientSign::minimize);
        });
    } else {
        out.x_adv = sign_descent(x, cfg, [&](std::span<const double> xa) {
            return input_gradient(m, xa, y_true, GradientSign::maximize);
        });
    }
    out.x_clean.assign(x.begin(), x.end());
    out.y_true = y_true;
    out.succeeded = misclassified(m, out.x_adv, y_true);
    return out;
}

double classification_margin(std::span<const double> p, std::size_t y_true) {
    double other = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i != y_true) {
            other = std::max(other, p[i]);
        }
    }
    return p[y_true] - other;
}

AdversarialPair random_search_attack(const ScoreOracle &oracle, std::span<const double> x, std::size_t y_true,
                                     const AttackConfig &cfg, RandomSearchStats *stats) {
    validate(cfg);
    if (cfg.query_budget < 1) {
        throw ParameterError("random search needs query_budget >= 1");
    }
    RandomSearchStats local;
    RandomSearchStats &st = stats != nullptr ? *stats : local;
    st = {};

    const std::size_t d = x.size();
    auto query = [&](std::span<const double> xq) {
        ++st.queries;
        auto p = oracle(xq);
        if (p.size() < 2 || y_true >= p.size()) {
            throw ParameterError("random search: oracle output does not cover y_true");
        }
        return p;
    };

    AdversarialPair out;
    out.x_clean.assign(x.begin(), x.end());
    out.x_adv = out.x_clean;
    out.y_true = y_true;

    auto p = query(out.x_adv);
    double margin = classification_margin(p, y_true);
    st.margin_trace.push_back(margin);
    if (predicted_label(p) != y_true) {
        out.succeeded = true;
        return out;
    }
    if (cfg.epsilon == 0.0) {
        return out;
    }

    Rng rng(derive_seed(cfg.seed, "attack/init"));
    FeatureVector delta(d, 0.0);
    FeatureVector candidate(d);
    bool first = true;
    while (st.queries < cfg.query_budget) {
        // Patch width follows a halving schedule over the budget; the first
        // proposal flips every coordinate to a vertex of the eps-ball.
        const double progress = static_cast<double>(st.queries) / static_cast<double>(cfg.query_budget);
        double frac = 0.5;
        for (double cut : {0.001, 0.005, 0.02, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8}) {
            if (progress > cut) {
                frac *= 0.5;
            }
        }
        const std::size_t width =
            first ? d : std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(frac * d)), 1, d);
        const std::size_t start = first ? 0 : static_cast<std::size_t>(rng.below(d));
        first = false;

        FeatureVector proposal = delta;
        for (std::size_t j = 0; j < width; ++j) {
            proposal[(start + j) % d] = cfg.epsilon * rng.sign();
        }
        for (std::size_t i = 0; i < d; ++i) {
            candidate[i] = x[i] + proposal[i];
        }
        project_linf(candidate, x, cfg.epsilon);

        auto pc = query(candidate);
        const double mc = classification_margin(pc, y_true);
        if (mc < margin) {
            margin = mc;
            delta = std::move(proposal);
            out.x_adv = candidate;
            p = std::move(pc);
        }
        st.margin_trace.push_back(margin);
        if (predicted_label(p) != y_true) {
            out.succeeded = true;
            break;
        }
    }
    return out;
}

AdversarialPair random_search_attack(const Model &m, std::span<const double> x, std::size_t y_true,
                                     const AttackConfig &cfg, RandomSearchStats *stats) {
    check_input(m, x, y_true);
    return random_search_attack([&m](std::span<const double> xq) { return forward(m, xq); }, x, y_true, cfg, stats);
}

AdversarialPair adaptive_joint_attack(const Model &f, const Model &g, std::span<const double> x, std::size_t y_true,
                                      std::size_t target, const AttackConfig &cfg) {
    validate(cfg);
    check_input(f, x, y_true);
    if (g.input_dim() != f.input_dim() || g.num_classes() != f.num_classes()) {
        throw ParameterError("adaptive attack: primal and auxiliary shapes differ");
    }
    if (target == y_true) {
        throw ParameterError("adaptive attack: target must differ from y_true");
    }
    if (target >= f.num_classes()) {
        throw ParameterError("adaptive attack: target out of range");
    }
    AdversarialPair out;
    out.x_adv = sign_descent(x, cfg, [&](std::span<const double> xa) {
        auto dir = input_gradient(f, xa, target, GradientSign::minimize);
        if (cfg.lambda != 0.0) {
            const auto dg = input_gradient(g, xa, target, GradientSign::minimize);
            for (std::size_t i = 0; i < dir.size(); ++i) {
                dir[i] += cfg.lambda * dg[i];
            }
        }
        return dir;
    });
    out.x_clean.assign(x.begin(), x.end());
    out.y_true = y_true;
    out.succeeded = predicted_label(forward(f, out.x_adv)) == target && predicted_label(forward(g, out.x_adv)) == target;
    return out;
}

std::size_t runner_up_label(std::span<const double> p, std::size_t y_true) {
    std::size_t best = p.size();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i != y_true && (best == p.size() || p[i] > p[best])) {
            best = i;
        }
    }
    if (best == p.size()) {
        throw ParameterError("runner_up_label needs at least 2 classes");
    }
    return best;
}

double attack_success_rate(const Model &m, std::span<const AdversarialPair> pairs) {
    if (pairs.empty()) {
        throw ParameterError("attack_success_rate: no pairs");
    }
    std::size_t fooled = 0;
    for (const auto &pair : pairs) {
        if (misclassified(m, pair.x_adv, pair.y_true)) {
            ++fooled;
        }
    }
    return static_cast<double>(fooled) / static_cast<double>(pairs.size());
}

std::string format_adversarial_pair(const std::string &id, const AdversarialPair &pair) {
    return "{\"id\":" + text::quote(id) + ",\"y_true\":" + std::to_string(pair.y_true) +
           ",\"x_clean\":" + text::format_array(pair.x_clean) + ",\"x_adv\":" + text::format_array(pair.x_adv) +
           ",\"succeeded\":" + (pair.succeeded ? "true" : "false") + "}";
}

} // namespace pid
