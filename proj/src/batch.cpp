#include "pid/batch.hpp"

#include <cstddef>
#include <exception>

#include "pid/error.hpp"
#include "pid/rng.hpp"

namespace pid {

AttackKind parse_attack_kind(const std::string &s) {
    if (s == "fgsm") return AttackKind::fgsm;
    if (s == "pgd") return AttackKind::pgd;
    if (s == "random_search") return AttackKind::random_search;
    if (s == "adaptive") return AttackKind::adaptive;
    if (s == "transfer") return AttackKind::transfer;
    throw ParameterError("unknown attack kind '" + s + "'");
}

std::string to_string(AttackKind k) {
    switch (k) {
    case AttackKind::fgsm: return "fgsm";
    case AttackKind::pgd: return "pgd";
    case AttackKind::random_search: return "random_search";
    case AttackKind::adaptive: return "adaptive";
    case AttackKind::transfer: return "transfer";
    }
    return "?";
}

AdversarialPair craft_one(const AttackSpec &spec, const AttackModels &models, const Example &sample,
                          std::uint64_t sample_index) {
    if (models.primal == nullptr) {
        throw ParameterError("attack '" + spec.name + "' needs a primal model");
    }
    const Model &f = *models.primal;
    AttackConfig cfg = spec.cfg;
    cfg.seed = derive_seed(spec.cfg.seed, sample_index);

    switch (spec.kind) {
    case AttackKind::fgsm:
        return fgsm(f, sample.x, sample.y_true, cfg.epsilon);
    case AttackKind::pgd:
        return pgd(f, sample.x, sample.y_true, cfg);
    case AttackKind::random_search:
        return random_search_attack(f, sample.x, sample.y_true, cfg);
    case AttackKind::adaptive: {
        if (models.auxiliary == nullptr) {
            throw ParameterError("adaptive attack '" + spec.name + "' needs an auxiliary model");
        }
        const std::size_t t = runner_up_label(forward(f, sample.x), sample.y_true);
        return adaptive_joint_attack(f, *models.auxiliary, sample.x, sample.y_true, t, cfg);
    }
    case AttackKind::transfer: {
        if (models.substitute == nullptr) {
            throw ParameterError("transfer attack '" + spec.name + "' needs a substitute model");
        }
        auto pair = pgd(*models.substitute, sample.x, sample.y_true, cfg);
        pair.succeeded = predicted_label(forward(f, pair.x_adv)) != sample.y_true;
        return pair;
    }
    }
    throw ParameterError("unknown attack kind");
}

namespace {

void check_indices(std::span<const Example> samples, std::span<const std::uint64_t> indices) {
    if (samples.size() != indices.size()) {
        throw ParameterError("craft_batch: one index per sample required");
    }
}

void check_scores(std::span<const ConfidenceVector> f, std::span<const ConfidenceVector> g) {
    if (f.size() != g.size()) {
        throw ParameterError("score_batch: primal and auxiliary batches differ in size");
    }
}

// Exceptions must not escape an OpenMP region; the first one is kept and
// rethrown after the loop.
class FirstError {
public:
    void capture() {
#pragma omp critical(pid_first_error)
        if (!error_) {
            error_ = std::current_exception();
        }
    }

    void rethrow() const {
        if (error_) {
            std::rethrow_exception(error_);
        }
    }

private:
    std::exception_ptr error_;
};

} // namespace

std::vector<AdversarialPair> craft_batch(const AttackSpec &spec, const AttackModels &models,
                                         std::span<const Example> samples, std::span<const std::uint64_t> indices) {
    check_indices(samples, indices);
    std::vector<AdversarialPair> out(samples.size());
    FirstError err;
    const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            const auto u = static_cast<std::size_t>(i);
            out[u] = craft_one(spec, models, samples[u], indices[u]);
        } catch (...) {
            err.capture();
        }
    }
    err.rethrow();
    return out;
}

std::vector<AdversarialPair> craft_batch_serial(const AttackSpec &spec, const AttackModels &models,
                                                std::span<const Example> samples,
                                                std::span<const std::uint64_t> indices) {
    check_indices(samples, indices);
    std::vector<AdversarialPair> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out.push_back(craft_one(spec, models, samples[i], indices[i]));
    }
    return out;
}

std::vector<ConfidenceVector> forward_batch(const Model &m, std::span<const FeatureVector> xs) {
    std::vector<ConfidenceVector> out(xs.size());
    FirstError err;
    const auto n = static_cast<std::ptrdiff_t>(xs.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] = forward(m, xs[static_cast<std::size_t>(i)]);
        } catch (...) {
            err.capture();
        }
    }
    err.rethrow();
    return out;
}

std::vector<ConfidenceVector> forward_batch_serial(const Model &m, std::span<const FeatureVector> xs) {
    std::vector<ConfidenceVector> out;
    out.reserve(xs.size());
    for (const auto &x : xs) {
        out.push_back(forward(m, x));
    }
    return out;
}

std::vector<double> score_batch(Metric metric, std::span<const ConfidenceVector> f_scores,
                                std::span<const ConfidenceVector> g_scores, std::size_t n) {
    check_scores(f_scores, g_scores);
    std::vector<double> out(f_scores.size());
    FirstError err;
    const auto count = static_cast<std::ptrdiff_t>(f_scores.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            const auto u = static_cast<std::size_t>(i);
            out[u] = score(metric, f_scores[u], g_scores[u], n).value;
        } catch (...) {
            err.capture();
        }
    }
    err.rethrow();
    return out;
}

std::vector<double> score_batch_serial(Metric metric, std::span<const ConfidenceVector> f_scores,
                                       std::span<const ConfidenceVector> g_scores, std::size_t n) {
    check_scores(f_scores, g_scores);
    std::vector<double> out;
    out.reserve(f_scores.size());
    for (std::size_t i = 0; i < f_scores.size(); ++i) {
        out.push_back(score(metric, f_scores[i], g_scores[i], n).value);
    }
    return out;
}

} // namespace pid
