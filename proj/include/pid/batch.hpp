#pragma once

// Data-parallel kernels over samples. Each kernel has an OpenMP version and
// a `_serial` reference that the tests hold it to bit for bit; per-sample
// randomness is keyed on the sample index, never on the thread.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pid/attacks.hpp"
#include "pid/detector.hpp"

namespace pid {

enum class AttackKind { fgsm, pgd, random_search, adaptive, transfer };

AttackKind parse_attack_kind(const std::string &s);
std::string to_string(AttackKind k);

struct AttackSpec {
    std::string name;
    AttackKind kind = AttackKind::pgd;
    AttackConfig cfg;
};

// Models an attack may touch. `auxiliary` is required by adaptive,
// `substitute` by transfer.
struct AttackModels {
    const Model *primal = nullptr;
    const Model *auxiliary = nullptr;
    const Model *substitute = nullptr;
};

// One attack on one sample; cfg.seed is replaced by derive_seed(spec seed,
// sample_index). `succeeded` always refers to the primal except for
// adaptive, where both models must land on the target.
AdversarialPair craft_one(const AttackSpec &spec, const AttackModels &models, const Example &sample,
                          std::uint64_t sample_index);

std::vector<AdversarialPair> craft_batch(const AttackSpec &spec, const AttackModels &models,
                                         std::span<const Example> samples, std::span<const std::uint64_t> indices);
std::vector<AdversarialPair> craft_batch_serial(const AttackSpec &spec, const AttackModels &models,
                                                std::span<const Example> samples,
                                                std::span<const std::uint64_t> indices);

std::vector<ConfidenceVector> forward_batch(const Model &m, std::span<const FeatureVector> xs);
std::vector<ConfidenceVector> forward_batch_serial(const Model &m, std::span<const FeatureVector> xs);

std::vector<double> score_batch(Metric metric, std::span<const ConfidenceVector> f_scores,
                                std::span<const ConfidenceVector> g_scores, std::size_t n = 3);
std::vector<double> score_batch_serial(Metric metric, std::span<const ConfidenceVector> f_scores,
                                       std::span<const ConfidenceVector> g_scores, std::size_t n = 3);

} // namespace pid
