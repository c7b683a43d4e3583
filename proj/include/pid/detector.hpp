#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pid/datasets.hpp"

namespace pid {

inline constexpr double kSimplexSumTolerance = 1e-6;
inline constexpr double kSimplexNegativeTolerance = 1e-9;

// Checks p against the probability simplex: every entry >= -1e-9 and
// |sum - 1| <= 1e-6. Returns a copy with tiny negatives clamped to zero.
ConfidenceVector validate_simplex(std::span<const double> p);

bool is_valid_simplex(std::span<const double> p);

// Argmax with ties broken by the lowest index.
std::size_t predicted_label(std::span<const double> p);

// Indices of the n largest entries, descending, ties by lowest index.
std::vector<std::size_t> top_n_labels(std::span<const double> p, std::size_t n);

enum class Metric : int {
    label_confidence = 1,  // 1 - g_y
    confidence_gap = 2,    // f_y - g_y
    top_n_l1 = 3,          // || f_top-n - g_top-n ||_1
    full_l1 = 4,           // || f - g ||_1
};

Metric metric_from_id(int id);
int metric_id(Metric m);

struct InconsistencyScore {
    double value = 0.0;
    Metric metric = Metric::label_confidence;
    std::optional<std::size_t> n;
};

InconsistencyScore metric1(std::span<const double> f_scores, std::span<const double> g_scores);
InconsistencyScore metric2(std::span<const double> f_scores, std::span<const double> g_scores);
InconsistencyScore metric3(std::span<const double> f_scores, std::span<const double> g_scores, std::size_t n);
InconsistencyScore metric4(std::span<const double> f_scores, std::span<const double> g_scores);

// Dispatch; n is only consulted for Metric::top_n_l1.
InconsistencyScore score(Metric metric, std::span<const double> f_scores, std::span<const double> g_scores,
                         std::size_t n = 3);

struct DetectorConfig {
    Metric metric = Metric::label_confidence;
    std::size_t n = 3;
    std::optional<double> threshold;
    double target_fpr = 0.05;
};

void validate(const DetectorConfig &cfg);

// Threshold = m-th smallest clean score with m = ceil((1 - target_fpr) * n).
// With the strict decision rule the calibration-set FPR never exceeds
// target_fpr.
double calibrate_threshold(std::span<const double> ne_scores, double target_fpr);

// Fraction of scores strictly above threshold.
double flagged_fraction(std::span<const double> scores, double threshold);

enum class Decision { normal, adversarial };

std::string to_string(Decision d);

inline Decision decide(const InconsistencyScore &s, double threshold) {
    return s.value > threshold ? Decision::adversarial : Decision::normal;
}

} // namespace pid
