#include "pid/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pid/error.hpp"

namespace pid {

namespace {

void check_pair(std::span<const double> f, std::span<const double> g) {
    if (f.size() != g.size()) {
        throw ParameterError("score vectors differ in length (" + std::to_string(f.size()) + " vs " +
                             std::to_string(g.size()) + ")");
    }
    if (f.size() < 2) {
        throw ParameterError("score vectors need at least 2 classes");
    }
}

} // namespace

bool is_valid_simplex(std::span<const double> p) {
    if (p.size() < 2) {
        return false;
    }
    double sum = 0.0;
    for (double v : p) {
        if (!std::isfinite(v) || v < -kSimplexNegativeTolerance || v > 1.0 + kSimplexNegativeTolerance) {
            return false;
        }
        sum += v;
    }
    return std::abs(sum - 1.0) <= kSimplexSumTolerance;
}

ConfidenceVector validate_simplex(std::span<const double> p) {
    if (p.size() < 2) {
        throw ValidationError("confidence vector needs at least 2 classes");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double v = p[i];
        if (!std::isfinite(v)) {
            throw ValidationError("non-finite confidence at index " + std::to_string(i));
        }
        if (v < -kSimplexNegativeTolerance || v > 1.0 + kSimplexNegativeTolerance) {
            throw ValidationError("confidence outside [0,1] at index " + std::to_string(i));
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexSumTolerance) {
        throw ValidationError("confidences sum to " + std::to_string(sum) + ", expected 1");
    }
    ConfidenceVector out(p.begin(), p.end());
    for (double &v : out) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

std::size_t predicted_label(std::span<const double> p) {
    if (p.empty()) {
        throw ValidationError("empty confidence vector");
    }
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<std::size_t> top_n_labels(std::span<const double> p, std::size_t n) {
    if (n < 1 || n > p.size()) {
        throw ParameterError("top-n requires 1 <= n <= k (n=" + std::to_string(n) + ", k=" + std::to_string(p.size()) +
                             ")");
    }
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    idx.resize(n);
    return idx;
}

Metric metric_from_id(int id) {
    if (id < 1 || id > 4) {
        throw ParameterError("metric id must be 1..4, got " + std::to_string(id));
    }
    return static_cast<Metric>(id);
}

int metric_id(Metric m) { return static_cast<int>(m); }

InconsistencyScore metric1(std::span<const double> f_scores, std::span<const double> g_scores) {
    check_pair(f_scores, g_scores);
    const std::size_t y = predicted_label(f_scores);
    return {1.0 - g_scores[y], Metric::label_confidence, std::nullopt};
}

InconsistencyScore metric2(std::span<const double> f_scores, std::span<const double> g_scores) {
    check_pair(f_scores, g_scores);
    const std::size_t y = predicted_label(f_scores);
    return {f_scores[y] - g_scores[y], Metric::confidence_gap, std::nullopt};
}

InconsistencyScore metric3(std::span<const double> f_scores, std::span<const double> g_scores, std::size_t n) {
    check_pair(f_scores, g_scores);
    double value = 0.0;
    for (std::size_t y : top_n_labels(f_scores, n)) {
        value += std::abs(f_scores[y] - g_scores[y]);
    }
    return {value, Metric::top_n_l1, n};
}

InconsistencyScore metric4(std::span<const double> f_scores, std::span<const double> g_scores) {
    check_pair(f_scores, g_scores);
    // Summed in the same descending-f order as metric3 so that n = k
    // reproduces this value bit for bit.
    double value = 0.0;
    for (std::size_t y : top_n_labels(f_scores, f_scores.size())) {
        value += std::abs(f_scores[y] - g_scores[y]);
    }
    return {value, Metric::full_l1, std::nullopt};
}

InconsistencyScore score(Metric metric, std::span<const double> f_scores, std::span<const double> g_scores,
                         std::size_t n) {
    switch (metric) {
    case Metric::label_confidence:
        return metric1(f_scores, g_scores);
    case Metric::confidence_gap:
        return metric2(f_scores, g_scores);
    case Metric::top_n_l1:
        return metric3(f_scores, g_scores, n);
    case Metric::full_l1:
        return metric4(f_scores, g_scores);
    }
    throw ParameterError("unknown metric");
}

void validate(const DetectorConfig &cfg) {
    metric_from_id(metric_id(cfg.metric));
    if (cfg.n < 1) {
        throw ParameterError("detector n must be >= 1");
    }
    if (!(cfg.target_fpr > 0.0 && cfg.target_fpr < 1.0)) {
        throw ParameterError("target_fpr must lie in (0,1)");
    }
}

double calibrate_threshold(std::span<const double> ne_scores, double target_fpr) {
    if (ne_scores.empty()) {
        throw ParameterError("calibration needs at least one clean score");
    }
    if (!(target_fpr > 0.0 && target_fpr < 1.0)) {
        throw ParameterError("target_fpr must lie in (0,1)");
    }
    std::vector<double> sorted(ne_scores.begin(), ne_scores.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const auto dn = static_cast<double>(n);
    auto m = static_cast<std::size_t>(std::ceil((1.0 - target_fpr) * dn));
    m = std::clamp<std::size_t>(m, 1, n);
    // Settle rounding in the product with the same division flagged_fraction
    // uses, so at most n - m scores can sit above the threshold.
    auto fpr_at = [&](std::size_t mm) { return static_cast<double>(n - mm) / dn; };
    while (m < n && fpr_at(m) > target_fpr) {
        ++m;
    }
    while (m > 1 && fpr_at(m - 1) <= target_fpr) {
        --m;
    }
    return sorted[m - 1];
}

double flagged_fraction(std::span<const double> scores, double threshold) {
    if (scores.empty()) {
        throw ParameterError("no scores");
    }
    const auto flagged = std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; });
    return static_cast<double>(flagged) / static_cast<double>(scores.size());
}

std::string to_string(Decision d) { return d == Decision::adversarial ? "adversarial" : "normal"; }

} // namespace pid
