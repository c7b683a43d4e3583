#include "pid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <numeric>

#include "pid/error.hpp"

namespace pid {

namespace {

void require_nonempty(std::span<const double> adv, std::span<const double> clean) {
    if (adv.empty() || clean.empty()) {
        throw ParameterError("AUC needs at least one adversarial and one clean score");
    }
}

} // namespace

double auc(std::span<const double> adv_scores, std::span<const double> clean_scores) {
    require_nonempty(adv_scores, clean_scores);
    struct Entry {
        double score;
        bool adv;
    };
    std::vector<Entry> pooled;
    pooled.reserve(adv_scores.size() + clean_scores.size());
    for (double s : adv_scores) {
        pooled.push_back({s, true});
    }
    for (double s : clean_scores) {
        pooled.push_back({s, false});
    }
    std::sort(pooled.begin(), pooled.end(), [](const Entry &a, const Entry &b) { return a.score < b.score; });

    // Within a tie group every adversarial entry beats the clean entries
    // below the group and draws with those inside it. Counting in integers
    // keeps the result exact.
    std::uint64_t wins2 = 0;  // twice the Mann-Whitney U statistic
    std::uint64_t clean_below = 0;
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i;
        std::uint64_t adv_in = 0;
        std::uint64_t clean_in = 0;
        while (j < pooled.size() && pooled[j].score == pooled[i].score) {
            (pooled[j].adv ? adv_in : clean_in) += 1;
            ++j;
        }
        wins2 += adv_in * (2 * clean_below + clean_in);
        clean_below += clean_in;
        i = j;
    }
    const double pairs = static_cast<double>(adv_scores.size()) * static_cast<double>(clean_scores.size());
    return static_cast<double>(wins2) / (2.0 * pairs);
}

double auc_bruteforce(std::span<const double> adv_scores, std::span<const double> clean_scores) {
    require_nonempty(adv_scores, clean_scores);
    std::uint64_t wins2 = 0;
    for (double a : adv_scores) {
        for (double c : clean_scores) {
            if (a > c) {
                wins2 += 2;
            } else if (a == c) {
                wins2 += 1;
            }
        }
    }
    const double pairs = static_cast<double>(adv_scores.size()) * static_cast<double>(clean_scores.size());
    return static_cast<double>(wins2) / (2.0 * pairs);
}

double trapezoid_area(std::span<const RocPoint> points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
    }
    return area;
}

RocCurve roc_curve(std::span<const double> adv_scores, std::span<const double> clean_scores) {
    require_nonempty(adv_scores, clean_scores);
    std::vector<double> adv(adv_scores.begin(), adv_scores.end());
    std::vector<double> clean(clean_scores.begin(), clean_scores.end());
    std::sort(adv.begin(), adv.end());
    std::sort(clean.begin(), clean.end());
    std::vector<double> thresholds;
    thresholds.reserve(adv.size() + clean.size());
    std::merge(adv.begin(), adv.end(), clean.begin(), clean.end(), std::back_inserter(thresholds));
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    const auto na = static_cast<double>(adv.size());
    const auto nc = static_cast<double>(clean.size());
    auto above = [](const std::vector<double> &sorted, double t) {
        return static_cast<double>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t));
    };

    RocCurve curve;
    curve.points.push_back({0.0, 0.0});
    // Descending thresholds give non-decreasing (fpr, tpr).
    for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
        const RocPoint p{above(clean, *it) / nc, above(adv, *it) / na};
        if (p != curve.points.back()) {
            curve.points.push_back(p);
        }
    }
    if (curve.points.back() != RocPoint{1.0, 1.0}) {
        curve.points.push_back({1.0, 1.0});
    }
    curve.auc = trapezoid_area(curve.points);
    return curve;
}

double quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) {
        throw ParameterError("quantile of empty list");
    }
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Histogram score_distribution_summary(std::span<const double> scores, std::size_t bins) {
    if (scores.empty()) {
        throw ParameterError("score_distribution_summary: empty list");
    }
    if (bins < 1) {
        throw ParameterError("score_distribution_summary: bins must be >= 1");
    }
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double hi = sorted.back();

    Histogram h;
    h.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    h.q05 = quantile(sorted, 0.05);
    h.q50 = quantile(sorted, 0.50);
    h.q95 = quantile(sorted, 0.95);

    if (lo == hi) {
        h.bin_edges = {lo, hi};
        h.counts = {sorted.size()};
        return h;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    h.bin_edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) {
        h.bin_edges[b] = lo + width * static_cast<double>(b);
    }
    h.bin_edges.back() = hi;
    h.counts.assign(bins, 0);
    for (double s : sorted) {
        auto b = static_cast<std::size_t>((s - lo) / width);
        h.counts[std::min(b, bins - 1)] += 1;
    }
    return h;
}

} // namespace pid
