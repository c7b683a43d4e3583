#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pid {

// P(adv > clean) + 0.5 * P(adv == clean), counted over tie groups of the
// sorted pooled sample. O((a + c) log(a + c)).
double auc(std::span<const double> adv_scores, std::span<const double> clean_scores);

// Same quantity by enumerating every (adv, clean) pair.
double auc_bruteforce(std::span<const double> adv_scores, std::span<const double> clean_scores);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;

    bool operator==(const RocPoint &) const = default;
};

struct RocCurve {
    std::vector<RocPoint> points;  // (0,0) first, (1,1) last
    double auc = 0.0;              // trapezoidal area under `points`
};

// One point per distinct score t with the rule "flag if score > t", plus
// the (0,0) and (1,1) anchors.
RocCurve roc_curve(std::span<const double> adv_scores, std::span<const double> clean_scores);

double trapezoid_area(std::span<const RocPoint> points);

struct Histogram {
    std::vector<double> bin_edges;  // counts.size() + 1 edges
    std::vector<std::size_t> counts;
    double mean = 0.0;
    double q05 = 0.0;
    double q50 = 0.0;
    double q95 = 0.0;
};

// Equal-width bins over [min, max]; a single bin when min == max. Quantiles
// interpolate linearly between order statistics.
Histogram score_distribution_summary(std::span<const double> scores, std::size_t bins);

double quantile(std::span<const double> sorted, double q);

} // namespace pid
