#include "paratope/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "paratope/errors.hpp"

namespace paratope {

namespace {

struct Scored {
    double score;
    std::uint8_t label;
};

std::vector<Scored> select(std::span<const double> scores, std::span<const std::uint8_t> labels,
                           std::span<const std::uint8_t> mask) {
    if (scores.size() != labels.size() || (!mask.empty() && mask.size() != scores.size())) {
        throw ShapeError("metric inputs differ in length: " + std::to_string(scores.size()) + " scores, " +
                         std::to_string(labels.size()) + " labels, " + std::to_string(mask.size()) + " mask");
    }
    std::vector<Scored> out;
    out.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!mask.empty() && mask[i] == 0) continue;
        if (std::isnan(scores[i])) throw NumericError("metric input has a NaN score at index " + std::to_string(i));
        out.push_back({scores[i], static_cast<std::uint8_t>(labels[i] != 0)});
    }
    return out;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels,
               std::span<const std::uint8_t> mask) {
    std::vector<Scored> v = select(scores, labels, mask);
    std::sort(v.begin(), v.end(), [](const Scored& a, const Scored& b) { return a.score < b.score; });
    double rank_sum = 0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        std::size_t tied_pos = 0;
        while (j < v.size() && v[j].score == v[i].score) tied_pos += v[j++].label;
        // ranks i+1 .. j share their midrank
        rank_sum += static_cast<double>(tied_pos) * (static_cast<double>(i + 1 + j) / 2);
        positives += tied_pos;
        i = j;
    }
    const std::size_t negatives = v.size() - positives;
    if (positives == 0 || negatives == 0) {
        throw ValidationError("ROC AUC needs both classes; got " + std::to_string(positives) + " positives and " +
                              std::to_string(negatives) + " negatives");
    }
    const double np = static_cast<double>(positives);
    return (rank_sum - np * (np + 1) / 2) / (np * static_cast<double>(negatives));
}

Confusion confusion(std::span<const double> scores, std::span<const std::uint8_t> labels,
                    std::span<const std::uint8_t> mask, double threshold) {
    Confusion c;
    for (const Scored& s : select(scores, labels, mask)) {
        const bool predicted = s.score >= threshold;
        if (predicted) {
            ++(s.label ? c.tp : c.fp);
        } else {
            ++(s.label ? c.fn : c.tn);
        }
    }
    return c;
}

double mcc(const Confusion& c) noexcept {
    const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
    const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
    const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom == 0) return 0;
    return (tp * tn - fp * fn) / std::sqrt(denom);
}

double mcc(std::span<const double> scores, std::span<const std::uint8_t> labels, std::span<const std::uint8_t> mask,
           double threshold) {
    return mcc(confusion(scores, labels, mask, threshold));
}

std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels,
                              std::span<const std::uint8_t> mask) {
    std::vector<Scored> v = select(scores, labels, mask);
    const std::size_t positives = std::count_if(v.begin(), v.end(), [](const Scored& s) { return s.label != 0; });
    if (positives == 0) throw ValidationError("PR curve needs at least one positive label");
    std::sort(v.begin(), v.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
    std::vector<PrPoint> out;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < v.size();) {
        const double threshold = v[i].score;
        while (i < v.size() && v[i].score == threshold) tp += v[i++].label;
        out.push_back({threshold, static_cast<double>(tp) / static_cast<double>(i),
                       static_cast<double>(tp) / static_cast<double>(positives)});
    }
    return out;
}

double student_t_quantile(double p, double degrees_of_freedom) {
    boost::math::students_t dist(degrees_of_freedom);
    return boost::math::quantile(dist, p);
}

Interval confidence_interval(std::span<const double> values, double level) {
    if (values.size() < 2) {
        throw ValidationError("confidence interval needs at least 2 values, got " + std::to_string(values.size()));
    }
    if (!(level > 0 && level < 1)) throw ValidationError("confidence level must lie in (0, 1)");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0;
    for (double x : values) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1));
    const double half = student_t_quantile(1 - (1 - level) / 2, n - 1) * sd / std::sqrt(n);
    return {mean, mean - half, mean + half};
}

}  // namespace paratope
