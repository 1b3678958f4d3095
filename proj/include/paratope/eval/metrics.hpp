#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace paratope {

// Every metric takes an optional mask; an empty mask selects all entries,
// otherwise entries with mask == 0 are ignored.

/// Mann-Whitney AUC with midranks for tied scores.
/// Throws ValidationError unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels,
               std::span<const std::uint8_t> mask = {});

struct Confusion {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

/// Predictions are positive where score >= threshold.
Confusion confusion(std::span<const double> scores, std::span<const std::uint8_t> labels,
                    std::span<const std::uint8_t> mask = {}, double threshold = 0.5);

/// Matthews correlation; 0 when any marginal is empty.
double mcc(const Confusion& c) noexcept;
double mcc(std::span<const double> scores, std::span<const std::uint8_t> labels,
           std::span<const std::uint8_t> mask = {}, double threshold = 0.5);

struct PrPoint {
    double threshold = 0;
    double precision = 0;
    double recall = 0;

    friend bool operator==(const PrPoint&, const PrPoint&) = default;
};

/// One point per distinct score, thresholds descending (so recall is
/// non-decreasing). Throws ValidationError without a positive label.
std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels,
                              std::span<const std::uint8_t> mask = {});

struct Interval {
    double mean = 0;
    double low = 0;
    double high = 0;

    double half_width() const noexcept { return (high - low) / 2; }
};

/// Student-t interval mean +- t(1 - (1 - level) / 2, n - 1) * sd / sqrt(n).
/// Throws ValidationError for fewer than two values or level outside (0, 1).
Interval confidence_interval(std::span<const double> values, double level = 0.95);

/// Two-sided Student-t quantile.
double student_t_quantile(double p, double degrees_of_freedom);

}  // namespace paratope
