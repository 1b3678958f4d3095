#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "paratope/eval/metrics.hpp"
#include "paratope/train/trainer.hpp"

namespace paratope {

struct CrossvalConfig {
    std::size_t runs = 10;
    std::size_t folds = 10;
    std::uint64_t seed = 0;
    double threshold = 0.5;
    /// Worker threads training folds concurrently; results do not depend on it.
    std::size_t jobs = 1;
};

struct FoldResult {
    std::size_t run = 0;
    std::size_t fold = 0;
    std::vector<std::string> test_complexes;
    std::size_t test_residues = 0;
    /// NaN when the held-out residues hold a single class.
    double roc_auc = 0;
    double mcc = 0;
    /// Empty when the held-out residues hold no positive.
    std::vector<PrPoint> pr;
};

struct MetricSummary {
    /// Mean of each run's fold metrics, NaN folds skipped.
    std::vector<double> run_means;
    /// Student-t interval over run_means; bounds are NaN with fewer than two runs.
    Interval interval;
};

struct EvalReport {
    ModelKind model = ModelKind::fast;
    CrossvalConfig config;
    std::vector<FoldResult> folds;  ///< run-major
    MetricSummary roc_auc;
    MetricSummary mcc;

    std::string to_json() const;
    static EvalReport from_json(const std::string& text);
};

/// 64-bit seed derived from a base seed and two stream indices.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// fold[c] for each of n complexes: a seeded shuffle dealt round-robin, so
/// fold sizes differ by at most one.
std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed);

/// Complex-level k-fold crossvalidation repeated over runs with distinct
/// splits. Each fold trains a fresh model on the other folds and scores the
/// held-out CDR residues. Throws ValidationError with fewer complexes than
/// folds or fewer than two folds.
EvalReport crossvalidate(std::span<const Complex> complexes, const ModelConfig& model, const TrainConfig& train,
                         const CrossvalConfig& config);

/// Recomputes the run means and intervals from report.folds.
void summarize(EvalReport& report);

/// run,fold,roc_auc,mcc,test_complexes,test_residues
void write_fold_csv(std::ostream& out, const EvalReport& report);
/// run,fold,threshold,precision,recall
void write_pr_csv(std::ostream& out, const EvalReport& report);

}  // namespace paratope
